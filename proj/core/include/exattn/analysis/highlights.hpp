#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "exattn/data/regions.hpp"

namespace exattn::analysis {

// Highlight counts above this are refused.
inline constexpr std::size_t kComfortZoneMax = 7;
inline constexpr std::size_t kDefaultHighlightK = 3;

struct HighlightRegion {
  std::size_t rank = 1;  // 1-based
  data::Rect rect{0.0, 0.0, 1.0, 1.0};
};

struct HighlightSpec {
  std::string id;
  std::size_t k = 0;
  std::vector<HighlightRegion> regions;  // ranks 1..k
};

// Top-k regions of `s` as normalized rects. Throws std::invalid_argument when
// k exceeds the comfort zone or the attention length.
HighlightSpec export_highlights(const std::string& item_id, std::span<const double> s, std::size_t k);

// {"id":..., "k":..., "regions":[{"rank":1,"rect":[x0,y0,x1,y1]}, ...]}
std::string highlights_to_json(const HighlightSpec& spec);
HighlightSpec highlights_from_json(const std::string& text);

}  // namespace exattn::analysis
