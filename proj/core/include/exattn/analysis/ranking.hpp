#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "exattn/data/regions.hpp"

namespace exattn::analysis {

struct RankedRegion {
  std::size_t index = 0;
  double weight = 0.0;
  data::Rect rect{0.0, 0.0, 1.0, 1.0};
};

/// Regions in descending weight order; equal weights keep ascending index.
struct RankedRegions {
  std::vector<RankedRegion> entries;

  std::size_t size() const noexcept { return entries.size(); }
  const RankedRegion& operator[](std::size_t i) const { return entries[i]; }
  std::vector<std::size_t> indices() const;
};

// Requires 1 <= k <= s.size(). Rects come from the pyramid index when the
// length is a pyramid size, else stay the full image.
RankedRegions top_k(std::span<const double> s, std::size_t k);

// |A ∩ B| / |A ∪ B| over the top-k index sets.
double iou_top_k(std::span<const double> a, std::span<const double> b, std::size_t k);

}  // namespace exattn::analysis
