#include "exattn/analysis/highlights.hpp"

#include <stdexcept>

#include "exattn/analysis/ranking.hpp"
#include "exattn/errors.hpp"
#include "json.hpp"

namespace exattn::analysis {

using nlohmann::json;

HighlightSpec export_highlights(const std::string& item_id, std::span<const double> s, std::size_t k) {
  if (k > kComfortZoneMax)
    throw std::invalid_argument("K=" + std::to_string(k) + " exceeds the comfort zone of " +
                                std::to_string(kComfortZoneMax) + " highlighted regions");
  HighlightSpec spec;
  spec.id = item_id;
  spec.k = k;
  if (k == 0) return spec;
  const auto ranked = top_k(s, k);
  for (std::size_t i = 0; i < ranked.size(); ++i) spec.regions.push_back({i + 1, ranked[i].rect});
  return spec;
}

std::string highlights_to_json(const HighlightSpec& spec) {
  json regions = json::array();
  for (const auto& r : spec.regions) regions.push_back({{"rank", r.rank}, {"rect", r.rect}});
  return json{{"id", spec.id}, {"k", spec.k}, {"regions", regions}}.dump();
}

HighlightSpec highlights_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    HighlightSpec spec;
    spec.id = j.at("id").get<std::string>();
    spec.k = j.at("k").get<std::size_t>();
    for (const auto& r : j.at("regions")) spec.regions.push_back({r.at("rank").get<std::size_t>(), r.at("rect").get<data::Rect>()});
    if (spec.k > kComfortZoneMax || spec.regions.size() != spec.k) throw FormatError("highlights", "inconsistent k");
    return spec;
  } catch (const json::exception& e) {
    throw FormatError("highlights", e.what());
  }
}

}  // namespace exattn::analysis
