#include "exattn/analysis/ranking.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

namespace exattn::analysis {

std::vector<std::size_t> RankedRegions::indices() const {
  std::vector<std::size_t> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.index);
  return out;
}

RankedRegions top_k(std::span<const double> s, std::size_t k) {
  if (k < 1 || k > s.size())
    throw std::invalid_argument("top_k: K=" + std::to_string(k) + " outside [1, " + std::to_string(s.size()) + "]");
  std::vector<std::size_t> order(s.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
  const bool pyramid = data::pyramid_levels_for(s.size()) != 0;
  RankedRegions out;
  out.entries.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    RankedRegion r{order[i], s[order[i]], {0.0, 0.0, 1.0, 1.0}};
    if (pyramid) r.rect = data::region_at(order[i]).rect;
    out.entries.push_back(r);
  }
  return out;
}

double iou_top_k(std::span<const double> a, std::span<const double> b, std::size_t k) {
  if (a.size() != b.size())
    throw std::invalid_argument("iou_top_k: lengths " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  auto ia = top_k(a, k).indices();
  auto ib = top_k(b, k).indices();
  std::sort(ia.begin(), ia.end());
  std::sort(ib.begin(), ib.end());
  std::vector<std::size_t> inter;
  std::set_intersection(ia.begin(), ia.end(), ib.begin(), ib.end(), std::back_inserter(inter));
  const double uni = static_cast<double>(ia.size() + ib.size() - inter.size());
  return static_cast<double>(inter.size()) / uni;
}

}  // namespace exattn::analysis
