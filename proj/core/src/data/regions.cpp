#include "exattn/data/regions.hpp"

#include <stdexcept>
#include <string>

namespace exattn::data {

std::size_t region_count(std::size_t k_max) { return k_max * (k_max + 1) * (2 * k_max + 1) / 6; }

std::size_t pyramid_levels_for(std::size_t n) {
  for (std::size_t k = 1; region_count(k) <= n; ++k) {
    if (region_count(k) == n) return k;
  }
  return 0;
}

RegionIndex make_region(std::size_t level, std::size_t row, std::size_t col) {
  if (level < 1 || row >= level || col >= level) {
    throw std::invalid_argument("region (" + std::to_string(level) + "," + std::to_string(row) + "," +
                                std::to_string(col) + ") is outside its grid");
  }
  const double k = static_cast<double>(level);
  return RegionIndex{level, row, col,
                     Rect{static_cast<double>(col) / k, static_cast<double>(row) / k,
                          static_cast<double>(col + 1) / k, static_cast<double>(row + 1) / k}};
}

std::vector<RegionIndex> build_region_index(std::size_t k_max) {
  if (k_max < 1) throw std::invalid_argument("build_region_index: k_max must be >= 1");
  std::vector<RegionIndex> out;
  out.reserve(region_count(k_max));
  for (std::size_t k = 1; k <= k_max; ++k)
    for (std::size_t r = 0; r < k; ++r)
      for (std::size_t c = 0; c < k; ++c) out.push_back(make_region(k, r, c));
  return out;
}

std::size_t flat_index(const RegionIndex& r) {
  if (r.level < 1 || r.row >= r.level || r.col >= r.level) throw std::invalid_argument("flat_index: invalid region");
  return region_count(r.level - 1) + r.row * r.level + r.col;
}

RegionIndex region_at(std::size_t flat) {
  std::size_t k = 1;
  while (region_count(k) <= flat) ++k;
  const std::size_t offset = flat - region_count(k - 1);
  return make_region(k, offset / k, offset % k);
}

}  // namespace exattn::data
