#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace exattn::data {

// Normalized image rectangle [x0, y0, x1, y1].
using Rect = std::array<double, 4>;

/// One block of the k×k grid at pyramid level k. Flat indices run level-major
/// (1×1, then 2×2, ...), row-major within a level.
struct RegionIndex {
  std::size_t level = 1;
  std::size_t row = 0;
  std::size_t col = 0;
  Rect rect{0.0, 0.0, 1.0, 1.0};

  friend bool operator==(const RegionIndex&, const RegionIndex&) = default;
};

// sum_{k=1..k_max} k^2
std::size_t region_count(std::size_t k_max);

// Inverse of region_count; 0 when n is not a pyramid size.
std::size_t pyramid_levels_for(std::size_t n);

std::vector<RegionIndex> build_region_index(std::size_t k_max);

RegionIndex make_region(std::size_t level, std::size_t row, std::size_t col);
std::size_t flat_index(const RegionIndex& r);
RegionIndex region_at(std::size_t flat);

}  // namespace exattn::data
