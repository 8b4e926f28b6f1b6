#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>

#include "exattn/numerics/autograd.hpp"

namespace exattn::num {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  std::size_t coordinates = 0;
};

// Compares reverse-mode gradients of `build()` against central differences
// (L(θ+h e_i) - L(θ-h e_i)) / 2h for every coordinate of every parameter.
// Relative error is |analytic - numeric| / (|analytic| + 1e-8).
// Throws FailedCheck if two evaluations at the same point disagree, and
// std::invalid_argument unless 0 < h <= 1e-2. Parameter gradients are left zeroed.
GradCheckResult finite_difference_check(const std::function<Var()>& build, std::span<Parameter* const> params,
                                        double h = 1e-5);

}  // namespace exattn::num
