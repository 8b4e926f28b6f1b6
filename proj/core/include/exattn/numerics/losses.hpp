#pragma once

#include <cstddef>

#include "exattn/numerics/autograd.hpp"

namespace exattn::num {

inline constexpr double kProbabilityFloor = 1e-12;

// -log softmax(logits)[label], via log-sum-exp.
Var cross_entropy(const Var& logits, std::size_t label);

// sum_i p_i log(p_i / q_i), 0 log 0 = 0, q clamped at kProbabilityFloor.
Var kl_divergence(const Var& p, const Var& q);

// Square score matrix with positives on the diagonal:
// sum_i -log( exp(s_ii) / sum_j exp(s_ij) ).
Var info_nce(const Var& scores);

// Unbiased MMD^2 between the rows of a ([m,d]) and b ([n,d]) with the Gaussian
// kernel k(x,y) = exp(-|x-y|^2 / gamma). Requires m, n >= 2 and gamma > 0.
Var mmd_squared(const Var& a, const Var& b, double gamma);

// Median pairwise squared distance between distinct rows; 1.0 when degenerate.
double median_sq_distance(const Tensor& rows);

}  // namespace exattn::num
