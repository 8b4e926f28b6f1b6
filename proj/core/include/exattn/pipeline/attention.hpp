#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace exattn::pipeline {

enum class AttentionKind { expert, novice, delta, posthoc };

std::string_view to_string(AttentionKind kind);

inline constexpr double kAttentionSumTolerance = 1e-6;

/// Probability vector over the N regions of a feature pool.
class AttentionVector {
 public:
  // Throws std::invalid_argument if any weight is negative or non-finite, or
  // the weights do not sum to 1 within kAttentionSumTolerance.
  AttentionVector(std::vector<double> weights, AttentionKind kind);

  std::span<const double> weights() const noexcept { return weights_; }
  std::vector<double> to_vector() const { return weights_; }
  double operator[](std::size_t i) const { return weights_[i]; }
  std::size_t size() const noexcept { return weights_.size(); }
  AttentionKind kind() const noexcept { return kind_; }

  static bool is_valid(std::span<const double> weights) noexcept;

 private:
  std::vector<double> weights_;
  AttentionKind kind_;
};

}  // namespace exattn::pipeline
