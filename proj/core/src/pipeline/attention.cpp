#include "exattn/pipeline/attention.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace exattn::pipeline {

std::string_view to_string(AttentionKind kind) {
  switch (kind) {
    case AttentionKind::expert: return "expert";
    case AttentionKind::novice: return "novice";
    case AttentionKind::delta: return "delta";
    case AttentionKind::posthoc: return "posthoc";
  }
  return "unknown";
}

bool AttentionVector::is_valid(std::span<const double> weights) noexcept {
  if (weights.empty()) return false;
  double total = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0) return false;
    total += w;
  }
  return std::abs(total - 1.0) <= kAttentionSumTolerance;
}

AttentionVector::AttentionVector(std::vector<double> weights, AttentionKind kind)
    : weights_(std::move(weights)), kind_(kind) {
  if (!is_valid(weights_)) {
    throw std::invalid_argument(std::string(to_string(kind)) + " attention is not a probability vector");
  }
}

}  // namespace exattn::pipeline
