#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "exattn/analysis/accuracy.hpp"
#include "exattn/data/dataset.hpp"
#include "exattn/numerics/autograd.hpp"
#include "exattn/pipeline/params.hpp"

namespace exattn::analysis {

/// Desk-scale booster: a linear feature map E followed by a linear classifier C.
struct BoosterModel {
  num::Parameter encoder;  // [d,h]
  pipeline::Classifier classifier;  // [h,C]

  static BoosterModel init(std::size_t feature_dim, std::size_t hidden, std::size_t classes, std::uint64_t seed);
  std::vector<num::Parameter*> parameters();
};

// C(E(x) + Σ_{i<=n_top} E(δ^i)). n_top = 0 yields the baseline C(E(x)).
std::vector<double> booster_combine(std::span<const double> x, const std::vector<std::vector<double>>& delta_regions,
                                    std::size_t n_top, const BoosterModel& model);
num::Var booster_logits(const num::Var& x, std::span<const num::Var> deltas, const BoosterModel& model);

struct BoosterExample {
  std::vector<double> x;                   // whole-image feature
  std::vector<std::vector<double>> delta;  // ranked region features, best first
  std::size_t label = 0;
};

// x is the mean of the pool rows; delta holds the rows of the top-n_top regions of `delta_attention`.
std::vector<BoosterExample> booster_examples(const data::Dataset& ds, const AttentionSource& delta_attention,
                                             std::size_t n_top);

struct BoosterConfig {
  std::size_t hidden = 0;  // 0: feature dimension
  std::size_t epochs = 60;
  std::size_t batch_size = 16;
  double learning_rate = 1e-2;
  std::uint64_t seed = 1;
  std::size_t n_top = 1;
};

BoosterModel train_booster_model(const std::vector<BoosterExample>& train, const BoosterConfig& config, std::size_t n_top,
                                 std::vector<double>* loss_curve = nullptr);
double booster_accuracy(const BoosterModel& model, const std::vector<BoosterExample>& examples, std::size_t n_top);

struct BoosterComparison {
  double baseline_accuracy = 0.0;
  double booster_accuracy = 0.0;
  std::vector<double> baseline_curve;
  std::vector<double> booster_curve;
};

// Trains the baseline (n_top = 0) and the booster from the same initialization and evaluates both on `test`.
BoosterComparison compare_booster(const std::vector<BoosterExample>& train, const std::vector<BoosterExample>& test,
                                  const BoosterConfig& config);

}  // namespace exattn::analysis
