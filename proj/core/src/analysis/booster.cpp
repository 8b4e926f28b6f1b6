#include "exattn/analysis/booster.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "exattn/analysis/ranking.hpp"
#include "exattn/numerics/losses.hpp"
#include "exattn/numerics/ops.hpp"
#include "exattn/numerics/optimizer.hpp"
#include "exattn/pipeline/forward.hpp"
#include "exattn/pipeline/training.hpp"

namespace exattn::analysis {

using num::Parameter;
using num::Tensor;
using num::Var;

namespace {

Tensor gaussian(std::size_t rows, std::size_t cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, stddev);
  std::vector<double> v(rows * cols);
  for (double& x : v) x = normal(rng);
  return Tensor::matrix(rows, cols, std::move(v));
}

void check_n_top(std::size_t n_top, std::size_t available) {
  if (n_top > available)
    throw std::invalid_argument("booster: N_top=" + std::to_string(n_top) + " exceeds " + std::to_string(available) +
                                " available regions");
}

}  // namespace

BoosterModel BoosterModel::init(std::size_t feature_dim, std::size_t hidden, std::size_t classes, std::uint64_t seed) {
  if (feature_dim == 0 || hidden == 0 || classes == 0) throw std::invalid_argument("booster: dimensions must be positive");
  std::mt19937_64 rng(seed);
  BoosterModel m;
  m.encoder = Parameter("booster.encoder", gaussian(feature_dim, hidden, 1.0 / std::sqrt(static_cast<double>(feature_dim)), rng));
  m.classifier.weight =
      Parameter("booster.classifier.weight", gaussian(hidden, classes, 1.0 / std::sqrt(static_cast<double>(hidden)), rng));
  m.classifier.bias = Parameter("booster.classifier.bias", Tensor::vector(std::vector<double>(classes, 0.0)));
  return m;
}

std::vector<Parameter*> BoosterModel::parameters() { return {&encoder, &classifier.weight, &classifier.bias}; }

Var booster_logits(const Var& x, std::span<const Var> deltas, const BoosterModel& model) {
  Var h = num::matmul(x, model.encoder.var());
  for (const Var& d : deltas) h = h + num::matmul(d, model.encoder.var());
  return model.classifier.logits(h);
}

std::vector<double> booster_combine(std::span<const double> x, const std::vector<std::vector<double>>& delta_regions,
                                    std::size_t n_top, const BoosterModel& model) {
  check_n_top(n_top, delta_regions.size());
  num::NoGradGuard guard;
  std::vector<Var> deltas;
  for (std::size_t i = 0; i < n_top; ++i) deltas.push_back(num::constant(Tensor::vector(delta_regions[i])));
  const Var logits = booster_logits(num::constant(Tensor::vector({x.begin(), x.end()})), deltas, model);
  return logits.value().storage();
}

std::vector<BoosterExample> booster_examples(const data::Dataset& ds, const AttentionSource& delta_attention,
                                             std::size_t n_top) {
  std::vector<BoosterExample> out;
  out.reserve(ds.items.size());
  for (const auto& item : ds.items) {
    const auto& f = item.pool.features;
    check_n_top(n_top, f.rows());
    BoosterExample ex;
    ex.label = ds.label_of(item);
    ex.x.assign(f.cols(), 0.0);
    for (std::size_t r = 0; r < f.rows(); ++r)
      for (std::size_t c = 0; c < f.cols(); ++c) ex.x[c] += f(r, c) / static_cast<double>(f.rows());
    if (n_top > 0) {
      for (const auto& region : top_k(delta_attention(item), n_top).entries) {
        const auto row = f.row(region.index);
        ex.delta.emplace_back(row.begin(), row.end());
      }
    }
    out.push_back(std::move(ex));
  }
  return out;
}

namespace {

Var example_loss(const BoosterExample& ex, std::size_t n_top, const BoosterModel& model) {
  std::vector<Var> deltas;
  for (std::size_t i = 0; i < n_top; ++i) deltas.push_back(num::constant(Tensor::vector(ex.delta[i])));
  return num::cross_entropy(booster_logits(num::constant(Tensor::vector(ex.x)), deltas, model), ex.label);
}

double mean_loss(const std::vector<BoosterExample>& examples, std::size_t n_top, const BoosterModel& model) {
  num::NoGradGuard guard;
  double total = 0.0;
  for (const auto& ex : examples) total += example_loss(ex, n_top, model).item();
  return examples.empty() ? 0.0 : total / static_cast<double>(examples.size());
}

}  // namespace

BoosterModel train_booster_model(const std::vector<BoosterExample>& train, const BoosterConfig& cfg, std::size_t n_top,
                                 std::vector<double>* loss_curve) {
  if (train.empty()) throw std::invalid_argument("booster: empty training set");
  for (const auto& ex : train) check_n_top(n_top, ex.delta.size());
  std::size_t classes = 0;
  for (const auto& ex : train) classes = std::max(classes, ex.label + 1);
  const std::size_t d = train.front().x.size();
  BoosterModel model = BoosterModel::init(d, cfg.hidden == 0 ? d : cfg.hidden, classes, cfg.seed);
  for (Parameter* p : model.parameters()) p->set_trainable(true);
  num::Adam opt(model.parameters(), num::AdamConfig{cfg.learning_rate});
  if (loss_curve) loss_curve->push_back(mean_loss(train, n_top, model));
  std::mt19937_64 rng(cfg.seed);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (const auto& batch : pipeline::make_batches(train.size(), cfg.batch_size, rng())) {
      std::vector<Var> terms;
      for (std::size_t i : batch) terms.push_back(example_loss(train[i], n_top, model));
      num::backward(num::scale(num::sum_all(terms), 1.0 / static_cast<double>(terms.size())));
      opt.step();
    }
    if (loss_curve) loss_curve->push_back(mean_loss(train, n_top, model));
  }
  for (Parameter* p : model.parameters()) p->set_trainable(false);
  return model;
}

double booster_accuracy(const BoosterModel& model, const std::vector<BoosterExample>& examples, std::size_t n_top) {
  if (examples.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& ex : examples) {
    const auto logits = booster_combine(ex.x, ex.delta, n_top, model);
    const auto best = static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    if (best == ex.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(examples.size());
}

BoosterComparison compare_booster(const std::vector<BoosterExample>& train, const std::vector<BoosterExample>& test,
                                  const BoosterConfig& cfg) {
  BoosterComparison out;
  const auto baseline = train_booster_model(train, cfg, 0, &out.baseline_curve);
  const auto booster = train_booster_model(train, cfg, cfg.n_top, &out.booster_curve);
  out.baseline_accuracy = booster_accuracy(baseline, test, 0);
  out.booster_accuracy = booster_accuracy(booster, test, cfg.n_top);
  return out;
}

}  // namespace exattn::analysis
