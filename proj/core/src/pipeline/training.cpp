#include "exattn/pipeline/training.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "exattn/numerics/ops.hpp"
#include "exattn/numerics/optimizer.hpp"

namespace exattn::pipeline {

using data::Dataset;
using data::DatasetItem;
using num::Tensor;
using num::Var;

TrainingConfig default_training_config(Stage stage) {
  TrainingConfig c;
  switch (stage) {
    case Stage::vision:
      c.epochs = 90;
      c.batch_size = 8;
      c.learning_rate = 1e-2;
      c.classifier_warmup_epochs = 20;
      break;
    case Stage::grounding:
      c.epochs = 100;
      c.batch_size = 8;
      c.learning_rate = 1e-3;
      break;
    case Stage::distillation:
      c.epochs = 40;
      c.batch_size = 8;
      c.learning_rate = 3e-3;
      break;
    case Stage::posthoc:
      c.epochs = 40;
      c.batch_size = 16;
      c.learning_rate = 1e-2;
      break;
  }
  return c;
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size, std::uint64_t seed) {
  if (batch_size == 0) throw std::invalid_argument("make_batches: batch size must be positive");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + batch_size)));
  }
  if (batches.size() > 1 && batches.back().size() < 2) {
    auto last = std::move(batches.back());
    batches.pop_back();
    batches.back().insert(batches.back().end(), last.begin(), last.end());
  }
  return batches;
}

namespace {

void require_nonempty(const Dataset& ds, const char* stage) {
  if (ds.items.empty()) throw std::invalid_argument(std::string(stage) + ": empty dataset");
}

void require_captions(const Dataset& ds, const char* stage) {
  const auto missing = ds.missing_captions();
  if (missing.empty()) return;
  std::string msg = std::string(stage) + ": items without caption embedding:";
  for (std::size_t i = 0; i < missing.size() && i < 20; ++i) msg += " " + missing[i];
  if (missing.size() > 20) msg += " ... (" + std::to_string(missing.size()) + " total)";
  throw std::invalid_argument(msg);
}

void require_temperature(const TrainingConfig& c) {
  if (!(c.temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
}

std::vector<const DatasetItem*> gather(const Dataset& ds, const std::vector<std::size_t>& idx) {
  std::vector<const DatasetItem*> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(&ds.items[i]);
  return out;
}

// Drives epochs of minibatch Adam on `batch_loss`, evaluating `eval` at every checkpoint.
template <typename BatchLoss, typename Eval>
StageReport run_stage(Stage stage, const Dataset& ds, PipelineParams& params, const TrainingConfig& cfg,
                      std::size_t batch_size, BatchLoss&& batch_loss, Eval&& eval) {
  params.train_only(stage);
  num::Adam opt(params.stage_parameters(stage), num::AdamConfig{cfg.learning_rate});
  StageReport report;
  report.stage = stage;
  report.loss_curve.push_back(eval(report));
  if (cfg.on_epoch) cfg.on_epoch(0, report.loss_curve.back());
  std::mt19937_64 rng(cfg.seed);
  const std::size_t warmup = stage == Stage::vision ? std::min(cfg.classifier_warmup_epochs, cfg.epochs) : 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (warmup > 0 && (epoch == 0 || epoch == warmup)) {
      for (num::Parameter* p : params.expert.parameters()) p->set_trainable(epoch >= warmup);
    }
    for (const auto& batch : make_batches(ds.items.size(), batch_size, rng())) {
      const Var loss = batch_loss(gather(ds, batch));
      num::backward(loss);
      opt.step();
    }
    report.loss_curve.push_back(eval(report));
    if (cfg.on_epoch) cfg.on_epoch(epoch + 1, report.loss_curve.back());
  }
  params.freeze_all();
  return report;
}

Var mean_of(std::vector<Var>& terms) {
  const double n = static_cast<double>(terms.size());
  return num::scale(num::sum_all(terms), 1.0 / n);
}

}  // namespace

double mean_vision_loss(const Dataset& ds, const PipelineParams& params) {
  num::NoGradGuard guard;
  double total = 0.0;
  for (const auto& item : ds.items) total += vision_loss(item.pool, ds.label_of(item), params).item();
  return ds.items.empty() ? 0.0 : total / static_cast<double>(ds.items.size());
}

double expert_accuracy(const Dataset& ds, const PipelineParams& params) {
  std::size_t correct = 0;
  for (const auto& item : ds.items) {
    const auto pooled = attend(compute_expert_attention(item.pool, params), item.pool);
    if (predict(params.classifier, pooled) == ds.label_of(item)) ++correct;
  }
  return ds.items.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(ds.items.size());
}

double mean_distil_loss(const Dataset& ds, const PipelineParams& params, double t, TemperatureMode mode) {
  num::NoGradGuard guard;
  double total = 0.0;
  for (const auto& item : ds.items) total += distil_loss(item, params, t, mode).item();
  return ds.items.empty() ? 0.0 : total / static_cast<double>(ds.items.size());
}

StageReport train_stage1(const Dataset& train, PipelineParams& params, const TrainingConfig& cfg) {
  require_nonempty(train, "train_stage1");
  return run_stage(
      Stage::vision, train, params, cfg, cfg.batch_size,
      [&](const std::vector<const DatasetItem*>& batch) {
        std::vector<Var> terms;
        for (const DatasetItem* item : batch) terms.push_back(vision_loss(item->pool, train.label_of(*item), params));
        return mean_of(terms);
      },
      [&](StageReport&) { return mean_vision_loss(train, params); });
}

StageReport train_stage2(const Dataset& train, PipelineParams& params, const TrainingConfig& cfg) {
  require_nonempty(train, "train_stage2");
  require_captions(train, "train_stage2");
  if (cfg.batch_size < 2) throw std::invalid_argument("train_stage2: batch size must be >= 2");
  if (train.items.size() < 2) throw std::invalid_argument("train_stage2: need at least 2 items");
  const auto eval_batches = make_batches(train.items.size(), cfg.batch_size, cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  auto eval = [&](StageReport&) {
    num::NoGradGuard guard;
    double total = 0.0;
    for (const auto& b : eval_batches) {
      const auto items = gather(train, b);
      total += ground_loss(items, params).item() / static_cast<double>(items.size());
    }
    return total / static_cast<double>(eval_batches.size());
  };
  return run_stage(
      Stage::grounding, train, params, cfg, cfg.batch_size,
      [&](const std::vector<const DatasetItem*>& batch) {
        return num::scale(ground_loss(batch, params), 1.0 / static_cast<double>(batch.size()));
      },
      eval);
}

StageReport train_stage3(const Dataset& train, PipelineParams& params, const TrainingConfig& cfg) {
  require_nonempty(train, "train_stage3");
  require_captions(train, "train_stage3");
  require_temperature(cfg);
  return run_stage(
      Stage::distillation, train, params, cfg, cfg.batch_size,
      [&](const std::vector<const DatasetItem*>& batch) {
        std::vector<Var> terms;
        for (const DatasetItem* item : batch) terms.push_back(distil_loss(*item, params, cfg.temperature, cfg.temperature_mode));
        return mean_of(terms);
      },
      [&](StageReport& report) {
        report.kl_t1_curve.push_back(mean_distil_loss(train, params, 1.0, cfg.temperature_mode));
        return mean_distil_loss(train, params, cfg.temperature, cfg.temperature_mode);
      });
}

StageReport train_posthoc(const Dataset& train, PipelineParams& params, const TrainingConfig& cfg) {
  require_nonempty(train, "train_posthoc");
  require_captions(train, "train_posthoc");
  if (cfg.batch_size < 2 || train.items.size() < 2) throw std::invalid_argument("train_posthoc: batch size must be >= 2");
  // Targets depend only on frozen earlier stages.
  std::vector<Tensor> targets;
  targets.reserve(train.items.size());
  for (const auto& item : train.items) targets.push_back(Tensor::vector(delta_feature(item, params)));
  std::vector<const DatasetItem*> by_index;
  for (const auto& item : train.items) by_index.push_back(&item);
  auto targets_for = [&](const std::vector<const DatasetItem*>& batch) {
    std::vector<const Tensor*> out;
    out.reserve(batch.size());
    for (const DatasetItem* item : batch) out.push_back(&targets[static_cast<std::size_t>(item - train.items.data())]);
    return out;
  };
  const auto eval_batches = make_batches(train.items.size(), cfg.batch_size, cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  auto eval = [&](StageReport&) {
    num::NoGradGuard guard;
    double total = 0.0;
    for (const auto& b : eval_batches) {
      const auto items = gather(train, b);
      total += posthoc_loss(items, targets_for(items), params, cfg.bandwidth).item();
    }
    return total / static_cast<double>(eval_batches.size());
  };
  return run_stage(
      Stage::posthoc, train, params, cfg, cfg.batch_size,
      [&](const std::vector<const DatasetItem*>& batch) {
        return posthoc_loss(batch, targets_for(batch), params, cfg.bandwidth);
      },
      eval);
}

StageReport train_stage(Stage stage, const Dataset& train, PipelineParams& params, const TrainingConfig& config) {
  switch (stage) {
    case Stage::vision: return train_stage1(train, params, config);
    case Stage::grounding: return train_stage2(train, params, config);
    case Stage::distillation: return train_stage3(train, params, config);
    case Stage::posthoc: return train_posthoc(train, params, config);
  }
  throw std::invalid_argument("unknown stage");
}

}  // namespace exattn::pipeline
