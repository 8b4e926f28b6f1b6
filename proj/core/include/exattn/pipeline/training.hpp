#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "exattn/data/dataset.hpp"
#include "exattn/pipeline/forward.hpp"
#include "exattn/pipeline/params.hpp"

namespace exattn::pipeline {

struct TrainingConfig {
  std::size_t epochs = 40;
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
  double temperature = 5.0;
  std::uint64_t seed = 1;
  MmdBandwidth bandwidth;
  TemperatureMode temperature_mode = TemperatureMode::logits;
  // Vision stage only: leading epochs that update the classifier alone under
  // the initial attention.
  std::size_t classifier_warmup_epochs = 0;
  // Called with (epoch, loss) at every checkpoint of the loss curve.
  std::function<void(std::size_t, double)> on_epoch;
};

// Per-stage defaults used by the CLI and the acceptance suite.
TrainingConfig default_training_config(Stage stage);

struct StageReport {
  Stage stage = Stage::vision;
  // [0] is the loss before the first update; [e] the loss after epoch e,
  // evaluated over the whole training set with the parameters at that point.
  std::vector<double> loss_curve;
  // Distillation only: KL(teacher || student) at t = 1 at the same checkpoints.
  std::vector<double> kl_t1_curve;
};

// Each stage makes only its own parameters trainable, leaving every other
// parameter bit-identical. Stages must run in order; nothing checks that the
// earlier ones were trained.
StageReport train_stage1(const data::Dataset& train, PipelineParams& params, const TrainingConfig& config);
StageReport train_stage2(const data::Dataset& train, PipelineParams& params, const TrainingConfig& config);
StageReport train_stage3(const data::Dataset& train, PipelineParams& params, const TrainingConfig& config);
StageReport train_posthoc(const data::Dataset& train, PipelineParams& params, const TrainingConfig& config);
StageReport train_stage(Stage stage, const data::Dataset& train, PipelineParams& params, const TrainingConfig& config);

// Evaluation helpers over a whole dataset.
double mean_vision_loss(const data::Dataset& ds, const PipelineParams& params);
double expert_accuracy(const data::Dataset& ds, const PipelineParams& params);
double mean_distil_loss(const data::Dataset& ds, const PipelineParams& params, double t,
                        TemperatureMode mode = TemperatureMode::logits);

// Partition of [0, n) into shuffled batches of `batch_size`; a trailing batch
// smaller than 2 is merged into the previous one.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size, std::uint64_t seed);

}  // namespace exattn::pipeline
