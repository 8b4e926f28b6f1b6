#include <benchmark/benchmark.h>

#include "exattn/analysis/ranking.hpp"
#include "exattn/data/synthetic.hpp"
#include "exattn/pipeline/forward.hpp"
#include "exattn/pipeline/training.hpp"

using namespace exattn;
using pipeline::Stage;

namespace {

const data::Dataset& dataset() {
  static const data::Dataset ds = data::generate_synthetic({}).dataset;
  return ds;
}

// Parameters with every stage before `stage` trained for a few epochs.
pipeline::PipelineParams prepared(Stage stage) {
  const auto& ds = dataset();
  auto p = pipeline::PipelineParams::init(ds.feature_dim(), ds.caption_dim(), ds.taxonomy.size(), 7);
  for (Stage s : {Stage::vision, Stage::grounding, Stage::distillation}) {
    if (s == stage) break;
    auto cfg = pipeline::default_training_config(s);
    cfg.epochs = 3;
    cfg.classifier_warmup_epochs = 1;
    pipeline::train_stage(s, ds, p, cfg);
  }
  return p;
}

void BM_StageEpoch(benchmark::State& state) {
  const auto stage = static_cast<Stage>(state.range(0));
  const auto base = prepared(stage);
  auto cfg = pipeline::default_training_config(stage);
  cfg.epochs = 1;
  cfg.classifier_warmup_epochs = 0;
  for (auto _ : state) {
    auto p = base;
    benchmark::DoNotOptimize(pipeline::train_stage(stage, dataset(), p, cfg));
  }
  state.SetLabel(std::string(pipeline::to_string(stage)));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * dataset().items.size()));
}
BENCHMARK(BM_StageEpoch)
    ->Arg(static_cast<int>(Stage::vision))
    ->Arg(static_cast<int>(Stage::grounding))
    ->Arg(static_cast<int>(Stage::distillation))
    ->Arg(static_cast<int>(Stage::posthoc))
    ->Unit(benchmark::kMillisecond);

void BM_ComputeAllAttentions(benchmark::State& state) {
  const auto p = prepared(Stage::posthoc);
  const auto& item = dataset().items.front();
  for (auto _ : state) benchmark::DoNotOptimize(pipeline::compute_all_attentions(item, p));
}
BENCHMARK(BM_ComputeAllAttentions);

void BM_TopK(benchmark::State& state) {
  std::vector<double> s(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = static_cast<double>((i * 7919) % 101);
  for (auto _ : state) benchmark::DoNotOptimize(analysis::top_k(s, 3));
}
BENCHMARK(BM_TopK)->Arg(14)->Arg(55);

}  // namespace
