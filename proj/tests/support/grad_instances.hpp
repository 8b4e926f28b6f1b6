#pragma once

#include <random>
#include <string>
#include <vector>

#include "exattn/data/dataset.hpp"
#include "exattn/numerics/gradcheck.hpp"
#include "exattn/pipeline/forward.hpp"
#include "exattn/pipeline/params.hpp"
#include "fixtures.hpp"

namespace fixtures {

inline constexpr std::size_t kGradRegionsKMax = 2;  // N = 5
inline constexpr std::size_t kGradDim = 8;
inline constexpr std::size_t kGradClasses = 4;
inline constexpr std::size_t kGradBatch = 4;

struct GradInstance {
  exattn::pipeline::PipelineParams params;
  std::vector<exattn::data::DatasetItem> items;
  std::vector<const exattn::data::DatasetItem*> batch;
};

// Random instance for the finite-difference check of `stage`'s loss. For the
// distillation loss the expert scorer and classifier are sharpened so the
// exclusivity mask and the teacher-student gap are far from zero; otherwise
// every delta-head gradient sits below the central-difference noise floor.
inline GradInstance grad_instance(exattn::pipeline::Stage stage, std::uint64_t seed) {
  using namespace exattn;
  GradInstance g;
  g.params = pipeline::PipelineParams::init(kGradDim, kGradDim, kGradClasses, seed);
  randomize(g.params, seed + 100, 0.4);
  if (stage == pipeline::Stage::distillation) {
    for (auto& v : g.params.expert.fc.value().storage()) v *= 8.0;
    for (auto& v : g.params.classifier.weight.value().storage()) v *= 10.0;
    for (auto& v : g.params.delta.fc.value().storage()) v *= 4.0;
  }
  std::mt19937_64 rng(seed * 7919 + 13);
  const std::size_t n = data::region_count(kGradRegionsKMax);
  for (std::size_t i = 0; i < kGradBatch; ++i) {
    data::DatasetItem it;
    it.id = "g" + std::to_string(i);
    it.species = "c" + std::to_string(i);
    it.pool = data::make_feature_pool(it.id, kGradRegionsKMax, random_tensor({n, kGradDim}, rng));
    it.caption = data::CaptionEmbedding{it.id, random_tensor({kGradDim}, rng)};
    g.items.push_back(std::move(it));
  }
  for (const auto& it : g.items) g.batch.push_back(&it);
  return g;
}

// Max relative error of the stage's loss gradient over the stage's parameters.
inline exattn::num::GradCheckResult check_stage_gradient(exattn::pipeline::Stage stage, std::uint64_t seed) {
  using namespace exattn;
  using pipeline::Stage;
  auto g = grad_instance(stage, seed);
  auto& p = g.params;
  p.train_only(stage);
  std::function<num::Var()> build;
  switch (stage) {
    case Stage::vision: build = [&] { return pipeline::vision_loss(g.items[0].pool, seed % kGradClasses, p); }; break;
    case Stage::grounding: build = [&] { return pipeline::ground_loss(g.batch, p); }; break;
    case Stage::distillation: build = [&] { return pipeline::distil_loss(g.items[1], p, 5.0); }; break;
    case Stage::posthoc: build = [&] { return pipeline::posthoc_loss(g.batch, p); }; break;
  }
  const auto params = p.stage_parameters(stage);
  return num::finite_difference_check(build, params, 1e-5);
}

}  // namespace fixtures
