#include "exattn/pipeline/params.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "exattn/numerics/ops.hpp"

namespace exattn::pipeline {

using num::Parameter;
using num::Tensor;
using num::Var;

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::vision: return "stage1";
    case Stage::grounding: return "stage2";
    case Stage::distillation: return "stage3";
    case Stage::posthoc: return "posthoc";
  }
  return "unknown";
}

Stage stage_from_string(std::string_view name) {
  for (Stage s : {Stage::vision, Stage::grounding, Stage::distillation, Stage::posthoc})
    if (to_string(s) == name) return s;
  throw std::invalid_argument("unknown stage '" + std::string(name) + "'");
}

Var AttentionHead::scores(const Var& features) const {
  return num::matmul(num::self_attention(features, wq.var(), wk.var(), wv.var()), fc.var());
}

Var AttentionHead::attention(const Var& features) const { return num::softmax(scores(features)); }

std::vector<Parameter*> AttentionHead::parameters() { return {&wq, &wk, &wv, &fc}; }
std::vector<const Parameter*> AttentionHead::parameters() const { return {&wq, &wk, &wv, &fc}; }

Var Classifier::logits(const Var& pooled) const { return num::matmul(pooled, weight.var()) + bias.var(); }

std::vector<Parameter*> Classifier::parameters() { return {&weight, &bias}; }
std::vector<const Parameter*> Classifier::parameters() const { return {&weight, &bias}; }

Var Grounder::project(const Var& caption) const {
  const Var hidden = num::tanh(num::matmul(caption, w1.var()) + b1.var());
  return num::matmul(hidden, w2.var()) + b2.var();
}

std::vector<Parameter*> Grounder::parameters() { return {&w1, &b1, &w2, &b2}; }
std::vector<const Parameter*> Grounder::parameters() const { return {&w1, &b1, &w2, &b2}; }

namespace {

Tensor gaussian(Tensor::Shape shape, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Tensor t(std::move(shape), 0.0);
  for (double& x : t.values()) x = dist(rng);
  return t;
}

AttentionHead make_head(const std::string& prefix, std::size_t d, std::mt19937_64& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  AttentionHead h;
  h.wq = Parameter(prefix + ".wq", gaussian({d, d}, s, rng));
  h.wk = Parameter(prefix + ".wk", gaussian({d, d}, s, rng));
  h.wv = Parameter(prefix + ".wv", gaussian({d, d}, s, rng));
  h.fc = Parameter(prefix + ".fc", gaussian({d}, s, rng));
  return h;
}

template <typename P, typename Params>
std::vector<P*> collect(Params& p, Stage stage) {
  std::vector<P*> out;
  auto append = [&out](auto&& list) { out.insert(out.end(), list.begin(), list.end()); };
  switch (stage) {
    case Stage::vision:
      append(p.expert.parameters());
      append(p.classifier.parameters());
      break;
    case Stage::grounding: append(p.grounder.parameters()); break;
    case Stage::distillation: append(p.delta.parameters()); break;
    case Stage::posthoc: append(p.posthoc.parameters()); break;
  }
  return out;
}

constexpr Stage kStages[] = {Stage::vision, Stage::grounding, Stage::distillation, Stage::posthoc};

}  // namespace

PipelineParams PipelineParams::init(std::size_t feature_dim, std::size_t caption_dim, std::size_t classes,
                                    std::uint64_t seed) {
  if (feature_dim == 0 || caption_dim == 0 || classes == 0) {
    throw std::invalid_argument("PipelineParams::init: dimensions must be positive");
  }
  std::mt19937_64 rng(seed);
  PipelineParams p;
  p.feature_dim = feature_dim;
  p.caption_dim = caption_dim;
  p.classes = classes;
  const double sd = 1.0 / std::sqrt(static_cast<double>(feature_dim));
  const double sc = 1.0 / std::sqrt(static_cast<double>(caption_dim));
  p.expert = make_head("expert", feature_dim, rng);
  p.classifier.weight = Parameter("classifier.weight", gaussian({feature_dim, classes}, sd, rng));
  p.classifier.bias = Parameter("classifier.bias", Tensor({classes}, 0.0));
  p.grounder.w1 = Parameter("grounder.w1", gaussian({caption_dim, feature_dim}, sc, rng));
  p.grounder.b1 = Parameter("grounder.b1", Tensor({feature_dim}, 0.0));
  p.grounder.w2 = Parameter("grounder.w2", gaussian({feature_dim, feature_dim}, sd, rng));
  p.grounder.b2 = Parameter("grounder.b2", Tensor({feature_dim}, 0.0));
  p.delta = make_head("delta", feature_dim, rng);
  p.posthoc = make_head("posthoc", feature_dim, rng);
  return p;
}

std::vector<Parameter*> PipelineParams::stage_parameters(Stage stage) { return collect<Parameter>(*this, stage); }

std::vector<const Parameter*> PipelineParams::stage_parameters(Stage stage) const {
  return collect<const Parameter>(*this, stage);
}

std::vector<Parameter*> PipelineParams::all_parameters() {
  std::vector<Parameter*> out;
  for (Stage s : kStages) {
    auto v = stage_parameters(s);
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

std::vector<const Parameter*> PipelineParams::all_parameters() const {
  std::vector<const Parameter*> out;
  for (Stage s : kStages) {
    auto v = stage_parameters(s);
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

void PipelineParams::freeze_all() {
  for (Parameter* p : all_parameters()) p->set_trainable(false);
}

void PipelineParams::train_only(Stage stage) {
  freeze_all();
  for (Parameter* p : stage_parameters(stage)) p->set_trainable(true);
}

bool stage_parameters_equal(const PipelineParams& a, const PipelineParams& b, Stage stage) {
  const auto pa = a.stage_parameters(stage);
  const auto pb = b.stage_parameters(stage);
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i)
    if (!(pa[i]->value() == pb[i]->value())) return false;
  return true;
}

}  // namespace exattn::pipeline
