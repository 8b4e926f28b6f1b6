#include "exattn/pipeline/forward.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "exattn/numerics/losses.hpp"
#include "exattn/numerics/ops.hpp"

namespace exattn::pipeline {

using num::Tensor;
using num::Var;

namespace {

Var pool_var(const data::FeaturePool& pool) { return num::constant(pool.features); }

const data::CaptionEmbedding& require_caption(const data::DatasetItem& item) {
  if (!item.caption) throw std::invalid_argument("item '" + item.id + "' has no caption embedding");
  return *item.caption;
}

void check_length(const char* what, std::size_t got, std::size_t want) {
  if (got != want) {
    throw std::invalid_argument(std::string(what) + ": attention length " + std::to_string(got) + " != region count " +
                                std::to_string(want));
  }
}

std::vector<double> to_vector(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

}  // namespace

Var attend(const Var& weights, const Var& features) {
  check_length("attend", weights.value().size(), features.value().rows());
  if (weights.value().rank() != 1) throw std::invalid_argument("attend: weights must be a vector");
  return num::matmul(weights, features);
}

Var expert_attention(const Var& features, const PipelineParams& p) {
  return p.expert.attention(num::stop_gradient(features));
}

Var novice_attention(const Var& caption, const Var& features, const PipelineParams& p) {
  const Var projected = p.grounder.project(num::stop_gradient(caption));
  return num::softmax(num::cosine_rows(projected, num::stop_gradient(features)));
}

Tensor exclusivity_mask(std::span<const double> s_expert, std::span<const double> s_novice) {
  if (s_expert.size() != s_novice.size()) throw std::invalid_argument("exclusivity_mask: attention length mismatch");
  Tensor m({s_expert.size()}, 0.0);
  for (std::size_t i = 0; i < s_expert.size(); ++i) m[i] = std::max(s_expert[i] - s_novice[i], 0.0);
  return m;
}

Var delta_attention(const Var& features, std::span<const double> s_expert, std::span<const double> s_novice,
                    const PipelineParams& p) {
  check_length("delta_attention", s_expert.size(), features.value().rows());
  const Var masked = num::scale_rows(features, num::constant(exclusivity_mask(s_expert, s_novice)));
  return p.delta.attention(num::stop_gradient(masked));
}

Var posthoc_attention(const Var& features, const PipelineParams& p) {
  return p.posthoc.attention(num::stop_gradient(features));
}

Var softened_prediction(const Var& pooled, const Classifier& cls, double t, TemperatureMode mode) {
  if (!(t > 0.0)) throw std::invalid_argument("temperature must be positive");
  if (mode == TemperatureMode::features) return num::softmax(cls.logits(num::scale(pooled, 1.0 / t)));
  return num::softmax(num::scale(cls.logits(pooled), 1.0 / t));
}

Var vision_loss(const data::FeaturePool& pool, std::size_t label, const PipelineParams& p) {
  const Var f = pool_var(pool);
  const Var pooled = attend(expert_attention(f, p), f);
  return num::cross_entropy(p.classifier.logits(pooled), label);
}

Var ground_loss(std::span<const data::DatasetItem* const> batch, const PipelineParams& p) {
  if (batch.size() < 2) throw std::invalid_argument("ground_loss: batch needs at least 2 items");
  std::vector<Var> novice_feats, projected;
  novice_feats.reserve(batch.size());
  projected.reserve(batch.size());
  for (const data::DatasetItem* item : batch) {
    const Var caption = num::stop_gradient(num::constant(require_caption(*item).vector));
    const Var f = pool_var(item->pool);
    const Var g = p.grounder.project(caption);
    const Var s = num::softmax(num::cosine_rows(g, f));
    novice_feats.push_back(attend(s, f));
    projected.push_back(g);
  }
  const Var scores = num::matmul(num::stack_rows(novice_feats), num::transpose(num::stack_rows(projected)));
  return num::info_nce(scores);
}

Var distil_loss(const data::DatasetItem& item, const PipelineParams& p, double t, TemperatureMode mode) {
  if (!(t > 0.0)) throw std::invalid_argument("distil_loss: temperature must be positive");
  const Var f = pool_var(item.pool);
  const Var caption = num::constant(require_caption(item).vector);
  const Var s_expert = num::stop_gradient(expert_attention(f, p));
  const Var s_novice = num::stop_gradient(novice_attention(caption, f, p));

  const Var teacher = num::stop_gradient(softened_prediction(attend(s_expert, f), p.classifier, t, mode));
  const Var f_novice = num::stop_gradient(attend(s_novice, f));
  const Var s_delta = delta_attention(f, s_expert.value().values(), s_novice.value().values(), p);
  const Var f_delta = attend(s_delta, f);
  const Var student = softened_prediction(f_novice + f_delta, p.classifier, t, mode);
  return num::kl_divergence(teacher, student);
}

Var posthoc_loss(std::span<const data::DatasetItem* const> batch, std::span<const Tensor* const> targets,
                 const PipelineParams& p, const MmdBandwidth& bandwidth) {
  if (batch.size() < 2) throw std::invalid_argument("posthoc_loss: batch needs at least 2 items");
  if (targets.size() != batch.size()) throw std::invalid_argument("posthoc_loss: one target per item required");
  std::vector<Var> approx, target;
  approx.reserve(batch.size());
  target.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Var f = pool_var(batch[i]->pool);
    approx.push_back(attend(posthoc_attention(f, p), f));
    target.push_back(num::constant(*targets[i]));
  }
  const Var a = num::stack_rows(approx);
  const Var b = num::stop_gradient(num::stack_rows(target));
  const double gamma = bandwidth.mode == GammaMode::median ? num::median_sq_distance(b.value()) : bandwidth.gamma;
  return num::mmd_squared(a, b, gamma);
}

Var posthoc_loss(std::span<const data::DatasetItem* const> batch, const PipelineParams& p,
                 const MmdBandwidth& bandwidth) {
  std::vector<Tensor> targets;
  targets.reserve(batch.size());
  for (const data::DatasetItem* item : batch) targets.push_back(Tensor::vector(delta_feature(*item, p)));
  std::vector<const Tensor*> ptrs;
  for (const auto& t : targets) ptrs.push_back(&t);
  return posthoc_loss(batch, ptrs, p, bandwidth);
}

AttentionVector compute_expert_attention(const data::FeaturePool& pool, const PipelineParams& p) {
  num::NoGradGuard guard;
  return AttentionVector(to_vector(expert_attention(pool_var(pool), p).value()), AttentionKind::expert);
}

AttentionVector compute_novice_attention(const data::CaptionEmbedding& caption, const data::FeaturePool& pool,
                                         const PipelineParams& p) {
  num::NoGradGuard guard;
  return AttentionVector(to_vector(novice_attention(num::constant(caption.vector), pool_var(pool), p).value()),
                         AttentionKind::novice);
}

AttentionVector compute_delta_attention(const data::FeaturePool& pool, const AttentionVector& expert,
                                        const AttentionVector& novice, const PipelineParams& p) {
  num::NoGradGuard guard;
  return AttentionVector(to_vector(delta_attention(pool_var(pool), expert.weights(), novice.weights(), p).value()),
                         AttentionKind::delta);
}

AttentionVector compute_posthoc_attention(const data::FeaturePool& pool, const PipelineParams& p) {
  num::NoGradGuard guard;
  return AttentionVector(to_vector(posthoc_attention(pool_var(pool), p).value()), AttentionKind::posthoc);
}

std::vector<double> attend(const AttentionVector& s, const data::FeaturePool& pool) {
  check_length("attend", s.size(), pool.size());
  std::vector<double> out(pool.dim(), 0.0);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const auto row = pool.features.row(i);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += s[i] * row[j];
  }
  return out;
}

std::vector<double> classifier_logits(const Classifier& cls, std::span<const double> pooled) {
  num::NoGradGuard guard;
  const Var x = num::constant(Tensor::vector({pooled.begin(), pooled.end()}));
  return to_vector(cls.logits(x).value());
}

std::size_t predict(const Classifier& cls, std::span<const double> pooled) {
  const auto z = classifier_logits(cls, pooled);
  return static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
}

ItemAttentions compute_all_attentions(const data::DatasetItem& item, const PipelineParams& p) {
  ItemAttentions out;
  const AttentionVector expert = compute_expert_attention(item.pool, p);
  out.expert.assign(expert.weights().begin(), expert.weights().end());
  const AttentionVector posthoc = compute_posthoc_attention(item.pool, p);
  out.posthoc.assign(posthoc.weights().begin(), posthoc.weights().end());
  if (item.caption) {
    const AttentionVector novice = compute_novice_attention(*item.caption, item.pool, p);
    const AttentionVector delta = compute_delta_attention(item.pool, expert, novice, p);
    out.novice.assign(novice.weights().begin(), novice.weights().end());
    out.delta.assign(delta.weights().begin(), delta.weights().end());
  }
  return out;
}

std::vector<double> delta_feature(const data::DatasetItem& item, const PipelineParams& p) {
  const AttentionVector expert = compute_expert_attention(item.pool, p);
  const AttentionVector novice = compute_novice_attention(require_caption(item), item.pool, p);
  return attend(compute_delta_attention(item.pool, expert, novice, p), item.pool);
}

}  // namespace exattn::pipeline
