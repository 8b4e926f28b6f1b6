#pragma once

#include <span>
#include <vector>

#include "exattn/data/dataset.hpp"
#include "exattn/numerics/autograd.hpp"
#include "exattn/pipeline/attention.hpp"
#include "exattn/pipeline/params.hpp"

namespace exattn::pipeline {

// Where the distillation temperature is applied.
enum class TemperatureMode {
  logits,    // softmax(Cls_logits(x) / t)
  features,  // softmax(Cls_logits(x / t)), the literal feature-scaling reading
};

enum class GammaMode {
  median,  // median pairwise squared distance of the target batch
  fixed,
};

struct MmdBandwidth {
  GammaMode mode = GammaMode::median;
  double gamma = 1.0;  // used when mode == fixed
};

// ---- graph-level building blocks ----

// Weighted sum of feature rows: sum_i s_i f_i.
num::Var attend(const num::Var& weights, const num::Var& features);

num::Var expert_attention(const num::Var& features, const PipelineParams& p);
num::Var novice_attention(const num::Var& caption, const num::Var& features, const PipelineParams& p);
// max(s_expert - s_novice, 0)
num::Tensor exclusivity_mask(std::span<const double> s_expert, std::span<const double> s_novice);
num::Var delta_attention(const num::Var& features, std::span<const double> s_expert, std::span<const double> s_novice,
                         const PipelineParams& p);
num::Var posthoc_attention(const num::Var& features, const PipelineParams& p);

// softmax(logits / t) or softmax(Cls(pooled / t)) depending on mode.
num::Var softened_prediction(const num::Var& pooled, const Classifier& cls, double t, TemperatureMode mode);

// ---- losses ----

// CE of Cls(F_expert) against the item's label.
num::Var vision_loss(const data::FeaturePool& pool, std::size_t label, const PipelineParams& p);

// Contrastive grounding over a batch: scores[i][j] = F_novice,i · MLP(f_c,j).
// Returns the sum over rows (not averaged).
num::Var ground_loss(std::span<const data::DatasetItem* const> batch, const PipelineParams& p);

// KL(teacher || student) between softened predictions of Γ(F_expert) and Γ(F_novice) + F_δ.
num::Var distil_loss(const data::DatasetItem& item, const PipelineParams& p, double t,
                     TemperatureMode mode = TemperatureMode::logits);

// MMD^2 between post-hoc pooled features and Γ(F_δ) over a batch.
num::Var posthoc_loss(std::span<const data::DatasetItem* const> batch, const PipelineParams& p,
                      const MmdBandwidth& bandwidth = {});
// Same, with the F_δ targets precomputed (targets[i] belongs to batch[i]).
num::Var posthoc_loss(std::span<const data::DatasetItem* const> batch, std::span<const num::Tensor* const> targets,
                      const PipelineParams& p, const MmdBandwidth& bandwidth = {});

// ---- value-level inference ----

AttentionVector compute_expert_attention(const data::FeaturePool& pool, const PipelineParams& p);
AttentionVector compute_novice_attention(const data::CaptionEmbedding& caption, const data::FeaturePool& pool,
                                         const PipelineParams& p);
AttentionVector compute_delta_attention(const data::FeaturePool& pool, const AttentionVector& expert,
                                        const AttentionVector& novice, const PipelineParams& p);
AttentionVector compute_posthoc_attention(const data::FeaturePool& pool, const PipelineParams& p);

std::vector<double> attend(const AttentionVector& s, const data::FeaturePool& pool);
std::vector<double> classifier_logits(const Classifier& cls, std::span<const double> pooled);
std::size_t predict(const Classifier& cls, std::span<const double> pooled);

// Every attention the pipeline defines for one item. The caption-dependent
// entries (novice, delta) are only filled when the item has a caption.
struct ItemAttentions {
  std::vector<double> expert, novice, delta, posthoc;
};
ItemAttentions compute_all_attentions(const data::DatasetItem& item, const PipelineParams& p);

// F_δ = S_δ · F_pool for an item with a caption.
std::vector<double> delta_feature(const data::DatasetItem& item, const PipelineParams& p);

}  // namespace exattn::pipeline
