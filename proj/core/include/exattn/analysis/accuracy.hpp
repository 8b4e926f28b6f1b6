#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "exattn/data/dataset.hpp"
#include "exattn/pipeline/params.hpp"

namespace exattn::analysis {

// Attention provider for one item.
using AttentionSource = std::function<std::vector<double>(const data::DatasetItem&)>;

// ½(F_novice + λ Σ_{i<=K} S^(i) f^(i)) with λ = 1 / Σ_{i<=K} S^(i).
std::vector<double> acc_k_feature(std::span<const double> novice_pooled, std::span<const double> s,
                                  const data::FeaturePool& pool, std::size_t k);

// Fraction of items whose classifier argmax on acc_k_feature equals the label.
double acc_k(const data::Dataset& ds, const AttentionSource& novice, const AttentionSource& s, std::size_t k,
             const pipeline::Classifier& cls);

// Fraction of items whose Cls(attend(S, F)) argmax equals the label.
double pooled_accuracy(const data::Dataset& ds, const AttentionSource& s, const pipeline::Classifier& cls);

// Sources backed by a trained pipeline.
AttentionSource expert_source(const pipeline::PipelineParams& p);
AttentionSource novice_source(const pipeline::PipelineParams& p);
AttentionSource delta_source(const pipeline::PipelineParams& p);
AttentionSource posthoc_source(const pipeline::PipelineParams& p);

}  // namespace exattn::analysis
