#include "exattn/analysis/accuracy.hpp"

#include <stdexcept>
#include <string>

#include "exattn/analysis/ranking.hpp"
#include "exattn/pipeline/forward.hpp"

namespace exattn::analysis {

using data::DatasetItem;
using pipeline::PipelineParams;

std::vector<double> acc_k_feature(std::span<const double> novice_pooled, std::span<const double> s,
                                  const data::FeaturePool& pool, std::size_t k) {
  if (s.size() != pool.size())
    throw std::invalid_argument("acc_k: attention length " + std::to_string(s.size()) + " vs pool size " +
                                std::to_string(pool.size()));
  if (novice_pooled.size() != pool.dim()) throw std::invalid_argument("acc_k: novice feature dimension mismatch");
  const auto ranked = top_k(s, k);
  double mass = 0.0;
  for (const auto& r : ranked.entries) mass += r.weight;
  std::vector<double> out(pool.dim(), 0.0);
  if (mass > 0.0) {
    for (const auto& r : ranked.entries) {
      const double w = r.weight / mass;
      const auto row = pool.features.row(r.index);
      for (std::size_t j = 0; j < out.size(); ++j) out[j] += w * row[j];
    }
  }
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = 0.5 * (novice_pooled[j] + out[j]);
  return out;
}

double acc_k(const data::Dataset& ds, const AttentionSource& novice, const AttentionSource& s, std::size_t k,
             const pipeline::Classifier& cls) {
  if (ds.items.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& item : ds.items) {
    const auto sn = novice(item);
    const auto f_novice = pipeline::attend(pipeline::AttentionVector(sn, pipeline::AttentionKind::novice), item.pool);
    const auto feature = acc_k_feature(f_novice, s(item), item.pool, k);
    if (pipeline::predict(cls, feature) == ds.label_of(item)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(ds.items.size());
}

double pooled_accuracy(const data::Dataset& ds, const AttentionSource& s, const pipeline::Classifier& cls) {
  if (ds.items.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& item : ds.items) {
    const auto pooled = pipeline::attend(pipeline::AttentionVector(s(item), pipeline::AttentionKind::expert), item.pool);
    if (pipeline::predict(cls, pooled) == ds.label_of(item)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(ds.items.size());
}

namespace {

const data::CaptionEmbedding& caption_of(const DatasetItem& item) {
  if (!item.caption) throw std::invalid_argument("item " + item.id + " has no caption embedding");
  return *item.caption;
}

}  // namespace

AttentionSource expert_source(const PipelineParams& p) {
  return [&p](const DatasetItem& item) { return pipeline::compute_expert_attention(item.pool, p).to_vector(); };
}

AttentionSource novice_source(const PipelineParams& p) {
  return [&p](const DatasetItem& item) {
    return pipeline::compute_novice_attention(caption_of(item), item.pool, p).to_vector();
  };
}

AttentionSource delta_source(const PipelineParams& p) {
  return [&p](const DatasetItem& item) {
    const auto se = pipeline::compute_expert_attention(item.pool, p);
    const auto sn = pipeline::compute_novice_attention(caption_of(item), item.pool, p);
    return pipeline::compute_delta_attention(item.pool, se, sn, p).to_vector();
  };
}

AttentionSource posthoc_source(const PipelineParams& p) {
  return [&p](const DatasetItem& item) { return pipeline::compute_posthoc_attention(item.pool, p).to_vector(); };
}

}  // namespace exattn::analysis
