#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "exattn/numerics/autograd.hpp"

namespace exattn::pipeline {

// Training order; each stage freezes everything trained before it.
enum class Stage { vision = 1, grounding = 2, distillation = 3, posthoc = 4 };

std::string_view to_string(Stage stage);
Stage stage_from_string(std::string_view name);

/// Self-attention over the region pool followed by a per-region linear scorer
/// shared across regions. The scorer has no bias: a constant shift of every
/// region's score leaves the softmax unchanged.
struct AttentionHead {
  num::Parameter wq, wk, wv;  // [d,d]
  num::Parameter fc;          // [d]

  // Unnormalized region scores [N] for features [N,d].
  num::Var scores(const num::Var& features) const;
  num::Var attention(const num::Var& features) const;

  std::vector<num::Parameter*> parameters();
  std::vector<const num::Parameter*> parameters() const;
};

/// Linear classifier over a pooled d-vector; softmax is applied by the losses.
struct Classifier {
  num::Parameter weight;  // [d,C]
  num::Parameter bias;    // [C]

  num::Var logits(const num::Var& pooled) const;
  std::vector<num::Parameter*> parameters();
  std::vector<const num::Parameter*> parameters() const;
};

/// Caption-embedding projector: tanh(f_c W1 + b1) W2 + b2.
struct Grounder {
  num::Parameter w1;  // [d_c,d]
  num::Parameter b1;  // [d]
  num::Parameter w2;  // [d,d]
  num::Parameter b2;  // [d]

  num::Var project(const num::Var& caption) const;
  std::vector<num::Parameter*> parameters();
  std::vector<const num::Parameter*> parameters() const;
};

struct PipelineParams {
  std::size_t feature_dim = 0;
  std::size_t caption_dim = 0;
  std::size_t classes = 0;

  AttentionHead expert;
  Classifier classifier;
  Grounder grounder;
  AttentionHead delta;
  AttentionHead posthoc;

  static PipelineParams init(std::size_t feature_dim, std::size_t caption_dim, std::size_t classes, std::uint64_t seed);

  // Parameters optimized in `stage` (vision: expert head + classifier).
  std::vector<num::Parameter*> stage_parameters(Stage stage);
  std::vector<const num::Parameter*> stage_parameters(Stage stage) const;
  std::vector<num::Parameter*> all_parameters();
  std::vector<const num::Parameter*> all_parameters() const;

  // Makes exactly the parameters of `stage` trainable.
  void train_only(Stage stage);
  void freeze_all();
};

// Bitwise equality of every parameter belonging to `stage`.
bool stage_parameters_equal(const PipelineParams& a, const PipelineParams& b, Stage stage);

}  // namespace exattn::pipeline
