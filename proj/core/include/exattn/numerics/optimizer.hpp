#pragma once

#include <cstddef>
#include <vector>

#include "exattn/numerics/autograd.hpp"

namespace exattn::num {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adaptive-moment optimizer over a fixed parameter list. The optimizer keeps
/// non-owning pointers; the parameters must outlive it.
class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamConfig config = {});

  // Applies one update from the accumulated gradients, then zeroes them.
  // Throws FailedStep (and leaves every parameter untouched) if any gradient
  // is not finite.
  void step();
  void zero_grad();

  std::size_t steps() const noexcept { return step_; }
  const AdamConfig& config() const noexcept { return config_; }

 private:
  std::vector<Parameter*> params_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  AdamConfig config_;
  std::size_t step_ = 0;
};

}  // namespace exattn::num
