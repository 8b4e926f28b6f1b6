#pragma once

// Tape-free reverse-mode differentiation over Tensor values.
//
// Every op returns a Var that owns a graph node holding the forward value, the
// inputs it was computed from and a closure that pushes the node's adjoint back
// into those inputs. Nodes that do not depend on a trainable leaf are recorded
// without inputs, so frozen sub-graphs cost nothing at backward time.

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "exattn/numerics/tensor.hpp"

namespace exattn::num {

struct Node {
  Tensor value;
  Tensor grad;  // allocated lazily, same shape as value
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;
  bool requires_grad = false;

  // Adds g into grad, allocating it on first use.
  void accumulate(const Tensor& g);
  void zero_grad();
  Tensor& grad_buffer();
};

class Var {
 public:
  Var();
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Tensor& value() const { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  const Tensor::Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_->requires_grad; }
  double item() const { return node_->value.item(); }
  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// A value with no gradient path.
Var constant(Tensor value);

// Γ(·): same value, gradient never flows into the argument.
Var stop_gradient(const Var& v);

// Builds an op node. `backward` receives the op's node after its grad has been
// populated and must push into node.inputs[k] for the inputs that require grad.
// When no input requires grad (or recording is disabled) the node is a constant.
Var record(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward);

// Accumulates d(loss)/d(leaf) into every reachable leaf that requires grad.
// No-op when the loss does not require grad.
void backward(const Var& loss);

bool grad_recording_enabled() noexcept;

// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Named trainable tensor. Copies are deep: a copied parameter owns its own
/// leaf node and gradient buffer.
class Parameter {
 public:
  Parameter() : Parameter("", Tensor()) {}
  Parameter(std::string name, Tensor init);
  Parameter(const Parameter& other);
  Parameter& operator=(const Parameter& other);
  Parameter(Parameter&&) noexcept = default;
  Parameter& operator=(Parameter&&) noexcept = default;

  const std::string& name() const noexcept { return name_; }
  const Tensor& value() const noexcept { return leaf_->value; }
  Tensor& value() noexcept { return leaf_->value; }
  // Zero tensor until something has been accumulated.
  const Tensor& gradient();

  // Leaf var. Gradients reach this parameter only while it is trainable.
  Var var() const { return Var(leaf_); }

  void set_trainable(bool trainable) noexcept { leaf_->requires_grad = trainable; }
  bool trainable() const noexcept { return leaf_->requires_grad; }
  void zero_grad();

 private:
  std::string name_;
  std::shared_ptr<Node> leaf_;
};

}  // namespace exattn::num
