#include "exattn/numerics/autograd.hpp"

#include <stdexcept>
#include <unordered_set>
#include <utility>

namespace exattn::num {
namespace {

thread_local bool g_recording = true;

}  // namespace

void Node::accumulate(const Tensor& g) {
  Tensor& buf = grad_buffer();
  if (!buf.same_shape(g)) {
    throw std::logic_error("gradient shape " + shape_string(g.shape()) + " does not match value " +
                           shape_string(value.shape()));
  }
  auto dst = buf.values();
  auto src = g.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

Tensor& Node::grad_buffer() {
  if (!grad.same_shape(value)) grad = Tensor(value.shape(), 0.0);
  return grad;
}

void Node::zero_grad() { grad = Tensor(value.shape(), 0.0); }

Var::Var() : node_(std::make_shared<Node>()) {}

Var constant(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

Var stop_gradient(const Var& v) {
  if (!v.requires_grad()) return v;
  return constant(v.value());
}

Var record(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  bool needs = false;
  if (g_recording) {
    for (const auto& in : inputs) needs = needs || in.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (auto& in : inputs) node->inputs.push_back(in.node());
    node->backward = std::move(backward_fn);
  }
  return Var(std::move(node));
}

void backward(const Var& loss) {
  if (!loss.requires_grad()) return;
  if (loss.value().size() != 1) throw std::invalid_argument("backward: loss must be a scalar");

  // Iterative post-order DFS gives a topological order (inputs before users).
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    if (n->backward) n->zero_grad();
  }
  loss.node()->grad_buffer().fill(1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward) n->backward(*n);
  }
}

bool grad_recording_enabled() noexcept { return g_recording; }

NoGradGuard::NoGradGuard() : previous_(g_recording) { g_recording = false; }
NoGradGuard::~NoGradGuard() { g_recording = previous_; }

Parameter::Parameter(std::string name, Tensor init) : name_(std::move(name)), leaf_(std::make_shared<Node>()) {
  leaf_->value = std::move(init);
  leaf_->requires_grad = true;
}

Parameter::Parameter(const Parameter& other) : name_(other.name_), leaf_(std::make_shared<Node>()) {
  leaf_->value = other.leaf_->value;
  leaf_->grad = other.leaf_->grad;
  leaf_->requires_grad = other.leaf_->requires_grad;
}

Parameter& Parameter::operator=(const Parameter& other) {
  if (this != &other) {
    Parameter copy(other);
    *this = std::move(copy);
  }
  return *this;
}

const Tensor& Parameter::gradient() { return leaf_->grad_buffer(); }

void Parameter::zero_grad() { leaf_->zero_grad(); }

}  // namespace exattn::num
