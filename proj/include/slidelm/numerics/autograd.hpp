#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "slidelm/numerics/tensor.hpp"

namespace slidelm {

struct Node;
using NodePtr = std::shared_ptr<Node>;

/// One value in a recorded computation. `backward` reads this node's grad and
/// accumulates into the grads of `parents` that require it.
struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  bool is_leaf = true;
  std::vector<NodePtr> parents;
  std::function<void(Node&)> backward;

  /// Adds `g` into this node's grad buffer, allocating it on first use.
  void accumulate(const Tensor& g);
  Tensor& grad_buffer();
};

/// Handle to a node in the computation graph.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);
  explicit Var(NodePtr node) : node_(std::move(node)) {}

  const Tensor& value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  const NodePtr& node() const { return node_; }
  explicit operator bool() const noexcept { return static_cast<bool>(node_); }

 private:
  NodePtr node_;
};

/// Records a non-leaf result. The node requires grad iff any parent does;
/// otherwise `backward_fn` is dropped.
Var make_result(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward_fn);

/// Reverse-mode sweep from a scalar loss. Leaf grads accumulate across calls;
/// intermediate grads are reset. Throws UsageError when `loss` is detached
/// from every trainable leaf or is not a scalar.
void backward(const Var& loss);

/// A named trainable (or frozen) leaf. Copies share storage.
class Parameter {
 public:
  Parameter() = default;
  Parameter(std::string name, Tensor value, bool trainable = true);

  const std::string& name() const { return *name_; }
  const Var& var() const { return var_; }
  Tensor& value() { return var_.node()->value; }
  const Tensor& value() const { return var_.node()->value; }
  Tensor& grad() { return var_.node()->grad_buffer(); }
  const Tensor& grad() const { return var_.node()->grad_buffer(); }
  bool trainable() const { return var_.node()->requires_grad; }
  void set_trainable(bool t) { var_.node()->requires_grad = t; }
  void zero_grad() { var_.node()->grad_buffer().fill(0.0); }

 private:
  std::shared_ptr<std::string> name_;
  Var var_;
};

}  // namespace slidelm
