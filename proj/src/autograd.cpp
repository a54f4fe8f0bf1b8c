#include "slidelm/numerics/autograd.hpp"

#include <unordered_set>

#include "slidelm/error.hpp"

namespace slidelm {

void Node::accumulate(const Tensor& g) {
  Tensor& buf = grad_buffer();
  if (buf.shape() != g.shape())
    throw UsageError("autograd: gradient shape " + shape_string(g.shape()) + " does not match value " +
                     shape_string(value.shape()));
  auto dst = buf.values();
  auto src = g.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

Tensor& Node::grad_buffer() {
  if (grad.shape() != value.shape() || grad.empty()) grad = Tensor(value.shape(), 0.0);
  return grad;
}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Var make_result(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->is_leaf = false;
  for (const auto& p : parents) {
    if (p.requires_grad()) node->requires_grad = true;
  }
  if (node->requires_grad) {
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.node());
    node->backward = std::move(backward_fn);
  }
  return Var(std::move(node));
}

void backward(const Var& loss) {
  if (!loss) throw UsageError("backward: null value");
  if (loss.value().numel() != 1) throw UsageError("backward: loss must be a scalar");
  if (!loss.requires_grad() || loss.node()->is_leaf)
    throw UsageError("backward: value is detached from every trainable parameter");

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.node().get(), 0}};
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (Node* n : order)
    if (!n->is_leaf) n->grad = Tensor(n->value.shape(), 0.0);

  loss.node()->grad.fill(1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (!n->is_leaf && n->backward) n->backward(*n);
  }
}

Parameter::Parameter(std::string name, Tensor value, bool trainable)
    : name_(std::make_shared<std::string>(std::move(name))), var_(std::move(value), trainable) {
  var_.node()->grad_buffer();
}

}  // namespace slidelm
