#pragma once

#include <functional>
#include <vector>

#include "flowtwin/nn/tensor.hpp"

namespace flowtwin::nn {

/// Handle to a node on a Tape. Only valid for the tape that produced it.
struct NodeId {
  int32_t index = -1;
  bool valid() const { return index >= 0; }
};

/// Wengert-list reverse-mode tape. Nodes are appended in creation order, so a
/// single reverse sweep visits them in reverse topological order exactly once.
/// Every forward op verifies its output is finite and throws NumericError
/// otherwise.
class Tape {
 public:
  NodeId leaf(Tensor value, bool requires_grad = false);
  NodeId constant(Tensor value) { return leaf(std::move(value), false); }

  // Binary / unary primitives. Shapes are validated eagerly.
  NodeId matmul(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);  // elementwise
  NodeId div(NodeId a, NodeId b);  // elementwise
  NodeId add_rowvec(NodeId m, NodeId row);
  NodeId affine(NodeId a, double scale, double shift);
  NodeId concat_cols(NodeId a, NodeId b);
  NodeId slice_cols(NodeId a, int begin, int end);
  NodeId gather_rows(NodeId a, std::vector<int> indices);
  NodeId scatter_rows(NodeId base, std::vector<int> indices, NodeId rows);
  NodeId segment_sum(NodeId a, std::vector<int> segment_ids, int n_segments);
  NodeId sigmoid(NodeId a);
  NodeId tanh_(NodeId a);
  NodeId relu(NodeId a);
  NodeId exp_(NodeId a);
  NodeId log_(NodeId a);
  NodeId abs_(NodeId a);  // subgradient 0 at the kink
  NodeId sum(NodeId a);
  NodeId mean(NodeId a);

  /// Escape hatch for custom differentiable ops (and for deliberately broken
  /// backward rules in verification tests). `backward` receives the tape and
  /// must accumulate into the parents' grads.
  NodeId push_custom(Tensor value, std::vector<NodeId> parents,
                     std::function<void(Tape&, NodeId)> backward);

  const Tensor& value(NodeId id) const { return nodes_[id.index].value; }
  /// Gradient of a node after backward(); zero tensor if no flow reached it.
  const Tensor& grad(NodeId id);
  Tensor& grad_buffer(NodeId id);
  bool requires_grad(NodeId id) const { return nodes_[id.index].requires_grad; }

  /// Reverse sweep from a scalar root. Clears previous gradients.
  void backward(NodeId root);

  size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool grad_alloc = false;
    std::function<void(Tape&, NodeId)> backward;
  };

  NodeId push(Tensor value, bool requires_grad, std::function<void(Tape&, NodeId)> backward);
  void check_finite(const Tensor& t, const char* op) const;

  std::vector<Node> nodes_;
};

// Loss heads. Targets are usually constants; gradients flow to both sides
// when both require them.

/// Mean absolute percentage error in percent: 100/N * sum |(pred-t)/t|.
/// Throws std::invalid_argument when any target is zero.
NodeId mape_loss(Tape& tape, NodeId pred, NodeId target);
NodeId mse_loss(Tape& tape, NodeId pred, NodeId target);

}  // namespace flowtwin::nn
