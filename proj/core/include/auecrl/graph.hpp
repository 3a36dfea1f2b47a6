#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "auecrl/tensor.hpp"

namespace auecrl {

struct NodeRef {
  std::int32_t idx = -1;
  bool valid() const { return idx >= 0; }
};

// Reverse-mode tape over exactly the operator set the training objectives
// need. Nodes are evaluated eagerly at construction; `recompute()` replays
// the whole tape after leaf values were mutated (used by the finite
// difference checker), and `backward()` fills gradients from a scalar root.
//
// Evaluation is strictly sequential, so identical inputs produce
// bit-identical values and gradients.
class Graph {
 public:
  // Differentiable named leaf (a parameter or free input).
  NodeRef leaf(std::string name, Tensor value, bool requires_grad = true);
  // Non-differentiable data (targets, priors, raw samples).
  NodeRef constant(Tensor value);

  NodeRef add(NodeRef a, NodeRef b);
  NodeRef sub(NodeRef a, NodeRef b);
  NodeRef scale(NodeRef a, double c);
  NodeRef hadamard(NodeRef a, NodeRef b);
  NodeRef matmul(NodeRef a, NodeRef b);
  NodeRef matvec(NodeRef m, NodeRef x);
  NodeRef vecmat(NodeRef x, NodeRef m);
  NodeRef dot(NodeRef x, NodeRef y);
  NodeRef tanh(NodeRef a);
  NodeRef sigmoid(NodeRef a);
  // max(x, 0) elementwise; subgradient at the kink is fixed to 0.
  NodeRef hinge(NodeRef a);
  NodeRef softmax(NodeRef x);
  // Plain ratio normalization x / sum(x); rejects non-positive sums.
  NodeRef ratio_normalize(NodeRef x);
  // Rank-0 inputs are treated as length-1 segments.
  NodeRef concat(std::span<const NodeRef> parts);
  // n vectors of length d stacked as the columns of a [d x n] matrix.
  NodeRef stack_cols(std::span<const NodeRef> cols);
  NodeRef index(NodeRef x, std::int64_t i);
  NodeRef sum(NodeRef x);
  NodeRef mean(NodeRef x);
  // sum((a - b)^2) over all entries.
  NodeRef squared_error(NodeRef a, NodeRef b);
  // -sum(y * log(max(p, 1e-12))); `target` must be a constant.
  NodeRef cross_entropy(NodeRef probs, NodeRef target);

  const Tensor& value(NodeRef n) const;
  const Tensor& grad(NodeRef n) const;
  const std::string& name(NodeRef n) const;
  bool requires_grad(NodeRef n) const;

  // Mutable access to a leaf/constant value; callers must recompute() after.
  Tensor& leaf_value(NodeRef n);

  // Replays every node's forward computation in tape order.
  void recompute();

  // Reverse-mode sweep from a scalar-valued root. Resets all gradients,
  // then accumulates; may be called repeatedly with different roots.
  void backward(NodeRef root);

  std::int64_t node_count() const { return static_cast<std::int64_t>(nodes_.size()); }

  static constexpr double kLogGuard = 1e-12;

 private:
  enum class Op : std::uint8_t {
    kLeaf, kConstant, kAdd, kSub, kScale, kHadamard, kMatmul, kMatvec,
    kVecmat, kDot, kTanh, kSigmoid, kHinge, kSoftmax, kRatioNormalize,
    kConcat, kStackCols, kIndex, kSum, kMean, kSquaredError, kCrossEntropy,
  };

  struct Node {
    Op op;
    bool requires_grad = false;
    std::vector<std::int32_t> args;
    std::int64_t aux = 0;   // index for kIndex
    double caux = 0.0;      // constant for kScale
    std::string name;       // leaves only
    Tensor value;
    Tensor grad;
  };

  NodeRef push(Node node);
  void forward_node(Node& n);
  void backward_node(const Node& n);
  const Node& at(NodeRef n) const;
  Node& at(NodeRef n);

  std::vector<Node> nodes_;
};

}  // namespace auecrl
