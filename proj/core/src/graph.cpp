#include "auecrl/graph.hpp"

#include <algorithm>
#include <cmath>

#include "auecrl/errors.hpp"
#include "auecrl/math.hpp"

namespace auecrl {

namespace {

const char* op_name(int op) {
  static const char* names[] = {
      "leaf", "constant", "add", "sub", "scale", "hadamard", "matmul",
      "matvec", "vecmat", "dot", "tanh", "sigmoid", "hinge", "softmax",
      "ratio_normalize", "concat", "stack_cols", "index", "sum", "mean",
      "squared_error", "cross_entropy",
  };
  return names[op];
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() +
                     " vs " + b.shape_str());
  }
}

}  // namespace

NodeRef Graph::leaf(std::string name, Tensor value, bool requires_grad) {
  Node n;
  n.op = Op::kLeaf;
  n.requires_grad = requires_grad;
  n.name = std::move(name);
  n.value = std::move(value);
  return push(std::move(n));
}

NodeRef Graph::constant(Tensor value) {
  Node n;
  n.op = Op::kConstant;
  n.value = std::move(value);
  return push(std::move(n));
}

NodeRef Graph::add(NodeRef a, NodeRef b) {
  Node n;
  n.op = Op::kAdd;
  n.args = {a.idx, b.idx};
  return push(std::move(n));
}

NodeRef Graph::sub(NodeRef a, NodeRef b) {
  Node n;
  n.op = Op::kSub;
  n.args = {a.idx, b.idx};
  return push(std::move(n));
}

NodeRef Graph::scale(NodeRef a, double c) {
  if (!std::isfinite(c)) throw NumericsError("scale: non-finite factor");
  Node n;
  n.op = Op::kScale;
  n.args = {a.idx};
  n.caux = c;
  return push(std::move(n));
}

NodeRef Graph::hadamard(NodeRef a, NodeRef b) {
  Node n;
  n.op = Op::kHadamard;
  n.args = {a.idx, b.idx};
  return push(std::move(n));
}

NodeRef Graph::matmul(NodeRef a, NodeRef b) {
  Node n;
  n.op = Op::kMatmul;
  n.args = {a.idx, b.idx};
  return push(std::move(n));
}

NodeRef Graph::matvec(NodeRef m, NodeRef x) {
  Node n;
  n.op = Op::kMatvec;
  n.args = {m.idx, x.idx};
  return push(std::move(n));
}

NodeRef Graph::vecmat(NodeRef x, NodeRef m) {
  Node n;
  n.op = Op::kVecmat;
  n.args = {x.idx, m.idx};
  return push(std::move(n));
}

NodeRef Graph::dot(NodeRef x, NodeRef y) {
  Node n;
  n.op = Op::kDot;
  n.args = {x.idx, y.idx};
  return push(std::move(n));
}

NodeRef Graph::tanh(NodeRef a) {
  Node n;
  n.op = Op::kTanh;
  n.args = {a.idx};
  return push(std::move(n));
}

NodeRef Graph::sigmoid(NodeRef a) {
  Node n;
  n.op = Op::kSigmoid;
  n.args = {a.idx};
  return push(std::move(n));
}

NodeRef Graph::hinge(NodeRef a) {
  Node n;
  n.op = Op::kHinge;
  n.args = {a.idx};
  return push(std::move(n));
}

NodeRef Graph::softmax(NodeRef x) {
  Node n;
  n.op = Op::kSoftmax;
  n.args = {x.idx};
  return push(std::move(n));
}

NodeRef Graph::ratio_normalize(NodeRef x) {
  Node n;
  n.op = Op::kRatioNormalize;
  n.args = {x.idx};
  return push(std::move(n));
}

NodeRef Graph::concat(std::span<const NodeRef> parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  Node n;
  n.op = Op::kConcat;
  for (NodeRef p : parts) n.args.push_back(p.idx);
  return push(std::move(n));
}

NodeRef Graph::stack_cols(std::span<const NodeRef> cols) {
  if (cols.empty()) throw ShapeError("stack_cols: no inputs");
  Node n;
  n.op = Op::kStackCols;
  for (NodeRef c : cols) n.args.push_back(c.idx);
  return push(std::move(n));
}

NodeRef Graph::index(NodeRef x, std::int64_t i) {
  Node n;
  n.op = Op::kIndex;
  n.args = {x.idx};
  n.aux = i;
  return push(std::move(n));
}

NodeRef Graph::sum(NodeRef x) {
  Node n;
  n.op = Op::kSum;
  n.args = {x.idx};
  return push(std::move(n));
}

NodeRef Graph::mean(NodeRef x) {
  Node n;
  n.op = Op::kMean;
  n.args = {x.idx};
  return push(std::move(n));
}

NodeRef Graph::squared_error(NodeRef a, NodeRef b) {
  Node n;
  n.op = Op::kSquaredError;
  n.args = {a.idx, b.idx};
  return push(std::move(n));
}

NodeRef Graph::cross_entropy(NodeRef probs, NodeRef target) {
  if (requires_grad(target)) {
    throw ShapeError("cross_entropy: target must be a constant");
  }
  Node n;
  n.op = Op::kCrossEntropy;
  n.args = {probs.idx, target.idx};
  return push(std::move(n));
}

const Tensor& Graph::value(NodeRef n) const { return at(n).value; }

const Tensor& Graph::grad(NodeRef n) const {
  const Node& node = at(n);
  if (!node.grad.same_shape(node.value)) {
    throw NumericsError("grad requested before backward()");
  }
  return node.grad;
}

const std::string& Graph::name(NodeRef n) const { return at(n).name; }

bool Graph::requires_grad(NodeRef n) const { return at(n).requires_grad; }

Tensor& Graph::leaf_value(NodeRef n) {
  Node& node = at(n);
  if (node.op != Op::kLeaf && node.op != Op::kConstant) {
    throw ShapeError("leaf_value: node is not a leaf");
  }
  return node.value;
}

void Graph::recompute() {
  for (Node& n : nodes_) forward_node(n);
}

void Graph::backward(NodeRef root) {
  Node& r = at(root);
  if (r.value.size() != 1) {
    throw ShapeError("backward: root must be scalar-valued, got " + r.value.shape_str());
  }
  const std::int32_t root_idx = root.idx;
  for (std::int32_t i = 0; i <= root_idx; ++i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (!n.grad.same_shape(n.value)) {
      n.grad = Tensor::zeros(n.value.shape());
    } else {
      n.grad.fill(0.0);
    }
  }
  r.grad[0] = 1.0;
  for (std::int32_t i = root_idx; i >= 0; --i) {
    const Node& n = nodes_[static_cast<size_t>(i)];
    if (!n.requires_grad || n.args.empty()) continue;
    backward_node(n);
  }
}

NodeRef Graph::push(Node node) {
  if (nodes_.size() >= static_cast<size_t>(INT32_MAX)) {
    throw NumericsError("graph node limit exceeded");
  }
  for (std::int32_t a : node.args) {
    if (a < 0 || a >= static_cast<std::int32_t>(nodes_.size())) {
      throw ShapeError("operand node does not belong to this graph");
    }
    node.requires_grad = node.requires_grad || nodes_[static_cast<size_t>(a)].requires_grad;
  }
  forward_node(node);
  nodes_.push_back(std::move(node));
  return NodeRef{static_cast<std::int32_t>(nodes_.size() - 1)};
}

void Graph::forward_node(Node& n) {
  auto arg = [&](size_t i) -> const Tensor& {
    return nodes_[static_cast<size_t>(n.args[i])].value;
  };
  switch (n.op) {
    case Op::kLeaf:
    case Op::kConstant:
      break;
    case Op::kAdd: {
      require_same_shape(arg(0), arg(1), "add");
      Tensor out = arg(0);
      auto b = arg(1).values();
      auto o = out.values();
      for (std::int64_t i = 0; i < out.size(); ++i) o[static_cast<size_t>(i)] += b[static_cast<size_t>(i)];
      n.value = std::move(out);
      break;
    }
    case Op::kSub: {
      require_same_shape(arg(0), arg(1), "sub");
      Tensor out = arg(0);
      auto b = arg(1).values();
      auto o = out.values();
      for (std::int64_t i = 0; i < out.size(); ++i) o[static_cast<size_t>(i)] -= b[static_cast<size_t>(i)];
      n.value = std::move(out);
      break;
    }
    case Op::kScale: {
      Tensor out = arg(0);
      for (double& x : out.values()) x *= n.caux;
      n.value = std::move(out);
      break;
    }
    case Op::kHadamard: {
      require_same_shape(arg(0), arg(1), "hadamard");
      Tensor out = arg(0);
      auto b = arg(1).values();
      auto o = out.values();
      for (std::int64_t i = 0; i < out.size(); ++i) o[static_cast<size_t>(i)] *= b[static_cast<size_t>(i)];
      n.value = std::move(out);
      break;
    }
    case Op::kMatmul:
      n.value = math::matmul(arg(0), arg(1));
      break;
    case Op::kMatvec:
      n.value = math::matvec(arg(0), arg(1));
      break;
    case Op::kVecmat:
      n.value = math::vecmat(arg(0), arg(1));
      break;
    case Op::kDot:
      n.value = Tensor::scalar(math::dot(arg(0), arg(1)));
      break;
    case Op::kTanh: {
      Tensor out = arg(0);
      for (double& x : out.values()) x = std::tanh(x);
      n.value = std::move(out);
      break;
    }
    case Op::kSigmoid: {
      Tensor out = arg(0);
      for (double& x : out.values()) x = math::stable_sigmoid(x);
      n.value = std::move(out);
      break;
    }
    case Op::kHinge: {
      Tensor out = arg(0);
      for (double& x : out.values()) x = x > 0.0 ? x : 0.0;
      n.value = std::move(out);
      break;
    }
    case Op::kSoftmax:
      n.value = math::softmax(arg(0));
      break;
    case Op::kRatioNormalize: {
      const Tensor& x = arg(0);
      if (x.rank() != 1) throw ShapeError("ratio_normalize expects a rank-1 tensor");
      double s = 0.0;
      for (double v : x.values()) s += v;
      if (s <= 0.0) {
        throw NumericsError("ratio_normalize: non-positive coefficient sum");
      }
      Tensor out = x;
      for (double& v : out.values()) v /= s;
      n.value = std::move(out);
      break;
    }
    case Op::kConcat: {
      std::int64_t total = 0;
      for (size_t i = 0; i < n.args.size(); ++i) {
        const Tensor& p = arg(i);
        if (p.rank() > 1) throw ShapeError("concat expects scalars or vectors");
        total += p.size();
      }
      Tensor out = Tensor::zeros({total});
      std::int64_t off = 0;
      for (size_t i = 0; i < n.args.size(); ++i) {
        for (std::int64_t j = 0; j < arg(i).size(); ++j) out(off++) = arg(i)[j];
      }
      n.value = std::move(out);
      break;
    }
    case Op::kStackCols: {
      const std::int64_t d = arg(0).size();
      const std::int64_t k = static_cast<std::int64_t>(n.args.size());
      Tensor out = Tensor::zeros({d, k});
      for (std::int64_t j = 0; j < k; ++j) {
        const Tensor& c = arg(static_cast<size_t>(j));
        if (c.rank() != 1 || c.size() != d) {
          throw ShapeError("stack_cols: columns must be equal-length vectors");
        }
        for (std::int64_t i = 0; i < d; ++i) out(i, j) = c(i);
      }
      n.value = std::move(out);
      break;
    }
    case Op::kIndex: {
      const Tensor& x = arg(0);
      if (x.rank() != 1 || n.aux < 0 || n.aux >= x.size()) {
        throw ShapeError("index: position out of range for " + x.shape_str());
      }
      n.value = Tensor::scalar(x(n.aux));
      break;
    }
    case Op::kSum: {
      double acc = 0.0;
      for (double v : arg(0).values()) acc += v;
      n.value = Tensor::scalar(acc);
      break;
    }
    case Op::kMean: {
      double acc = 0.0;
      for (double v : arg(0).values()) acc += v;
      n.value = Tensor::scalar(acc / static_cast<double>(arg(0).size()));
      break;
    }
    case Op::kSquaredError: {
      require_same_shape(arg(0), arg(1), "squared_error");
      double acc = 0.0;
      auto a = arg(0).values();
      auto b = arg(1).values();
      for (size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
      }
      n.value = Tensor::scalar(acc);
      break;
    }
    case Op::kCrossEntropy: {
      require_same_shape(arg(0), arg(1), "cross_entropy");
      double acc = 0.0;
      auto p = arg(0).values();
      auto y = arg(1).values();
      for (size_t i = 0; i < p.size(); ++i) {
        acc -= y[i] * std::log(std::max(p[i], kLogGuard));
      }
      n.value = Tensor::scalar(acc);
      break;
    }
  }
  n.value.check_finite(std::string(op_name(static_cast<int>(n.op))) +
                       (n.name.empty() ? "" : " '" + n.name + "'"));
}

void Graph::backward_node(const Node& n) {
  auto argv = [&](size_t i) -> const Tensor& {
    return nodes_[static_cast<size_t>(n.args[i])].value;
  };
  auto argg = [&](size_t i) -> Tensor& {
    return nodes_[static_cast<size_t>(n.args[i])].grad;
  };
  auto wants = [&](size_t i) {
    return nodes_[static_cast<size_t>(n.args[i])].requires_grad;
  };
  const Tensor& g = n.grad;
  switch (n.op) {
    case Op::kLeaf:
    case Op::kConstant:
      break;
    case Op::kAdd:
      for (size_t k = 0; k < 2; ++k) {
        if (!wants(k)) continue;
        auto dst = argg(k).values();
        auto src = g.values();
        for (size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
      }
      break;
    case Op::kSub: {
      if (wants(0)) {
        auto dst = argg(0).values();
        for (size_t i = 0; i < dst.size(); ++i) dst[i] += g.values()[i];
      }
      if (wants(1)) {
        auto dst = argg(1).values();
        for (size_t i = 0; i < dst.size(); ++i) dst[i] -= g.values()[i];
      }
      break;
    }
    case Op::kScale:
      if (wants(0)) {
        auto dst = argg(0).values();
        for (size_t i = 0; i < dst.size(); ++i) dst[i] += n.caux * g.values()[i];
      }
      break;
    case Op::kHadamard:
      if (wants(0)) {
        auto dst = argg(0).values();
        auto b = argv(1).values();
        for (size_t i = 0; i < dst.size(); ++i) dst[i] += g.values()[i] * b[i];
      }
      if (wants(1)) {
        auto dst = argg(1).values();
        auto a = argv(0).values();
        for (size_t i = 0; i < dst.size(); ++i) dst[i] += g.values()[i] * a[i];
      }
      break;
    case Op::kMatmul: {
      const Tensor& a = argv(0);
      const Tensor& b = argv(1);
      const std::int64_t m = a.dim(0), k = a.dim(1), c = b.dim(1);
      if (wants(0)) {  // dA += G B^T
        Tensor& da = argg(0);
        for (std::int64_t i = 0; i < m; ++i)
          for (std::int64_t p = 0; p < k; ++p) {
            double acc = 0.0;
            for (std::int64_t j = 0; j < c; ++j) acc += g(i, j) * b(p, j);
            da(i, p) += acc;
          }
      }
      if (wants(1)) {  // dB += A^T G
        Tensor& db = argg(1);
        for (std::int64_t p = 0; p < k; ++p)
          for (std::int64_t j = 0; j < c; ++j) {
            double acc = 0.0;
            for (std::int64_t i = 0; i < m; ++i) acc += a(i, p) * g(i, j);
            db(p, j) += acc;
          }
      }
      break;
    }
    case Op::kMatvec: {  // y = M x
      const Tensor& mt = argv(0);
      const Tensor& x = argv(1);
      const std::int64_t rows = mt.dim(0), cols = mt.dim(1);
      if (wants(0)) {
        Tensor& dm = argg(0);
        for (std::int64_t i = 0; i < rows; ++i)
          for (std::int64_t j = 0; j < cols; ++j) dm(i, j) += g(i) * x(j);
      }
      if (wants(1)) {
        Tensor& dx = argg(1);
        for (std::int64_t i = 0; i < rows; ++i) {
          const double gi = g(i);
          for (std::int64_t j = 0; j < cols; ++j) dx(j) += mt(i, j) * gi;
        }
      }
      break;
    }
    case Op::kVecmat: {  // y = x^T M
      const Tensor& x = argv(0);
      const Tensor& mt = argv(1);
      const std::int64_t rows = mt.dim(0), cols = mt.dim(1);
      if (wants(0)) {
        Tensor& dx = argg(0);
        for (std::int64_t i = 0; i < rows; ++i) {
          double acc = 0.0;
          for (std::int64_t j = 0; j < cols; ++j) acc += mt(i, j) * g(j);
          dx(i) += acc;
        }
      }
      if (wants(1)) {
        Tensor& dm = argg(1);
        for (std::int64_t i = 0; i < rows; ++i) {
          const double xi = x(i);
          for (std::int64_t j = 0; j < cols; ++j) dm(i, j) += xi * g(j);
        }
      }
      break;
    }
    case Op::kDot: {
      const double gs = g[0];
      if (wants(0)) {
        auto dst = argg(0).values();
        auto y = argv(1).values();
        for (size_t i = 0; i < dst.size(); ++i) dst[i] += gs * y[i];
      }
      if (wants(1)) {
        auto dst = argg(1).values();
        auto x = argv(0).values();
        for (size_t i = 0; i < dst.size(); ++i) dst[i] += gs * x[i];
      }
      break;
    }
    case Op::kTanh:
      if (wants(0)) {
        auto dst = argg(0).values();
        auto t = n.value.values();
        for (size_t i = 0; i < dst.size(); ++i) dst[i] += g.values()[i] * (1.0 - t[i] * t[i]);
      }
      break;
    case Op::kSigmoid:
      if (wants(0)) {
        auto dst = argg(0).values();
        auto s = n.value.values();
        for (size_t i = 0; i < dst.size(); ++i) dst[i] += g.values()[i] * s[i] * (1.0 - s[i]);
      }
      break;
    case Op::kHinge:
      if (wants(0)) {
        auto dst = argg(0).values();
        auto x = argv(0).values();
        for (size_t i = 0; i < dst.size(); ++i) {
          if (x[i] > 0.0) dst[i] += g.values()[i];
        }
      }
      break;
    case Op::kSoftmax:
      if (wants(0)) {
        auto y = n.value.values();
        auto gv = g.values();
        double gy = 0.0;
        for (size_t i = 0; i < y.size(); ++i) gy += gv[i] * y[i];
        auto dst = argg(0).values();
        for (size_t i = 0; i < y.size(); ++i) dst[i] += y[i] * (gv[i] - gy);
      }
      break;
    case Op::kRatioNormalize:
      if (wants(0)) {
        auto x = argv(0).values();
        auto gv = g.values();
        double s = 0.0;
        for (double v : x) s += v;
        double gx = 0.0;
        for (size_t i = 0; i < x.size(); ++i) gx += gv[i] * x[i];
        auto dst = argg(0).values();
        for (size_t i = 0; i < x.size(); ++i) dst[i] += gv[i] / s - gx / (s * s);
      }
      break;
    case Op::kConcat: {
      std::int64_t off = 0;
      for (size_t k = 0; k < n.args.size(); ++k) {
        const std::int64_t len = argv(k).size();
        if (wants(k)) {
          auto dst = argg(k).values();
          for (std::int64_t i = 0; i < len; ++i) {
            dst[static_cast<size_t>(i)] += g(off + i);
          }
        }
        off += len;
      }
      break;
    }
    case Op::kStackCols: {
      const std::int64_t d = argv(0).size();
      for (size_t j = 0; j < n.args.size(); ++j) {
        if (!wants(j)) continue;
        Tensor& dc = argg(j);
        for (std::int64_t i = 0; i < d; ++i) dc(i) += g(i, static_cast<std::int64_t>(j));
      }
      break;
    }
    case Op::kIndex:
      if (wants(0)) argg(0)(n.aux) += g[0];
      break;
    case Op::kSum:
      if (wants(0)) {
        auto dst = argg(0).values();
        for (double& v : dst) v += g[0];
      }
      break;
    case Op::kMean:
      if (wants(0)) {
        auto dst = argg(0).values();
        const double gi = g[0] / static_cast<double>(dst.size());
        for (double& v : dst) v += gi;
      }
      break;
    case Op::kSquaredError: {
      auto a = argv(0).values();
      auto b = argv(1).values();
      const double gs = g[0];
      if (wants(0)) {
        auto dst = argg(0).values();
        for (size_t i = 0; i < a.size(); ++i) dst[i] += 2.0 * gs * (a[i] - b[i]);
      }
      if (wants(1)) {
        auto dst = argg(1).values();
        for (size_t i = 0; i < a.size(); ++i) dst[i] -= 2.0 * gs * (a[i] - b[i]);
      }
      break;
    }
    case Op::kCrossEntropy:
      if (wants(0)) {
        auto p = argv(0).values();
        auto y = argv(1).values();
        auto dst = argg(0).values();
        const double gs = g[0];
        for (size_t i = 0; i < p.size(); ++i) {
          if (p[i] > kLogGuard) dst[i] -= gs * y[i] / p[i];
        }
      }
      break;
  }
}

const Graph::Node& Graph::at(NodeRef n) const {
  if (!n.valid() || n.idx >= static_cast<std::int32_t>(nodes_.size())) {
    throw ShapeError("invalid node reference");
  }
  return nodes_[static_cast<size_t>(n.idx)];
}

Graph::Node& Graph::at(NodeRef n) {
  return const_cast<Node&>(static_cast<const Graph*>(this)->at(n));
}

}  // namespace auecrl
