#include "auecrl/math.hpp"

#include <algorithm>
#include <cmath>

#include "auecrl/errors.hpp"

namespace auecrl::math {

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor matvec(const Tensor& m, const Tensor& x) {
  if (m.rank() != 2 || x.rank() != 1 || m.dim(1) != x.dim(0)) {
    throw ShapeError("matvec: incompatible shapes " + m.shape_str() + " and " + x.shape_str());
  }
  const std::int64_t rows = m.dim(0), cols = m.dim(1);
  Tensor y = Tensor::zeros({rows});
  for (std::int64_t i = 0; i < rows; ++i) {
    double acc = 0.0;
    for (std::int64_t j = 0; j < cols; ++j) acc += m(i, j) * x(j);
    y(i) = acc;
  }
  return y;
}

Tensor vecmat(const Tensor& x, const Tensor& m) {
  if (x.rank() != 1 || m.rank() != 2 || x.dim(0) != m.dim(0)) {
    throw ShapeError("vecmat: incompatible shapes " + x.shape_str() + " and " + m.shape_str());
  }
  const std::int64_t rows = m.dim(0), cols = m.dim(1);
  Tensor y = Tensor::zeros({cols});
  for (std::int64_t i = 0; i < rows; ++i) {
    const double xi = x(i);
    for (std::int64_t j = 0; j < cols; ++j) y(j) += xi * m(i, j);
  }
  return y;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: incompatible shapes " + a.shape_str() + " and " + b.shape_str());
  }
  const std::int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor c = Tensor::zeros({m, n});
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t p = 0; p < k; ++p) {
      const double aip = a(i, p);
      for (std::int64_t j = 0; j < n; ++j) c(i, j) += aip * b(p, j);
    }
  }
  return c;
}

double dot(const Tensor& x, const Tensor& y) {
  if (x.rank() != 1 || y.rank() != 1 || x.dim(0) != y.dim(0)) {
    throw ShapeError("dot: incompatible shapes " + x.shape_str() + " and " + y.shape_str());
  }
  double acc = 0.0;
  for (std::int64_t i = 0; i < x.dim(0); ++i) acc += x(i) * y(i);
  return acc;
}

void softmax_inplace(Tensor& v) {
  auto vals = v.values();
  double mx = *std::max_element(vals.begin(), vals.end());
  double sum = 0.0;
  for (double& x : vals) {
    x = std::exp(x - mx);
    sum += x;
  }
  for (double& x : vals) x /= sum;
}

Tensor softmax(const Tensor& v) {
  if (v.rank() != 1) throw ShapeError("softmax expects a rank-1 tensor, got " + v.shape_str());
  Tensor out = v;
  softmax_inplace(out);
  return out;
}

}  // namespace auecrl::math
