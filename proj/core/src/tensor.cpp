#include "auecrl/tensor.hpp"

#include <cmath>
#include <sstream>

#include "auecrl/errors.hpp"

namespace auecrl {

namespace {

std::int64_t shape_product(const std::vector<std::int64_t>& shape) {
  std::int64_t n = 1;
  for (std::int64_t d : shape) {
    if (d <= 0) throw ShapeError("tensor dimensions must be positive");
    n *= d;
  }
  return n;
}

}  // namespace

Tensor Tensor::scalar(double v) {
  Tensor t;
  t.data_[0] = v;
  t.check_finite("scalar");
  return t;
}

Tensor Tensor::zeros(std::vector<std::int64_t> shape) {
  std::int64_t n = shape_product(shape);
  return Tensor(std::move(shape), std::vector<double>(static_cast<size_t>(n), 0.0));
}

Tensor Tensor::full(std::vector<std::int64_t> shape, double v) {
  std::int64_t n = shape_product(shape);
  Tensor t(std::move(shape), std::vector<double>(static_cast<size_t>(n), v));
  t.check_finite("full");
  return t;
}

Tensor Tensor::vector(std::vector<double> values) {
  if (values.empty()) throw ShapeError("vector requires at least one element");
  const std::int64_t n = static_cast<std::int64_t>(values.size());
  Tensor t({n}, std::move(values));
  t.check_finite("vector");
  return t;
}

Tensor Tensor::matrix(std::int64_t rows, std::int64_t cols,
                      std::vector<double> values) {
  return with_shape({rows, cols}, std::move(values));
}

Tensor Tensor::with_shape(std::vector<std::int64_t> shape,
                          std::vector<double> values) {
  std::int64_t n = shape_product(shape);
  if (n != static_cast<std::int64_t>(values.size())) {
    std::ostringstream os;
    os << "data length " << values.size() << " does not match shape product " << n;
    throw ShapeError(os.str());
  }
  Tensor t(std::move(shape), std::move(values));
  t.check_finite("with_shape");
  return t;
}

Tensor Tensor::one_hot(std::int64_t size, std::int64_t index) {
  if (index < 0 || index >= size) throw ShapeError("one_hot index out of range");
  Tensor t = zeros({size});
  t(index) = 1.0;
  return t;
}

double Tensor::as_scalar() const {
  if (size() != 1) throw ShapeError("as_scalar on tensor of size " + std::to_string(size()));
  return data_[0];
}

void Tensor::fill(double v) {
  for (double& x : data_) x = v;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << 'x';
    os << shape_[i];
  }
  os << ']';
  return os.str();
}

void Tensor::check_finite(const std::string& context) const {
  for (double x : data_) {
    if (!std::isfinite(x)) {
      throw NumericsError("non-finite value in " + context);
    }
  }
}

}  // namespace auecrl
