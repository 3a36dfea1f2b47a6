#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace auecrl {

// Dense row-major tensor of 64-bit reals, rank 0 (scalar) to 2 (matrix).
// Non-finite values are rejected at creation; computed results are checked
// by the graph after every operator.
class Tensor {
 public:
  Tensor() : data_(1, 0.0) {}  // rank-0 zero

  static Tensor scalar(double v);
  static Tensor zeros(std::vector<std::int64_t> shape);
  static Tensor full(std::vector<std::int64_t> shape, double v);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::int64_t rows, std::int64_t cols,
                       std::vector<double> values);
  static Tensor with_shape(std::vector<std::int64_t> shape,
                           std::vector<double> values);
  static Tensor one_hot(std::int64_t size, std::int64_t index);

  int rank() const { return static_cast<int>(shape_.size()); }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  const std::vector<std::int64_t>& shape() const { return shape_; }
  std::int64_t dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  bool is_scalar() const { return shape_.empty(); }
  double as_scalar() const;

  double operator[](std::int64_t flat) const { return data_[static_cast<size_t>(flat)]; }
  double& operator[](std::int64_t flat) { return data_[static_cast<size_t>(flat)]; }

  // rank-1 access
  double operator()(std::int64_t i) const { return data_[static_cast<size_t>(i)]; }
  double& operator()(std::int64_t i) { return data_[static_cast<size_t>(i)]; }

  // rank-2 access
  double operator()(std::int64_t i, std::int64_t j) const {
    return data_[static_cast<size_t>(i * shape_[1] + j)];
  }
  double& operator()(std::int64_t i, std::int64_t j) {
    return data_[static_cast<size_t>(i * shape_[1] + j)];
  }

  std::span<const double> values() const { return data_; }
  std::span<double> values() { return data_; }

  void fill(double v);
  std::string shape_str() const;  // e.g. "[3x4]", "[]" for scalars

  // Throws NumericsError naming `context` if any entry is NaN/Inf.
  void check_finite(const std::string& context) const;

  bool operator==(const Tensor& other) const = default;

 private:
  Tensor(std::vector<std::int64_t> shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {}

  std::vector<std::int64_t> shape_;
  std::vector<double> data_;
};

}  // namespace auecrl
