#pragma once

#include <span>

#include "auecrl/tensor.hpp"

// Low-level numeric kernels shared by the plain forward path and the
// autodiff graph, so both routes produce bit-identical values.
namespace auecrl::math {

double stable_sigmoid(double x);

// y = M x, M [m x n], x [n]
Tensor matvec(const Tensor& m, const Tensor& x);

// y = x^T M, x [m], M [m x n]  (also covers M^T x for column-stored M)
Tensor vecmat(const Tensor& x, const Tensor& m);

// C = A B, A [m x k], B [k x n]
Tensor matmul(const Tensor& a, const Tensor& b);

double dot(const Tensor& x, const Tensor& y);

// In-place max-subtracted softmax over all entries of a rank-1 tensor.
void softmax_inplace(Tensor& v);

Tensor softmax(const Tensor& v);

}  // namespace auecrl::math
