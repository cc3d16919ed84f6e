#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "hydra/tensor.h"

namespace hydra {

// Thrown when an operation is evaluated outside its domain (log of x <= 0).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Differentiable tensor operations. Binary elementwise operations take equal
// shapes, or a 1x1 operand that is broadcast to the other's shape.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor minimum(const Tensor& a, const Tensor& b);
Tensor maximum(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);

// x[m x n] + bias[1 x n] added to every row.
Tensor add_row(const Tensor& x, const Tensor& bias);

Tensor neg(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);  // throws DomainError on non-positive input
Tensor abs(const Tensor& x);

Tensor sum(const Tensor& x);   // -> 1x1
Tensor mean(const Tensor& x);  // -> 1x1

Tensor softmax_rows(const Tensor& x);
Tensor layernorm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                 double eps = 1e-5);

Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows);

// Sum over all entries of the sigmoid focal loss of `logits` against 0/1
// `targets` (same shape, row-major). p_t is clamped below at 1e-12 inside the
// log, so a saturated correct prediction contributes exactly zero.
Tensor sigmoid_focal_loss(const Tensor& logits, std::span<const double> targets,
                          double alpha, double gamma);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }

}  // namespace hydra
