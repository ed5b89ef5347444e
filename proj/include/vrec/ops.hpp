#pragma once

// Differentiable operators. Shapes are checked eagerly; mismatches throw
// std::invalid_argument naming the operator and the offending shapes. The
// only implicit broadcasting is scalar-with-tensor (mul_scalar) and the
// explicit row bias in add_bias.

#include <span>
#include <vector>

#include "vrec/tensor.hpp"

namespace vrec::ops {

// [m,k]x[k,n] -> [m,n]; a 1-D left operand is a row, a 1-D right operand a
// column, and the corresponding output axis is dropped.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);
// s must hold exactly one element.
Tensor mul_scalar(const Tensor& a, const Tensor& s);
// a: [m,n] plus bias [n] added to every row; a: [n] plus bias [n].
Tensor add_bias(const Tensor& a, const Tensor& bias);

Tensor log(const Tensor& a);
Tensor reciprocal(const Tensor& a);
Tensor gelu(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor clamp_min(const Tensor& a, double lo);
Tensor clamp_max(const Tensor& a, double hi);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// Row-wise over the last axis.
Tensor softmax(const Tensor& a);
Tensor log_softmax(const Tensor& a);
// Square [T,T] scores; entries above the diagonal get probability 0.
Tensor causal_softmax(const Tensor& a);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-5);

// Gathers rows of a [V,d] table -> [ids.size(), d].
Tensor embedding(const Tensor& table, std::span<const int> ids);
Tensor row(const Tensor& a, std::size_t r);                       // [d]
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end);
Tensor column(const Tensor& a, std::size_t c);                    // [m]
Tensor element(const Tensor& a, std::size_t i);                   // scalar
// Vectors count as single rows; result is [total_rows, d].
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor stack_scalars(const std::vector<Tensor>& scalars);         // [n]

// -sum softmax(z) * log_softmax(z) over a logit vector.
Tensor entropy_from_logits(const Tensor& logits);

}  // namespace vrec::ops
