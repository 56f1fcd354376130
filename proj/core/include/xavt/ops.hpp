#pragma once

#include <vector>

#include "xavt/tape.hpp"
#include "xavt/tensor.hpp"

namespace xavt {

// Differentiable primitives. Each op computes its result eagerly and, when a
// tape is active and any input requires grad, records a backward rule.
// Reductions and dot products accumulate in double regardless of dtype.

Tensor add(const Tensor& a, const Tensor& b);           // same shape
Tensor sub(const Tensor& a, const Tensor& b);           // same shape
Tensor mul(const Tensor& a, const Tensor& b);           // same shape, elementwise
Tensor scale(const Tensor& a, double c);
// b.shape must be a suffix of a.shape; b is broadcast over the leading axes.
Tensor add_broadcast(const Tensor& a, const Tensor& b);

// a [..,m,k] x b [..,k,n] -> [..,m,n]. Leading batch extents must match
// exactly, or b may be rank-2 (shared right operand).
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor softmax_lastdim(const Tensor& x);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps);
Tensor gelu(const Tensor& x);  // tanh approximation

Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, const std::vector<int>& perm);
Tensor transpose_last2(const Tensor& x);
Tensor concat(const std::vector<Tensor>& xs, int axis);
Tensor narrow(const Tensor& x, int axis, int64_t start, int64_t len);
// out[i, ...] = x[...] for i in [0,n); adds a new leading axis of extent n
Tensor repeat_leading(const Tensor& x, int64_t n);

Tensor sum_axis(const Tensor& x, int axis);
Tensor mean_axis(const Tensor& x, int axis);
Tensor sum_all(const Tensor& x);  // scalar [1]

// out[i, ...] = table[indices[i], ...]; indices are constants.
Tensor gather_rows(const Tensor& table, const std::vector<int64_t>& indices);

// Mean over rows of -log softmax(logits)[label]; log-sum-exp stabilized.
Tensor cross_entropy(const Tensor& logits, const std::vector<int64_t>& labels);

// out[i, ...] = x[i, ...] * scales[i]; scales is a non-differentiable
// constant of extent x.shape[0] (stochastic-depth masks).
Tensor scale_rows(const Tensor& x, const Tensor& scales);

}  // namespace xavt
