#pragma once

#include <cstddef>

#include "vmg/graph.hpp"

/// Differentiable primitives over Graph variables.
///
/// Binary elementwise ops broadcast with numpy rules. Every op checks shapes
/// up front and throws ShapeError naming the op and both shapes.
namespace vmg {

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator/(Var a, Var b);
Var operator-(Var a);

Var operator+(Var a, double s);
Var operator+(double s, Var a);
Var operator-(Var a, double s);
Var operator-(double s, Var a);
Var operator*(Var a, double s);
Var operator*(double s, Var a);
Var operator/(Var a, double s);
Var operator/(double s, Var a);

Var matmul(Var a, Var b);
Var transpose(Var a);
Var reshape(Var a, Shape shape);

Var exp(Var a);
Var log(Var a);
/// Square root whose derivative is taken as 0 at exactly 0, so clamped
/// variances do not produce infinite gradients.
Var sqrt(Var a);
Var square(Var a);
Var relu(Var a);
Var tanh(Var a);
Var cos(Var a);
Var lgamma(Var a);
Var digamma(Var a);
/// min(a, hi); the gradient is zero wherever a >= hi.
Var clamp_max(Var a, double hi);
/// max(a, lo); the gradient is zero wherever a <= lo.
Var clamp_min(Var a, double lo);

/// Sum of all elements, as a scalar.
Var sum(Var a);
Var mean(Var a);
/// Column sums of a matrix: r x c -> 1 x c.
Var sum_rows(Var a);
/// Row sums of a matrix: r x c -> r x 1.
Var sum_cols(Var a);
/// log(sum(exp(a))) over all elements, shifted for stability.
Var log_sum_exp(Var a);
/// Row-wise log-sum-exp: r x c -> r x 1.
Var log_sum_exp_cols(Var a);
Var log_softmax_rows(Var a);

/// Lower Cholesky factor of the symmetric part of `s` plus jitter * I.
Var cholesky(Var s, double jitter = 0.0);
/// Solves L X = B (or L^T X = B when `transpose_l`).
Var solve_triangular(Var lower, Var b, bool transpose_l = false);

Var concat_cols(Var a, Var b);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
Var slice_rows(Var a, std::size_t begin, std::size_t end);

namespace detail {
/// Broadcast result shape, or ShapeError naming `op`.
Shape broadcast_shape(const Shape& a, const Shape& b, const char* op);
/// Sums `g` over broadcast axes so the result has `shape`.
Tensor reduce_to_shape(const Tensor& g, const Shape& shape);
}  // namespace detail

}  // namespace vmg
