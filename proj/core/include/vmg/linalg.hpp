#pragma once

#include <cstddef>

#include "vmg/tensor.hpp"

namespace vmg::linalg {

/// Raised when a symmetric matrix is not positive definite. `pivot()` is the
/// zero-based index of the first non-positive pivot.
class CholeskyError : public NumericalError {
 public:
  CholeskyError(std::size_t pivot, double value);
  std::size_t pivot() const noexcept { return pivot_; }

 private:
  std::size_t pivot_;
};

enum class Transpose { kNo, kYes };

/// op(a) * op(b) for rank-2 tensors.
Tensor matmul(const Tensor& a, const Tensor& b, Transpose ta = Transpose::kNo,
              Transpose tb = Transpose::kNo);

/// Lower-triangular L with L L^T = s + jitter * I. Only the lower triangle
/// of `s` is read.
Tensor cholesky(const Tensor& s, double jitter = 0.0);

/// Solves op(L) X = B for lower-triangular L. A zero pivot throws.
Tensor solve_triangular(const Tensor& lower, const Tensor& b,
                        Transpose trans = Transpose::kNo);

/// Solves (L L^T) X = B given the Cholesky factor.
Tensor cholesky_solve(const Tensor& lower, const Tensor& b);

/// log|L L^T| given the Cholesky factor.
double log_det_from_cholesky(const Tensor& lower);

Tensor inverse_spd(const Tensor& s);

Tensor kronecker(const Tensor& a, const Tensor& b);

/// Column-stacking vectorization: vec(M)[j * rows + i] = M(i, j).
Tensor vec(const Tensor& m);

double trace(const Tensor& m);

/// Lower triangle of `m` (strict upper part set to zero).
Tensor tril(const Tensor& m);

Tensor symmetrize(const Tensor& m);

}  // namespace vmg::linalg
