#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <variant>

#include "vmg/activation.hpp"
#include "vmg/graph.hpp"
#include "vmg/tensor.hpp"

namespace vmg {

/// Diagonal covariance stored as a length-n vector of log-variances.
struct DiagonalCov {
  Tensor log_var;
};

/// Full covariance `factor * factor^T` with an n x k factor. Square lower
/// triangular factors come from Cholesky; wider or rank-deficient factors
/// arise from linear transforms and are never re-factored.
struct FullCov {
  Tensor factor;
};

using Covariance = std::variant<DiagonalCov, FullCov>;

Covariance diagonal_cov(std::span<const double> variances);
Covariance identity_cov(std::size_t n);
/// Factors an SPD matrix.
Covariance full_cov(const Tensor& spd);
std::size_t cov_dim(const Covariance& cov);
Tensor dense(const Covariance& cov);
bool is_diagonal(const Covariance& cov);

/// MN(M, U, V) over r x c matrices: vec(W) ~ N(vec(M), V kron U).
class MatrixGaussian {
 public:
  MatrixGaussian(Tensor mean, Covariance row_cov, Covariance col_cov);

  /// MN(0, I, I).
  static MatrixGaussian standard(std::size_t rows, std::size_t cols);

  const Tensor& mean() const noexcept { return mean_; }
  const Covariance& row_cov() const noexcept { return row_; }
  const Covariance& col_cov() const noexcept { return col_; }
  std::size_t rows() const noexcept { return mean_.rows(); }
  std::size_t cols() const noexcept { return mean_.cols(); }
  Tensor dense_row_cov() const { return dense(row_); }
  Tensor dense_col_cov() const { return dense(col_); }
  bool is_diagonal() const { return vmg::is_diagonal(row_) && vmg::is_diagonal(col_); }

 private:
  Tensor mean_;
  Covariance row_;
  Covariance col_;
};

/// Covariance of vec(W) as col_factor kron row_factor.
struct KroneckerCov {
  Tensor col_factor;
  Tensor row_factor;

  Tensor dense() const;
};

struct MultivariateForm {
  Tensor mean;  ///< vec(M), column-stacked, rc x 1
  KroneckerCov cov;
};

/// Graph-side view of a covariance: log-variance vector or factor.
struct CovVar {
  bool diagonal = true;
  Var param;
};

struct MatrixGaussianVars {
  Var mean;
  CovVar row;
  CovVar col;
};

/// Adds the distribution's parameters to `g`. With a non-empty prefix they
/// become named parameters `<prefix>.mean`, `<prefix>.row`, `<prefix>.col`;
/// otherwise constants.
MatrixGaussianVars bind(Graph& g, const MatrixGaussian& dist, std::string_view prefix = {});

/// W = M + U^{1/2} E V^{1/2}, with elementwise roots for diagonal
/// covariances and the stored factor for full ones.
Var sample(const MatrixGaussianVars& dist, Var noise);
Tensor sample(const MatrixGaussian& dist, const Tensor& noise);

MultivariateForm to_multivariate(const MatrixGaussian& dist);

/// KL(q || MN(0, I, I)) for diagonal q, from its parameters.
Var kl_diagonal(Var mean, Var row_log_var, Var col_log_var);
double kl_diagonal(const MatrixGaussian& q);

/// KL(q || p) for arbitrary covariances of equal shape.
double kl_general(const MatrixGaussian& q, const MatrixGaussian& p);

/// Distribution of A W: MN(A M, A U A^T, V).
MatrixGaussian linear_transform(const Tensor& a, const MatrixGaussian& dist);

/// K(z1, z2) = V kron (psi(z1) U psi(z2)^T).
KroneckerCov gp_kernel(const Tensor& z1, const Tensor& z2, const Covariance& u,
                       const Covariance& v, Activation psi = Activation::kIdentity);

/// Log density with the standard normaliser
/// -(rc/2) log 2pi - (c/2) log|U| - (r/2) log|V|.
double log_density(const MatrixGaussian& dist, const Tensor& w);

}  // namespace vmg
