#include "vmg/matgauss.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "vmg/linalg.hpp"
#include "vmg/ops.hpp"

namespace vmg {
namespace {

using linalg::Transpose;

double log_det(const Covariance& cov) {
  if (const auto* d = std::get_if<DiagonalCov>(&cov)) {
    double s = 0.0;
    for (double v : d->log_var.values()) s += v;
    return s;
  }
  return linalg::log_det_from_cholesky(linalg::cholesky(dense(cov)));
}

void check_cov(const Covariance& cov, std::size_t n, const char* which) {
  if (const auto* d = std::get_if<DiagonalCov>(&cov)) {
    if (d->log_var.size() != n) {
      throw ShapeError(std::string("MatrixGaussian: ") + which + " log-variances have " +
                       std::to_string(d->log_var.size()) + " entries, expected " + std::to_string(n));
    }
    if (!d->log_var.all_finite()) {
      throw NumericalError(std::string("MatrixGaussian: non-finite ") + which + " log-variance");
    }
  } else {
    const auto& f = std::get<FullCov>(cov).factor;
    if (f.rank() != 2 || f.rows() != n) {
      throw ShapeError(std::string("MatrixGaussian: ") + which + " factor has shape " +
                       shape_str(f.shape()) + ", expected " + std::to_string(n) + " rows");
    }
  }
}

Var vector_as(Var v, Shape shape) { return reshape(v, std::move(shape)); }

}  // namespace

Covariance diagonal_cov(std::span<const double> variances) {
  Tensor lv({variances.size()});
  for (std::size_t i = 0; i < variances.size(); ++i) {
    if (!(variances[i] > 0.0)) throw std::invalid_argument("diagonal_cov: variances must be positive");
    lv[i] = std::log(variances[i]);
  }
  return DiagonalCov{std::move(lv)};
}

Covariance identity_cov(std::size_t n) { return DiagonalCov{Tensor({n}, 0.0)}; }

Covariance full_cov(const Tensor& spd) { return FullCov{linalg::cholesky(spd)}; }

std::size_t cov_dim(const Covariance& cov) {
  if (const auto* d = std::get_if<DiagonalCov>(&cov)) return d->log_var.size();
  return std::get<FullCov>(cov).factor.rows();
}

Tensor dense(const Covariance& cov) {
  if (const auto* d = std::get_if<DiagonalCov>(&cov)) {
    const std::size_t n = d->log_var.size();
    Tensor out({n, n});
    for (std::size_t i = 0; i < n; ++i) out(i, i) = std::exp(d->log_var[i]);
    return out;
  }
  const auto& f = std::get<FullCov>(cov).factor;
  return linalg::matmul(f, f, Transpose::kNo, Transpose::kYes);
}

bool is_diagonal(const Covariance& cov) { return std::holds_alternative<DiagonalCov>(cov); }

MatrixGaussian::MatrixGaussian(Tensor mean, Covariance row_cov, Covariance col_cov)
    : mean_(std::move(mean)), row_(std::move(row_cov)), col_(std::move(col_cov)) {
  if (mean_.rank() != 2) throw ShapeError("MatrixGaussian: mean must be a matrix, got " + shape_str(mean_.shape()));
  check_cov(row_, mean_.rows(), "row");
  check_cov(col_, mean_.cols(), "column");
}

MatrixGaussian MatrixGaussian::standard(std::size_t rows, std::size_t cols) {
  return MatrixGaussian(Tensor({rows, cols}), identity_cov(rows), identity_cov(cols));
}

Tensor KroneckerCov::dense() const { return linalg::kronecker(col_factor, row_factor); }

MatrixGaussianVars bind(Graph& g, const MatrixGaussian& dist, std::string_view prefix) {
  const std::string p(prefix);
  auto leaf = [&](const Tensor& t, const char* suffix) {
    return p.empty() ? g.constant(t) : g.parameter(p + suffix, t);
  };
  auto cov = [&](const Covariance& c, const char* suffix) {
    if (const auto* d = std::get_if<DiagonalCov>(&c)) return CovVar{true, leaf(d->log_var, suffix)};
    return CovVar{false, leaf(std::get<FullCov>(c).factor, suffix)};
  };
  return MatrixGaussianVars{leaf(dist.mean(), ".mean"), cov(dist.row_cov(), ".row"),
                            cov(dist.col_cov(), ".col")};
}

Var sample(const MatrixGaussianVars& dist, Var noise) {
  const Tensor& m = dist.mean.value();
  if (noise.shape() != m.shape()) {
    throw ShapeError("sample: noise shape " + shape_str(noise.shape()) + " does not match mean " +
                     shape_str(m.shape()));
  }
  const std::size_t r = m.rows(), c = m.cols();
  Var x = noise;
  if (dist.row.diagonal) {
    x = exp(0.5 * vector_as(dist.row.param, {r, 1})) * x;
  } else {
    if (dist.row.param.value().cols() != r) {
      throw ShapeError("sample: row factor " + shape_str(dist.row.param.shape()) + " is not square");
    }
    x = matmul(dist.row.param, x);
  }
  if (dist.col.diagonal) {
    x = x * exp(0.5 * vector_as(dist.col.param, {1, c}));
  } else {
    if (dist.col.param.value().cols() != c) {
      throw ShapeError("sample: column factor " + shape_str(dist.col.param.shape()) + " is not square");
    }
    x = matmul(x, transpose(dist.col.param));
  }
  return dist.mean + x;
}

Tensor sample(const MatrixGaussian& dist, const Tensor& noise) {
  Graph g;
  return sample(vmg::bind(g, dist), g.constant(noise)).value();
}

MultivariateForm to_multivariate(const MatrixGaussian& dist) {
  return MultivariateForm{linalg::vec(dist.mean()), KroneckerCov{dist.dense_col_cov(), dist.dense_row_cov()}};
}

Var kl_diagonal(Var mean, Var row_log_var, Var col_log_var) {
  const Tensor& m = mean.value();
  const std::size_t r = row_log_var.value().size(), c = col_log_var.value().size();
  if (m.rank() != 2 || m.rows() != r || m.cols() != c) {
    throw ShapeError("kl_diagonal: mean " + shape_str(m.shape()) + " vs row/col sizes " +
                     std::to_string(r) + "/" + std::to_string(c));
  }
  const double rd = static_cast<double>(r), cd = static_cast<double>(c);
  Var trace_term = sum(exp(row_log_var)) * sum(exp(col_log_var));
  return 0.5 * (trace_term + sum(square(mean)) - rd * cd - cd * sum(row_log_var) - rd * sum(col_log_var));
}

double kl_diagonal(const MatrixGaussian& q) {
  if (!q.is_diagonal()) throw std::invalid_argument("kl_diagonal: covariances must be diagonal");
  Graph g;
  auto vars = vmg::bind(g, q);
  return kl_diagonal(vars.mean, vars.row.param, vars.col.param).value().item();
}

double kl_general(const MatrixGaussian& q, const MatrixGaussian& p) {
  if (q.mean().shape() != p.mean().shape()) {
    throw ShapeError("kl_general: shapes differ, " + shape_str(q.mean().shape()) + " vs " +
                     shape_str(p.mean().shape()));
  }
  const auto n = static_cast<double>(q.rows());
  const auto c = static_cast<double>(q.cols());
  Tensor lu1, lv1;
  try {
    lu1 = linalg::cholesky(p.dense_row_cov());
    lv1 = linalg::cholesky(p.dense_col_cov());
  } catch (const linalg::CholeskyError& e) {
    throw NumericalError(std::string("kl_general: prior covariance is singular: ") + e.what());
  }
  const double tr_u = linalg::trace(linalg::cholesky_solve(lu1, q.dense_row_cov()));
  const double tr_v = linalg::trace(linalg::cholesky_solve(lv1, q.dense_col_cov()));

  Tensor diff = p.mean();
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] -= q.mean()[i];
  Tensor z = linalg::cholesky_solve(lu1, diff);                       // U1^{-1} D
  Tensor dz = linalg::matmul(diff, z, Transpose::kYes, Transpose::kNo);  // D^T U1^{-1} D
  const double mean_term = linalg::trace(linalg::cholesky_solve(lv1, dz));

  const double log_det_p = c * linalg::log_det_from_cholesky(lu1) + n * linalg::log_det_from_cholesky(lv1);
  const double log_det_q = c * log_det(q.row_cov()) + n * log_det(q.col_cov());
  return 0.5 * (tr_u * tr_v + mean_term - n * c + log_det_p - log_det_q);
}

MatrixGaussian linear_transform(const Tensor& a, const MatrixGaussian& dist) {
  if (a.rank() != 2 || a.cols() != dist.rows()) {
    throw ShapeError("linear_transform: A " + shape_str(a.shape()) + " cannot multiply a " +
                     std::to_string(dist.rows()) + "x" + std::to_string(dist.cols()) + " matrix");
  }
  Tensor mean = linalg::matmul(a, dist.mean());
  Tensor factor;
  if (const auto* d = std::get_if<DiagonalCov>(&dist.row_cov())) {
    factor = a;
    for (std::size_t i = 0; i < a.rows(); ++i)
      for (std::size_t k = 0; k < a.cols(); ++k) factor(i, k) *= std::exp(0.5 * d->log_var[k]);
  } else {
    factor = linalg::matmul(a, std::get<FullCov>(dist.row_cov()).factor);
  }
  return MatrixGaussian(std::move(mean), FullCov{std::move(factor)}, dist.col_cov());
}

KroneckerCov gp_kernel(const Tensor& z1, const Tensor& z2, const Covariance& u, const Covariance& v,
                       Activation psi) {
  const Tensor p1 = activate(psi, z1);
  const Tensor p2 = activate(psi, z2);
  const Tensor ud = dense(u);
  if (p1.cols() != ud.rows() || p2.cols() != ud.rows()) {
    throw ShapeError("gp_kernel: inputs " + shape_str(z1.shape()) + ", " + shape_str(z2.shape()) +
                     " do not match row covariance of size " + std::to_string(ud.rows()));
  }
  Tensor row = linalg::matmul(linalg::matmul(p1, ud), p2, Transpose::kNo, Transpose::kYes);
  return KroneckerCov{dense(v), std::move(row)};
}

double log_density(const MatrixGaussian& dist, const Tensor& w) {
  if (w.shape() != dist.mean().shape()) {
    throw ShapeError("log_density: W " + shape_str(w.shape()) + " vs mean " + shape_str(dist.mean().shape()));
  }
  const auto n = static_cast<double>(dist.rows());
  const auto c = static_cast<double>(dist.cols());
  const Tensor lu = linalg::cholesky(dist.dense_row_cov());
  const Tensor lv = linalg::cholesky(dist.dense_col_cov());
  Tensor diff = w;
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] -= dist.mean()[i];
  Tensor z = linalg::cholesky_solve(lu, diff);
  Tensor dz = linalg::matmul(diff, z, Transpose::kYes, Transpose::kNo);
  const double quad = linalg::trace(linalg::cholesky_solve(lv, dz));
  return -0.5 * quad - 0.5 * n * c * std::log(2.0 * std::numbers::pi) -
         0.5 * n * linalg::log_det_from_cholesky(lv) - 0.5 * c * linalg::log_det_from_cholesky(lu);
}

}  // namespace vmg
