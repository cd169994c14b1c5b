#include "vmg/linalg.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Core>

namespace vmg::linalg {
namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected a matrix, got shape " + shape_str(t.shape()));
  }
}

void require_square(const Tensor& t, const char* op) {
  require_matrix(t, op);
  if (t.rows() != t.cols()) {
    throw ShapeError(std::string(op) + ": expected a square matrix, got " + shape_str(t.shape()));
  }
}

std::string pivot_message(std::size_t pivot, double value) {
  std::ostringstream os;
  os << "cholesky: matrix is not positive definite (pivot " << pivot << " = " << value << ")";
  return os.str();
}

}  // namespace

CholeskyError::CholeskyError(std::size_t pivot, double value)
    : NumericalError(pivot_message(pivot, value)), pivot_(pivot) {}

Tensor matmul(const Tensor& a, const Tensor& b, Transpose ta, Transpose tb) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const bool at = ta == Transpose::kYes, bt = tb == Transpose::kYes;
  const std::size_t m = at ? a.cols() : a.rows();
  const std::size_t ka = at ? a.rows() : a.cols();
  const std::size_t kb = bt ? b.cols() : b.rows();
  const std::size_t n = bt ? b.rows() : b.cols();
  if (ka != kb) {
    throw ShapeError("matmul: inner dimensions differ, " + shape_str(a.shape()) +
                     (at ? "^T" : "") + " x " + shape_str(b.shape()) + (bt ? "^T" : ""));
  }
  Tensor out({m, n});
  if (m == 0 || n == 0) return out;
  ConstMap am(a.data(), a.rows(), a.cols());
  ConstMap bm(b.data(), b.rows(), b.cols());
  MutMap om(out.data(), m, n);
  if (ka == 0) return out;
  if (!at && !bt) {
    om.noalias() = am * bm;
  } else if (at && !bt) {
    om.noalias() = am.transpose() * bm;
  } else if (!at && bt) {
    om.noalias() = am * bm.transpose();
  } else {
    om.noalias() = am.transpose() * bm.transpose();
  }
  return out;
}

Tensor cholesky(const Tensor& s, double jitter) {
  require_square(s, "cholesky");
  if (jitter < 0.0) throw std::invalid_argument("cholesky: jitter must be non-negative");
  const std::size_t n = s.rows();
  Tensor l({n, n});
  double* L = l.data();
  const double* S = s.data();
  for (std::size_t i = 0; i < n; ++i) {
    const double* li = L + i * n;
    for (std::size_t j = 0; j <= i; ++j) {
      const double* lj = L + j * n;
      double acc = S[i * n + j];
      for (std::size_t k = 0; k < j; ++k) acc -= li[k] * lj[k];
      if (i == j) {
        acc += jitter;
        if (!(acc > 0.0) || !std::isfinite(acc)) throw CholeskyError(i, acc);
        L[i * n + i] = std::sqrt(acc);
      } else {
        L[i * n + j] = acc / lj[j];
      }
    }
  }
  return l;
}

Tensor solve_triangular(const Tensor& lower, const Tensor& b, Transpose trans) {
  require_square(lower, "solve_triangular");
  require_matrix(b, "solve_triangular");
  const std::size_t n = lower.rows();
  if (b.rows() != n) {
    throw ShapeError("solve_triangular: L is " + shape_str(lower.shape()) + " but B is " +
                     shape_str(b.shape()));
  }
  const std::size_t m = b.cols();
  for (std::size_t i = 0; i < n; ++i) {
    if (lower(i, i) == 0.0) {
      throw NumericalError("solve_triangular: zero pivot at index " + std::to_string(i));
    }
  }
  Tensor x = b;
  double* X = x.data();
  const double* L = lower.data();
  if (trans == Transpose::kNo) {
    for (std::size_t i = 0; i < n; ++i) {
      double* xi = X + i * m;
      for (std::size_t k = 0; k < i; ++k) {
        const double lik = L[i * n + k];
        if (lik == 0.0) continue;
        const double* xk = X + k * m;
        for (std::size_t c = 0; c < m; ++c) xi[c] -= lik * xk[c];
      }
      const double inv = 1.0 / L[i * n + i];
      for (std::size_t c = 0; c < m; ++c) xi[c] *= inv;
    }
  } else {
    for (std::size_t ii = n; ii-- > 0;) {
      double* xi = X + ii * m;
      for (std::size_t k = ii + 1; k < n; ++k) {
        const double lki = L[k * n + ii];
        if (lki == 0.0) continue;
        const double* xk = X + k * m;
        for (std::size_t c = 0; c < m; ++c) xi[c] -= lki * xk[c];
      }
      const double inv = 1.0 / L[ii * n + ii];
      for (std::size_t c = 0; c < m; ++c) xi[c] *= inv;
    }
  }
  return x;
}

Tensor cholesky_solve(const Tensor& lower, const Tensor& b) {
  return solve_triangular(lower, solve_triangular(lower, b), Transpose::kYes);
}

double log_det_from_cholesky(const Tensor& lower) {
  require_square(lower, "log_det_from_cholesky");
  double s = 0.0;
  for (std::size_t i = 0; i < lower.rows(); ++i) s += std::log(lower(i, i));
  return 2.0 * s;
}

Tensor inverse_spd(const Tensor& s) {
  return cholesky_solve(cholesky(s), Tensor::identity(s.rows()));
}

Tensor kronecker(const Tensor& a, const Tensor& b) {
  require_matrix(a, "kronecker");
  require_matrix(b, "kronecker");
  const std::size_t ar = a.rows(), ac = a.cols(), br = b.rows(), bc = b.cols();
  Tensor out({ar * br, ac * bc});
  for (std::size_t i = 0; i < ar; ++i)
    for (std::size_t j = 0; j < ac; ++j)
      for (std::size_t k = 0; k < br; ++k)
        for (std::size_t l = 0; l < bc; ++l) out(i * br + k, j * bc + l) = a(i, j) * b(k, l);
  return out;
}

Tensor vec(const Tensor& m) {
  require_matrix(m, "vec");
  const std::size_t r = m.rows(), c = m.cols();
  Tensor v({r * c, 1});
  for (std::size_t j = 0; j < c; ++j)
    for (std::size_t i = 0; i < r; ++i) v[j * r + i] = m(i, j);
  return v;
}

double trace(const Tensor& m) {
  require_square(m, "trace");
  double t = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) t += m(i, i);
  return t;
}

Tensor tril(const Tensor& m) {
  require_matrix(m, "tril");
  Tensor out = m;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i + 1; j < m.cols(); ++j) out(i, j) = 0.0;
  return out;
}

Tensor symmetrize(const Tensor& m) {
  require_square(m, "symmetrize");
  Tensor out = m;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < i; ++j) {
      const double v = 0.5 * (m(i, j) + m(j, i));
      out(i, j) = v;
      out(j, i) = v;
    }
  return out;
}

}  // namespace vmg::linalg
