#include "vmg/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include "vmg/linalg.hpp"

namespace vmg {
namespace detail {

Shape broadcast_shape(const Shape& a, const Shape& b, const char* op) {
  const std::size_t n = std::max(a.size(), b.size());
  Shape out(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t da = k < n - a.size() ? 1 : a[k - (n - a.size())];
    const std::size_t db = k < n - b.size() ? 1 : b[k - (n - b.size())];
    if (da != db && da != 1 && db != 1) {
      throw ShapeError(std::string(op) + ": cannot broadcast " + shape_str(a) + " with " +
                       shape_str(b));
    }
    out[k] = da == 1 ? db : da;
  }
  return out;
}

namespace {

// Strides of `in` viewed with the rank of `out`; zero along broadcast axes.
std::vector<std::size_t> broadcast_strides(const Shape& in, const Shape& out) {
  const std::size_t n = out.size();
  std::vector<std::size_t> strides(n, 0);
  std::size_t s = 1;
  for (std::size_t k = n; k-- > 0;) {
    const std::size_t offset = n - in.size();
    if (k < offset) continue;
    const std::size_t d = in[k - offset];
    strides[k] = d == 1 ? 0 : s;
    s *= d;
  }
  return strides;
}

template <class F>
Tensor broadcast_apply(const Tensor& a, const Tensor& b, const char* op, F f) {
  if (a.shape() == b.shape()) {
    Tensor r(a.shape());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = f(a[i], b[i]);
    return r;
  }
  const Shape out = broadcast_shape(a.shape(), b.shape(), op);
  Tensor r(out);
  if (b.size() == 1 && a.shape() == out) {
    const double bv = b[0];
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = f(a[i], bv);
    return r;
  }
  if (a.size() == 1 && b.shape() == out) {
    const double av = a[0];
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = f(av, b[i]);
    return r;
  }
  const std::size_t n = out.size();
  const auto sa = broadcast_strides(a.shape(), out);
  const auto sb = broadcast_strides(b.shape(), out);
  std::vector<std::size_t> idx(n, 0);
  std::size_t oa = 0, ob = 0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    r[i] = f(a[oa], b[ob]);
    for (std::size_t d = n; d-- > 0;) {
      ++idx[d];
      oa += sa[d];
      ob += sb[d];
      if (idx[d] < out[d]) break;
      oa -= sa[d] * out[d];
      ob -= sb[d] * out[d];
      idx[d] = 0;
    }
  }
  return r;
}

void accumulate(Tensor* dst, const Tensor& src) {
  if (!dst) return;
  if (dst->shape() != src.shape()) {
    throw ShapeError("gradient accumulation: " + shape_str(dst->shape()) + " vs " +
                     shape_str(src.shape()));
  }
  for (std::size_t i = 0; i < src.size(); ++i) (*dst)[i] += src[i];
}

}  // namespace

Tensor reduce_to_shape(const Tensor& g, const Shape& shape) {
  if (g.shape() == shape) return g;
  Tensor t(shape);
  if (t.size() == 1) {
    double s = 0.0;
    for (double v : g.values()) s += v;
    t[0] = s;
    return t;
  }
  const Shape& out = g.shape();
  const std::size_t n = out.size();
  const auto st = broadcast_strides(shape, out);
  std::vector<std::size_t> idx(n, 0);
  std::size_t ot = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    t[ot] += g[i];
    for (std::size_t d = n; d-- > 0;) {
      ++idx[d];
      ot += st[d];
      if (idx[d] < out[d]) break;
      ot -= st[d] * out[d];
      idx[d] = 0;
    }
  }
  return t;
}

}  // namespace detail

using detail::accumulate;
using detail::broadcast_apply;
using detail::reduce_to_shape;

namespace {

Graph& graph_of(Var a) {
  if (!a.valid()) throw std::logic_error("op applied to an unbound Var");
  return a.graph();
}

void require_matrix(const Tensor& t, const std::string& op) {
  if (t.rank() != 2) throw ShapeError(op + ": expected a matrix, got " + shape_str(t.shape()));
}

template <class F, class D>
Var unary(Var a, const char* name, F f, D dfdx) {
  OpSpec op;
  op.name = name;
  op.forward = [f](std::span<const Tensor* const> in) {
    Tensor r(in[0]->shape());
    const Tensor& x = *in[0];
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = f(x[i]);
    return r;
  };
  op.backward = [dfdx](const BackwardArgs& args) {
    Tensor* gx = args.grad_inputs[0];
    if (!gx) return;
    const Tensor& x = *args.inputs[0];
    for (std::size_t i = 0; i < x.size(); ++i)
      (*gx)[i] += args.grad_output[i] * dfdx(x[i], args.output[i]);
  };
  return graph_of(a).apply(std::move(op), {a});
}

Var scalar_like(Var a, double s) { return a.graph().scalar(s); }

}  // namespace

Var operator+(Var a, Var b) {
  OpSpec op;
  op.name = "add";
  op.forward = [](std::span<const Tensor* const> in) {
    return broadcast_apply(*in[0], *in[1], "add", [](double x, double y) { return x + y; });
  };
  op.backward = [](const BackwardArgs& args) {
    if (args.grad_inputs[0]) accumulate(args.grad_inputs[0], reduce_to_shape(args.grad_output, args.inputs[0]->shape()));
    if (args.grad_inputs[1]) accumulate(args.grad_inputs[1], reduce_to_shape(args.grad_output, args.inputs[1]->shape()));
  };
  return graph_of(a).apply(std::move(op), {a, b});
}

Var operator-(Var a, Var b) {
  OpSpec op;
  op.name = "sub";
  op.forward = [](std::span<const Tensor* const> in) {
    return broadcast_apply(*in[0], *in[1], "sub", [](double x, double y) { return x - y; });
  };
  op.backward = [](const BackwardArgs& args) {
    if (args.grad_inputs[0]) accumulate(args.grad_inputs[0], reduce_to_shape(args.grad_output, args.inputs[0]->shape()));
    if (args.grad_inputs[1]) {
      Tensor g = reduce_to_shape(args.grad_output, args.inputs[1]->shape());
      for (double& v : g.values()) v = -v;
      accumulate(args.grad_inputs[1], g);
    }
  };
  return graph_of(a).apply(std::move(op), {a, b});
}

Var operator*(Var a, Var b) {
  OpSpec op;
  op.name = "mul";
  op.forward = [](std::span<const Tensor* const> in) {
    return broadcast_apply(*in[0], *in[1], "mul", [](double x, double y) { return x * y; });
  };
  op.backward = [](const BackwardArgs& args) {
    const auto mul = [](double x, double y) { return x * y; };
    if (args.grad_inputs[0]) {
      Tensor g = broadcast_apply(args.grad_output, *args.inputs[1], "mul", mul);
      accumulate(args.grad_inputs[0], reduce_to_shape(g, args.inputs[0]->shape()));
    }
    if (args.grad_inputs[1]) {
      Tensor g = broadcast_apply(args.grad_output, *args.inputs[0], "mul", mul);
      accumulate(args.grad_inputs[1], reduce_to_shape(g, args.inputs[1]->shape()));
    }
  };
  return graph_of(a).apply(std::move(op), {a, b});
}

Var operator/(Var a, Var b) {
  OpSpec op;
  op.name = "div";
  op.forward = [](std::span<const Tensor* const> in) {
    return broadcast_apply(*in[0], *in[1], "div", [](double x, double y) { return x / y; });
  };
  op.backward = [](const BackwardArgs& args) {
    if (args.grad_inputs[0]) {
      Tensor g = broadcast_apply(args.grad_output, *args.inputs[1], "div",
                                 [](double gv, double y) { return gv / y; });
      accumulate(args.grad_inputs[0], reduce_to_shape(g, args.inputs[0]->shape()));
    }
    if (args.grad_inputs[1]) {
      // d(a/b)/db = -out / b
      Tensor q = broadcast_apply(args.output, *args.inputs[1], "div",
                                 [](double o, double y) { return -o / y; });
      Tensor g = broadcast_apply(args.grad_output, q, "div", [](double gv, double v) { return gv * v; });
      accumulate(args.grad_inputs[1], reduce_to_shape(g, args.inputs[1]->shape()));
    }
  };
  return graph_of(a).apply(std::move(op), {a, b});
}

Var operator-(Var a) {
  return unary(a, "neg", [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Var operator+(Var a, double s) { return a + scalar_like(a, s); }
Var operator+(double s, Var a) { return scalar_like(a, s) + a; }
Var operator-(Var a, double s) { return a - scalar_like(a, s); }
Var operator-(double s, Var a) { return scalar_like(a, s) - a; }
Var operator*(Var a, double s) { return a * scalar_like(a, s); }
Var operator*(double s, Var a) { return scalar_like(a, s) * a; }
Var operator/(Var a, double s) { return a / scalar_like(a, s); }
Var operator/(double s, Var a) { return scalar_like(a, s) / a; }

Var matmul(Var a, Var b) {
  OpSpec op;
  op.name = "matmul";
  op.forward = [](std::span<const Tensor* const> in) { return linalg::matmul(*in[0], *in[1]); };
  op.backward = [](const BackwardArgs& args) {
    using linalg::Transpose;
    if (args.grad_inputs[0])
      accumulate(args.grad_inputs[0],
                 linalg::matmul(args.grad_output, *args.inputs[1], Transpose::kNo, Transpose::kYes));
    if (args.grad_inputs[1])
      accumulate(args.grad_inputs[1],
                 linalg::matmul(*args.inputs[0], args.grad_output, Transpose::kYes, Transpose::kNo));
  };
  return graph_of(a).apply(std::move(op), {a, b});
}

Var transpose(Var a) {
  OpSpec op;
  op.name = "transpose";
  op.forward = [](std::span<const Tensor* const> in) { return in[0]->transposed(); };
  op.backward = [](const BackwardArgs& args) {
    if (args.grad_inputs[0]) accumulate(args.grad_inputs[0], args.grad_output.transposed());
  };
  return graph_of(a).apply(std::move(op), {a});
}

Var reshape(Var a, Shape shape) {
  OpSpec op;
  op.name = "reshape";
  op.forward = [shape](std::span<const Tensor* const> in) { return in[0]->reshaped(shape); };
  op.backward = [](const BackwardArgs& args) {
    if (args.grad_inputs[0]) accumulate(args.grad_inputs[0], args.grad_output.reshaped(args.inputs[0]->shape()));
  };
  return graph_of(a).apply(std::move(op), {a});
}

Var exp(Var a) {
  return unary(a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
  return unary(a, "log", [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var sqrt(Var a) {
  return unary(
      a, "sqrt", [](double x) { return std::sqrt(x); },
      [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

Var square(Var a) {
  return unary(a, "square", [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var relu(Var a) {
  return unary(
      a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var tanh(Var a) {
  return unary(
      a, "tanh", [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var cos(Var a) {
  return unary(a, "cos", [](double x) { return std::cos(x); }, [](double x, double) { return -std::sin(x); });
}

Var lgamma(Var a) {
  return unary(
      a, "lgamma", [](double x) { return boost::math::lgamma(x); },
      [](double x, double) { return boost::math::digamma(x); });
}

Var digamma(Var a) {
  return unary(
      a, "digamma", [](double x) { return boost::math::digamma(x); },
      [](double x, double) { return boost::math::trigamma(x); });
}

Var clamp_max(Var a, double hi) {
  return unary(
      a, "clamp_max", [hi](double x) { return std::min(x, hi); },
      [hi](double x, double) { return x < hi ? 1.0 : 0.0; });
}

Var clamp_min(Var a, double lo) {
  return unary(
      a, "clamp_min", [lo](double x) { return std::max(x, lo); },
      [lo](double x, double) { return x > lo ? 1.0 : 0.0; });
}

Var sum(Var a) {
  OpSpec op;
  op.name = "sum";
  op.forward = [](std::span<const Tensor* const> in) {
    double s = 0.0;
    for (double v : in[0]->values()) s += v;
    return Tensor::scalar(s);
  };
  op.backward = [](const BackwardArgs& args) {
    Tensor* gx = args.grad_inputs[0];
    if (!gx) return;
    const double g = args.grad_output[0];
    for (double& v : gx->values()) v += g;
  };
  return graph_of(a).apply(std::move(op), {a});
}

Var mean(Var a) {
  const auto n = static_cast<double>(a.value().size());
  return sum(a) / n;
}

Var sum_rows(Var a) {
  require_matrix(a.value(), "sum_rows");
  OpSpec op;
  op.name = "sum_rows";
  op.forward = [](std::span<const Tensor* const> in) {
    const Tensor& x = *in[0];
    Tensor r({1, x.cols()});
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = 0; j < x.cols(); ++j) r[j] += x(i, j);
    return r;
  };
  op.backward = [](const BackwardArgs& args) {
    Tensor* gx = args.grad_inputs[0];
    if (!gx) return;
    for (std::size_t i = 0; i < gx->rows(); ++i)
      for (std::size_t j = 0; j < gx->cols(); ++j) (*gx)(i, j) += args.grad_output[j];
  };
  return graph_of(a).apply(std::move(op), {a});
}

Var sum_cols(Var a) {
  require_matrix(a.value(), "sum_cols");
  OpSpec op;
  op.name = "sum_cols";
  op.forward = [](std::span<const Tensor* const> in) {
    const Tensor& x = *in[0];
    Tensor r({x.rows(), 1});
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = 0; j < x.cols(); ++j) r[i] += x(i, j);
    return r;
  };
  op.backward = [](const BackwardArgs& args) {
    Tensor* gx = args.grad_inputs[0];
    if (!gx) return;
    for (std::size_t i = 0; i < gx->rows(); ++i)
      for (std::size_t j = 0; j < gx->cols(); ++j) (*gx)(i, j) += args.grad_output[i];
  };
  return graph_of(a).apply(std::move(op), {a});
}

Var log_sum_exp(Var a) {
  OpSpec op;
  op.name = "log_sum_exp";
  op.forward = [](std::span<const Tensor* const> in) {
    const Tensor& x = *in[0];
    if (x.size() == 0) return Tensor::scalar(-std::numeric_limits<double>::infinity());
    const double m = *std::max_element(x.values().begin(), x.values().end());
    double s = 0.0;
    for (double v : x.values()) s += std::exp(v - m);
    return Tensor::scalar(m + std::log(s));
  };
  op.backward = [](const BackwardArgs& args) {
    Tensor* gx = args.grad_inputs[0];
    if (!gx) return;
    const Tensor& x = *args.inputs[0];
    const double y = args.output[0], g = args.grad_output[0];
    for (std::size_t i = 0; i < x.size(); ++i) (*gx)[i] += g * std::exp(x[i] - y);
  };
  return graph_of(a).apply(std::move(op), {a});
}

Var log_sum_exp_cols(Var a) {
  require_matrix(a.value(), "log_sum_exp_cols");
  OpSpec op;
  op.name = "log_sum_exp_cols";
  op.forward = [](std::span<const Tensor* const> in) {
    const Tensor& x = *in[0];
    Tensor r({x.rows(), 1});
    for (std::size_t i = 0; i < x.rows(); ++i) {
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < x.cols(); ++j) m = std::max(m, x(i, j));
      double s = 0.0;
      for (std::size_t j = 0; j < x.cols(); ++j) s += std::exp(x(i, j) - m);
      r[i] = m + std::log(s);
    }
    return r;
  };
  op.backward = [](const BackwardArgs& args) {
    Tensor* gx = args.grad_inputs[0];
    if (!gx) return;
    const Tensor& x = *args.inputs[0];
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = 0; j < x.cols(); ++j)
        (*gx)(i, j) += args.grad_output[i] * std::exp(x(i, j) - args.output[i]);
  };
  return graph_of(a).apply(std::move(op), {a});
}

Var log_softmax_rows(Var a) { return a - log_sum_exp_cols(a); }

Var cholesky(Var s, double jitter) {
  OpSpec op;
  op.name = "cholesky";
  op.forward = [jitter](std::span<const Tensor* const> in) {
    return linalg::cholesky(linalg::symmetrize(*in[0]), jitter);
  };
  op.backward = [](const BackwardArgs& args) {
    Tensor* gs = args.grad_inputs[0];
    if (!gs) return;
    using linalg::Transpose;
    const Tensor& l = args.output;
    // phi(L^T tril(gL)) with the diagonal halved
    Tensor p = linalg::tril(linalg::matmul(l, linalg::tril(args.grad_output), Transpose::kYes));
    for (std::size_t i = 0; i < p.rows(); ++i) p(i, i) *= 0.5;
    // L^{-T} P L^{-1}
    Tensor x = linalg::solve_triangular(l, p, Transpose::kYes);
    Tensor y = linalg::solve_triangular(l, x.transposed(), Transpose::kYes).transposed();
    accumulate(gs, linalg::symmetrize(y));
  };
  return graph_of(s).apply(std::move(op), {s});
}

Var solve_triangular(Var lower, Var b, bool transpose_l) {
  OpSpec op;
  op.name = "solve_triangular";
  const auto trans = transpose_l ? linalg::Transpose::kYes : linalg::Transpose::kNo;
  op.forward = [trans](std::span<const Tensor* const> in) {
    return linalg::solve_triangular(*in[0], *in[1], trans);
  };
  op.backward = [transpose_l](const BackwardArgs& args) {
    using linalg::Transpose;
    const Tensor& l = *args.inputs[0];
    const Tensor& x = args.output;
    // X = op(L)^{-1} B  =>  gB = op(L)^{-T} gX
    Tensor gb = linalg::solve_triangular(l, args.grad_output, transpose_l ? Transpose::kNo : Transpose::kYes);
    if (args.grad_inputs[0]) {
      Tensor gl = transpose_l ? linalg::matmul(x, gb, Transpose::kNo, Transpose::kYes)
                              : linalg::matmul(gb, x, Transpose::kNo, Transpose::kYes);
      gl = linalg::tril(gl);
      for (double& v : gl.values()) v = -v;
      accumulate(args.grad_inputs[0], gl);
    }
    if (args.grad_inputs[1]) accumulate(args.grad_inputs[1], gb);
  };
  return graph_of(lower).apply(std::move(op), {lower, b});
}

Var concat_cols(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_matrix(av, "concat_cols");
  require_matrix(bv, "concat_cols");
  if (av.rows() != bv.rows()) {
    throw ShapeError("concat_cols: row counts differ, " + shape_str(av.shape()) + " vs " +
                     shape_str(bv.shape()));
  }
  OpSpec op;
  op.name = "concat_cols";
  op.forward = [](std::span<const Tensor* const> in) {
    const Tensor& x = *in[0];
    const Tensor& y = *in[1];
    Tensor r({x.rows(), x.cols() + y.cols()});
    for (std::size_t i = 0; i < x.rows(); ++i) {
      std::copy_n(x.data() + i * x.cols(), x.cols(), r.data() + i * r.cols());
      std::copy_n(y.data() + i * y.cols(), y.cols(), r.data() + i * r.cols() + x.cols());
    }
    return r;
  };
  op.backward = [](const BackwardArgs& args) {
    const Tensor& g = args.grad_output;
    const std::size_t ca = args.inputs[0]->cols();
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) {
        if (j < ca) {
          if (args.grad_inputs[0]) (*args.grad_inputs[0])(i, j) += g(i, j);
        } else if (args.grad_inputs[1]) {
          (*args.grad_inputs[1])(i, j - ca) += g(i, j);
        }
      }
  };
  return graph_of(a).apply(std::move(op), {a, b});
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  const Tensor& av = a.value();
  require_matrix(av, "slice_cols");
  if (begin > end || end > av.cols()) {
    throw ShapeError("slice_cols: [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of range for " + shape_str(av.shape()));
  }
  OpSpec op;
  op.name = "slice_cols";
  op.forward = [begin, end](std::span<const Tensor* const> in) {
    const Tensor& x = *in[0];
    Tensor r({x.rows(), end - begin});
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = begin; j < end; ++j) r(i, j - begin) = x(i, j);
    return r;
  };
  op.backward = [begin](const BackwardArgs& args) {
    Tensor* gx = args.grad_inputs[0];
    if (!gx) return;
    const Tensor& g = args.grad_output;
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) (*gx)(i, j + begin) += g(i, j);
  };
  return graph_of(a).apply(std::move(op), {a});
}

Var slice_rows(Var a, std::size_t begin, std::size_t end) {
  const Tensor& av = a.value();
  require_matrix(av, "slice_rows");
  if (begin > end || end > av.rows()) {
    throw ShapeError("slice_rows: [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of range for " + shape_str(av.shape()));
  }
  OpSpec op;
  op.name = "slice_rows";
  op.forward = [begin, end](std::span<const Tensor* const> in) {
    const Tensor& x = *in[0];
    const std::size_t c = x.cols();
    Tensor r({end - begin, c});
    std::copy(x.data() + begin * c, x.data() + end * c, r.data());
    return r;
  };
  op.backward = [begin](const BackwardArgs& args) {
    Tensor* gx = args.grad_inputs[0];
    if (!gx) return;
    const Tensor& g = args.grad_output;
    const std::size_t off = begin * g.cols();
    for (std::size_t i = 0; i < g.size(); ++i) (*gx)[off + i] += g[i];
  };
  return graph_of(a).apply(std::move(op), {a});
}

}  // namespace vmg
