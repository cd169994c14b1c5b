#include "vmg/layer.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "vmg/linalg.hpp"
#include "vmg/ops.hpp"

namespace vmg {
namespace {

Var row_variances(const LayerVars& layer) {
  return exp(reshape(layer.row_log_var, {1, layer.in_dim()}));
}

Var col_std(const LayerVars& layer) {
  return exp(0.5 * reshape(layer.col_log_var, {1, layer.out_dim()}));
}

void check_input(const LayerVars& layer, Var a, const char* op) {
  const Tensor& av = a.value();
  if (av.rank() != 2 || av.cols() != layer.in_dim()) {
    throw ShapeError(std::string(op) + ": input " + shape_str(av.shape()) + " does not match layer input dim " +
                     std::to_string(layer.in_dim()));
  }
}

void check_noise(Var noise, std::size_t rows, std::size_t cols, const char* op) {
  const Shape expected{rows, cols};
  if (noise.shape() != expected) {
    throw ShapeError(std::string(op) + ": noise " + shape_str(noise.shape()) + ", expected " + shape_str(expected));
  }
}

Var sample_from(const LayerVars& layer, const RowMoments& m, Var noise) {
  return m.mean + (sqrt(m.row_var) * col_std(layer)) * noise;
}

}  // namespace

MatrixGaussian VMGLayer::posterior() const {
  return MatrixGaussian(mean, DiagonalCov{row_log_var}, DiagonalCov{col_log_var});
}

void VMGLayer::validate() const {
  if (mean.rank() != 2) throw std::invalid_argument("VMGLayer: mean must be a matrix");
  if (row_log_var.size() != in_dim() || col_log_var.size() != out_dim()) {
    throw std::invalid_argument("VMGLayer: log-variance sizes do not match the " + std::to_string(in_dim()) + "x" +
                                std::to_string(out_dim()) + " mean");
  }
  if (!(damping > 0.0)) throw std::invalid_argument("VMGLayer: damping must be positive");
  if (has_pseudo_data()) {
    if (pseudo_in.mean.cols() != in_dim() || pseudo_out.mean.rows() != pseudo_count() ||
        pseudo_out.mean.cols() != out_dim()) {
      throw std::invalid_argument("VMGLayer: pseudo-data shapes " + shape_str(pseudo_in.mean.shape()) + " / " +
                                  shape_str(pseudo_out.mean.shape()) + " do not match the layer");
    }
    if (allow_saturated_pseudo ? pseudo_count() > in_dim() : pseudo_count() >= in_dim()) {
      throw std::invalid_argument("VMGLayer: pseudo-data count N_p = " + std::to_string(pseudo_count()) +
                                  " must be " + (allow_saturated_pseudo ? "at most" : "smaller than") +
                                  " the augmented input dimension " + std::to_string(in_dim()));
    }
  }
}

LayerVars bind(Graph& g, const VMGLayer& layer, std::string_view prefix) {
  layer.validate();
  const std::string p(prefix);
  auto leaf = [&](const Tensor& t, const char* suffix) {
    return p.empty() ? g.constant(t) : g.parameter(p + suffix, t);
  };
  LayerVars v;
  v.mean = layer.zero_mean ? g.constant(Tensor(layer.mean.shape())) : leaf(layer.mean, ".mean");
  v.row_log_var = leaf(layer.row_log_var, ".row");
  v.col_log_var = leaf(layer.col_log_var, ".col");
  if (layer.has_pseudo_data()) {
    v.pseudo_in = vmg::bind(g, layer.pseudo_in, p.empty() ? std::string{} : p + ".pseudo_in");
    v.pseudo_out = vmg::bind(g, layer.pseudo_out, p.empty() ? std::string{} : p + ".pseudo_out");
  }
  v.damping = layer.damping;
  v.zero_mean = layer.zero_mean;
  return v;
}

RowMoments marginal_moments(const LayerVars& layer, Var a) {
  check_input(layer, a, "marginal_local_sample");
  Var mean = layer.zero_mean ? a.graph().constant(Tensor({a.value().rows(), layer.out_dim()}))
                             : matmul(a, layer.mean);
  Var s = matmul(square(a), transpose(row_variances(layer)));
  return {mean, s};
}

RowMoments conditional_moments(const LayerVars& layer, Var a, Var pseudo_in, Var pseudo_out) {
  check_input(layer, a, "conditional_local_sample");
  const Tensor& pi = pseudo_in.value();
  const Tensor& po = pseudo_out.value();
  if (pi.rank() != 2 || pi.cols() != layer.in_dim() || po.rank() != 2 || po.rows() != pi.rows() ||
      po.cols() != layer.out_dim()) {
    throw ShapeError("conditional_local_sample: pseudo-data " + shape_str(pi.shape()) + " / " +
                     shape_str(po.shape()) + " do not match the layer");
  }
  Var u = row_variances(layer);  // 1 x r
  Var scaled = pseudo_in * u;     // A~ U
  Var chol;
  try {
    chol = cholesky(matmul(scaled, transpose(pseudo_in)), layer.damping);
  } catch (const linalg::CholeskyError& e) {
    throw NumericalError(std::string("conditional_local_sample: damped pseudo-data covariance is not positive "
                                     "definite (") +
                         e.what() + "); increase the damping or use fewer pseudo-points");
  }
  Var cross = solve_triangular(chol, matmul(scaled, transpose(a)));  // L^{-1} sigma_12, N_p x M_b
  Var prior_var = matmul(square(a), transpose(u));                    // sigma_22, M_b x 1
  Var explained = transpose(sum_rows(square(cross)));                 // M_b x 1
  Var row_var = clamp_min(prior_var - explained, 0.0);

  Var residual = layer.zero_mean ? pseudo_out : pseudo_out - matmul(pseudo_in, layer.mean);
  Var shift = matmul(transpose(cross), solve_triangular(chol, residual));
  Var mean = layer.zero_mean ? shift : matmul(a, layer.mean) + shift;
  return {mean, row_var};
}

Var marginal_local_sample(const LayerVars& layer, Var a, Var noise) {
  auto m = marginal_moments(layer, a);
  check_noise(noise, a.value().rows(), layer.out_dim(), "marginal_local_sample");
  return sample_from(layer, m, noise);
}

Var conditional_local_sample(const LayerVars& layer, Var a, Var pseudo_in, Var pseudo_out, Var noise) {
  auto m = conditional_moments(layer, a, pseudo_in, pseudo_out);
  check_noise(noise, a.value().rows(), layer.out_dim(), "conditional_local_sample");
  return sample_from(layer, m, noise);
}

Var full_local_sample(const LayerVars& layer, Var a, Var noise, double jitter) {
  check_input(layer, a, "full_local_sample");
  check_noise(noise, a.value().rows(), layer.out_dim(), "full_local_sample");
  Var row_cov = matmul(a * row_variances(layer), transpose(a));
  Var factor = cholesky(row_cov, jitter);
  Var mean = layer.zero_mean ? a.graph().constant(Tensor({a.value().rows(), layer.out_dim()}))
                             : matmul(a, layer.mean);
  return mean + matmul(factor, noise) * col_std(layer);
}

Var layer_complexity_loss(const LayerVars& layer, const std::optional<GammaScaleVars>& scales) {
  Var weight_kl = scales ? expected_weight_kl_under_gamma_scales(layer.mean, layer.row_log_var, layer.col_log_var,
                                                                 scales->row, scales->col)
                         : kl_diagonal(layer.mean, layer.row_log_var, layer.col_log_var);
  Var loss = -weight_kl;
  for (const auto* pseudo : {&layer.pseudo_in, &layer.pseudo_out}) {
    if (!*pseudo) continue;
    const auto count = static_cast<double>((*pseudo)->mean.value().size());
    loss = loss + count * neg_kl_log_uniform((*pseudo)->alpha());
  }
  return loss;
}

}  // namespace vmg
