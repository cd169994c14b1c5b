#include "vmg/priors.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "vmg/ops.hpp"

namespace vmg {
namespace {

constexpr double kLog2Pi = 1.8378770664093453;

}  // namespace

GammaDist::GammaDist(double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0)) {
    throw std::invalid_argument("GammaDist: shape and rate must be positive");
  }
  log_shape_ = std::log(shape);
  log_rate_ = std::log(rate);
}

GammaDist GammaDist::from_logs(double log_shape, double log_rate) {
  GammaDist d;
  d.log_shape_ = log_shape;
  d.log_rate_ = log_rate;
  return d;
}

double GammaDist::shape() const { return std::exp(log_shape_); }
double GammaDist::rate() const { return std::exp(log_rate_); }
double GammaDist::mean() const { return std::exp(log_shape_ - log_rate_); }
double GammaDist::mean_log() const { return boost::math::digamma(shape()) - log_rate_; }

Var GammaVars::shape() const { return exp(log_shape); }
Var GammaVars::rate() const { return exp(log_rate); }
Var GammaVars::mean() const { return exp(log_shape - log_rate); }
Var GammaVars::mean_log() const { return digamma(shape()) - log_rate; }

GammaVars bind(Graph& g, const GammaDist& dist, std::string_view prefix) {
  const std::string p(prefix);
  if (p.empty()) {
    return {g.scalar(dist.log_shape()), g.scalar(dist.log_rate())};
  }
  return {g.parameter(p + ".log_shape", Tensor::scalar(dist.log_shape())),
          g.parameter(p + ".log_rate", Tensor::scalar(dist.log_rate()))};
}

double gamma_kl(const GammaDist& q, const GammaDist& p) {
  Graph g;
  return gamma_kl(vmg::bind(g, q), p).value().item();
}

Var gamma_kl(const GammaVars& q, const GammaDist& p) {
  const double a0 = p.shape(), log_b0 = p.log_rate(), b0 = p.rate();
  Var a1 = q.shape();
  Var b1 = q.rate();
  return (a1 - a0) * digamma(a1) - lgamma(a1) + boost::math::lgamma(a0) +
         a0 * (q.log_rate - log_b0) + a1 * (b0 - b1) / b1;
}

double expected_gaussian_loglik(const Tensor& residual, const GammaDist& q_tau) {
  Graph g;
  return expected_gaussian_loglik(g.constant(residual), vmg::bind(g, q_tau)).value().item();
}

Var expected_gaussian_loglik(Var residual, const GammaVars& q_tau) {
  const auto n = static_cast<double>(residual.value().size());
  return n * (0.5 * q_tau.mean_log() - 0.5 * kLog2Pi) - 0.5 * q_tau.mean() * sum(square(residual));
}

Var expected_weight_kl_under_gamma_scales(Var mean, Var row_log_var, Var col_log_var,
                                          const GammaVars& tau_r, const GammaVars& tau_c) {
  const Tensor& m = mean.value();
  const std::size_t r = row_log_var.value().size(), c = col_log_var.value().size();
  if (m.rank() != 2 || m.rows() != r || m.cols() != c) {
    throw ShapeError("expected_weight_kl_under_gamma_scales: mean " + shape_str(m.shape()) +
                     " vs row/col sizes " + std::to_string(r) + "/" + std::to_string(c));
  }
  const double n = static_cast<double>(r), p = static_cast<double>(c);
  Var traces = sum(exp(row_log_var)) * sum(exp(col_log_var)) + sum(square(mean));
  return 0.5 * (tau_r.mean() * tau_c.mean() * traces - n * p - n * p * (tau_r.mean_log() + tau_c.mean_log()) -
                p * sum(row_log_var) - n * sum(col_log_var));
}

double expected_weight_kl_under_gamma_scales(const MatrixGaussian& q, const GammaDist& tau_r,
                                             const GammaDist& tau_c) {
  if (!q.is_diagonal()) {
    throw std::invalid_argument("expected_weight_kl_under_gamma_scales: q must be diagonal");
  }
  Graph g;
  auto v = vmg::bind(g, q);
  return expected_weight_kl_under_gamma_scales(v.mean, v.row.param, v.col.param, vmg::bind(g, tau_r),
                                               vmg::bind(g, tau_c))
      .value()
      .item();
}

double neg_kl_log_uniform(double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("neg_kl_log_uniform: alpha must be positive");
  using K = LogUniformKl;
  return K::k + 0.5 * std::log(alpha) + alpha * (K::c1 + alpha * (K::c2 + alpha * K::c3));
}

Var neg_kl_log_uniform(Var alpha) {
  using K = LogUniformKl;
  return K::k + 0.5 * log(alpha) + alpha * (K::c1 + alpha * (K::c2 + alpha * K::c3));
}

double MultiplicativeGaussianPosterior::alpha() const {
  return std::exp(std::min(log_alpha, std::log(alpha_max)));
}

Var MultiplicativeVars::alpha() const { return exp(clamp_max(log_alpha, std::log(alpha_max))); }

MultiplicativeVars bind(Graph& g, const MultiplicativeGaussianPosterior& post, std::string_view prefix) {
  if (!(post.alpha_max > 0.0)) throw std::invalid_argument("multiplicative posterior: alpha_max must be positive");
  const std::string p(prefix);
  if (p.empty()) {
    return {g.constant(post.mean), g.scalar(post.log_alpha), post.alpha_max};
  }
  return {g.parameter(p + ".mean", post.mean),
          g.parameter(p + ".log_alpha", Tensor::scalar(post.log_alpha)), post.alpha_max};
}

Var sample_multiplicative(const MultiplicativeVars& post, Var eps) {
  if (eps.shape() != post.mean.shape()) {
    throw ShapeError("sample_multiplicative: noise " + shape_str(eps.shape()) + " vs mean " +
                     shape_str(post.mean.shape()));
  }
  Var root_alpha = exp(0.5 * clamp_max(post.log_alpha, std::log(post.alpha_max)));
  return post.mean * (1.0 + root_alpha * eps);
}

Tensor sample_multiplicative(const MultiplicativeGaussianPosterior& post, const Tensor& eps) {
  Graph g;
  return sample_multiplicative(vmg::bind(g, post), g.constant(eps)).value();
}

double student_t_log_density(double residual, const GammaDist& q_tau) {
  // Integrating N(r | 0, 1/tau) Gam(tau | a, b) gives a Student-t with
  // 2a degrees of freedom and squared scale b / a.
  const double a = q_tau.shape(), b = q_tau.rate();
  return boost::math::lgamma(a + 0.5) - boost::math::lgamma(a) - 0.5 * std::log(2.0 * std::numbers::pi * b) -
         (a + 0.5) * std::log1p(residual * residual / (2.0 * b));
}

}  // namespace vmg
