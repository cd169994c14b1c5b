#pragma once

#include <string_view>

#include "vmg/graph.hpp"
#include "vmg/matgauss.hpp"
#include "vmg/tensor.hpp"

namespace vmg {

/// Gam(shape, rate), stored as logs so both stay positive under
/// unconstrained updates.
class GammaDist {
 public:
  GammaDist() = default;
  GammaDist(double shape, double rate);
  static GammaDist from_logs(double log_shape, double log_rate);

  double shape() const;
  double rate() const;
  double log_shape() const noexcept { return log_shape_; }
  double log_rate() const noexcept { return log_rate_; }
  double& log_shape() noexcept { return log_shape_; }
  double& log_rate() noexcept { return log_rate_; }

  /// E[tau] = a / b.
  double mean() const;
  /// E[log tau] = digamma(a) - log b.
  double mean_log() const;

 private:
  double log_shape_ = 0.0;
  double log_rate_ = 0.0;
};

struct GammaVars {
  Var log_shape;
  Var log_rate;

  Var shape() const;
  Var rate() const;
  Var mean() const;
  Var mean_log() const;
};

/// Named parameters `<prefix>.log_shape` / `<prefix>.log_rate`, or constants
/// when the prefix is empty.
GammaVars bind(Graph& g, const GammaDist& dist, std::string_view prefix = {});

/// KL(q || p) between Gamma distributions.
double gamma_kl(const GammaDist& q, const GammaDist& p);
Var gamma_kl(const GammaVars& q, const GammaDist& p);

/// Sum over elements of E_q(tau)[log N(r | 0, 1/tau)].
double expected_gaussian_loglik(const Tensor& residual, const GammaDist& q_tau);
Var expected_gaussian_loglik(Var residual, const GammaVars& q_tau);

/// E[KL(q(W) || MN(0, I/tau_r, I/tau_c))] under independent Gamma posteriors
/// on the prior precisions, for diagonal q.
Var expected_weight_kl_under_gamma_scales(Var mean, Var row_log_var, Var col_log_var,
                                          const GammaVars& tau_r, const GammaVars& tau_c);
double expected_weight_kl_under_gamma_scales(const MatrixGaussian& q, const GammaDist& tau_r,
                                             const GammaDist& tau_c);

/// Cubic approximation of -KL(N(theta | mu, alpha mu^2) || log-uniform):
/// k + 0.5 log(alpha) + c1 alpha + c2 alpha^2 + c3 alpha^3.
struct LogUniformKl {
  static constexpr double c1 = 1.16145124;
  static constexpr double c2 = -1.50204118;
  static constexpr double c3 = 0.58629921;
  /// Matches the exact value at alpha = 1 for a log-uniform prior on
  /// |theta| in [1e-8, 1e8].
  static constexpr double k = -2.9180432664083153;
};

double neg_kl_log_uniform(double alpha);
Var neg_kl_log_uniform(Var alpha);

/// q(x) = N(x | m, alpha m^2) elementwise with one shared alpha.
struct MultiplicativeGaussianPosterior {
  Tensor mean;
  double log_alpha = 0.0;
  double alpha_max = 1.0;

  /// min(exp(log_alpha), alpha_max).
  double alpha() const;
};

struct MultiplicativeVars {
  Var mean;
  Var log_alpha;
  double alpha_max = 1.0;

  /// Clamped alpha as a graph value.
  Var alpha() const;
};

MultiplicativeVars bind(Graph& g, const MultiplicativeGaussianPosterior& post,
                        std::string_view prefix = {});

/// mean * (1 + sqrt(alpha) * eps).
Var sample_multiplicative(const MultiplicativeVars& post, Var eps);
Tensor sample_multiplicative(const MultiplicativeGaussianPosterior& post, const Tensor& eps);

/// log of the Student-t predictive obtained by integrating tau ~ q_tau out
/// of N(y | f, 1/tau).
double student_t_log_density(double residual, const GammaDist& q_tau);

}  // namespace vmg
