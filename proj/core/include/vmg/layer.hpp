#pragma once

#include <cstddef>
#include <optional>
#include <string_view>

#include "vmg/graph.hpp"
#include "vmg/matgauss.hpp"
#include "vmg/priors.hpp"
#include "vmg/tensor.hpp"

namespace vmg {

/// One layer with a diagonal matrix-Gaussian weight posterior over an
/// r x c weight matrix (r counts the bias column) and optional pseudo-data.
///
/// Inputs arrive already augmented and scaled; the caller applies the
/// nonlinearity.
struct VMGLayer {
  Tensor mean;         ///< r x c; all zeros and not trained when zero_mean
  Tensor row_log_var;  ///< length r
  Tensor col_log_var;  ///< length c
  MultiplicativeGaussianPosterior pseudo_in;   ///< N_p x r (empty when N_p = 0)
  MultiplicativeGaussianPosterior pseudo_out;  ///< N_p x c
  double damping = 1e-8;
  bool zero_mean = false;
  bool allow_saturated_pseudo = false;  ///< accept N_p == r

  std::size_t in_dim() const noexcept { return mean.rows(); }
  std::size_t out_dim() const noexcept { return mean.cols(); }
  std::size_t pseudo_count() const noexcept { return pseudo_in.mean.rows(); }
  bool has_pseudo_data() const noexcept { return !pseudo_in.mean.empty(); }

  MatrixGaussian posterior() const;
  /// Throws std::invalid_argument when shapes or N_p < r (N_p <= r when
  /// saturation is allowed) are violated.
  void validate() const;
};

struct LayerVars {
  Var mean;
  Var row_log_var;
  Var col_log_var;
  std::optional<MultiplicativeVars> pseudo_in;
  std::optional<MultiplicativeVars> pseudo_out;
  double damping = 1e-8;
  bool zero_mean = false;

  std::size_t in_dim() const { return mean.value().rows(); }
  std::size_t out_dim() const { return mean.value().cols(); }
};

/// Parameters are named `<prefix>.mean`, `<prefix>.row`, `<prefix>.col`,
/// `<prefix>.pseudo_in.*`, `<prefix>.pseudo_out.*`. An empty prefix binds
/// everything as constants. The mean is a constant when zero_mean.
LayerVars bind(Graph& g, const VMGLayer& layer, std::string_view prefix = {});

/// Per-row Gaussian moments of the pre-activations: mean is M_b x c and the
/// scalar row variance s_i is M_b x 1, so Var[b_ij] = s_i * exp(col_log_var_j).
struct RowMoments {
  Var mean;
  Var row_var;
};

RowMoments marginal_moments(const LayerVars& layer, Var a);

/// Moments conditioned on one draw of the pseudo-data. The damped pseudo
/// Gram matrix is factored once for the whole batch; row variances are
/// clamped at zero.
RowMoments conditional_moments(const LayerVars& layer, Var a, Var pseudo_in, Var pseudo_out);

/// B = mean + sqrt(s_i * v_j) * E, never forming an M_b x M_b matrix.
Var marginal_local_sample(const LayerVars& layer, Var a, Var noise);
Var conditional_local_sample(const LayerVars& layer, Var a, Var pseudo_in, Var pseudo_out, Var noise);

/// Correlated draw from MN(AM, AUA^T + jitter I, V). Test-sized batches only.
Var full_local_sample(const LayerVars& layer, Var a, Var noise, double jitter = 1e-10);

/// q(tau_r) q(tau_c) for a Gamma-scaled weight prior.
struct GammaScaleVars {
  GammaVars row;
  GammaVars col;
};

/// -KL(q(W) || p(W)) - KL(q(pseudo_in)) - KL(q(pseudo_out)). The weight term
/// is against MN(0, I, I), or its expectation under Gamma-distributed
/// precisions when `scales` is set. KLs of the scales themselves are not
/// included.
Var layer_complexity_loss(const LayerVars& layer, const std::optional<GammaScaleVars>& scales = std::nullopt);

}  // namespace vmg
