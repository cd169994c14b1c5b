#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vmg/activation.hpp"
#include "vmg/graph.hpp"
#include "vmg/layer.hpp"
#include "vmg/priors.hpp"
#include "vmg/random.hpp"
#include "vmg/tensor.hpp"

namespace vmg {

enum class Task { kRegression, kClassification };
enum class PriorKind { kStandard, kGammaScaled };
/// How q(tau) enters the regression predictive: plug-in E[tau], or
/// integrated out to a Student-t.
enum class PredictiveKind { kPlugIn, kStudentT };

std::string to_string(Task task);
std::string to_string(PriorKind kind);
std::string to_string(PredictiveKind kind);
Task parse_task(std::string_view text);
PriorKind parse_prior_kind(std::string_view text);
PredictiveKind parse_predictive_kind(std::string_view text);

struct NetworkConfig {
  /// Input dim, hidden widths, output dim. For classification the output
  /// dim is the number of classes.
  std::vector<std::size_t> widths;
  /// Pseudo-data pairs per layer; empty means none anywhere.
  std::vector<std::size_t> pseudo_counts;
  /// Per-layer bound on alpha; a single entry applies to every layer.
  std::vector<double> alpha_max{1.0};
  Task task = Task::kRegression;
  bool zero_mean = false;
  PriorKind prior = PriorKind::kStandard;
  PredictiveKind predictive = PredictiveKind::kPlugIn;
  Activation activation = Activation::kRelu;
  double damping = 1e-8;
  double init_log_var = -4.605170185988091;  // log(1e-2)
  bool normalize_inputs = true;
  /// Permits N_p == D, where the pseudo-inputs span the whole input space
  /// and only the damping keeps the joint kernel invertible.
  bool allow_saturated_pseudo = false;

  std::size_t num_layers() const noexcept { return widths.empty() ? 0 : widths.size() - 1; }
  std::size_t pseudo_count(std::size_t layer) const;
  double alpha_bound(std::size_t layer) const;
  /// Throws std::invalid_argument naming the violated rule.
  void validate() const;
};

/// q(tau_r), q(tau_c) for one layer under the Gamma-scaled prior.
struct GammaScalePosterior {
  GammaDist row;
  GammaDist col;
};

/// Prior on the output noise precision of standardized targets.
GammaDist noise_precision_prior();
/// Prior on the row and column precisions of a Gamma-scaled weight prior.
GammaDist weight_scale_prior();

struct VMGNetwork {
  NetworkConfig config;
  std::vector<VMGLayer> layers;
  std::vector<GammaScalePosterior> scales;  ///< empty unless the prior is Gamma-scaled
  GammaDist q_tau;                          ///< used for regression only
  Tensor input_mean;                        ///< 1 x D_x
  Tensor input_std;                         ///< 1 x D_x
  Tensor target_mean;                       ///< 1 x D_y; zeros for classification
  Tensor target_std;                        ///< 1 x D_y; ones for classification

  std::size_t input_dim() const { return config.widths.front(); }
  std::size_t output_dim() const { return config.widths.back(); }
};

/// Network with the right shapes and every value zero (statistics at 0/1).
VMGNetwork allocate_network(const NetworkConfig& config);

/// He-initialized means, small log-variances, pseudo-data means from
/// U[-0.01, 0.01], log alpha one below its bound and q(tau) at its prior.
VMGNetwork init_network(const NetworkConfig& config, Rng& rng);

/// Mutable view of one trainable parameter group.
struct ParamRef {
  std::string name;
  std::span<double> values;
};

/// Trainable parameters in a fixed order. Names match those bound by
/// `bind(Graph&, const VMGNetwork&)`.
std::vector<ParamRef> parameters(VMGNetwork& net);

struct LayerNoise {
  Tensor output;      ///< M_b x c
  Tensor pseudo_in;   ///< N_p x r, empty without pseudo-data
  Tensor pseudo_out;  ///< N_p x c
};
using NetworkNoise = std::vector<LayerNoise>;

/// Standard normal noise for one forward pass, drawn layer by layer.
NetworkNoise draw_noise(const VMGNetwork& net, std::size_t batch, Rng& rng);
NetworkNoise zero_noise(const VMGNetwork& net, std::size_t batch);

struct NetworkVars {
  std::vector<LayerVars> layers;
  std::vector<GammaScaleVars> scales;
  std::optional<GammaVars> q_tau;
};

/// Binds every parameter under the names used by `parameters`, or as
/// constants when `trainable` is false.
NetworkVars bind(Graph& g, const VMGNetwork& net, bool trainable = true);

/// Divides by the stored input statistics.
Tensor normalize_inputs(const VMGNetwork& net, const Tensor& x);

/// Standardized output for normalized inputs: per layer, append a column of
/// ones, divide by sqrt of the augmented width, sample pre-activations and
/// apply the activation everywhere except the last layer.
Var forward(const NetworkVars& vars, Var x, const NetworkNoise& noise, Activation activation);

/// Output for raw inputs: regression outputs are mapped back to the target
/// scale; classification returns logits.
Tensor forward_sample(const VMGNetwork& net, const Tensor& x, const NetworkNoise& noise);
Tensor forward_sample(const VMGNetwork& net, const Tensor& x, Rng& rng);

struct ElboParts {
  Var elbo;
  Var expected_loglik;  ///< already scaled by N / M_b
  Var kl;               ///< total KL, positive
};

/// Single-sample ELBO estimate on a minibatch of raw inputs and targets.
/// Classification targets are N x 1 class indices.
ElboParts build_elbo(const NetworkVars& vars, const VMGNetwork& net, const Tensor& x, const Tensor& y,
                     std::size_t dataset_size, const NetworkNoise& noise);

struct ElboEstimate {
  double elbo = 0.0;
  double expected_loglik = 0.0;
  double kl = 0.0;
};

ElboEstimate elbo(const VMGNetwork& net, const Tensor& x, const Tensor& y, std::size_t dataset_size, Rng& rng);

struct Prediction {
  Tensor mean;     ///< N x D_y; class probabilities for classification
  Tensor std;      ///< N x D_y
  Tensor log_lik;  ///< N x 1; empty when no targets were given
};

/// Monte Carlo posterior predictive over `samples` forward passes.
Prediction predict(const VMGNetwork& net, const Tensor& x, std::size_t samples, Rng& rng,
                   const Tensor* y = nullptr);

/// Arg-max class per row of `probabilities`.
std::vector<int> predicted_labels(const Tensor& probabilities);

}  // namespace vmg
