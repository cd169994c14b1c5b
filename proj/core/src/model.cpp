#include "vmg/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "vmg/ops.hpp"

namespace vmg {
namespace {

constexpr double kPseudoInitHalfWidth = 0.01;

std::string layer_prefix(std::size_t l) { return "layer" + std::to_string(l); }

Tensor gaussian(Shape shape, Rng& rng, std::normal_distribution<double>& dist) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = dist(rng);
  return t;
}

void check_features(const VMGNetwork& net, const Tensor& x, const char* op) {
  if (x.rank() != 2 || x.cols() != net.input_dim()) {
    throw ShapeError(std::string(op) + ": inputs " + shape_str(x.shape()) + " do not have " +
                     std::to_string(net.input_dim()) + " columns");
  }
}

Tensor one_hot(const Tensor& labels, std::size_t classes) {
  if (labels.rank() != 2 || labels.cols() != 1) {
    throw ShapeError("classification targets must be N x 1 class indices, got " + shape_str(labels.shape()));
  }
  Tensor out({labels.rows(), classes});
  for (std::size_t i = 0; i < labels.rows(); ++i) {
    const double v = labels[i];
    if (!(v >= 0.0) || v >= static_cast<double>(classes) || v != std::floor(v)) {
      throw std::invalid_argument("classification target " + std::to_string(v) + " at row " + std::to_string(i) +
                                  " is not a class index below " + std::to_string(classes));
    }
    out(i, static_cast<std::size_t>(v)) = 1.0;
  }
  return out;
}

Tensor standardize_targets(const VMGNetwork& net, const Tensor& y) {
  if (y.rank() != 2 || y.cols() != net.output_dim()) {
    throw ShapeError("regression targets " + shape_str(y.shape()) + " do not have " +
                     std::to_string(net.output_dim()) + " columns");
  }
  Tensor out = y;
  for (std::size_t i = 0; i < y.rows(); ++i)
    for (std::size_t j = 0; j < y.cols(); ++j) out(i, j) = (y(i, j) - net.target_mean[j]) / net.target_std[j];
  return out;
}

Tensor slice(const Tensor& x, std::size_t begin, std::size_t end) {
  const std::size_t c = x.cols();
  return Tensor({end - begin, c}, std::vector<double>(x.data() + begin * c, x.data() + end * c));
}

double log_mean_exp(std::span<const double> v) {
  const double hi = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(hi)) return hi;
  double s = 0.0;
  for (double x : v) s += std::exp(x - hi);
  return hi + std::log(s / static_cast<double>(v.size()));
}

}  // namespace

std::string to_string(Task task) { return task == Task::kRegression ? "regression" : "classification"; }
std::string to_string(PriorKind kind) { return kind == PriorKind::kStandard ? "standard" : "gamma"; }
std::string to_string(PredictiveKind kind) { return kind == PredictiveKind::kPlugIn ? "plugin" : "student_t"; }

Task parse_task(std::string_view text) {
  if (text == "regression") return Task::kRegression;
  if (text == "classification") return Task::kClassification;
  throw std::invalid_argument("unknown task '" + std::string(text) + "' (expected regression or classification)");
}

PriorKind parse_prior_kind(std::string_view text) {
  if (text == "standard") return PriorKind::kStandard;
  if (text == "gamma") return PriorKind::kGammaScaled;
  throw std::invalid_argument("unknown prior '" + std::string(text) + "' (expected standard or gamma)");
}

PredictiveKind parse_predictive_kind(std::string_view text) {
  if (text == "plugin") return PredictiveKind::kPlugIn;
  if (text == "student_t") return PredictiveKind::kStudentT;
  throw std::invalid_argument("unknown predictive '" + std::string(text) + "' (expected plugin or student_t)");
}

std::size_t NetworkConfig::pseudo_count(std::size_t layer) const {
  return pseudo_counts.empty() ? 0 : pseudo_counts.at(layer);
}

double NetworkConfig::alpha_bound(std::size_t layer) const {
  return alpha_max.size() == 1 ? alpha_max.front() : alpha_max.at(layer);
}

void NetworkConfig::validate() const {
  if (widths.size() < 2) throw std::invalid_argument("widths: need at least an input and an output dimension");
  for (std::size_t w : widths) {
    if (w == 0) throw std::invalid_argument("widths: every width must be at least 1");
  }
  const std::size_t n = num_layers();
  if (!pseudo_counts.empty() && pseudo_counts.size() != n) {
    throw std::invalid_argument("pseudo_counts: expected " + std::to_string(n) + " entries, got " +
                                std::to_string(pseudo_counts.size()));
  }
  for (std::size_t l = 0; l < n; ++l) {
    const std::size_t d = widths[l] + 1;
    const bool too_many = allow_saturated_pseudo ? pseudo_count(l) > d : pseudo_count(l) >= d;
    if (too_many) {
      throw std::invalid_argument("pseudo_counts: layer " + std::to_string(l) + " has N_p = " +
                                  std::to_string(pseudo_count(l)) + " but N_p must be " +
                                  (allow_saturated_pseudo ? "<= D = " : "< D = ") + std::to_string(d) +
                                  " (augmented input dimension)");
    }
  }
  if (alpha_max.size() != 1 && alpha_max.size() != n) {
    throw std::invalid_argument("alpha_max: expected 1 or " + std::to_string(n) + " entries");
  }
  for (double a : alpha_max) {
    if (!(a > 0.0) || !std::isfinite(a)) throw std::invalid_argument("alpha_max: bounds must be positive");
  }
  if (!(damping > 0.0)) throw std::invalid_argument("damping: must be positive");
  if (!std::isfinite(init_log_var)) throw std::invalid_argument("init_log_var: must be finite");
  if (task == Task::kClassification && widths.back() < 2) {
    throw std::invalid_argument("widths: classification needs at least 2 output classes");
  }
}

GammaDist noise_precision_prior() { return GammaDist(6.0, 6.0); }
GammaDist weight_scale_prior() { return GammaDist(1.0, 0.5); }

VMGNetwork allocate_network(const NetworkConfig& config) {
  config.validate();
  VMGNetwork net;
  net.config = config;
  for (std::size_t l = 0; l < config.num_layers(); ++l) {
    const std::size_t r = config.widths[l] + 1, c = config.widths[l + 1], np = config.pseudo_count(l);
    VMGLayer layer;
    layer.mean = Tensor({r, c});
    layer.row_log_var = Tensor({r});
    layer.col_log_var = Tensor({c});
    layer.damping = config.damping;
    layer.zero_mean = config.zero_mean;
    layer.allow_saturated_pseudo = config.allow_saturated_pseudo;
    if (np > 0) {
      layer.pseudo_in = {Tensor({np, r}), 0.0, config.alpha_bound(l)};
      layer.pseudo_out = {Tensor({np, c}), 0.0, config.alpha_bound(l)};
    }
    net.layers.push_back(std::move(layer));
    if (config.prior == PriorKind::kGammaScaled) net.scales.push_back({weight_scale_prior(), weight_scale_prior()});
  }
  net.q_tau = noise_precision_prior();
  net.input_mean = Tensor({1, net.input_dim()});
  net.input_std = Tensor({1, net.input_dim()}, 1.0);
  net.target_mean = Tensor({1, net.output_dim()});
  net.target_std = Tensor({1, net.output_dim()}, 1.0);
  return net;
}

VMGNetwork init_network(const NetworkConfig& config, Rng& rng) {
  VMGNetwork net = allocate_network(config);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(-kPseudoInitHalfWidth, kPseudoInitHalfWidth);
  for (auto& layer : net.layers) {
    const double he_std = std::sqrt(2.0 / static_cast<double>(layer.in_dim()));
    if (!layer.zero_mean) {
      for (double& v : layer.mean.values()) v = he_std * normal(rng);
    }
    layer.row_log_var.fill(config.init_log_var / 2.0);
    layer.col_log_var.fill(config.init_log_var / 2.0);
    if (layer.has_pseudo_data()) {
      for (auto* post : {&layer.pseudo_in, &layer.pseudo_out}) {
        for (double& v : post->mean.values()) v = uniform(rng);
        post->log_alpha = std::log(post->alpha_max) - 1.0;
      }
    }
  }
  return net;
}

std::vector<ParamRef> parameters(VMGNetwork& net) {
  std::vector<ParamRef> out;
  auto scalar = [](double& v) { return std::span<double>(&v, 1); };
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    auto& layer = net.layers[l];
    const std::string p = layer_prefix(l);
    if (!layer.zero_mean) out.push_back({p + ".mean", layer.mean.values()});
    out.push_back({p + ".row", layer.row_log_var.values()});
    out.push_back({p + ".col", layer.col_log_var.values()});
    if (layer.has_pseudo_data()) {
      out.push_back({p + ".pseudo_in.mean", layer.pseudo_in.mean.values()});
      out.push_back({p + ".pseudo_in.log_alpha", scalar(layer.pseudo_in.log_alpha)});
      out.push_back({p + ".pseudo_out.mean", layer.pseudo_out.mean.values()});
      out.push_back({p + ".pseudo_out.log_alpha", scalar(layer.pseudo_out.log_alpha)});
    }
  }
  for (std::size_t l = 0; l < net.scales.size(); ++l) {
    const std::string p = layer_prefix(l);
    auto& s = net.scales[l];
    out.push_back({p + ".tau_r.log_shape", scalar(s.row.log_shape())});
    out.push_back({p + ".tau_r.log_rate", scalar(s.row.log_rate())});
    out.push_back({p + ".tau_c.log_shape", scalar(s.col.log_shape())});
    out.push_back({p + ".tau_c.log_rate", scalar(s.col.log_rate())});
  }
  if (net.config.task == Task::kRegression) {
    out.push_back({"tau.log_shape", scalar(net.q_tau.log_shape())});
    out.push_back({"tau.log_rate", scalar(net.q_tau.log_rate())});
  }
  return out;
}

NetworkNoise draw_noise(const VMGNetwork& net, std::size_t batch, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  NetworkNoise noise;
  noise.reserve(net.layers.size());
  for (const auto& layer : net.layers) {
    LayerNoise n;
    if (layer.has_pseudo_data()) {
      n.pseudo_in = gaussian(layer.pseudo_in.mean.shape(), rng, normal);
      n.pseudo_out = gaussian(layer.pseudo_out.mean.shape(), rng, normal);
    }
    n.output = gaussian({batch, layer.out_dim()}, rng, normal);
    noise.push_back(std::move(n));
  }
  return noise;
}

NetworkNoise zero_noise(const VMGNetwork& net, std::size_t batch) {
  NetworkNoise noise;
  for (const auto& layer : net.layers) {
    LayerNoise n;
    if (layer.has_pseudo_data()) {
      n.pseudo_in = Tensor(layer.pseudo_in.mean.shape());
      n.pseudo_out = Tensor(layer.pseudo_out.mean.shape());
    }
    n.output = Tensor({batch, layer.out_dim()});
    noise.push_back(std::move(n));
  }
  return noise;
}

NetworkVars bind(Graph& g, const VMGNetwork& net, bool trainable) {
  NetworkVars vars;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    vars.layers.push_back(vmg::bind(g, net.layers[l], trainable ? layer_prefix(l) : std::string{}));
  }
  for (std::size_t l = 0; l < net.scales.size(); ++l) {
    const std::string p = trainable ? layer_prefix(l) : std::string{};
    vars.scales.push_back({vmg::bind(g, net.scales[l].row, p.empty() ? p : p + ".tau_r"),
                           vmg::bind(g, net.scales[l].col, p.empty() ? p : p + ".tau_c")});
  }
  if (net.config.task == Task::kRegression) vars.q_tau = vmg::bind(g, net.q_tau, trainable ? "tau" : "");
  return vars;
}

Tensor normalize_inputs(const VMGNetwork& net, const Tensor& x) {
  check_features(net, x, "normalize_inputs");
  Tensor out = x;
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = (x(i, j) - net.input_mean[j]) / net.input_std[j];
  return out;
}

Var forward(const NetworkVars& vars, Var x, const NetworkNoise& noise, Activation activation) {
  if (noise.size() != vars.layers.size()) {
    throw std::invalid_argument("forward: noise for " + std::to_string(noise.size()) + " layers, network has " +
                                std::to_string(vars.layers.size()));
  }
  Graph& g = x.graph();
  const std::size_t batch = x.value().rows();
  Var h = x;
  for (std::size_t l = 0; l < vars.layers.size(); ++l) {
    const LayerVars& layer = vars.layers[l];
    const double scale = 1.0 / std::sqrt(static_cast<double>(layer.in_dim()));
    Var a = concat_cols(h, g.constant(Tensor({batch, 1}, 1.0))) * scale;
    Var e = g.constant(noise[l].output);
    Var b;
    if (layer.pseudo_in) {
      Var pin = sample_multiplicative(*layer.pseudo_in, g.constant(noise[l].pseudo_in)) * scale;
      Var pout = sample_multiplicative(*layer.pseudo_out, g.constant(noise[l].pseudo_out));
      b = conditional_local_sample(layer, a, pin, pout, e);
    } else {
      b = marginal_local_sample(layer, a, e);
    }
    h = l + 1 == vars.layers.size() ? b : activate(activation, b);
  }
  return h;
}

Tensor forward_sample(const VMGNetwork& net, const Tensor& x, const NetworkNoise& noise) {
  Graph g;
  auto vars = vmg::bind(g, net, false);
  Tensor out = forward(vars, g.constant(normalize_inputs(net, x)), noise, net.config.activation).value();
  if (!out.all_finite()) throw NumericalError("forward_sample: non-finite network output");
  if (net.config.task == Task::kRegression) {
    for (std::size_t i = 0; i < out.rows(); ++i)
      for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) = out(i, j) * net.target_std[j] + net.target_mean[j];
  }
  return out;
}

Tensor forward_sample(const VMGNetwork& net, const Tensor& x, Rng& rng) {
  check_features(net, x, "forward_sample");
  return forward_sample(net, x, draw_noise(net, x.rows(), rng));
}

ElboParts build_elbo(const NetworkVars& vars, const VMGNetwork& net, const Tensor& x, const Tensor& y,
                     std::size_t dataset_size, const NetworkNoise& noise) {
  check_features(net, x, "elbo");
  const std::size_t batch = x.rows();
  if (batch == 0 || y.rows() != batch) {
    throw ShapeError("elbo: batch of " + std::to_string(batch) + " inputs and " + std::to_string(y.rows()) +
                     " targets");
  }
  if (dataset_size < batch) throw std::invalid_argument("elbo: dataset size is smaller than the batch");
  Graph& g = vars.layers.front().mean.graph();
  Var f = forward(vars, g.constant(normalize_inputs(net, x)), noise, net.config.activation);

  Var loglik;
  if (net.config.task == Task::kRegression) {
    // tau is the precision of standardized residuals; the Jacobian of the
    // target standardization is added once per datapoint.
    double log_jacobian = 0.0;
    for (double s : net.target_std.values()) log_jacobian += std::log(s);
    loglik = expected_gaussian_loglik(g.constant(standardize_targets(net, y)) - f, *vars.q_tau) -
             static_cast<double>(batch) * log_jacobian;
  } else {
    loglik = sum(log_softmax_rows(f) * g.constant(one_hot(y, net.output_dim())));
  }
  Var scaled = loglik * (static_cast<double>(dataset_size) / static_cast<double>(batch));

  Var kl = g.scalar(0.0);
  for (std::size_t l = 0; l < vars.layers.size(); ++l) {
    std::optional<GammaScaleVars> scales;
    if (!vars.scales.empty()) {
      scales = vars.scales[l];
      kl = kl + gamma_kl(vars.scales[l].row, weight_scale_prior()) +
           gamma_kl(vars.scales[l].col, weight_scale_prior());
    }
    kl = kl - layer_complexity_loss(vars.layers[l], scales);
  }
  if (vars.q_tau) kl = kl + gamma_kl(*vars.q_tau, noise_precision_prior());
  return {scaled - kl, scaled, kl};
}

ElboEstimate elbo(const VMGNetwork& net, const Tensor& x, const Tensor& y, std::size_t dataset_size, Rng& rng) {
  Graph g;
  auto vars = vmg::bind(g, net, false);
  auto parts = build_elbo(vars, net, x, y, dataset_size, draw_noise(net, x.rows(), rng));
  return {parts.elbo.value().item(), parts.expected_loglik.value().item(), parts.kl.value().item()};
}

Prediction predict(const VMGNetwork& net, const Tensor& x, std::size_t samples, Rng& rng, const Tensor* y) {
  if (samples == 0) throw std::invalid_argument("predict: need at least one sample");
  check_features(net, x, "predict");
  const std::size_t n = x.rows(), d = net.output_dim();
  const bool regression = net.config.task == Task::kRegression;
  Tensor y_onehot;
  if (y) {
    if (y->rows() != n) throw ShapeError("predict: " + std::to_string(y->rows()) + " targets for " +
                                         std::to_string(n) + " inputs");
    if (regression && y->cols() != d) throw ShapeError("predict: targets need " + std::to_string(d) + " columns");
    if (!regression) y_onehot = one_hot(*y, d);
  }

  Prediction out{Tensor({n, d}), Tensor({n, d}), y ? Tensor({n, 1}) : Tensor()};
  const double e_tau = net.q_tau.mean();
  std::vector<double> noise_var(d);
  for (std::size_t j = 0; j < d; ++j) noise_var[j] = net.target_std[j] * net.target_std[j] / e_tau;

  constexpr std::size_t kChunk = 1000;
  for (std::size_t begin = 0; begin < n; begin += kChunk) {
    const std::size_t end = std::min(n, begin + kChunk), m = end - begin;
    Tensor xc = slice(x, begin, end);
    // Welford updates keep the variance exact when all samples coincide.
    Tensor run_mean({m, d}), run_m2({m, d});
    std::vector<std::vector<double>> ll(m, std::vector<double>(samples, 0.0));
    for (std::size_t s = 0; s < samples; ++s) {
      Tensor f = forward_sample(net, xc, rng);
      if (!regression) {
        for (std::size_t i = 0; i < m; ++i) {
          double hi = f(i, 0);
          for (std::size_t j = 1; j < d; ++j) hi = std::max(hi, f(i, j));
          double z = 0.0;
          for (std::size_t j = 0; j < d; ++j) z += std::exp(f(i, j) - hi);
          for (std::size_t j = 0; j < d; ++j) f(i, j) = std::exp(f(i, j) - hi) / z;
        }
      }
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
          const double delta = f(i, j) - run_mean(i, j);
          run_mean(i, j) += delta / static_cast<double>(s + 1);
          run_m2(i, j) += delta * (f(i, j) - run_mean(i, j));
        }
        if (!y || !regression) continue;
        double l = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          const double r = (*y)(begin + i, j) - f(i, j);
          if (net.config.predictive == PredictiveKind::kStudentT) {
            l += student_t_log_density(r / net.target_std[j], net.q_tau) - std::log(net.target_std[j]);
          } else {
            l += -0.5 * std::log(2.0 * std::numbers::pi * noise_var[j]) - 0.5 * r * r / noise_var[j];
          }
        }
        ll[i][s] = l;
      }
    }
    const double inv = 1.0 / static_cast<double>(samples);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        const double var = run_m2(i, j) * inv;
        out.mean(begin + i, j) = run_mean(i, j);
        out.std(begin + i, j) = std::sqrt(regression ? var + noise_var[j] : var);
      }
      if (!y) continue;
      if (regression) {
        out.log_lik[begin + i] = log_mean_exp(ll[i]);
      } else {
        double p = 0.0;
        for (std::size_t j = 0; j < d; ++j) p += y_onehot(begin + i, j) * out.mean(begin + i, j);
        out.log_lik[begin + i] = std::log(p);
      }
    }
  }
  return out;
}

std::vector<int> predicted_labels(const Tensor& probabilities) {
  std::vector<int> labels(probabilities.rows());
  for (std::size_t i = 0; i < probabilities.rows(); ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < probabilities.cols(); ++j) {
      if (probabilities(i, j) > probabilities(i, best)) best = j;
    }
    labels[i] = static_cast<int>(best);
  }
  return labels;
}

}  // namespace vmg
