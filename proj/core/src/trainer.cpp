#include "vmg/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

namespace vmg {
namespace {

void check_aligned(std::size_t params, std::size_t other, const char* what) {
  if (params != other) {
    throw std::invalid_argument(std::string(what) + ": " + std::to_string(other) + " entries for " +
                                std::to_string(params) + " parameters");
  }
}

void warn(const TrainCallbacks& cb, const std::string& msg) {
  if (cb.on_warning) cb.on_warning(msg);
}

std::string describe_columns(const std::vector<std::size_t>& cols) {
  std::string s;
  for (std::size_t c : cols) s += (s.empty() ? "" : ", ") + std::to_string(c);
  return s;
}

void set_statistics(VMGNetwork& net, const Dataset& data, const TrainCallbacks& cb) {
  if (net.config.normalize_inputs) {
    auto stats = column_stats(data.x);
    if (!stats.constant_columns.empty()) {
      warn(cb, "constant feature columns " + describe_columns(stats.constant_columns) + " left unscaled");
    }
    net.input_mean = stats.mean;
    net.input_std = stats.std;
  }
  if (net.config.task == Task::kRegression) {
    auto stats = column_stats(data.y);
    if (!stats.constant_columns.empty()) {
      warn(cb, "constant target columns " + describe_columns(stats.constant_columns) + " left unscaled");
    }
    net.target_mean = stats.mean;
    net.target_std = stats.std;
  }
}

Tensor rows_of(const Tensor& m, std::span<const std::size_t> idx) {
  const std::size_t c = m.cols();
  Tensor out({idx.size(), c});
  for (std::size_t i = 0; i < idx.size(); ++i) std::copy_n(m.data() + idx[i] * c, c, out.data() + i * c);
  return out;
}

}  // namespace

AdamState make_adam_state(std::span<const ParamRef> params, AdamConfig config) {
  AdamState s{config, {}, {}, 0};
  for (const auto& p : params) {
    s.m.emplace_back(p.values.size(), 0.0);
    s.v.emplace_back(p.values.size(), 0.0);
  }
  return s;
}

bool adam_step(AdamState& state, std::span<const ParamRef> params, std::span<const Tensor> grads) {
  check_aligned(params.size(), grads.size(), "adam_step gradients");
  check_aligned(params.size(), state.m.size(), "adam_step moments");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (grads[k].size() != params[k].values.size()) {
      throw ShapeError("adam_step: gradient for '" + params[k].name + "' has " + std::to_string(grads[k].size()) +
                       " values, parameter has " + std::to_string(params[k].values.size()));
    }
    if (!grads[k].all_finite()) return false;
  }
  const auto& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& m = state.m[k];
    auto& v = state.v[k];
    auto values = params[k].values;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = grads[k][i];
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
      values[i] -= c.step_size * (m[i] / correction1) / (std::sqrt(v[i] / correction2) + c.epsilon);
    }
  }
  return true;
}

AveragedParams make_average(std::span<const ParamRef> params) {
  AveragedParams avg;
  for (const auto& p : params) avg.values.emplace_back(p.values.begin(), p.values.end());
  return avg;
}

void ema_update(AveragedParams& avg, std::span<const ParamRef> params, double decay) {
  check_aligned(params.size(), avg.values.size(), "ema_update");
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& a = avg.values[k];
    if (a.size() != params[k].values.size()) throw ShapeError("ema_update: size mismatch for '" + params[k].name + "'");
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = decay * a[i] + (1.0 - decay) * params[k].values[i];
  }
}

void copy_average(const AveragedParams& avg, std::span<const ParamRef> params) {
  check_aligned(params.size(), avg.values.size(), "copy_average");
  for (std::size_t k = 0; k < params.size(); ++k) {
    std::copy(avg.values[k].begin(), avg.values[k].end(), params[k].values.begin());
  }
}

std::string to_json_line(const HistoryRecord& r) {
  nlohmann::ordered_json j{{"step", r.step},
                           {"epoch", r.epoch},
                           {"elbo", r.elbo},
                           {"expected_loglik", r.expected_loglik},
                           {"kl", r.kl},
                           {"wall_time", r.wall_time}};
  if (r.skipped) j["skipped"] = true;
  return j.dump();
}

TrainResult train(const NetworkConfig& config, const TrainConfig& tc, const Dataset& data,
                  const TrainCallbacks& callbacks) {
  const std::size_t n = data.size();
  if (n == 0) throw std::invalid_argument("train: empty dataset");
  if (data.x.cols() != config.widths.front()) {
    throw ShapeError("train: data has " + std::to_string(data.x.cols()) + " features, network expects " +
                     std::to_string(config.widths.front()));
  }
  if (tc.batch_size == 0 || tc.window == 0) throw std::invalid_argument("train: batch size and window must be >= 1");

  TrainResult result;
  result.rng = Rng(tc.seed);
  Rng& rng = result.rng;
  VMGNetwork net = init_network(config, rng);
  set_statistics(net, data, callbacks);

  auto params = parameters(net);
  AdamState adam = make_adam_state(params, tc.adam);
  AveragedParams avg = make_average(params);
  const std::size_t batch = std::min(tc.batch_size, n);
  const auto start = std::chrono::steady_clock::now();

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::size_t step = 0, consecutive_nan = 0, stale_windows = 0;
  double window_sum = 0.0, best_window = -std::numeric_limits<double>::infinity();
  std::size_t window_count = 0;
  bool stop = false;
  result.stop_reason = "max_epochs";

  auto finish = [&](TrainResult& r) {
    r.raw_network = net;
    r.network = net;
    copy_average(avg, parameters(r.network));
  };

  for (std::size_t epoch = 0; epoch < tc.max_epochs && !stop; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t begin = 0; begin < n && !stop; begin += batch) {
      const std::span<const std::size_t> idx(order.data() + begin, std::min(batch, n - begin));
      const Tensor xb = rows_of(data.x, idx), yb = rows_of(data.y, idx);
      const NetworkNoise noise = draw_noise(net, idx.size(), rng);

      HistoryRecord rec;
      rec.step = ++step;
      rec.epoch = epoch;
      std::vector<Tensor> grads;
      try {
        Graph g(tc.graph);
        auto vars = vmg::bind(g, net, true);
        auto parts = build_elbo(vars, net, xb, yb, n, noise);
        rec.elbo = parts.elbo.value().item();
        rec.expected_loglik = parts.expected_loglik.value().item();
        rec.kl = parts.kl.value().item();
        if (std::isfinite(rec.elbo)) {
          auto named = g.gradient(parts.elbo);
          grads.reserve(params.size());
          for (const auto& p : params) {
            auto it = named.find(p.name);
            Tensor gneg = it->second;
            for (double& v : gneg.values()) v = -v;
            grads.push_back(std::move(gneg));
          }
        }
      } catch (const NumericalError& e) {
        warn(callbacks, "step " + std::to_string(rec.step) + ": " + e.what());
        rec.elbo = rec.expected_loglik = rec.kl = std::numeric_limits<double>::quiet_NaN();
      }

      if (!std::isfinite(rec.elbo)) {
        if (++consecutive_nan >= 2) {
          result.history.push_back(rec);
          result.stop_reason = "diverged";
          finish(result);
          throw TrainingDiverged("training diverged: non-finite ELBO on two consecutive steps (step " +
                                     std::to_string(rec.step) + ")",
                                 std::move(result));
        }
      } else {
        consecutive_nan = 0;
      }
      if (grads.empty() || !adam_step(adam, params, grads)) {
        rec.skipped = true;
        ++result.skipped_steps;
        if (!grads.empty()) warn(callbacks, "step " + std::to_string(rec.step) + ": non-finite gradient, skipped");
      } else {
        ema_update(avg, params, tc.ema_decay);
      }
      if (tc.log_wall_time) {
        rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      }
      result.history.push_back(rec);
      if (callbacks.on_step) callbacks.on_step(rec);

      if (std::isfinite(rec.elbo)) {
        window_sum += rec.elbo / static_cast<double>(n);
        ++window_count;
      }
      if (step % tc.window == 0 && window_count > 0) {
        const double mean = window_sum / static_cast<double>(window_count);
        if (mean > best_window + tc.tolerance) {
          best_window = mean;
          stale_windows = 0;
        } else if (++stale_windows >= tc.patience) {
          result.converged = true;
          result.stop_reason = "converged";
          stop = true;
        }
        window_sum = 0.0;
        window_count = 0;
      }
      if (tc.max_steps > 0 && step >= tc.max_steps) {
        result.stop_reason = "max_steps";
        stop = true;
      }
    }
  }
  finish(result);
  return result;
}

}  // namespace vmg
