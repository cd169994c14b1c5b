#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vmg/data.hpp"
#include "vmg/graph.hpp"
#include "vmg/model.hpp"

namespace vmg {

struct AdamConfig {
  double step_size = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t step = 0;
};

AdamState make_adam_state(std::span<const ParamRef> params, AdamConfig config = {});

/// Bias-corrected Adam descent on `grads`, which must line up with `params`.
/// If any gradient is non-finite nothing is changed, including the moments
/// and step count, and false is returned.
bool adam_step(AdamState& state, std::span<const ParamRef> params, std::span<const Tensor> grads);

/// Exponential moving average of parameter values.
struct AveragedParams {
  std::vector<std::vector<double>> values;
};

AveragedParams make_average(std::span<const ParamRef> params);
/// avg <- decay * avg + (1 - decay) * params.
void ema_update(AveragedParams& avg, std::span<const ParamRef> params, double decay);
void copy_average(const AveragedParams& avg, std::span<const ParamRef> params);

struct TrainConfig {
  std::uint64_t seed = 0;
  std::size_t max_epochs = 100;
  std::size_t max_steps = 0;  ///< 0 means no step limit
  /// Minibatch size; the whole dataset when it has fewer points.
  std::size_t batch_size = 100;
  AdamConfig adam;
  double ema_decay = 0.999;
  /// Stop once the windowed mean of ELBO / N has not improved by more than
  /// `tolerance` for `patience` consecutive windows of `window` steps.
  double tolerance = 1e-3;
  std::size_t window = 200;
  std::size_t patience = 20;
  bool log_wall_time = true;
  GraphOptions graph;
};

struct HistoryRecord {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double elbo = 0.0;
  double expected_loglik = 0.0;
  double kl = 0.0;
  double wall_time = 0.0;  ///< seconds since training started; 0 when not logged
  bool skipped = false;
};

/// One JSON object per line with the keys above.
std::string to_json_line(const HistoryRecord& record);

struct TrainCallbacks {
  std::function<void(const HistoryRecord&)> on_step;
  std::function<void(std::string_view)> on_warning;
};

struct TrainResult {
  VMGNetwork network;      ///< temporally averaged parameters, used for evaluation
  VMGNetwork raw_network;  ///< parameters after the last step
  std::vector<HistoryRecord> history;
  std::size_t skipped_steps = 0;
  bool converged = false;
  std::string stop_reason;
  Rng rng;
};

/// Raised when the ELBO is non-finite on two consecutive steps. Carries the
/// state reached so far so the caller can checkpoint it.
class TrainingDiverged : public NumericalError {
 public:
  TrainingDiverged(const std::string& what, TrainResult partial)
      : NumericalError(what), partial_(std::move(partial)) {}
  const TrainResult& partial() const noexcept { return partial_; }

 private:
  TrainResult partial_;
};

/// Sets input statistics (when the config asks for normalization) and, for
/// regression, target statistics from `data`, then runs Adam with temporal
/// averaging on seeded shuffled minibatches.
TrainResult train(const NetworkConfig& config, const TrainConfig& train_config, const Dataset& data,
                  const TrainCallbacks& callbacks = {});

}  // namespace vmg
