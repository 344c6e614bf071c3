#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "sfnn/data.hpp"
#include "sfnn/model.hpp"

namespace sfnn {

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  std::size_t max_epochs = 100;
  std::size_t patience = 10;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;

  /// Throws InvalidConfig. A learning rate of exactly zero is accepted (frozen run).
  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Adam moment estimates, one buffer per parameter tensor.
struct OptimizerState {
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::uint64_t step = 0;

  static OptimizerState for_params(const SFNNParams& params);
};

struct MseResult {
  double loss = 0.0;
  Matrix grad;  // 2 (pred - target) / element_count
};

/// Mean of squared errors over every element. Throws ShapeMismatch.
MseResult mse_loss(const Matrix& pred, const Matrix& target);

/// One bias-corrected Adam update; increments state.step.
void adam_step(SFNNParams& params, const SFNNParams& grads, OptimizerState& state, const TrainConfig& config);

struct TrainReport {
  double best_val_mse = 0.0;
  double test_mse = 0.0;
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  double wall_time_seconds = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t parameter_count = 0;
  SFNNConfig config;
  TrainConfig train_config;
  std::vector<double> val_history;
};

struct TrainResult {
  SFNNParams params;
  TrainReport report;
};

/// Training windows stay inside the training rows; validation and test windows
/// take their inputs from the rows just before their segment.
struct TrainSegments {
  WindowBatch train;
  WindowBatch val;
  WindowBatch test;
};
TrainSegments make_train_segments(const NormalizedDataset& dataset, std::size_t lookback, std::size_t horizon);

/// Mini-batch Adam with per-epoch shuffling and early stopping on validation MSE.
/// Returns the best-validation checkpoint and its test MSE.
/// Throws TooShort, InvalidConfig, NonFiniteLoss.
TrainResult train(const NormalizedDataset& dataset, const SFNNConfig& model_config, const TrainConfig& train_config);
TrainResult train(const TrainSegments& segments, const SFNNConfig& model_config, const TrainConfig& train_config);

/// Mean squared error over every window, in normalized units.
double evaluate(const SFNNParams& params, const SFNNConfig& config, const WindowBatch& windows);

/// One JSON object on a single line.
std::string to_json_line(const TrainReport& report);

}  // namespace sfnn
