#include "sfnn/training.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "json_util.hpp"
#include "sfnn/error.hpp"

namespace sfnn {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || batch_size < 1 || max_epochs < 1 || patience < 1 || patience > max_epochs) {
    throw InvalidConfig("train config needs learning_rate >= 0, batch_size, max_epochs, patience >= 1 and "
                        "patience <= max_epochs");
  }
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0) || !(adam_eps > 0.0)) {
    throw InvalidConfig("Adam betas must lie in [0, 1) and eps must be positive");
  }
}

OptimizerState OptimizerState::for_params(const SFNNParams& params) {
  OptimizerState s;
  for (auto t : params.tensors()) {
    s.first_moment.emplace_back(t.size(), 0.0);
    s.second_moment.emplace_back(t.size(), 0.0);
  }
  return s;
}

MseResult mse_loss(const Matrix& pred, const Matrix& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw ShapeMismatch("mse_loss: prediction and target shapes differ");
  }
  MseResult r{0.0, Matrix(pred.rows(), pred.cols())};
  if (pred.empty()) return r;
  const double count = static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred.data()[i] - target.data()[i];
    r.loss += d * d;
    r.grad.data()[i] = 2.0 * d / count;
  }
  r.loss /= count;
  return r;
}

void adam_step(SFNNParams& params, const SFNNParams& grads, OptimizerState& state, const TrainConfig& config) {
  auto ptens = params.tensors();
  const auto gtens = grads.tensors();
  if (state.first_moment.size() != ptens.size() || gtens.size() != ptens.size()) {
    throw ShapeMismatch("adam_step: optimizer state does not mirror the parameters");
  }
  ++state.step;
  const double b1 = config.adam_beta1, b2 = config.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t t = 0; t < ptens.size(); ++t) {
    auto& m = state.first_moment[t];
    auto& v = state.second_moment[t];
    if (m.size() != ptens[t].size() || gtens[t].size() != ptens[t].size()) {
      throw ShapeMismatch("adam_step: tensor sizes differ");
    }
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double g = gtens[t][i];
      m[i] = b1 * m[i] + (1.0 - b1) * g;
      v[i] = b2 * v[i] + (1.0 - b2) * g * g;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      ptens[t][i] -= config.learning_rate * mhat / (std::sqrt(vhat) + config.adam_eps);
    }
  }
}

TrainSegments make_train_segments(const NormalizedDataset& dataset, std::size_t lookback, std::size_t horizon) {
  const auto split = split_chronological(dataset);
  return TrainSegments{make_windows(split.train, lookback, horizon, false),
                       make_windows(split.val, lookback, horizon, true),
                       make_windows(split.test, lookback, horizon, true)};
}

double evaluate(const SFNNParams& params, const SFNNConfig& config, const WindowBatch& windows) {
  if (windows.count() == 0) return 0.0;
  constexpr std::size_t kChunk = 256;
  double sse = 0.0;
  std::size_t elements = 0;
  std::vector<std::size_t> picks;
  for (std::size_t start = 0; start < windows.count(); start += kChunk) {
    const std::size_t stop = std::min(windows.count(), start + kChunk);
    picks.resize(stop - start);
    std::iota(picks.begin(), picks.end(), start);
    const Matrix pred = predict(params, config, windows.gather_inputs(picks));
    const Matrix target = windows.gather_targets(picks);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double d = pred.data()[i] - target.data()[i];
      sse += d * d;
    }
    elements += pred.size();
  }
  return sse / static_cast<double>(elements);
}

TrainResult train(const NormalizedDataset& dataset, const SFNNConfig& model_config, const TrainConfig& train_config) {
  if (model_config.n_series != dataset.n_series()) {
    throw InvalidConfig("model n_series " + std::to_string(model_config.n_series) + " does not match dataset (" +
                        std::to_string(dataset.n_series()) + ")");
  }
  return train(make_train_segments(dataset, model_config.lookback, model_config.horizon), model_config,
               train_config);
}

TrainResult train(const TrainSegments& segments, const SFNNConfig& model_config, const TrainConfig& train_config) {
  model_config.validate();
  train_config.validate();
  if (segments.train.count() == 0 || segments.val.count() == 0 || segments.test.count() == 0) {
    throw TooShort("train: every segment needs at least one window");
  }
  const auto started = std::chrono::steady_clock::now();

  SeededRng rng(train_config.seed);
  SFNNParams params = init_params(model_config, rng);
  OptimizerState opt = OptimizerState::for_params(params);

  TrainResult result;
  TrainReport& report = result.report;
  report.seed = train_config.seed;
  report.config = model_config;
  report.train_config = train_config;
  report.parameter_count = params.parameter_count();
  report.best_val_mse = std::numeric_limits<double>::infinity();
  result.params = params;

  std::vector<std::size_t> order(segments.train.count());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t since_improvement = 0;

  for (std::size_t epoch = 1; epoch <= train_config.max_epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += train_config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + train_config.batch_size);
      const std::span<const std::size_t> picks(order.data() + start, stop - start);
      ForwardResult fr = forward(params, model_config, segments.train.gather_inputs(picks));
      MseResult loss = mse_loss(fr.output, segments.train.gather_targets(picks));
      if (!std::isfinite(loss.loss)) {
        throw NonFiniteLoss("training loss became " + std::to_string(loss.loss) + " at epoch " +
                            std::to_string(epoch) + ", batch starting at " + std::to_string(start) +
                            " (learning rate " + std::to_string(train_config.learning_rate) + ")");
      }
      const Gradients grads = backward(params, model_config, fr.trace, loss.grad);
      adam_step(params, grads.params, opt, train_config);
    }

    const double val = evaluate(params, model_config, segments.val);
    if (!std::isfinite(val)) {
      throw NonFiniteLoss("validation loss became " + std::to_string(val) + " at epoch " + std::to_string(epoch));
    }
    report.val_history.push_back(val);
    report.epochs_run = epoch;
    if (val < report.best_val_mse) {
      report.best_val_mse = val;
      report.best_epoch = epoch;
      result.params = params;
      since_improvement = 0;
    } else if (++since_improvement >= train_config.patience) {
      break;
    }
  }

  report.test_mse = evaluate(result.params, model_config, segments.test);
  report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

std::string to_json_line(const TrainReport& report) { return detail::to_json(report).dump(); }

}  // namespace sfnn
