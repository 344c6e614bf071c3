#pragma once

// Private JSON helpers shared by the core sources.

#include <json.hpp>

#include "sfnn/model.hpp"
#include "sfnn/training.hpp"

namespace sfnn::detail {

inline nlohmann::ordered_json to_json(const SFNNConfig& c) {
  nlohmann::ordered_json j;
  j["lookback"] = c.lookback;
  j["horizon"] = c.horizon;
  j["hidden_width"] = c.hidden_width;
  j["num_blocks"] = c.num_blocks;
  j["n_series"] = c.n_series;
  j["use_mean_centering"] = c.use_mean_centering;
  j["use_series_mixing"] = c.use_series_mixing;
  j["num_mixing_blocks"] = c.num_mixing_blocks;
  j["use_layer_norm"] = c.use_layer_norm;
  j["layer_norm_affine"] = c.layer_norm_affine;
  return j;
}

inline nlohmann::ordered_json to_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["learning_rate"] = c.learning_rate;
  j["batch_size"] = c.batch_size;
  j["max_epochs"] = c.max_epochs;
  j["patience"] = c.patience;
  j["adam_beta1"] = c.adam_beta1;
  j["adam_beta2"] = c.adam_beta2;
  j["adam_eps"] = c.adam_eps;
  j["seed"] = c.seed;
  return j;
}

inline SFNNConfig sfnn_config_from_json(const nlohmann::ordered_json& j) {
  SFNNConfig c;
  c.lookback = j.at("lookback").get<std::size_t>();
  c.horizon = j.at("horizon").get<std::size_t>();
  c.hidden_width = j.at("hidden_width").get<std::size_t>();
  c.num_blocks = j.at("num_blocks").get<std::size_t>();
  c.n_series = j.at("n_series").get<std::size_t>();
  c.use_mean_centering = j.at("use_mean_centering").get<bool>();
  c.use_series_mixing = j.at("use_series_mixing").get<bool>();
  c.num_mixing_blocks = j.at("num_mixing_blocks").get<std::size_t>();
  c.use_layer_norm = j.at("use_layer_norm").get<bool>();
  c.layer_norm_affine = j.at("layer_norm_affine").get<bool>();
  return c;
}

inline nlohmann::ordered_json to_json(const TrainReport& r) {
  nlohmann::ordered_json j;
  j["best_val_mse"] = r.best_val_mse;
  j["test_mse"] = r.test_mse;
  j["epochs_run"] = r.epochs_run;
  j["best_epoch"] = r.best_epoch;
  j["seed"] = r.seed;
  j["parameter_count"] = r.parameter_count;
  j["config"] = to_json(r.config);
  j["train_config"] = to_json(r.train_config);
  j["val_history"] = r.val_history;
  j["wall_time"] = r.wall_time_seconds;
  return j;
}

}  // namespace sfnn::detail
