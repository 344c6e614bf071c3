#include <cmath>
#include <fstream>
#include <limits>

#include "json_util.hpp"
#include "sfnn/error.hpp"
#include "sfnn/protocol.hpp"

namespace sfnn {

namespace {

nlohmann::ordered_json real_or_null(double v) {
  return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

double real_from(const nlohmann::ordered_json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

}  // namespace

std::string to_json_line(const TrialResult& t) {
  nlohmann::ordered_json j;
  j["model"] = t.model;
  j["lookback"] = t.lookback;
  j["horizon"] = t.horizon;
  j["seed"] = t.seed;
  j["status"] = t.ok() ? "ok" : "error";
  j["val_mse"] = real_or_null(t.val_mse);
  j["test_mse"] = real_or_null(t.test_mse);
  j["epochs_run"] = t.epochs_run;
  if (t.error) j["error"] = *t.error;
  j["config"] = detail::to_json(t.config);
  j["train_config"] = detail::to_json(t.train_config);
  // Timing stays last so ledgers can be compared after stripping it.
  j["wall_time"] = t.wall_time_seconds;
  return j.dump();
}

TrialResult trial_from_json_line(const std::string& line) {
  try {
    const auto j = nlohmann::ordered_json::parse(line);
    TrialResult t;
    t.model = j.at("model").get<std::string>();
    t.lookback = j.at("lookback").get<std::size_t>();
    t.horizon = j.at("horizon").get<std::size_t>();
    t.seed = j.at("seed").get<std::uint64_t>();
    t.val_mse = real_from(j.at("val_mse"));
    t.test_mse = real_from(j.at("test_mse"));
    t.epochs_run = j.value("epochs_run", std::size_t{0});
    if (j.at("status").get<std::string>() != "ok") t.error = j.value("error", std::string("unknown error"));
    if (j.contains("config")) t.config = detail::sfnn_config_from_json(j.at("config"));
    if (j.contains("train_config")) {
      const auto& tc = j.at("train_config");
      t.train_config.learning_rate = tc.at("learning_rate").get<double>();
      t.train_config.batch_size = tc.at("batch_size").get<std::size_t>();
      t.train_config.max_epochs = tc.at("max_epochs").get<std::size_t>();
      t.train_config.patience = tc.at("patience").get<std::size_t>();
      t.train_config.adam_beta1 = tc.at("adam_beta1").get<double>();
      t.train_config.adam_beta2 = tc.at("adam_beta2").get<double>();
      t.train_config.adam_eps = tc.at("adam_eps").get<double>();
      t.train_config.seed = tc.at("seed").get<std::uint64_t>();
    }
    t.wall_time_seconds = j.value("wall_time", 0.0);
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed ledger line: ") + e.what());
  }
}

TrialLedger::TrialLedger(std::filesystem::path path) : path_(std::move(path)) {
  std::ifstream in(path_);
  if (!in) return;
  std::string line;
  std::size_t line_no = 0;
  bool dropped_partial = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      trials_.push_back(trial_from_json_line(line));
    } catch (const ParseError&) {
      // A truncated final line is what an interrupted append leaves behind.
      if (in.peek() == std::char_traits<char>::eof()) {
        dropped_partial = true;
        break;
      }
      throw ParseError(path_.string() + ": malformed ledger line " + std::to_string(line_no));
    }
  }
  in.close();
  if (dropped_partial) {
    std::ofstream out(path_, std::ios::trunc);
    for (const auto& t : trials_) out << to_json_line(t) << '\n';
  }
}

bool TrialLedger::contains(const std::string& model, std::size_t lookback, std::size_t horizon,
                           std::uint64_t seed) const {
  for (const auto& t : trials_) {
    if (t.model == model && t.lookback == lookback && t.horizon == horizon && t.seed == seed) return true;
  }
  return false;
}

void TrialLedger::append(const TrialResult& trial) {
  if (!path_.empty()) {
    std::ofstream out(path_, std::ios::app);
    if (!out) throw IoError("cannot append to ledger " + path_.string());
    out << to_json_line(trial) << '\n';
  }
  trials_.push_back(trial);
}

}  // namespace sfnn
