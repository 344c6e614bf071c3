#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sfnn/data.hpp"
#include "sfnn/model.hpp"
#include "sfnn/training.hpp"

namespace sfnn {

// ---------------------------------------------------------------------------
// look-back grids

/// Look-back lengths scanned for one dataset (multiples of its period).
struct GridSpec {
  std::string dataset_name;
  std::size_t period = 0;
  std::vector<std::size_t> lookbacks;
  std::vector<std::size_t> horizons;
  std::size_t n_seeds = 10;
  SplitSpec split;

  /// Throws InvalidConfig unless lookbacks are strictly increasing and everything is positive.
  void validate() const;
};

/// ETTm1, ETTm2, ETTh1, ETTh2, Solar, Traffic, Electricity, ILI, Weather, Exchange.
std::vector<std::string> builtin_dataset_names();
/// Case-insensitive lookup; "Solar Energy" and "Exchange rate" are accepted aliases.
/// Throws UnknownDataset listing the known names.
GridSpec builtin_grid(const std::string& dataset_name);

// ---------------------------------------------------------------------------
// trials

struct TrialResult {
  std::string model = "sfnn";
  std::size_t lookback = 0;
  std::size_t horizon = 0;
  std::uint64_t seed = 0;
  double val_mse = 0.0;
  double test_mse = 0.0;
  std::size_t epochs_run = 0;
  double wall_time_seconds = 0.0;
  SFNNConfig config;
  TrainConfig train_config;
  std::optional<std::string> error;  // set when the run failed

  bool ok() const noexcept { return !error.has_value(); }
};

/// Append-only JSON-lines record of trials, one object per line. Opening an
/// existing file loads its trials so interrupted sweeps can resume.
class TrialLedger {
 public:
  explicit TrialLedger(std::filesystem::path path);

  bool contains(const std::string& model, std::size_t lookback, std::size_t horizon, std::uint64_t seed) const;
  void append(const TrialResult& trial);
  const std::vector<TrialResult>& trials() const noexcept { return trials_; }
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  std::vector<TrialResult> trials_;
};

std::string to_json_line(const TrialResult& trial);
/// Throws ParseError on malformed lines.
TrialResult trial_from_json_line(const std::string& line);

struct RunOptions {
  std::size_t workers = 1;
  /// Stop after this many new trials (0 = no limit); used to emulate interruption.
  std::size_t max_new_trials = 0;
  std::function<void(const TrialResult&)> on_trial;
};

/// Concrete model config for one grid point. A template hidden_width of 0 means
/// SFNNConfig::default_hidden_width(lookback).
SFNNConfig resolve_config(const SFNNConfig& model_template, std::size_t lookback, std::size_t horizon,
                          std::size_t n_series);

/// Trains n_seeds runs (seeds 0..n_seeds-1) for every (lookback, horizon) in the
/// grid, skipping triples already in the ledger. Trials are appended to the
/// ledger in grid order (horizon, lookback, seed) regardless of worker count.
/// Failed runs are recorded with an error message and the sweep continues.
std::vector<TrialResult> run_trials(const NormalizedDataset& dataset, const GridSpec& grid,
                                    const SFNNConfig& model_template, const TrainConfig& train_template,
                                    TrialLedger& ledger, const RunOptions& options = {});

// ---------------------------------------------------------------------------
// look-back selection

enum class SelectionMode { Peek, Fair };
std::string to_string(SelectionMode mode);
SelectionMode selection_mode_from_string(const std::string& text);

/// Mean/std over seeds at one (lookback, horizon).
struct LookbackStats {
  std::size_t lookback = 0;
  std::size_t horizon = 0;
  double mean_val = 0.0;
  double mean_test = 0.0;
  double std_test = 0.0;  // sample std over seeds
  std::size_t n = 0;
};

/// Groups successful trials of one model by (horizon, lookback).
std::vector<LookbackStats> lookback_curve(const std::vector<TrialResult>& trials, const std::string& model = "sfnn");

/// Peek picks the lowest mean test MSE, fair the lowest mean validation MSE;
/// ties go to the smaller look-back. Returns horizon -> chosen stats.
/// Throws NoTrials when no successful trial exists.
std::map<std::size_t, LookbackStats> select_lookback(const std::vector<TrialResult>& trials, SelectionMode mode,
                                                     const std::string& model = "sfnn");

// ---------------------------------------------------------------------------
// aggregation

/// One (model, dataset, horizon) entry of a comparison table.
struct CellSummary {
  std::string model;
  std::string dataset;
  std::size_t horizon = 0;
  double mean = 0.0;
  double std = 0.0;
  std::size_t n = 0;
  std::size_t lookback = 0;  // 0 when unknown (published tables)
  std::string mode;          // "peek", "fair" or empty
};

struct ModelRow {
  std::string model;
  std::size_t first_count = 0;
  std::size_t significant_first_count = 0;
  double avg_relative_loss = 0.0;
};

struct CellVerdict {
  std::string dataset;
  std::size_t horizon = 0;
  std::string winner;
  std::string runner_up;
  double p_value = 1.0;
  bool significant = false;
};

struct BenchmarkSummary {
  std::vector<std::string> models;  // column order; earlier models win ties
  std::string reference;
  std::vector<CellSummary> cells;
  std::vector<CellVerdict> verdicts;  // one per (dataset, horizon), in first-seen order
  std::vector<ModelRow> rows;

  const ModelRow& row(const std::string& model) const;
  const CellSummary& cell(const std::string& model, const std::string& dataset, std::size_t horizon) const;
};

/// Winner = lowest mean (ties to the earlier model); significant when a Welch test
/// against the runner-up gives p < 0.05 (needs n >= 2 on both sides).
/// Relative loss averages model mean / reference mean over all cells.
/// Throws MissingCell when models do not cover identical cells.
BenchmarkSummary aggregate_table(const std::vector<CellSummary>& cells, const std::string& reference,
                                 std::vector<std::string> model_order = {});

/// CSV with header model,dataset,horizon,mean,std,n (published-results format).
std::vector<CellSummary> load_cell_table(const std::filesystem::path& path);
void write_cell_table(const std::filesystem::path& path, const std::vector<CellSummary>& cells);

/// Aligned markdown table: one row per (dataset, horizon), "mean ± std" per model,
/// winner in bold and a dagger when significant, footer rows with the counts.
std::string render_markdown(const BenchmarkSummary& summary);
std::string render_summary_csv(const BenchmarkSummary& summary);
/// dataset,lookback,horizon,mean_mse,std_mse,n
std::string render_lookback_curve_csv(const std::string& dataset, const std::vector<LookbackStats>& curve);

// ---------------------------------------------------------------------------
// N-linears baseline

struct NLinearsOptions {
  /// One look-back per series; when empty each series picks from `candidate_lookbacks`
  /// by validation MSE.
  std::vector<std::size_t> per_series_lookbacks;
  std::vector<std::size_t> candidate_lookbacks;
  bool center = false;
  /// Ridge weight relative to mean squared column norm of the design. Zero gives
  /// plain least squares (RankDeficient propagates).
  double ridge = 1e-8;
};

struct SeriesLinearModel {
  std::size_t lookback = 0;
  Matrix weights;                  // (lookback + 1) x horizon, last row is the intercept
  double val_mse = 0.0;
  double test_mse = 0.0;
};

struct NLinearsResult {
  std::vector<SeriesLinearModel> series;
  double val_mse = 0.0;   // pooled over all series and windows
  double test_mse = 0.0;
};

/// Independent least-squares forecaster per series, fit on training windows.
NLinearsResult fit_n_linears(const NormalizedDataset& dataset, std::size_t horizon, const NLinearsOptions& options);

}  // namespace sfnn
