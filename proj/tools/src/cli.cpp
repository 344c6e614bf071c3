#include "sfnn_cli/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "manifest.hpp"
#include "sfnn/checkpoint.hpp"
#include "sfnn/data.hpp"
#include "sfnn/diagnostics.hpp"
#include "sfnn/error.hpp"
#include "sfnn/protocol.hpp"
#include "sfnn/training.hpp"
#include "sfnn_cli/checks.hpp"

namespace sfnn::cli {

namespace {

using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// option plumbing

struct ModelFlags {
  std::string modules = "none";
  std::size_t hidden_width = 0;  // 0 = derived from the look-back
  std::size_t blocks = 2;
  std::size_t mixing_blocks = 1;
};

struct TrainFlags {
  double lr = TrainConfig{}.learning_rate;
  std::size_t batch_size = TrainConfig{}.batch_size;
  std::size_t epochs = TrainConfig{}.max_epochs;
  std::size_t patience = TrainConfig{}.patience;
  CLI::Option* patience_opt = nullptr;
};

void add_output_flag(CLI::App* sub, std::string& dir) {
  sub->add_option("-o,--output-dir", dir, "Directory for all outputs")
      ->envname("SFNN_OUTPUT_DIR")
      ->capture_default_str();
}

void add_model_flags(CLI::App* sub, ModelFlags& f) {
  sub->add_option("--modules", f.modules, "Comma list of center,mix,ln,ln-affine or none")->capture_default_str();
  sub->add_option("--hidden-width", f.hidden_width, "Hidden width W (0 = max(512, 2L) capped at 2048)")
      ->capture_default_str();
  sub->add_option("--blocks", f.blocks, "Residual blocks B")->capture_default_str();
  sub->add_option("--mixing-blocks", f.mixing_blocks, "Series-mixing layers when mixing is on")->capture_default_str();
}

void add_train_flags(CLI::App* sub, TrainFlags& f) {
  sub->add_option("--lr", f.lr, "Adam learning rate")->capture_default_str();
  sub->add_option("--batch-size", f.batch_size, "Windows per mini-batch")->capture_default_str();
  sub->add_option("--epochs", f.epochs, "Maximum epochs")->capture_default_str();
  f.patience_opt = sub->add_option("--patience", f.patience, "Early-stopping patience in epochs (default capped at --epochs)")
                       ->capture_default_str();
}

SFNNConfig model_template(const ModelFlags& f) {
  SFNNConfig c;
  c.set_modules(f.modules);
  c.hidden_width = f.hidden_width;
  c.num_blocks = f.blocks;
  c.num_mixing_blocks = f.mixing_blocks;
  return c;
}

TrainConfig train_template(const TrainFlags& f, std::uint64_t seed) {
  TrainConfig c;
  c.learning_rate = f.lr;
  c.batch_size = f.batch_size;
  c.max_epochs = f.epochs;
  c.patience = f.patience;
  // An explicit --epochs below the default patience should not be an error.
  if (f.patience_opt && f.patience_opt->count() == 0) c.patience = std::min(c.patience, c.max_epochs);
  c.seed = seed;
  return c;
}

// Every option of the subcommand with its effective value (given or default).
ordered_json resolved_config(const CLI::App* sub) {
  ordered_json j;
  for (const CLI::Option* opt : sub->get_options()) {
    std::string name = opt->get_single_name();
    if (name == "help" || name == "config") continue;
    if (opt->count() > 0) {
      const auto& res = opt->results();
      std::string joined;
      for (std::size_t i = 0; i < res.size(); ++i) joined += (i ? "," : "") + res[i];
      j[name] = joined;
    } else {
      j[name] = opt->get_default_str();
    }
  }
  return j;
}

// Patience is the one default adjusted after parsing; report the value actually used.
ordered_json resolved_config(const CLI::App* sub, const TrainConfig& tc) {
  auto j = resolved_config(sub);
  j["patience"] = std::to_string(tc.patience);
  return j;
}

ordered_json dataset_info(const fs::path& csv, const RawSeriesTable& table) {
  return ordered_json{{"path", fs::absolute(csv).lexically_normal().string()},
                      {"sha256", sha256_file(csv)},
                      {"rows", table.length()},
                      {"series", table.n_series()}};
}

std::string command_line(const std::vector<std::string>& args) {
  std::string s = "sfnn";
  for (const auto& a : args) s += " " + a;
  return s;
}

// Adds a back-reference to the manifest in a JSON document.
std::string with_manifest(const std::string& json_text) {
  auto j = ordered_json::parse(json_text);
  j["manifest"] = "manifest.json";
  return j.dump(2) + "\n";
}

std::string join(const std::vector<double>& xs) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < xs.size(); ++i) os << (i ? "," : "") << xs[i];
  return os.str();
}

// ---------------------------------------------------------------------------
// commands

struct DiagnoseArgs {
  std::string csv;
  std::string output_dir = "sfnn-out";
  std::size_t lookback = 96;
  std::vector<std::size_t> lags{1, 2, 4, 8, 16, 32};
  std::string split = "0.7:0.1:0.2";
};

int cmd_diagnose(const DiagnoseArgs& a, const CLI::App* sub, const std::string& cmd, std::ostream& out) {
  const auto table = load_csv(a.csv);
  const auto ds = zscore_fit_transform(table, SplitSpec::parse(a.split));
  const auto report = diagnose(ds, a.lookback, a.lags);
  OutputDir dir(a.output_dir);
  dir.write("diagnostics.json", with_manifest(to_json(report)));
  dir.write("diagnostics.txt", to_text(report));
  dir.write("johansen_curve.csv", johansen_curve_csv(report.johansen_curve));
  dir.write_manifest(cmd, resolved_config(sub), dataset_info(a.csv, table));
  out << to_text(report) << "wrote " << dir.root().string() << "\n";
  return kExitOk;
}

struct TrainArgs {
  std::string csv;
  std::string output_dir = "sfnn-out";
  std::size_t lookback = 96;
  std::size_t horizon = 96;
  std::uint64_t seed = 0;
  std::string split = "0.7:0.1:0.2";
  ModelFlags model;
  TrainFlags train;
};

int cmd_train(const TrainArgs& a, const CLI::App* sub, const std::string& cmd, std::ostream& out) {
  const auto table = load_csv(a.csv);
  const auto ds = zscore_fit_transform(table, SplitSpec::parse(a.split));
  const SFNNConfig config = resolve_config(model_template(a.model), a.lookback, a.horizon, ds.n_series());
  const TrainConfig tc = train_template(a.train, a.seed);
  const auto result = train(ds, config, tc);

  OutputDir dir(a.output_dir);
  const std::string checksum = sha256_file(a.csv);
  save_checkpoint(dir.path("model.ckpt"), config, result.params,
                  {{"dataset", fs::absolute(a.csv).lexically_normal().string()},
                   {"dataset_sha256", checksum},
                   {"split", ds.split.to_string()},
                   {"train_means", join(ds.train_means)},
                   {"train_stds", join(ds.train_stds)},
                   {"manifest", "manifest.json"}});
  dir.record("model.ckpt");
  dir.record(checkpoint_metadata_path(dir.path("model.ckpt")).filename().string());
  dir.write("report.json", with_manifest(to_json_line(result.report)));
  dir.write_manifest(cmd, resolved_config(sub, tc), dataset_info(a.csv, table));

  const auto& r = result.report;
  out << "look-back " << config.lookback << ", horizon " << config.horizon << ", modules " << config.modules_string()
      << ", " << r.parameter_count << " parameters\n"
      << "epochs " << r.epochs_run << " (best " << r.best_epoch << "), val MSE " << r.best_val_mse << ", test MSE "
      << r.test_mse << "\n"
      << "wrote " << dir.root().string() << "\n";
  return kExitOk;
}

struct BenchmarkArgs {
  std::string csv;
  std::string output_dir = "sfnn-out";
  std::string dataset;
  std::vector<std::size_t> lookbacks;
  std::vector<std::size_t> horizons;
  std::size_t seeds = 0;  // 0 = grid default
  std::vector<std::string> modes{"fair"};
  std::string baseline;
  std::string split;
  std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
  std::size_t max_trials = 0;
  ModelFlags model;
  TrainFlags train;
};

GridSpec benchmark_grid(const BenchmarkArgs& a) {
  GridSpec grid;
  if (!a.dataset.empty()) {
    grid = builtin_grid(a.dataset);
  } else {
    if (a.lookbacks.empty() || a.horizons.empty()) {
      throw InvalidConfig("without --dataset, give both --lookbacks and --horizons");
    }
    grid.dataset_name = fs::path(a.csv).stem().string();
    grid.period = a.lookbacks.front();
  }
  if (!a.lookbacks.empty()) grid.lookbacks = a.lookbacks;
  if (!a.horizons.empty()) grid.horizons = a.horizons;
  if (a.seeds > 0) grid.n_seeds = a.seeds;
  if (!a.split.empty()) grid.split = SplitSpec::parse(a.split);
  grid.validate();
  return grid;
}

int cmd_benchmark(const BenchmarkArgs& a, const CLI::App* sub, const std::string& cmd, std::ostream& out,
                  std::ostream& err) {
  const GridSpec grid = benchmark_grid(a);
  const auto table = load_csv(a.csv);
  const auto ds = zscore_fit_transform(table, grid.split);
  const SFNNConfig tmpl = model_template(a.model);
  const TrainConfig ttmpl = train_template(a.train, 0);

  OutputDir dir(a.output_dir);
  TrialLedger ledger(dir.path("ledger.jsonl"));
  RunOptions opts;
  opts.workers = a.workers;
  opts.max_new_trials = a.max_trials;
  opts.on_trial = [&](const TrialResult& t) {
    err << "trial L=" << t.lookback << " H=" << t.horizon << " seed=" << t.seed;
    if (t.ok()) {
      err << " val=" << t.val_mse << " test=" << t.test_mse << " epochs=" << t.epochs_run << "\n";
    } else {
      err << " failed: " << *t.error << "\n";
    }
  };
  const std::size_t before = ledger.trials().size();
  run_trials(ds, grid, tmpl, ttmpl, ledger, opts);
  dir.record("ledger.jsonl");

  const std::size_t expected = grid.lookbacks.size() * grid.horizons.size() * grid.n_seeds;
  const std::size_t have = ledger.trials().size();
  if (have < expected) {
    err << "stopped with " << have << " of " << expected << " trials (" << have - before
        << " new); rerun the same command to resume\n";
  }

  const auto curve = lookback_curve(ledger.trials());
  dir.write("lookback_curve.csv", render_lookback_curve_csv(grid.dataset_name, curve));

  std::vector<CellSummary> baseline_cells;
  if (a.baseline == "nlinears") {
    for (auto h : grid.horizons) {
      NLinearsOptions no;
      no.candidate_lookbacks = grid.lookbacks;
      try {
        const auto fit = fit_n_linears(ds, h, no);
        baseline_cells.push_back(CellSummary{"N-linears", grid.dataset_name, h, fit.test_mse, 0.0, 1, 0, "val"});
      } catch (const Error& e) {
        err << "N-linears at H=" << h << " failed: " << e.what() << "\n";
      }
    }
  }

  std::vector<std::string> modes = a.modes;
  if (std::find(modes.begin(), modes.end(), "both") != modes.end()) modes = {"peek", "fair"};
  for (const auto& mode_name : modes) {
    const SelectionMode mode = selection_mode_from_string(mode_name);
    const auto chosen = select_lookback(ledger.trials(), mode);
    std::vector<CellSummary> cells;
    for (const auto& [h, s] : chosen) {
      cells.push_back(CellSummary{"SFNN", grid.dataset_name, h, s.mean_test, s.std_test, s.n, s.lookback,
                                  to_string(mode)});
    }
    std::vector<std::string> order{"SFNN"};
    for (const auto& b : baseline_cells) {
      if (chosen.count(b.horizon)) cells.push_back(b);
    }
    if (cells.size() > chosen.size()) order.push_back("N-linears");
    // Drop horizons the baseline could not fit so every model covers the same cells.
    if (order.size() > 1) {
      std::erase_if(cells, [&](const CellSummary& c) {
        return c.model == "SFNN" && std::none_of(baseline_cells.begin(), baseline_cells.end(),
                                                 [&](const CellSummary& b) { return b.horizon == c.horizon; });
      });
    }
    const auto summary = aggregate_table(cells, "SFNN", order);
    const std::string md = render_markdown(summary);
    dir.write("summary_" + to_string(mode) + ".md", md);
    dir.write("summary_" + to_string(mode) + ".csv", render_summary_csv(summary));
    out << "## " << grid.dataset_name << " (" << to_string(mode) << " selection)\n\n" << md << "\n";
    for (const auto& c : summary.cells) {
      if (c.model == "SFNN") out << "H=" << c.horizon << ": look-back " << c.lookback << ", n=" << c.n << "\n";
    }
  }
  dir.write_manifest(cmd, resolved_config(sub, ttmpl), dataset_info(a.csv, table));
  out << "wrote " << dir.root().string() << "\n";
  return kExitOk;
}

struct VerifyArgs {
  std::string suite;
  std::string table;
  std::vector<std::size_t> first_counts{19, 6, 3};
  std::vector<std::size_t> significant_counts{14, 4, 3};
};

int cmd_verify(const VerifyArgs& a, std::ostream& out) {
  std::vector<CheckResult> results;
  if (a.suite == "gradients") {
    results.push_back(check_gradients());
  } else if (a.suite == "oracles") {
    results.push_back(check_linear_oracle());
    results.push_back(check_sinusoid());
    results.push_back(check_shift_equivariance());
    results.push_back(check_diagnostics());
  } else {
    const fs::path table = a.table.empty() ? bundled_data_dir() / "table1_peek.csv" : fs::path(a.table);
    results.push_back(check_protocol(table, a.first_counts, a.significant_counts));
  }
  bool ok = true;
  for (const auto& r : results) {
    out << format_check(r) << "\n";
    ok = ok && r.passed();
  }
  return ok ? kExitOk : kExitFailure;
}

CLI::Option* add_config_flag(CLI::App* sub) {
  return sub->add_option("--config", "TOML file of key = value option defaults (flags and env override it)");
}

// CLI11 only reads config files attached to the root app, so subcommand files are applied here. Keys may sit
// at top level or under a [<subcommand>] table. An option already set by a flag or the environment keeps it.
void apply_config_file(CLI::App* sub, const std::string& path) {
  for (const CLI::ConfigItem& item : CLI::ConfigTOML().from_file(path)) {
    if (item.name == "++" || item.name == "--") continue;
    if (!item.parents.empty() && (item.parents.size() > 1 || item.parents.front() != sub->get_name())) continue;
    CLI::Option* opt = sub->get_option_no_throw("--" + item.name);
    if (opt == nullptr || item.name == "config") {
      throw CLI::ConfigError(path + ": unknown key '" + item.fullname() + "' for " + sub->get_name());
    }
    if (opt->count() > 0) continue;
    for (const auto& v : item.inputs) opt->add_result(v);
    opt->run_callback();
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"SFNN forecasting toolkit: diagnostics, training and benchmark sweeps", "sfnn"};
  app.require_subcommand(1);
  app.set_version_flag("--version", SFNN_VERSION);

  DiagnoseArgs diag;
  auto* d = app.add_subcommand("diagnose", "Trend, scale and cointegration statistics with module recommendations");
  auto* d_config = add_config_flag(d);
  d->add_option("csv", diag.csv, "Input CSV")->required();
  add_output_flag(d, diag.output_dir);
  d->add_option("--lookback", diag.lookback, "Window length L")->capture_default_str();
  d->add_option("--lags", diag.lags, "Johansen lag counts")->delimiter(',')->capture_default_str();
  d->add_option("--split", diag.split, "train:val:test ratios")->capture_default_str();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train one SFNN configuration");
  auto* t_config = add_config_flag(t);
  t->add_option("csv", tr.csv, "Input CSV")->required();
  add_output_flag(t, tr.output_dir);
  t->add_option("--lookback", tr.lookback, "Look-back L")->capture_default_str();
  t->add_option("--horizon", tr.horizon, "Horizon H")->capture_default_str();
  t->add_option("--seed", tr.seed, "Initialization and shuffling seed")->capture_default_str();
  t->add_option("--split", tr.split, "train:val:test ratios")->capture_default_str();
  add_model_flags(t, tr.model);
  add_train_flags(t, tr.train);

  BenchmarkArgs bench;
  auto* b = app.add_subcommand("benchmark", "Multi-seed look-back sweep with peek/fair selection");
  auto* b_config = add_config_flag(b);
  b->add_option("csv", bench.csv, "Input CSV")->required();
  add_output_flag(b, bench.output_dir);
  b->add_option("--dataset", bench.dataset, "Built-in grid and split (ETTh1, Traffic, ...)");
  b->add_option("--lookbacks,--grid", bench.lookbacks, "Look-back grid (overrides the built-in one)")->delimiter(',');
  b->add_option("--horizons", bench.horizons, "Horizons")->delimiter(',');
  b->add_option("--seeds", bench.seeds, "Seeds per grid point (0 = grid default of 10)")->capture_default_str();
  b->add_option("--mode", bench.modes, "Selection: peek, fair or both")
      ->delimiter(',')
      ->check(CLI::IsMember({"peek", "fair", "both"}))
      ->capture_default_str();
  b->add_option("--baseline", bench.baseline, "Extra baseline column")->check(CLI::IsMember({"nlinears"}));
  b->add_option("--split", bench.split, "train:val:test ratios (default from the built-in dataset, else 7:1:2)");
  b->add_option("--workers", bench.workers, "Parallel trials")->capture_default_str()->check(CLI::PositiveNumber);
  b->add_option("--max-trials", bench.max_trials, "Stop after this many new trials (0 = all)")->capture_default_str();
  add_model_flags(b, bench.model);
  add_train_flags(b, bench.train);

  VerifyArgs ver;
  auto* v = app.add_subcommand("verify", "Run a built-in property suite");
  v->add_option("--suite", ver.suite, "gradients, oracles or protocol")
      ->required()
      ->check(CLI::IsMember({"gradients", "oracles", "protocol"}));
  v->add_option("--table", ver.table, "Published table CSV for the protocol suite (default: bundled Table 1)");
  v->add_option("--expect-first", ver.first_counts, "Expected first counts per model")->delimiter(',')
      ->capture_default_str();
  v->add_option("--expect-significant", ver.significant_counts, "Expected significant first counts")
      ->delimiter(',')
      ->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
    for (auto [sub, file] : {std::pair{d, d_config}, {t, t_config}, {b, b_config}}) {
      if (sub->parsed() && file->count() > 0) apply_config_file(sub, file->as<std::string>());
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitDataError;
  }

  const std::string cmd = command_line(args);
  try {
    if (d->parsed()) return cmd_diagnose(diag, d, cmd, out);
    if (t->parsed()) return cmd_train(tr, t, cmd, out);
    if (b->parsed()) return cmd_benchmark(bench, b, cmd, out, err);
    return cmd_verify(ver, out);
  } catch (const NonFiniteLoss& e) {
    err << "error: training diverged: " << e.what() << "\n";
    return kExitDiverged;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitDataError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitDataError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace sfnn::cli
