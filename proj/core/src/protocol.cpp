#include "sfnn/protocol.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "sfnn/error.hpp"
#include "sfnn/linalg.hpp"
#include "sfnn/stats.hpp"

namespace sfnn {

// ---------------------------------------------------------------------------
// grids

void GridSpec::validate() const {
  if (period == 0 || lookbacks.empty() || horizons.empty() || n_seeds == 0) {
    throw InvalidConfig("grid '" + dataset_name + "' needs a period, look-backs, horizons and seeds");
  }
  for (std::size_t i = 0; i < lookbacks.size(); ++i) {
    if (lookbacks[i] == 0 || (i > 0 && lookbacks[i] <= lookbacks[i - 1])) {
      throw InvalidConfig("grid '" + dataset_name + "': look-backs must be positive and strictly increasing");
    }
  }
  for (auto h : horizons)
    if (h == 0) throw InvalidConfig("grid '" + dataset_name + "': horizons must be positive");
}

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

const std::vector<std::size_t> kLongHorizons{96, 192, 336, 720};

}  // namespace

std::vector<std::string> builtin_dataset_names() {
  return {"ETTm1", "ETTm2", "ETTh1", "ETTh2", "Solar", "Traffic", "Electricity", "ILI", "Weather", "Exchange"};
}

GridSpec builtin_grid(const std::string& dataset_name) {
  const std::string key = lower(dataset_name);
  const SplitSpec ett{0.6, 0.2, 0.2};
  const SplitSpec other{0.7, 0.1, 0.2};
  if (key == "ettm1" || key == "ettm2") {
    return {key == "ettm1" ? "ETTm1" : "ETTm2", 96, {96, 192, 384, 672, 1344}, kLongHorizons, 10, ett};
  }
  if (key == "etth1" || key == "etth2") {
    return {key == "etth1" ? "ETTh1" : "ETTh2", 168, {168, 336, 672, 1344}, kLongHorizons, 10, ett};
  }
  if (key == "traffic") return {"Traffic", 168, {168, 336, 672, 1344}, kLongHorizons, 10, other};
  if (key == "electricity") return {"Electricity", 168, {168, 336, 672, 1344}, kLongHorizons, 10, other};
  if (key == "solar" || key == "solar energy") return {"Solar", 144, {144, 288, 576, 1008}, kLongHorizons, 10, other};
  if (key == "weather") return {"Weather", 144, {144, 288, 576, 1008}, kLongHorizons, 10, other};
  if (key == "ili") return {"ILI", 52, {52, 104, 208}, {24, 36, 48, 60}, 10, other};
  if (key == "exchange" || key == "exchange rate") {
    return {"Exchange", 5, {5, 10, 20, 40, 80, 160, 320}, kLongHorizons, 10, other};
  }
  std::string known;
  for (const auto& n : builtin_dataset_names()) known += (known.empty() ? "" : ", ") + n;
  throw UnknownDataset("'" + dataset_name + "' is not a built-in dataset (known: " + known + ")");
}

// ---------------------------------------------------------------------------
// trials

SFNNConfig resolve_config(const SFNNConfig& model_template, std::size_t lookback, std::size_t horizon,
                          std::size_t n_series) {
  SFNNConfig c = model_template;
  c.lookback = lookback;
  c.horizon = horizon;
  c.n_series = n_series;
  if (c.hidden_width == 0) c.hidden_width = SFNNConfig::default_hidden_width(lookback);
  return c;
}

std::vector<TrialResult> run_trials(const NormalizedDataset& dataset, const GridSpec& grid,
                                    const SFNNConfig& model_template, const TrainConfig& train_template,
                                    TrialLedger& ledger, const RunOptions& options) {
  grid.validate();
  struct Job {
    std::size_t lookback, horizon;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (auto h : grid.horizons)
    for (auto l : grid.lookbacks)
      for (std::uint64_t s = 0; s < grid.n_seeds; ++s)
        if (!ledger.contains("sfnn", l, h, s)) jobs.push_back({l, h, s});
  if (options.max_new_trials > 0 && jobs.size() > options.max_new_trials) jobs.resize(options.max_new_trials);

  std::vector<std::optional<TrialResult>> done(jobs.size());
  std::vector<TrialResult> produced;
  std::mutex mu;
  std::size_t next_commit = 0;
  std::atomic<std::size_t> next_job{0};

  auto run_one = [&](const Job& job) {
    TrialResult t;
    t.lookback = job.lookback;
    t.horizon = job.horizon;
    t.seed = job.seed;
    t.config = resolve_config(model_template, job.lookback, job.horizon, dataset.n_series());
    t.train_config = train_template;
    t.train_config.seed = job.seed;
    try {
      const TrainResult r = train(dataset, t.config, t.train_config);
      t.val_mse = r.report.best_val_mse;
      t.test_mse = r.report.test_mse;
      t.epochs_run = r.report.epochs_run;
      t.wall_time_seconds = r.report.wall_time_seconds;
    } catch (const std::exception& e) {
      t.error = e.what();
      t.val_mse = t.test_mse = std::numeric_limits<double>::quiet_NaN();
    }
    return t;
  };

  auto worker = [&] {
    for (std::size_t i = next_job++; i < jobs.size(); i = next_job++) {
      TrialResult t = run_one(jobs[i]);
      std::lock_guard lock(mu);
      done[i] = std::move(t);
      // Commit in grid order so the ledger does not depend on scheduling.
      while (next_commit < done.size() && done[next_commit]) {
        ledger.append(*done[next_commit]);
        if (options.on_trial) options.on_trial(*done[next_commit]);
        produced.push_back(*done[next_commit]);
        ++next_commit;
      }
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(options.workers, jobs.size()));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  return produced;
}

// ---------------------------------------------------------------------------
// selection

std::string to_string(SelectionMode mode) { return mode == SelectionMode::Peek ? "peek" : "fair"; }

SelectionMode selection_mode_from_string(const std::string& text) {
  const auto key = lower(text);
  if (key == "peek") return SelectionMode::Peek;
  if (key == "fair") return SelectionMode::Fair;
  throw InvalidConfig("selection mode must be 'peek' or 'fair', got '" + text + "'");
}

std::vector<LookbackStats> lookback_curve(const std::vector<TrialResult>& trials, const std::string& model) {
  std::map<std::pair<std::size_t, std::size_t>, std::pair<std::vector<double>, std::vector<double>>> groups;
  for (const auto& t : trials) {
    if (!t.ok() || t.model != model) continue;
    auto& g = groups[{t.horizon, t.lookback}];
    g.first.push_back(t.val_mse);
    g.second.push_back(t.test_mse);
  }
  std::vector<LookbackStats> out;
  for (const auto& [key, g] : groups) {
    out.push_back(LookbackStats{key.second, key.first, mean(g.first), mean(g.second), sample_std(g.second),
                                g.second.size()});
  }
  return out;
}

std::map<std::size_t, LookbackStats> select_lookback(const std::vector<TrialResult>& trials, SelectionMode mode,
                                                     const std::string& model) {
  const auto curve = lookback_curve(trials, model);
  if (curve.empty()) throw NoTrials("no successful '" + model + "' trials to select from");
  std::map<std::size_t, LookbackStats> chosen;
  // curve is ordered by (horizon, lookback), so strict < keeps the smaller look-back on ties.
  for (const auto& s : curve) {
    const double score = mode == SelectionMode::Peek ? s.mean_test : s.mean_val;
    auto it = chosen.find(s.horizon);
    if (it == chosen.end()) {
      chosen.emplace(s.horizon, s);
      continue;
    }
    const double best = mode == SelectionMode::Peek ? it->second.mean_test : it->second.mean_val;
    if (score < best) it->second = s;
  }
  return chosen;
}

// ---------------------------------------------------------------------------
// aggregation

const ModelRow& BenchmarkSummary::row(const std::string& model) const {
  for (const auto& r : rows)
    if (r.model == model) return r;
  throw MissingCell("no summary row for model '" + model + "'");
}

const CellSummary& BenchmarkSummary::cell(const std::string& model, const std::string& dataset,
                                          std::size_t horizon) const {
  for (const auto& c : cells)
    if (c.model == model && c.dataset == dataset && c.horizon == horizon) return c;
  throw MissingCell(model + " has no cell for " + dataset + "/" + std::to_string(horizon));
}

BenchmarkSummary aggregate_table(const std::vector<CellSummary>& cells, const std::string& reference,
                                 std::vector<std::string> model_order) {
  if (model_order.empty()) {
    for (const auto& c : cells)
      if (std::find(model_order.begin(), model_order.end(), c.model) == model_order.end())
        model_order.push_back(c.model);
  }
  if (std::find(model_order.begin(), model_order.end(), reference) == model_order.end()) {
    throw MissingCell("reference model '" + reference + "' has no cells");
  }

  std::vector<std::pair<std::string, std::size_t>> keys;
  for (const auto& c : cells) {
    const std::pair<std::string, std::size_t> key{c.dataset, c.horizon};
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
  }

  BenchmarkSummary summary;
  summary.models = model_order;
  summary.reference = reference;
  summary.cells = cells;
  for (const auto& m : model_order) summary.rows.push_back(ModelRow{m, 0, 0, 0.0});

  std::vector<double> rel_sum(model_order.size(), 0.0);
  for (const auto& [dataset, horizon] : keys) {
    std::vector<const CellSummary*> row;
    for (const auto& m : model_order) row.push_back(&summary.cell(m, dataset, horizon));
    const CellSummary& ref = summary.cell(reference, dataset, horizon);

    std::vector<std::size_t> rank(model_order.size());
    std::iota(rank.begin(), rank.end(), std::size_t{0});
    std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) { return row[a]->mean < row[b]->mean; });

    CellVerdict v;
    v.dataset = dataset;
    v.horizon = horizon;
    v.winner = model_order[rank[0]];
    summary.rows[rank[0]].first_count++;
    if (rank.size() > 1) {
      const CellSummary& w = *row[rank[0]];
      const CellSummary& r = *row[rank[1]];
      v.runner_up = r.model;
      if (w.n >= 2 && r.n >= 2) {
        v.p_value = welch_t_test(w.mean, w.std, w.n, r.mean, r.std, r.n).p_two_sided;
        v.significant = v.p_value < 0.05;
      }
      if (v.significant) summary.rows[rank[0]].significant_first_count++;
    }
    summary.verdicts.push_back(v);
    for (std::size_t i = 0; i < row.size(); ++i) rel_sum[i] += row[i]->mean / ref.mean;
  }
  for (std::size_t i = 0; i < summary.rows.size(); ++i) {
    summary.rows[i].avg_relative_loss = keys.empty() ? 0.0 : rel_sum[i] / static_cast<double>(keys.size());
  }
  return summary;
}

std::vector<CellSummary> load_cell_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string() + ": no such file or unreadable");
  std::string line;
  std::getline(in, line);
  std::vector<CellSummary> cells;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) f.push_back(tok);
    if (f.size() != 6) throw ParseError(path.string() + ": row " + std::to_string(line_no) + " needs 6 fields");
    try {
      cells.push_back(CellSummary{f[0], f[1], std::stoul(f[2]), std::stod(f[3]), std::stod(f[4]), std::stoul(f[5]),
                                  0, ""});
    } catch (const std::exception&) {
      throw NonNumericCell(path.string() + ": row " + std::to_string(line_no) + " has a non-numeric field");
    }
  }
  return cells;
}

void write_cell_table(const std::filesystem::path& path, const std::vector<CellSummary>& cells) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "model,dataset,horizon,mean,std,n\n" << std::setprecision(17);
  for (const auto& c : cells) {
    out << c.model << ',' << c.dataset << ',' << c.horizon << ',' << c.mean << ',' << c.std << ',' << c.n << '\n';
  }
}

namespace {

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

}  // namespace

std::string render_markdown(const BenchmarkSummary& s) {
  std::vector<std::vector<std::string>> table;
  std::vector<std::string> header{"Dataset", "Horizon"};
  header.insert(header.end(), s.models.begin(), s.models.end());
  table.push_back(header);
  for (const auto& v : s.verdicts) {
    std::vector<std::string> row{v.dataset, std::to_string(v.horizon)};
    for (const auto& m : s.models) {
      const auto& c = s.cell(m, v.dataset, v.horizon);
      std::string text = fixed(c.mean, 4) + " ± " + fixed(c.std, 4);
      if (m == v.winner) text = "**" + text + "**" + (v.significant ? " †" : "");
      row.push_back(text);
    }
    table.push_back(row);
  }
  auto footer = [&](const std::string& label, auto value) {
    std::vector<std::string> row{label, ""};
    for (const auto& r : s.rows) row.push_back(value(r));
    table.push_back(row);
  };
  footer("1st Count", [](const ModelRow& r) { return std::to_string(r.first_count); });
  footer("1st Count with p < 5%", [](const ModelRow& r) { return std::to_string(r.significant_first_count); });
  footer("Avg. loss rel. to " + s.reference, [](const ModelRow& r) { return fixed(r.avg_relative_loss, 3); });

  // Pad by code points so "±" and "†" line up.
  auto width_of = [](const std::string& str) {
    return static_cast<std::size_t>(std::count_if(str.begin(), str.end(), [](char c) { return (c & 0xC0) != 0x80; }));
  };
  std::vector<std::size_t> widths(header.size(), 3);
  for (const auto& row : table)
    for (std::size_t i = 0; i < row.size(); ++i) widths[i] = std::max(widths[i], width_of(row[i]));

  std::ostringstream os;
  auto emit = [&](const std::vector<std::string>& row) {
    os << '|';
    for (std::size_t i = 0; i < row.size(); ++i) os << ' ' << row[i] << std::string(widths[i] - width_of(row[i]), ' ') << " |";
    os << '\n';
  };
  emit(table[0]);
  os << '|';
  for (auto w : widths) os << std::string(w + 2, '-') << '|';
  os << '\n';
  for (std::size_t r = 1; r < table.size(); ++r) emit(table[r]);
  return os.str();
}

std::string render_summary_csv(const BenchmarkSummary& s) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "dataset,horizon,model,mean,std,n,lookback,mode,winner,significant\n";
  for (const auto& v : s.verdicts) {
    for (const auto& m : s.models) {
      const auto& c = s.cell(m, v.dataset, v.horizon);
      os << v.dataset << ',' << v.horizon << ',' << m << ',' << c.mean << ',' << c.std << ',' << c.n << ','
         << c.lookback << ',' << c.mode << ',' << (m == v.winner ? 1 : 0) << ','
         << (m == v.winner && v.significant ? 1 : 0) << '\n';
    }
  }
  return os.str();
}

std::string render_lookback_curve_csv(const std::string& dataset, const std::vector<LookbackStats>& curve) {
  std::ostringstream os;
  os << std::setprecision(17) << "dataset,lookback,horizon,mean_mse,std_mse,n\n";
  for (const auto& c : curve) {
    os << dataset << ',' << c.lookback << ',' << c.horizon << ',' << c.mean_test << ',' << c.std_test << ',' << c.n
       << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// N-linears

namespace {

// Design rows [x_{t-L}, ..., x_{t-1}, 1] and targets [x_t, ..., x_{t+H-1}] for one series.
void build_design(const WindowBatch& w, std::size_t series, bool center, Matrix& design, Matrix& targets,
                  std::vector<double>& offsets) {
  const std::size_t l = w.lookback, h = w.horizon, n = w.count();
  design = Matrix(n, l + 1);
  targets = Matrix(n, h);
  offsets.assign(n, 0.0);
  const Matrix& v = *w.values;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t o = w.origins[i];
    double m = 0.0;
    if (center) {
      for (std::size_t k = 0; k < l; ++k) m += v(o - l + k, series);
      m /= static_cast<double>(l);
    }
    offsets[i] = m;
    for (std::size_t k = 0; k < l; ++k) design(i, k) = v(o - l + k, series) - m;
    design(i, l) = 1.0;
    for (std::size_t k = 0; k < h; ++k) targets(i, k) = v(o + k, series) - m;
  }
}

Matrix fit_ridge(const Matrix& design, const Matrix& targets, double ridge) {
  if (ridge <= 0.0) return least_squares(design, targets);
  const std::size_t m = design.rows(), p = design.cols();
  double col_norm = 0.0;
  for (double v : design.data()) col_norm += v * v;
  const double lambda = ridge * col_norm / static_cast<double>(p);
  // Stack sqrt(lambda) I under the design (intercept left unpenalized).
  Matrix a(m + p - 1, p), b(m + p - 1, targets.cols());
  std::copy(design.data().begin(), design.data().end(), a.data().begin());
  std::copy(targets.data().begin(), targets.data().end(), b.data().begin());
  for (std::size_t k = 0; k + 1 < p; ++k) a(m + k, k) = std::sqrt(lambda);
  return least_squares(a, b);
}

// Sum of squared errors and element count of a fitted series model on windows.
std::pair<double, std::size_t> series_sse(const Matrix& weights, const WindowBatch& w, std::size_t series, bool center) {
  Matrix design, targets;
  std::vector<double> offsets;
  build_design(w, series, center, design, targets, offsets);
  const Matrix pred = matmul(design, weights);
  double sse = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred.data()[i] - targets.data()[i];
    sse += d * d;
  }
  return {sse, pred.size()};
}

}  // namespace

NLinearsResult fit_n_linears(const NormalizedDataset& dataset, std::size_t horizon, const NLinearsOptions& options) {
  const std::size_t n = dataset.n_series();
  if (!options.per_series_lookbacks.empty() && options.per_series_lookbacks.size() != n) {
    throw InvalidConfig("fit_n_linears: need one look-back per series");
  }
  if (options.per_series_lookbacks.empty() && options.candidate_lookbacks.empty()) {
    throw InvalidConfig("fit_n_linears: give per-series look-backs or candidates to tune over");
  }
  const auto split = split_chronological(dataset);

  NLinearsResult result;
  double val_sse = 0.0, test_sse = 0.0;
  std::size_t val_count = 0, test_count = 0;
  for (std::size_t s = 0; s < n; ++s) {
    const std::vector<std::size_t> candidates = options.per_series_lookbacks.empty()
                                                    ? options.candidate_lookbacks
                                                    : std::vector<std::size_t>{options.per_series_lookbacks[s]};
    SeriesLinearModel best;
    double best_val = std::numeric_limits<double>::infinity();
    std::pair<double, std::size_t> best_val_sse{0.0, 0};
    for (auto l : candidates) {
      const WindowBatch train_w = make_windows(split.train, l, horizon, false);
      const WindowBatch val_w = make_windows(split.val, l, horizon, true);
      Matrix design, targets;
      std::vector<double> offsets;
      build_design(train_w, s, options.center, design, targets, offsets);
      Matrix weights = fit_ridge(design, targets, options.ridge);
      const auto vs = series_sse(weights, val_w, s, options.center);
      const double val = vs.first / static_cast<double>(vs.second);
      if (val < best_val) {
        best_val = val;
        best_val_sse = vs;
        best.lookback = l;
        best.weights = std::move(weights);
        best.val_mse = val;
      }
    }
    const WindowBatch test_w = make_windows(split.test, best.lookback, horizon, true);
    const auto ts = series_sse(best.weights, test_w, s, options.center);
    best.test_mse = ts.first / static_cast<double>(ts.second);
    val_sse += best_val_sse.first;
    val_count += best_val_sse.second;
    test_sse += ts.first;
    test_count += ts.second;
    result.series.push_back(std::move(best));
  }
  result.val_mse = val_sse / static_cast<double>(val_count);
  result.test_mse = test_sse / static_cast<double>(test_count);
  return result;
}

}  // namespace sfnn
