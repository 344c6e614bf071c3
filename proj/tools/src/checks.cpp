#include "sfnn_cli/checks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <tuple>

#include <unistd.h>

#include <json.hpp>

#include "sfnn/diagnostics.hpp"
#include "sfnn/error.hpp"
#include "sfnn/linalg.hpp"
#include "sfnn/model.hpp"
#include "sfnn/protocol.hpp"
#include "sfnn/rng.hpp"
#include "sfnn/training.hpp"
#include "sfnn_cli/cli.hpp"

#ifndef SFNN_DATA_DIR
#define SFNN_DATA_DIR "data"
#endif

namespace sfnn::cli {

namespace {

namespace fs = std::filesystem;

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

CheckResult finish(std::string name, bool ok, const std::string& detail, const Stopwatch& sw) {
  return CheckResult{std::move(name), ok ? CheckStatus::Pass : CheckStatus::Fail, detail, sw.seconds()};
}

std::string sci(double v) {
  std::ostringstream os;
  os << std::setprecision(3) << std::scientific << v;
  return os.str();
}

std::string fix(double v, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

// Random walk increments drawn from `rng`, starting at zero.
std::vector<double> random_walk(SeededRng& rng, std::size_t t) {
  std::vector<double> x(t, 0.0);
  for (std::size_t i = 1; i < t; ++i) x[i] = x[i - 1] + rng.standard_normal();
  return x;
}

// Pooled least-squares forecaster shared by all series (intercept included).
Matrix fit_shared_linear(const WindowBatch& w) {
  const std::size_t n = w.n_series(), rows = w.count() * n;
  Matrix a(rows, w.lookback + 1), b(rows, w.horizon);
  for (std::size_t i = 0; i < w.count(); ++i) {
    const Matrix in = w.input(i), out = w.target(i);
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t r = i * n + s;
      for (std::size_t k = 0; k < w.lookback; ++k) a(r, k) = in(k, s);
      a(r, w.lookback) = 1.0;
      for (std::size_t k = 0; k < w.horizon; ++k) b(r, k) = out(k, s);
    }
  }
  return least_squares(a, b);
}

double shared_linear_mse(const Matrix& coef, const WindowBatch& w) {
  double sse = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < w.count(); ++i) {
    const Matrix in = w.input(i), out = w.target(i);
    for (std::size_t s = 0; s < w.n_series(); ++s) {
      for (std::size_t h = 0; h < w.horizon; ++h) {
        double p = coef(w.lookback, h);
        for (std::size_t k = 0; k < w.lookback; ++k) p += coef(k, h) * in(k, s);
        sse += (p - out(h, s)) * (p - out(h, s));
        ++count;
      }
    }
  }
  return sse / static_cast<double>(count);
}

std::vector<std::string> ledger_without_timing(const fs::path& path) {
  std::ifstream in(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    auto j = nlohmann::ordered_json::parse(line);
    j.erase("wall_time");
    lines.push_back(j.dump());
  }
  return lines;
}

}  // namespace

std::string format_check(const CheckResult& r) {
  const char* tag = r.status == CheckStatus::Pass ? "[PASS]" : r.status == CheckStatus::Fail ? "[FAIL]" : "[NOT RUN]";
  std::ostringstream os;
  os << tag << ' ' << r.name << ": " << r.detail << " (" << std::fixed << std::setprecision(2) << r.seconds << " s)";
  return os.str();
}

fs::path bundled_data_dir() {
  if (const char* env = std::getenv("SFNN_DATA_DIR")) return env;
  if (fs::is_directory(SFNN_DATA_DIR)) return SFNN_DATA_DIR;
  // Installed layout: <prefix>/bin/sfnn next to <prefix>/share/sfnn.
  std::error_code ec;
  const auto exe = fs::read_symlink("/proc/self/exe", ec);
  if (!ec) {
    const auto installed = exe.parent_path().parent_path() / "share" / "sfnn";
    if (fs::is_directory(installed)) return installed;
  }
  return SFNN_DATA_DIR;
}

CheckResult check_gradients() {
  Stopwatch sw;
  constexpr double kTol = 1e-4;
  double worst = 0.0;
  std::size_t failed = 0;
  std::string worst_case;
  for (unsigned mask = 0; mask < 16; ++mask) {
    SFNNConfig c;
    c.lookback = 6;
    c.horizon = 4;
    c.hidden_width = 5;
    c.n_series = 3;
    c.use_mean_centering = mask & 1u;
    c.use_series_mixing = mask & 2u;
    c.use_layer_norm = mask & 4u;
    c.num_blocks = (mask & 8u) ? 2 : 0;
    const auto rep = gradient_check(c, 100 + mask, kTol);
    if (!rep.passed()) ++failed;
    for (const auto& g : rep.groups) {
      if (g.max_relative_error > worst) {
        worst = g.max_relative_error;
        worst_case = c.modules_string() + "/B=" + std::to_string(c.num_blocks) + "/" + g.name;
      }
    }
  }
  return finish("gradient correctness", failed == 0 && sw.seconds() < 30.0,
                std::to_string(16 - failed) + "/16 combinations within 1e-4; worst relative error " + sci(worst) +
                    " at " + worst_case + "; budget 30 s",
                sw);
}

CheckResult check_linear_oracle() {
  Stopwatch sw;
  // Stable AR(2) per series, same coefficients so one shared linear map is optimal.
  SeededRng rng(7);
  const std::size_t t = 3000, n = 3;
  Matrix values(t, n);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t i = 2; i < t; ++i) {
      values(i, s) = 1.2 * values(i - 1, s) - 0.5 * values(i - 2, s) + 0.5 * rng.standard_normal();
    }
  }
  const auto ds = dataset_from_normalized(std::move(values), SplitSpec{0.7, 0.1, 0.2});
  SFNNConfig c;
  c.lookback = 8;
  c.horizon = 4;
  c.hidden_width = 8;
  c.num_blocks = 0;
  c.n_series = n;
  const auto seg = make_train_segments(ds, c.lookback, c.horizon);
  const double oracle = shared_linear_mse(fit_shared_linear(seg.train), seg.test);

  TrainConfig tc;
  tc.learning_rate = 3e-3;
  tc.max_epochs = 300;
  tc.patience = 30;
  tc.seed = 1;
  const auto res = train(seg, c, tc);
  const double rel = std::abs(res.report.test_mse - oracle) / oracle;
  return finish("linear oracle equivalence", rel <= 0.02 && sw.seconds() < 60.0,
                "SFNN test MSE " + fix(res.report.test_mse, 6) + " vs least squares " + fix(oracle, 6) +
                    ", relative gap " + fix(100 * rel, 3) + "% (limit 2%); budget 60 s",
                sw);
}

CheckResult check_sinusoid() {
  Stopwatch sw;
  const std::size_t period = 24, t = 2400, n = 2;
  Matrix values(t, n);
  for (std::size_t i = 0; i < t; ++i) {
    for (std::size_t s = 0; s < n; ++s) {
      values(i, s) = std::sin(2.0 * std::numbers::pi * static_cast<double>(i) / period + 0.7 * static_cast<double>(s));
    }
  }
  const auto ds = dataset_from_normalized(std::move(values), SplitSpec{0.7, 0.1, 0.2});
  NLinearsOptions no;
  no.per_series_lookbacks = {period, period};
  const auto lin = fit_n_linears(ds, period, no);

  SFNNConfig c;
  c.lookback = period;
  c.horizon = period;
  c.hidden_width = 64;
  c.num_blocks = 2;
  c.n_series = n;
  TrainConfig tc;
  tc.seed = 3;
  const auto res = train(ds, c, tc);
  const bool ok = lin.test_mse < 1e-6 && res.report.test_mse < 1e-3 && sw.seconds() < 60.0;
  return finish("sinusoid zero error", ok,
                "N-linears test MSE " + sci(lin.test_mse) + " (limit 1e-6), SFNN test MSE " +
                    sci(res.report.test_mse) + " (limit 1e-3); budget 60 s",
                sw);
}

CheckResult check_shift_equivariance() {
  Stopwatch sw;
  SFNNConfig c;
  c.lookback = 12;
  c.horizon = 6;
  c.hidden_width = 16;
  c.n_series = 3;
  c.set_modules("center,mix,ln");
  SeededRng rng(11);
  const SFNNParams p = init_params(c, rng);
  Matrix x(c.lookback, 4 * c.n_series);
  for (double& v : x.data()) v = rng.standard_normal();
  const Matrix base = predict(p, c, x);
  double worst = 0.0;
  for (double shift : {-10.0, 0.5, 100.0}) {
    Matrix xs = x;
    for (double& v : xs.data()) v += shift;
    const Matrix moved = predict(p, c, xs);
    for (std::size_t i = 0; i < base.size(); ++i) {
      worst = std::max(worst, std::abs(moved.data()[i] - base.data()[i] - shift));
    }
  }
  return finish("shift equivariance", worst <= 1e-9,
                "max |f(x+c) - f(x) - c| = " + sci(worst) + " over c in {-10, 0.5, 100} (limit 1e-9)", sw);
}

CheckResult check_protocol(const fs::path& table, const std::vector<std::size_t>& first_counts,
                           const std::vector<std::size_t>& significant_counts, std::size_t max_sig_discrepancy) {
  Stopwatch sw;
  const auto summary = aggregate_table(load_cell_table(table), "SFNN");
  std::string got_first, got_sig;
  bool first_ok = summary.rows.size() == first_counts.size();
  std::size_t discrepancy = 0;
  for (std::size_t i = 0; i < summary.rows.size(); ++i) {
    const auto& r = summary.rows[i];
    got_first += (i ? "," : "") + std::to_string(r.first_count);
    got_sig += (i ? "," : "") + std::to_string(r.significant_first_count);
    if (i < first_counts.size() && r.first_count != first_counts[i]) first_ok = false;
    const std::size_t want = i < significant_counts.size() ? significant_counts[i] : 0;
    discrepancy += r.significant_first_count > want ? r.significant_first_count - want
                                                    : want - r.significant_first_count;
  }
  auto list = [](const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
  };
  const bool ok = first_ok && discrepancy <= max_sig_discrepancy && sw.seconds() < 1.0;
  return finish("protocol replication", ok,
                "first counts (" + got_first + ") vs (" + list(first_counts) + "); significant (" + got_sig +
                    ") vs (" + list(significant_counts) + "), " + std::to_string(discrepancy) +
                    " cell(s) off (limit " + std::to_string(max_sig_discrepancy) + "); budget 1 s",
                sw);
}

CheckResult check_johansen(std::size_t seeds) {
  Stopwatch sw;
  const std::size_t t = 500, k = 2;
  std::size_t coint_reject = 0, indep_reject = 0;
  for (std::size_t seed = 0; seed < seeds; ++seed) {
    SeededRng rng(seed);
    const auto x = random_walk(rng, t);
    Matrix pair(t, 2);
    for (std::size_t i = 0; i < t; ++i) {
      pair(i, 0) = x[i];
      pair(i, 1) = x[i] + 0.1 * rng.standard_normal();
    }
    if (johansen_trace(pair, k, 1).reject) ++coint_reject;

    const auto a = random_walk(rng, t), b = random_walk(rng, t);
    Matrix walks(t, 2);
    for (std::size_t i = 0; i < t; ++i) {
      walks(i, 0) = a[i];
      walks(i, 1) = b[i];
    }
    if (johansen_trace(walks, k, 1).reject) ++indep_reject;
  }
  const double pc = static_cast<double>(coint_reject) / static_cast<double>(seeds);
  const double pi = static_cast<double>(indep_reject) / static_cast<double>(seeds);
  return finish("Johansen rejection rates", pc >= 0.95 && pi <= 0.10 && sw.seconds() < 120.0,
                "r = N-1 over " + std::to_string(seeds) + " seeds: cointegrated pair rejects " + fix(100 * pc, 1) +
                    "% (need >= 95%), independent walks " + fix(100 * pi, 1) + "% (need <= 10%); budget 120 s",
                sw);
}

CheckResult check_etth1(const std::optional<fs::path>& csv, std::size_t workers) {
  Stopwatch sw;
  if (!csv || !fs::exists(*csv)) {
    return CheckResult{"ETTh1 desk-scale benchmark", CheckStatus::NotRun,
                       "ETTh1.csv not available (set SFNN_ETTH1_CSV); needs mean fair-mode test MSE <= 0.40 at H=96 "
                       "and centering better than none; budget 900 s",
                       sw.seconds()};
  }
  GridSpec grid = builtin_grid("ETTh1");
  grid.horizons = {96};
  const auto ds = zscore_fit_transform(load_csv(*csv), grid.split);
  const fs::path scratch = fs::temp_directory_path() / ("sfnn-etth1-" + std::to_string(::getpid()));
  fs::create_directories(scratch);
  auto sweep = [&](const std::string& modules) {
    SFNNConfig tmpl;
    tmpl.set_modules(modules);
    tmpl.hidden_width = 0;
    TrialLedger ledger(scratch / ("ledger_" + modules + ".jsonl"));
    RunOptions opts;
    opts.workers = workers;
    run_trials(ds, grid, tmpl, TrainConfig{}, ledger, opts);
    return select_lookback(ledger.trials(), SelectionMode::Fair).at(96);
  };
  const auto centered = sweep("center");
  const auto plain = sweep("none");
  fs::remove_all(scratch);
  const bool ok = centered.mean_test <= 0.40 && centered.mean_test < plain.mean_test && sw.seconds() < 900.0;
  return finish("ETTh1 desk-scale benchmark", ok,
                "fair-mode mean test MSE " + fix(centered.mean_test) + " at L=" + std::to_string(centered.lookback) +
                    " (limit 0.40, paper 0.3503); without centering " + fix(plain.mean_test) + "; budget 900 s",
                sw);
}

CheckResult check_diagnostics() {
  Stopwatch sw;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SeededRng rng(seed);
    const std::size_t t = 150 + 10 * seed, n = 2 + seed, l = 7 + 3 * seed;
    Matrix v(t, n);
    for (std::size_t s = 0; s < n; ++s) {
      const double offset = rng.uniform(-2.0, 2.0), scale = rng.uniform(0.2, 3.0);
      for (std::size_t i = 0; i < t; ++i) v(i, s) = offset + scale * rng.standard_normal();
    }
    double trend = 0.0, spread = 0.0;
    const std::size_t windows = t - l + 1;
    for (std::size_t w = 0; w < windows; ++w) {
      std::vector<double> means(n, 0.0);
      for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t i = w; i < w + l; ++i) means[s] += v(i, s);
        means[s] /= static_cast<double>(l);
      }
      double sq = 0.0, mu = 0.0, var = 0.0;
      for (double m : means) sq += m * m, mu += m;
      mu /= static_cast<double>(n);
      for (double m : means) var += (m - mu) * (m - mu);
      trend += sq / static_cast<double>(n);
      spread += std::sqrt(var / static_cast<double>(n));
    }
    trend /= static_cast<double>(windows);
    spread /= static_cast<double>(windows);
    worst = std::max({worst, std::abs(trend - trend_strength(v, l)), std::abs(spread - scale_difference(v, l))});
  }

  auto has = [](const std::vector<Recommendation>& recs, Module m) {
    return std::any_of(recs.begin(), recs.end(), [&](const Recommendation& r) { return r.module == m; });
  };
  auto set = [&](double trend, double scale, std::size_t n) {
    const auto recs = recommend_modules(trend, scale, {}, n);
    return std::tuple{has(recs, Module::MeanCentering), has(recs, Module::LayerNorm), has(recs, Module::SeriesMixing)};
  };
  const bool gates = set(0.2, 0.5, 200) == std::tuple{false, false, false} &&
                     set(std::nextafter(0.2, 1.0), std::nextafter(0.5, 1.0), 200) == std::tuple{true, true, false} &&
                     set(0.3, 0.1, 7) == std::tuple{true, false, true} &&
                     set(0.05, 0.9, 862) == std::tuple{false, true, false} &&
                     set(0.0, 0.0, 2) == std::tuple{false, false, true};
  return finish("diagnostics statistics", worst <= 1e-10 && gates,
                "max deviation from double-loop recomputation " + sci(worst) + " (limit 1e-10); threshold gates " +
                    (gates ? "exact" : "WRONG"),
                sw);
}

CheckResult check_determinism(const fs::path& scratch_dir) {
  Stopwatch sw;
  fs::create_directories(scratch_dir);
  const fs::path csv = scratch_dir / "tiny.csv";
  {
    SeededRng rng(5);
    std::ofstream out(csv);
    out << "date,a,b\n" << std::setprecision(17);
    for (int i = 0; i < 400; ++i) {
      out << "t" << std::setw(5) << std::setfill('0') << i << std::setfill(' ') << ','
          << std::sin(i * 0.3) + 0.1 * rng.standard_normal() << ',' << std::cos(i * 0.2) + 0.1 * rng.standard_normal()
          << '\n';
    }
  }
  auto run_once = [&](const std::string& name, const std::string& workers) {
    const fs::path dir = scratch_dir / name;
    fs::remove_all(dir);
    std::ostringstream out, err;
    const int code = run({"benchmark", csv.string(), "--lookbacks", "8,16", "--horizons", "4", "--seeds", "2",
                          "--mode", "both", "--hidden-width", "16", "--epochs", "5", "--workers", workers, "-o",
                          dir.string()},
                         out, err);
    if (code != 0) throw InvalidConfig("benchmark run failed: " + err.str());
    return ledger_without_timing(dir / "ledger.jsonl");
  };
  const auto first = run_once("run1", "1");
  const auto second = run_once("run2", "3");
  const bool ok = !first.empty() && first == second;
  return finish("determinism", ok,
                std::to_string(first.size()) + " vs " + std::to_string(second.size()) +
                    " ledger lines, identical modulo timing: " + (first == second ? "yes" : "no"),
                sw);
}

}  // namespace sfnn::cli
