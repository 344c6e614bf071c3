#include "sfnn/diagnostics.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "sfnn/error.hpp"
#include "sfnn/linalg.hpp"

namespace sfnn {

namespace {

// Per-window, per-series means: (T - L + 1) x N, from prefix sums.
Matrix window_means(const Matrix& values, std::size_t lookback) {
  if (lookback == 0) throw InvalidConfig("look-back must be positive");
  if (values.rows() < lookback) {
    throw TooShort("need at least " + std::to_string(lookback) + " rows for one window, have " +
                   std::to_string(values.rows()));
  }
  const std::size_t t = values.rows(), n = values.cols(), w = t - lookback + 1;
  Matrix out(w, n);
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<long double> prefix(t + 1, 0.0L);
    for (std::size_t i = 0; i < t; ++i) prefix[i + 1] = prefix[i] + values(i, s);
    for (std::size_t i = 0; i < w; ++i) {
      out(i, s) = static_cast<double>((prefix[i + lookback] - prefix[i]) / static_cast<long double>(lookback));
    }
  }
  return out;
}

Matrix train_values(const NormalizedDataset& dataset) { return split_chronological(dataset).train.materialize(); }

// MacKinnon, Haug and Michelis (1999) 95% trace values, constant in the VECM,
// indexed by the number of common trends (1..12).
constexpr std::array<double, 12> kTrace95{3.8415,   15.4943,  29.7961,  47.8545,  69.8189,  95.7542,
                                          125.6185, 159.5290, 197.3772, 239.2468, 285.1402, 334.9795};

// Residuals of `y` after regressing on `z` plus a constant.
Matrix residualize(const Matrix& y, const Matrix& z) {
  Matrix centered = y;
  const std::size_t rows = y.rows();
  for (std::size_t c = 0; c < y.cols(); ++c) {
    double m = 0.0;
    for (std::size_t i = 0; i < rows; ++i) m += y(i, c);
    m /= static_cast<double>(rows);
    for (std::size_t i = 0; i < rows; ++i) centered(i, c) -= m;
  }
  if (z.cols() == 0) return centered;
  Matrix design(rows, z.cols() + 1);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t c = 0; c < z.cols(); ++c) design(i, c) = z(i, c);
    design(i, z.cols()) = 1.0;
  }
  const Matrix beta = least_squares(design, y);
  return y - matmul(design, beta);
}

}  // namespace

double trend_strength(const Matrix& values, std::size_t lookback) {
  const Matrix means = window_means(values, lookback);
  const double n = static_cast<double>(values.cols());
  double total = 0.0;
  for (std::size_t i = 0; i < means.rows(); ++i) {
    double sq = 0.0;
    for (double m : means.row(i)) sq += m * m;
    total += sq / n;
  }
  return total / static_cast<double>(means.rows());
}

double trend_strength(const NormalizedDataset& dataset, std::size_t lookback) {
  return trend_strength(train_values(dataset), lookback);
}

double scale_difference(const Matrix& values, std::size_t lookback) {
  if (values.cols() < 2) throw SingleSeries("scale difference needs at least two series");
  const Matrix means = window_means(values, lookback);
  const double n = static_cast<double>(values.cols());
  double total = 0.0;
  for (std::size_t i = 0; i < means.rows(); ++i) {
    const auto row = means.row(i);
    double mu = 0.0;
    for (double m : row) mu += m;
    mu /= n;
    double var = 0.0;
    for (double m : row) var += (m - mu) * (m - mu);
    total += std::sqrt(var / n);
  }
  return total / static_cast<double>(means.rows());
}

double scale_difference(const NormalizedDataset& dataset, std::size_t lookback) {
  return scale_difference(train_values(dataset), lookback);
}

double johansen_critical_value_95(std::size_t remaining_trends) {
  if (remaining_trends == 0 || remaining_trends > kTrace95.size()) {
    throw OutOfTable("no 95% trace critical value for " + std::to_string(remaining_trends) +
                     " common trends (table covers 1..12)");
  }
  return kTrace95[remaining_trends - 1];
}

JohansenResult johansen_trace(const Matrix& values, std::size_t k, std::size_t r) {
  const std::size_t t = values.rows(), n = values.cols();
  if (n < 2) throw SingleSeries("Johansen test needs at least two series");
  if (r >= n) throw InvalidConfig("rank r must be below the number of series");
  if (t <= k * n + n + 10) {
    throw TooShort("Johansen test with " + std::to_string(k) + " lags needs more than " +
                   std::to_string(k * n + n + 10) + " rows, have " + std::to_string(t));
  }
  const double crit = johansen_critical_value_95(n - r);

  // Sample t = k+1 .. T-1: dx_t on [dx_{t-1} .. dx_{t-k}], levels x_{t-k}.
  const std::size_t m = t - k - 1;
  Matrix dy(m, n), lev(m, n), z(m, k * n);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t row = k + 1 + i;
    for (std::size_t s = 0; s < n; ++s) {
      dy(i, s) = values(row, s) - values(row - 1, s);
      lev(i, s) = values(row - k, s);
      for (std::size_t j = 1; j <= k; ++j) z(i, (j - 1) * n + s) = values(row - j, s) - values(row - j - 1, s);
    }
  }

  Matrix r0, r1;
  try {
    r0 = residualize(dy, z);
    r1 = residualize(lev, z);
  } catch (const RankDeficient& e) {
    throw NotPositiveDefinite(std::string("lagged differences are collinear: ") + e.what());
  }
  const double inv = 1.0 / static_cast<double>(m);
  Matrix s00 = matmul_tn(r0, r0), s01 = matmul_tn(r0, r1), s11 = matmul_tn(r1, r1);
  s00 *= inv;
  s01 *= inv;
  s11 *= inv;

  // S10 S00^-1 S01 v = lambda S11 v.
  Matrix a = matmul_tn(s01, solve_spd(s00, s01));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) a(i, j) = a(j, i) = 0.5 * (a(i, j) + a(j, i));
  const SymmetricEigen eig = generalized_symmetric_eigen(a, s11);

  JohansenResult out;
  out.eigenvalues = eig.values;
  out.effective_samples = m;
  out.critical_value_95 = crit;
  for (std::size_t i = r; i < n; ++i) out.trace_statistic -= static_cast<double>(m) * std::log1p(-eig.values[i]);
  out.reject = out.trace_statistic > crit;
  return out;
}

std::vector<JohansenPoint> johansen_curve(const Matrix& values, const std::vector<std::size_t>& lags,
                                          std::optional<std::size_t> rank) {
  for (std::size_t i = 1; i < lags.size(); ++i) {
    if (lags[i] <= lags[i - 1]) throw InvalidConfig("Johansen lags must be strictly increasing");
  }
  const std::size_t r = rank.value_or(values.cols() == 0 ? 0 : values.cols() - 1);
  std::vector<JohansenPoint> curve(lags.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < lags.size(); i = next++) {
      curve[i].lag = lags[i];
      try {
        const auto res = johansen_trace(values, lags[i], r);
        curve[i].trace_statistic = res.trace_statistic;
        curve[i].critical_value_95 = res.critical_value_95;
        curve[i].reject = res.reject;
      } catch (const Error& e) {
        curve[i].error = e.what();
      }
    }
  };
  const std::size_t workers =
      std::min<std::size_t>(lags.size(), std::max(1u, std::thread::hardware_concurrency()));
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
  }
  return curve;
}

std::string to_string(Module module) {
  switch (module) {
    case Module::MeanCentering: return "mean_centering";
    case Module::LayerNorm: return "layer_norm";
    case Module::SeriesMixing: return "series_mixing";
  }
  return "unknown";
}

namespace {

std::string num(double v, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

}  // namespace

std::vector<Recommendation> recommend_modules(double trend, std::optional<double> scale,
                                              const std::vector<JohansenPoint>& curve, std::size_t n_series) {
  std::vector<Recommendation> out;
  if (trend > 0.2) {
    out.push_back({Module::MeanCentering, "trend strength " + num(trend) + " exceeds 0.2"});
  }
  if (scale && *scale > 0.5) {
    out.push_back({Module::LayerNorm, "scale difference " + num(*scale) + " exceeds 0.5"});
  }
  if (n_series < 30) {
    out.push_back({Module::SeriesMixing, std::to_string(n_series) + " series is below 30"});
  } else if (n_series <= 100 && !curve.empty() && curve.back().ok() && curve.back().reject) {
    const auto& p = curve.back();
    out.push_back({Module::SeriesMixing, std::to_string(n_series) + " series with trace " + num(p.trace_statistic) +
                                             " above " + num(p.critical_value_95) + " at lag " +
                                             std::to_string(p.lag) + " (interpolated rule for 30..100 series)"});
  }
  return out;
}

bool DiagnosticsReport::recommends(Module module) const {
  return std::any_of(recommendations.begin(), recommendations.end(),
                     [&](const Recommendation& r) { return r.module == module; });
}

DiagnosticsReport diagnose(const NormalizedDataset& dataset, std::size_t lookback,
                           const std::vector<std::size_t>& lags) {
  const Matrix train = train_values(dataset);
  DiagnosticsReport rep;
  rep.n_series = train.cols();
  rep.lookback = lookback;
  rep.trend_strength = trend_strength(train, lookback);
  if (train.cols() >= 2) {
    rep.scale_difference = scale_difference(train, lookback);
    rep.johansen_curve = johansen_curve(train, lags);
  } else {
    rep.notes.push_back("single series: scale difference and cointegration test skipped");
  }
  for (const auto& p : rep.johansen_curve) {
    if (!p.ok()) rep.notes.push_back("Johansen test at lag " + std::to_string(p.lag) + " failed: " + *p.error);
  }
  rep.recommendations = recommend_modules(rep.trend_strength, rep.scale_difference, rep.johansen_curve, rep.n_series);
  rep.notes.push_back("recommendations are a general guideline, not a strict rule");
  return rep;
}

std::string to_json(const DiagnosticsReport& rep) {
  nlohmann::ordered_json j;
  j["n_series"] = rep.n_series;
  j["lookback"] = rep.lookback;
  j["trend_strength"] = rep.trend_strength;
  j["scale_difference"] = rep.scale_difference ? nlohmann::ordered_json(*rep.scale_difference) : nullptr;
  auto curve = nlohmann::ordered_json::array();
  for (const auto& p : rep.johansen_curve) {
    nlohmann::ordered_json q;
    q["lag"] = p.lag;
    if (p.ok()) {
      q["trace_statistic"] = p.trace_statistic;
      q["critical_value_95"] = p.critical_value_95;
      q["reject"] = p.reject;
    } else {
      q["error"] = *p.error;
    }
    curve.push_back(q);
  }
  j["johansen_curve"] = curve;
  auto recs = nlohmann::ordered_json::array();
  for (const auto& r : rep.recommendations) recs.push_back({{"module", to_string(r.module)}, {"rationale", r.rationale}});
  j["recommendations"] = recs;
  j["notes"] = rep.notes;
  return j.dump(2) + "\n";
}

std::string to_text(const DiagnosticsReport& rep) {
  std::ostringstream os;
  os << "series:           " << rep.n_series << "\n"
     << "look-back:        " << rep.lookback << "\n"
     << "trend strength:   " << num(rep.trend_strength, 6) << "  (centering threshold 0.2)\n"
     << "scale difference: " << (rep.scale_difference ? num(*rep.scale_difference, 6) : std::string("n/a"))
     << "  (layer-norm threshold 0.5)\n";
  if (!rep.johansen_curve.empty()) {
    os << "Johansen trace, r = N-1:\n";
    for (const auto& p : rep.johansen_curve) {
      os << "  lag " << std::setw(4) << p.lag << "  ";
      if (p.ok()) {
        os << num(p.trace_statistic) << " vs " << num(p.critical_value_95) << (p.reject ? "  reject" : "  keep");
      } else {
        os << "error: " << *p.error;
      }
      os << "\n";
    }
  }
  os << "recommended modules (heuristic):\n";
  if (rep.recommendations.empty()) os << "  none\n";
  for (const auto& r : rep.recommendations) os << "  " << to_string(r.module) << ": " << r.rationale << "\n";
  for (const auto& n : rep.notes) os << "note: " << n << "\n";
  return os.str();
}

std::string johansen_curve_csv(const std::vector<JohansenPoint>& curve) {
  std::ostringstream os;
  os << std::setprecision(17) << "lag,trace_statistic,critical_value_95,reject\n";
  for (const auto& p : curve) {
    if (p.ok()) {
      os << p.lag << ',' << p.trace_statistic << ',' << p.critical_value_95 << ',' << (p.reject ? 1 : 0) << '\n';
    } else {
      os << p.lag << ",,,\n";
    }
  }
  return os.str();
}

}  // namespace sfnn
