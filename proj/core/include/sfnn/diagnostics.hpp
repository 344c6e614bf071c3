#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "sfnn/data.hpp"
#include "sfnn/matrix.hpp"

namespace sfnn {

/// Mean over all length-L windows of (1/N) * sum_i mean_i^2, where mean_i is the
/// window mean of series i. Throws TooShort when values has fewer than L rows.
double trend_strength(const Matrix& values, std::size_t lookback);
/// Same statistic on the training segment of a normalized dataset.
double trend_strength(const NormalizedDataset& dataset, std::size_t lookback);

/// Mean over windows of the population std across the N per-series window means.
/// Throws SingleSeries when N < 2 and TooShort when values has fewer than L rows.
double scale_difference(const Matrix& values, std::size_t lookback);
double scale_difference(const NormalizedDataset& dataset, std::size_t lookback);

/// 95% trace critical value for `remaining_trends` = N - r common trends with an
/// unrestricted constant. Throws OutOfTable outside 1..12.
double johansen_critical_value_95(std::size_t remaining_trends);

struct JohansenResult {
  double trace_statistic = 0.0;
  double critical_value_95 = 0.0;
  bool reject = false;
  std::vector<double> eigenvalues;  // descending
  std::size_t effective_samples = 0;
};

/// Johansen trace test of H0: rank <= r, with k lagged differences and an
/// unrestricted constant. Requires N >= 2, r < N and T > k*N + N + 10.
/// Throws SingleSeries, InvalidConfig, TooShort, OutOfTable or NotPositiveDefinite.
JohansenResult johansen_trace(const Matrix& values, std::size_t k, std::size_t r);

struct JohansenPoint {
  std::size_t lag = 0;
  double trace_statistic = 0.0;
  double critical_value_95 = 0.0;
  bool reject = false;
  std::optional<std::string> error;  // the test failed at this lag

  bool ok() const noexcept { return !error.has_value(); }
};

/// johansen_trace at r = N - 1 (or `rank` when given) for each lag, run in parallel.
/// Lags must be strictly increasing; failures are recorded per point.
std::vector<JohansenPoint> johansen_curve(const Matrix& values, const std::vector<std::size_t>& lags,
                                          std::optional<std::size_t> rank = std::nullopt);

enum class Module { MeanCentering, LayerNorm, SeriesMixing };
std::string to_string(Module module);

struct Recommendation {
  Module module;
  std::string rationale;
};

/// Threshold rules: centering when trend > 0.2, layer norm when scale > 0.5,
/// mixing when N < 30, or when 30 <= N <= 100 and the last curve point rejects.
/// A heuristic, not a guarantee.
std::vector<Recommendation> recommend_modules(double trend_strength, std::optional<double> scale_difference,
                                              const std::vector<JohansenPoint>& curve, std::size_t n_series);

struct DiagnosticsReport {
  std::size_t n_series = 0;
  std::size_t lookback = 0;
  double trend_strength = 0.0;
  std::optional<double> scale_difference;  // absent for a single series
  std::vector<JohansenPoint> johansen_curve;
  std::vector<Recommendation> recommendations;
  std::vector<std::string> notes;

  bool recommends(Module module) const;
};

/// All statistics on the z-scored training segment.
DiagnosticsReport diagnose(const NormalizedDataset& dataset, std::size_t lookback, const std::vector<std::size_t>& lags);

std::string to_json(const DiagnosticsReport& report);
std::string to_text(const DiagnosticsReport& report);
/// lag,trace_statistic,critical_value_95,reject
std::string johansen_curve_csv(const std::vector<JohansenPoint>& curve);

}  // namespace sfnn
