#pragma once

// Property and oracle suites shared by `sfnn verify` and the acceptance runner.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sfnn::cli {

enum class CheckStatus { Pass, Fail, NotRun };

struct CheckResult {
  std::string name;
  CheckStatus status = CheckStatus::Fail;
  std::string detail;  // measured values against their thresholds
  double seconds = 0.0;

  bool passed() const noexcept { return status == CheckStatus::Pass; }
};

/// "[PASS] name: detail (1.23 s)"
std::string format_check(const CheckResult& result);

/// Analytic vs central-difference gradients for all 16 on/off combinations of
/// centering, mixing, layer norm and residual blocks; relative tolerance 1e-4.
CheckResult check_gradients();

/// Linear-only SFNN trained on an AR process against the pooled least-squares
/// forecaster; passes when test MSE is within 2% relative.
CheckResult check_linear_oracle();

/// Noiseless sinusoid at L = period: N-linears test MSE < 1e-6, SFNN < 1e-3.
CheckResult check_sinusoid();

/// With centering on, forward(x + c) - forward(x) == c within 1e-9.
CheckResult check_shift_equivariance();

/// Aggregating a published comparison table (model,dataset,horizon,mean,std,n)
/// reproduces the expected first counts exactly and significance counts within
/// `max_sig_discrepancy` cells.
CheckResult check_protocol(const std::filesystem::path& table, const std::vector<std::size_t>& first_counts,
                           const std::vector<std::size_t>& significant_counts, std::size_t max_sig_discrepancy = 2);

/// Rejection rates of the trace test at r = N - 1 over `seeds` synthetic systems:
/// cointegrated pair must reject in >= 95%, independent walks in <= 10%.
CheckResult check_johansen(std::size_t seeds = 200);

/// Fair-mode ETTh1 sweep at H = 96. NotRun when the CSV is absent.
CheckResult check_etth1(const std::optional<std::filesystem::path>& csv, std::size_t workers);

/// trend_strength / scale_difference against double-loop recomputation within
/// 1e-10, plus the recommendation thresholds.
CheckResult check_diagnostics();

/// Two identical benchmark runs give identical ledgers once timing is removed.
CheckResult check_determinism(const std::filesystem::path& scratch_dir);

/// Location of data files shipped with the tool (published tables).
std::filesystem::path bundled_data_dir();

}  // namespace sfnn::cli
