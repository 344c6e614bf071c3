#pragma once

#include <cstddef>
#include <span>

namespace sfnn {

double mean(std::span<const double> xs);
/// Bessel-corrected (n - 1) standard deviation; 0 for fewer than two values.
double sample_std(std::span<const double> xs);
double population_std(std::span<const double> xs);

/// I_x(a, b) by Lentz's continued fraction; absolute error well below 1e-12.
double regularized_incomplete_beta(double a, double b, double x);

/// CDF of Student's t with `df` (> 0, not necessarily integer) degrees of freedom.
double student_t_cdf(double t, double df);

struct WelchResult {
  double t = 0.0;
  double degrees_of_freedom = 0.0;
  double p_two_sided = 1.0;
  /// Both standard deviations were zero: t is 0 (equal means, p = 1) or
  /// infinite (p = 0), and the degrees of freedom fall back to n1 + n2 - 2.
  bool degenerate_variance = false;
};

/// Unequal-variance two-sample t test from summary statistics, with
/// Welch-Satterthwaite degrees of freedom. Requires n1, n2 >= 2 and stds >= 0;
/// throws InvalidConfig otherwise.
WelchResult welch_t_test(double mean1, double std1, std::size_t n1, double mean2, double std2, std::size_t n2);

}  // namespace sfnn
