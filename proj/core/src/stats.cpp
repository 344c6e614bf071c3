#include "sfnn/stats.hpp"

#include <cmath>
#include <limits>

#include "sfnn/error.hpp"

namespace sfnn {

double mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

namespace {

double sum_sq_dev(std::span<const double> xs) {
  const double m = mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s;
}

// Continued fraction for I_x(a, b), modified Lentz.
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) return h;
  }
  throw NoConvergence("incomplete beta continued fraction did not converge");
}

}  // namespace

double sample_std(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  return std::sqrt(sum_sq_dev(xs) / static_cast<double>(xs.size() - 1));
}

double population_std(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  return std::sqrt(sum_sq_dev(xs) / static_cast<double>(xs.size()));
}

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw InvalidConfig("incomplete beta needs a, b > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double df) {
  if (!(df > 0.0)) throw InvalidConfig("student_t_cdf needs df > 0");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double tail = 0.5 * regularized_incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
  return t > 0 ? 1.0 - tail : tail;
}

WelchResult welch_t_test(double mean1, double std1, std::size_t n1, double mean2, double std2, std::size_t n2) {
  if (n1 < 2 || n2 < 2) throw InvalidConfig("welch_t_test needs at least two samples per group");
  if (!(std1 >= 0.0) || !(std2 >= 0.0)) throw InvalidConfig("welch_t_test needs non-negative stds");
  const double v1 = std1 * std1 / static_cast<double>(n1);
  const double v2 = std2 * std2 / static_cast<double>(n2);
  WelchResult r;
  if (v1 + v2 == 0.0) {
    r.degenerate_variance = true;
    r.degrees_of_freedom = static_cast<double>(n1 + n2 - 2);
    if (mean1 == mean2) {
      r.t = 0.0;
      r.p_two_sided = 1.0;
    } else {
      r.t = mean1 > mean2 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
      r.p_two_sided = 0.0;
    }
    return r;
  }
  r.t = (mean1 - mean2) / std::sqrt(v1 + v2);
  r.degrees_of_freedom =
      (v1 + v2) * (v1 + v2) / (v1 * v1 / static_cast<double>(n1 - 1) + v2 * v2 / static_cast<double>(n2 - 1));
  const double df = r.degrees_of_freedom;
  r.p_two_sided = regularized_incomplete_beta(0.5 * df, 0.5, df / (df + r.t * r.t));
  return r;
}

}  // namespace sfnn
