#include "sfnn/linalg.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <numeric>
#include <string>

#include "sfnn/error.hpp"

namespace sfnn {

Matrix least_squares(const Matrix& a, const Matrix& b) {
  const std::size_t m = a.rows(), n = a.cols(), p = b.cols();
  if (b.rows() != m) throw DimensionMismatch("least_squares: a and b row counts differ");
  if (m < n) throw DimensionMismatch("least_squares: underdetermined system");
  if (n == 0) return Matrix(0, p);

  Matrix r = a;
  Matrix qtb = b;
  std::vector<double> v(m);
  for (std::size_t j = 0; j < n; ++j) {
    double norm = 0.0;
    for (std::size_t i = j; i < m; ++i) norm += r(i, j) * r(i, j);
    norm = std::sqrt(norm);
    if (norm == 0.0) continue;  // column already zero below the diagonal; rank check below
    const double alpha = r(j, j) > 0 ? -norm : norm;
    for (std::size_t i = j; i < m; ++i) v[i] = r(i, j);
    v[j] -= alpha;
    double vnorm2 = 0.0;
    for (std::size_t i = j; i < m; ++i) vnorm2 += v[i] * v[i];
    if (vnorm2 == 0.0) continue;

    auto reflect = [&](Matrix& target, std::size_t col_begin) {
      for (std::size_t c = col_begin; c < target.cols(); ++c) {
        double dot = 0.0;
        for (std::size_t i = j; i < m; ++i) dot += v[i] * target(i, c);
        const double f = 2.0 * dot / vnorm2;
        for (std::size_t i = j; i < m; ++i) target(i, c) -= f * v[i];
      }
    };
    reflect(r, j);
    reflect(qtb, 0);
  }

  double largest = 0.0, smallest = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) {
    largest = std::max(largest, std::abs(r(j, j)));
    smallest = std::min(smallest, std::abs(r(j, j)));
  }
  if (largest == 0.0 || smallest < 1e-10 * largest) {
    throw RankDeficient("least_squares: min |R_ii| = " + std::to_string(smallest) +
                        ", max |R_ii| = " + std::to_string(largest));
  }

  Matrix x(n, p);
  for (std::size_t c = 0; c < p; ++c) {
    for (std::size_t ii = n; ii-- > 0;) {
      double s = qtb(ii, c);
      for (std::size_t k = ii + 1; k < n; ++k) s -= r(ii, k) * x(k, c);
      x(ii, c) = s / r(ii, ii);
    }
  }
  return x;
}

Matrix cholesky(const Matrix& a) {
  const std::size_t n = a.rows();
  if (a.cols() != n) throw DimensionMismatch("cholesky: matrix not square");
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0) || !std::isfinite(d)) {
      throw NotPositiveDefinite("cholesky: non-positive pivot at column " + std::to_string(j));
    }
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return l;
}

namespace {

// Solves L y = b in place (L lower triangular).
void forward_substitute(const Matrix& l, Matrix& b) {
  const std::size_t n = l.rows();
  for (std::size_t c = 0; c < b.cols(); ++c)
    for (std::size_t i = 0; i < n; ++i) {
      double s = b(i, c);
      for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * b(k, c);
      b(i, c) = s / l(i, i);
    }
}

// Solves L^T x = b in place.
void backward_substitute_transposed(const Matrix& l, Matrix& b) {
  const std::size_t n = l.rows();
  for (std::size_t c = 0; c < b.cols(); ++c)
    for (std::size_t i = n; i-- > 0;) {
      double s = b(i, c);
      for (std::size_t k = i + 1; k < n; ++k) s -= l(k, i) * b(k, c);
      b(i, c) = s / l(i, i);
    }
}

}  // namespace

Matrix solve_spd(const Matrix& a, const Matrix& b) {
  if (b.rows() != a.rows()) throw DimensionMismatch("solve_spd: row counts differ");
  const Matrix l = cholesky(a);
  Matrix x = b;
  forward_substitute(l, x);
  backward_substitute_transposed(l, x);
  return x;
}

SymmetricEigen symmetric_eigen(const Matrix& input, int max_sweeps) {
  const std::size_t n = input.rows();
  if (input.cols() != n) throw DimensionMismatch("symmetric_eigen: matrix not square");
  Matrix a = input;
  Matrix v = Matrix::identity(n);

  auto off_diagonal = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) s += a(i, j) * a(i, j);
    return s;
  };
  const double scale = std::max(input.frobenius_norm(), std::numeric_limits<double>::min());

  bool converged = n < 2;
  for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    if (std::sqrt(off_diagonal()) <= 1e-15 * scale) {
      converged = true;
      break;
    }
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  if (!converged && std::sqrt(off_diagonal()) > 1e-12 * scale) {
    throw NoConvergence("symmetric_eigen: Jacobi sweeps exhausted");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

  SymmetricEigen out{std::vector<double>(n), Matrix(n, n)};
  for (std::size_t c = 0; c < n; ++c) {
    out.values[c] = a(order[c], order[c]);
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, c) = v(r, order[c]);
  }
  return out;
}

SymmetricEigen generalized_symmetric_eigen(const Matrix& a, const Matrix& b) {
  const std::size_t n = a.rows();
  if (a.cols() != n || b.rows() != n || b.cols() != n) {
    throw DimensionMismatch("generalized_symmetric_eigen: shapes differ");
  }
  // b = L L^T; C = L^-1 a L^-T is symmetric with the same spectrum.
  const Matrix l = cholesky(b);
  Matrix tmp = a;
  forward_substitute(l, tmp);  // L^-1 a
  Matrix c = tmp.transpose();  // a L^-T (a symmetric)
  forward_substitute(l, c);    // L^-1 a L^-T
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double avg = 0.5 * (c(i, j) + c(j, i));
      c(i, j) = c(j, i) = avg;
    }
  SymmetricEigen e = symmetric_eigen(c);
  backward_substitute_transposed(l, e.vectors);  // v = L^-T y, so v^T b v = y^T y = 1
  return e;
}

}  // namespace sfnn
