#include <cmath>

#include <gtest/gtest.h>

#include "sfnn/error.hpp"
#include "sfnn/linalg.hpp"
#include "sfnn/matrix.hpp"
#include "test_util.hpp"

using namespace sfnn;
using sfnn::testing::random_matrix;

namespace {

Matrix naive_product(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j)
      for (std::size_t k = 0; k < a.cols(); ++k) c(i, j) += a(i, k) * b(k, j);
  return c;
}

double max_diff(const Matrix& a, const Matrix& b) {
  EXPECT_EQ(a.rows(), b.rows());
  EXPECT_EQ(a.cols(), b.cols());
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a.data()[i] - b.data()[i]));
  return d;
}

}  // namespace

TEST(Matrix, ProductsMatchTripleLoop) {
  const Matrix a = random_matrix(7, 5, 1), b = random_matrix(5, 9, 2), c = random_matrix(7, 9, 3);
  EXPECT_LT(max_diff(matmul(a, b), naive_product(a, b)), 1e-13);
  EXPECT_LT(max_diff(matmul_tn(a, c), naive_product(a.transpose(), c)), 1e-13);
  EXPECT_LT(max_diff(matmul_nt(c, b), naive_product(c, b.transpose())), 1e-13);

  Matrix acc = c;
  matmul_accumulate(a, b, acc);
  EXPECT_LT(max_diff(acc, c + naive_product(a, b)), 1e-13);
}

TEST(Matrix, ShapeErrors) {
  EXPECT_THROW(matmul(Matrix(2, 3), Matrix(2, 3)), DimensionMismatch);
  EXPECT_THROW(Matrix(2, 2) + Matrix(2, 3), DimensionMismatch);
}

TEST(Matrix, ZeroTimesInfinityPropagatesNaN) {
  Matrix a{{0.0}}, b{{std::numeric_limits<double>::infinity()}};
  EXPECT_TRUE(std::isnan(matmul(a, b)(0, 0)));
}

TEST(LeastSquares, ExactSystemRecovered) {
  const Matrix a = random_matrix(20, 4, 4);
  const Matrix x_true = random_matrix(4, 2, 5);
  const Matrix x = least_squares(a, matmul(a, x_true));
  EXPECT_LT(max_diff(x, x_true), 1e-12);
}

TEST(LeastSquares, ResidualOrthogonalToColumns) {
  const Matrix a = random_matrix(30, 6, 6), b = random_matrix(30, 3, 7);
  const Matrix x = least_squares(a, b);
  const Matrix normal = matmul_tn(a, b - matmul(a, x));
  EXPECT_LT(normal.max_abs(), 1e-11);
}

TEST(LeastSquares, RankDeficientDetected) {
  Matrix a = random_matrix(10, 3, 8);
  for (std::size_t i = 0; i < 10; ++i) a(i, 2) = 2.0 * a(i, 0) - a(i, 1);
  EXPECT_THROW(least_squares(a, random_matrix(10, 1, 9)), RankDeficient);
  EXPECT_THROW(least_squares(Matrix(2, 3), Matrix(2, 1)), DimensionMismatch);
}

TEST(Cholesky, ReconstructsSpdMatrix) {
  const Matrix g = random_matrix(6, 6, 10);
  Matrix spd = matmul_tn(g, g);
  for (std::size_t i = 0; i < 6; ++i) spd(i, i) += 0.5;
  const Matrix l = cholesky(spd);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = i + 1; j < 6; ++j) EXPECT_EQ(l(i, j), 0.0);
  EXPECT_LT(max_diff(matmul_nt(l, l), spd), 1e-12);

  const Matrix b = random_matrix(6, 2, 11);
  EXPECT_LT(max_diff(matmul(spd, solve_spd(spd, b)), b), 1e-11);
}

TEST(Cholesky, IndefiniteRejected) {
  EXPECT_THROW(cholesky(Matrix{{1.0, 2.0}, {2.0, 1.0}}), NotPositiveDefinite);
}

TEST(SymmetricEigen, TwoByTwoClosedForm) {
  // [[a, b], [b, d]] has eigenvalues (a+d)/2 +- sqrt(((a-d)/2)^2 + b^2).
  const double a = 3.0, b = 1.5, d = -1.0;
  const auto e = symmetric_eigen(Matrix{{a, b}, {b, d}});
  const double mid = 0.5 * (a + d), rad = std::sqrt(0.25 * (a - d) * (a - d) + b * b);
  EXPECT_NEAR(e.values[0], mid + rad, 1e-14);
  EXPECT_NEAR(e.values[1], mid - rad, 1e-14);
}

TEST(SymmetricEigen, DecompositionProperties) {
  const Matrix g = random_matrix(8, 8, 12);
  const Matrix s = g + g.transpose();
  const auto e = symmetric_eigen(s);
  for (std::size_t i = 1; i < 8; ++i) EXPECT_GE(e.values[i - 1], e.values[i]);
  EXPECT_LT(max_diff(matmul_tn(e.vectors, e.vectors), Matrix::identity(8)), 1e-12);
  Matrix lambda(8, 8);
  for (std::size_t i = 0; i < 8; ++i) lambda(i, i) = e.values[i];
  EXPECT_LT(max_diff(matmul(s, e.vectors), matmul(e.vectors, lambda)), 1e-11);
}

TEST(GeneralizedEigen, SatisfiesPencilAndNormalization) {
  const Matrix g = random_matrix(5, 5, 13), h = random_matrix(7, 5, 14);
  const Matrix a = g + g.transpose();
  const Matrix b = matmul_tn(h, h);
  const auto e = generalized_symmetric_eigen(a, b);
  for (std::size_t k = 0; k < 5; ++k) {
    const Matrix v = e.vectors.slice_rows(0, 5);
    Matrix col(5, 1);
    for (std::size_t i = 0; i < 5; ++i) col(i, 0) = v(i, k);
    const Matrix av = matmul(a, col), bv = matmul(b, col);
    for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(av(i, 0), e.values[k] * bv(i, 0), 1e-10);
    EXPECT_NEAR(matmul_tn(col, bv)(0, 0), 1.0, 1e-12);
  }
}
