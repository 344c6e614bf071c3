#pragma once

#include <vector>

#include "sfnn/matrix.hpp"

namespace sfnn {

/// Minimizes ||a x - b||_2 column by column using Householder QR.
///
/// Requires a.rows() >= a.cols(). Throws RankDeficient when the smallest
/// |R_ii| falls below 1e-10 times the largest.
Matrix least_squares(const Matrix& a, const Matrix& b);

/// Lower-triangular L with a = L L^T. Throws NotPositiveDefinite.
Matrix cholesky(const Matrix& a);

/// Solves a x = b for symmetric positive definite a.
Matrix solve_spd(const Matrix& a, const Matrix& b);

struct SymmetricEigen {
  std::vector<double> values;  // descending
  Matrix vectors;              // column i pairs with values[i]
};

/// Cyclic Jacobi for a symmetric matrix. Eigenvectors are orthonormal.
SymmetricEigen symmetric_eigen(const Matrix& a, int max_sweeps = 100);

/// Solves a v = lambda b v for symmetric a and symmetric positive definite b.
/// Eigenvalues are sorted descending and every vector satisfies v^T b v = 1.
SymmetricEigen generalized_symmetric_eigen(const Matrix& a, const Matrix& b);

}  // namespace sfnn
