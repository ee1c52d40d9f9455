#pragma once

#include <cstddef>
#include <vector>

// Minimal dense matrix support for the desk-scale factorizations the bounds
// need: Cholesky (log-determinants, sampling, SPD checks), a Jacobi
// symmetric eigensolver (spectrum clamping), and SPD inversion.

namespace mdlae {

struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;  // row major

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  double& at(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
  double at(int i, int j) const { return data[static_cast<std::size_t>(i) * cols + j]; }

  static Matrix identity(int n);
  static Matrix diagonal(const std::vector<double>& d);
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
std::vector<double> matvec(const Matrix& a, const std::vector<double>& x);

// Lower triangular factor L with A = L L^T.  Returns false when A is not
// (numerically) symmetric positive definite.
bool cholesky(const Matrix& a, Matrix& lower);

// log det A given its Cholesky factor.
double cholesky_log_det(const Matrix& lower);

// Solves L y = b, then L^T x = y.
std::vector<double> cholesky_solve(const Matrix& lower, const std::vector<double>& b);

// Inverse of an SPD matrix via its Cholesky factor.  Throws std::runtime_error
// when the factorization fails.
Matrix spd_inverse(const Matrix& a);

struct SymEigen {
  std::vector<double> values;  // ascending
  Matrix vectors;              // column k is the eigenvector for values[k]
};

// Cyclic Jacobi rotations; fine for the small symmetric matrices used here.
SymEigen sym_eigen(const Matrix& a);

}  // namespace mdlae
