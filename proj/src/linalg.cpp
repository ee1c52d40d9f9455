#include "mdlae/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mdlae {

Matrix Matrix::identity(int n) {
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(const std::vector<double>& d) {
  Matrix m(static_cast<int>(d.size()), static_cast<int>(d.size()));
  for (int i = 0; i < m.rows; ++i) m.at(i, i) = d[i];
  return m;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) throw std::invalid_argument("matmul: shape mismatch");
  Matrix c(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i)
    for (int k = 0; k < a.cols; ++k) {
      const double aik = a.at(i, k);
      if (aik == 0.0) continue;
      for (int j = 0; j < b.cols; ++j) c.at(i, j) += aik * b.at(k, j);
    }
  return c;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols, a.rows);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) t.at(j, i) = a.at(i, j);
  return t;
}

std::vector<double> matvec(const Matrix& a, const std::vector<double>& x) {
  if (a.cols != static_cast<int>(x.size()))
    throw std::invalid_argument("matvec: shape mismatch");
  std::vector<double> y(a.rows, 0.0);
  for (int i = 0; i < a.rows; ++i) {
    double acc = 0.0;
    for (int j = 0; j < a.cols; ++j) acc += a.at(i, j) * x[j];
    y[i] = acc;
  }
  return y;
}

bool cholesky(const Matrix& a, Matrix& lower) {
  if (a.rows != a.cols) return false;
  const int n = a.rows;
  lower = Matrix(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = a.at(i, j);
      for (int k = 0; k < j; ++k) s -= lower.at(i, k) * lower.at(j, k);
      if (i == j) {
        if (!(s > 0.0)) return false;
        lower.at(i, i) = std::sqrt(s);
      } else {
        lower.at(i, j) = s / lower.at(j, j);
      }
    }
  }
  return true;
}

double cholesky_log_det(const Matrix& lower) {
  double acc = 0.0;
  for (int i = 0; i < lower.rows; ++i) acc += std::log(lower.at(i, i));
  return 2.0 * acc;
}

std::vector<double> cholesky_solve(const Matrix& lower, const std::vector<double>& b) {
  const int n = lower.rows;
  if (static_cast<int>(b.size()) != n)
    throw std::invalid_argument("cholesky_solve: shape mismatch");
  std::vector<double> y(b);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < i; ++k) y[i] -= lower.at(i, k) * y[k];
    y[i] /= lower.at(i, i);
  }
  for (int i = n - 1; i >= 0; --i) {
    for (int k = i + 1; k < n; ++k) y[i] -= lower.at(k, i) * y[k];
    y[i] /= lower.at(i, i);
  }
  return y;
}

Matrix spd_inverse(const Matrix& a) {
  Matrix lower;
  if (!cholesky(a, lower)) throw std::runtime_error("spd_inverse: matrix is not SPD");
  const int n = a.rows;
  Matrix inv(n, n);
  std::vector<double> e(n, 0.0);
  for (int j = 0; j < n; ++j) {
    std::fill(e.begin(), e.end(), 0.0);
    e[j] = 1.0;
    std::vector<double> col = cholesky_solve(lower, e);
    for (int i = 0; i < n; ++i) inv.at(i, j) = col[i];
  }
  // enforce symmetry lost to rounding
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < i; ++j) {
      const double v = 0.5 * (inv.at(i, j) + inv.at(j, i));
      inv.at(i, j) = inv.at(j, i) = v;
    }
  return inv;
}

SymEigen sym_eigen(const Matrix& a) {
  if (a.rows != a.cols) throw std::invalid_argument("sym_eigen: square matrix required");
  const int n = a.rows;
  Matrix m = a;
  Matrix v = Matrix::identity(n);

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += m.at(p, q) * m.at(p, q);
    if (off < 1e-30) break;

    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = m.at(p, q);
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (m.at(q, q) - m.at(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double mkp = m.at(k, p), mkq = m.at(k, q);
          m.at(k, p) = c * mkp - s * mkq;
          m.at(k, q) = s * mkp + c * mkq;
        }
        for (int k = 0; k < n; ++k) {
          const double mpk = m.at(p, k), mqk = m.at(q, k);
          m.at(p, k) = c * mpk - s * mqk;
          m.at(q, k) = s * mpk + c * mqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = v.at(k, p), vkq = v.at(k, q);
          v.at(k, p) = c * vkp - s * vkq;
          v.at(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  SymEigen out;
  out.values.resize(n);
  for (int i = 0; i < n; ++i) out.values[i] = m.at(i, i);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int x, int y) { return out.values[x] < out.values[y]; });
  SymEigen sorted;
  sorted.values.resize(n);
  sorted.vectors = Matrix(n, n);
  for (int k = 0; k < n; ++k) {
    sorted.values[k] = out.values[order[k]];
    for (int i = 0; i < n; ++i) sorted.vectors.at(i, k) = v.at(i, order[k]);
  }
  return sorted;
}

}  // namespace mdlae
