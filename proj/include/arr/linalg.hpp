#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "arr/errors.hpp"

namespace arr {

using Vector = std::vector<double>;

// Dense row-major matrix. Policies here are a handful of d x d blocks with
// d <= 8, so no BLAS.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  static Matrix identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
  }

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

  bool operator==(const Matrix&) const = default;
};

inline Vector matvec(const Matrix& m, const Vector& x) {
  if (static_cast<int>(x.size()) != m.cols)
    throw DataError("matvec dimension mismatch");
  Vector y(static_cast<std::size_t>(m.rows), 0.0);
  for (int r = 0; r < m.rows; ++r) {
    double acc = 0.0;
    for (int c = 0; c < m.cols; ++c) acc += m.at(r, c) * x[c];
    y[r] = acc;
  }
  return y;
}

inline double dot(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw DataError("dot dimension mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double squared_distance(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw DataError("distance dimension mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

inline double norm(const Vector& a) {
  double acc = 0.0;
  for (double v : a) acc += v * v;
  return acc > 0.0 ? std::sqrt(acc) : 0.0;
}

}  // namespace arr
