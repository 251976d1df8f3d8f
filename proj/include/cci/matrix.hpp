// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace cci {

using Vec = std::vector<double>;

// Dense row-major matrix of doubles. Small enough on purpose: the detector
// and the LoRA/KTO math run at desk scale, so clarity beats BLAS here.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vec data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  void zero() { std::fill(data.begin(), data.end(), 0.0); }

  bool same_shape(const Matrix& o) const {
    return rows == o.rows && cols == o.cols;
  }
};

inline void require_shape(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("shape mismatch: " + what);
}

// y = M x
inline Vec matvec(const Matrix& m, const Vec& x) {
  require_shape(m.cols == x.size(), "matvec");
  Vec y(m.rows, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    double acc = 0.0;
    const double* row = &m.data[r * m.cols];
    for (std::size_t c = 0; c < m.cols; ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
  return y;
}

// y = M^T x
inline Vec matvec_t(const Matrix& m, const Vec& x) {
  require_shape(m.rows == x.size(), "matvec_t");
  Vec y(m.cols, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double xr = x[r];
    const double* row = &m.data[r * m.cols];
    for (std::size_t c = 0; c < m.cols; ++c) y[c] += row[c] * xr;
  }
  return y;
}

// C = A B
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  require_shape(a.cols == b.rows, "matmul");
  Matrix c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a.at(i, k);
      if (aik == 0.0) continue;
      const double* brow = &b.data[k * b.cols];
      double* crow = &c.data[i * b.cols];
      for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

// grad += dy (outer) x, i.e. rank-1 update for dW of y = W x
inline void add_outer(Matrix& grad, const Vec& dy, const Vec& x) {
  require_shape(grad.rows == dy.size() && grad.cols == x.size(), "add_outer");
  for (std::size_t r = 0; r < grad.rows; ++r) {
    const double d = dy[r];
    if (d == 0.0) continue;
    double* row = &grad.data[r * grad.cols];
    for (std::size_t c = 0; c < grad.cols; ++c) row[c] += d * x[c];
  }
}

inline void axpy(Vec& y, double a, const Vec& x) {
  assert(y.size() == x.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

inline double dot(const Vec& a, const Vec& b) {
  assert(a.size() == b.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double norm2(const Vec& v) { return std::sqrt(dot(v, v)); }

inline double sigmoid(double x) {
  if (x >= 0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline bool all_finite(const Vec& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace cci
