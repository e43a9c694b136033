#pragma once

// Dense row-major tensor of doubles plus the handful of matrix kernels the
// network code needs. Shapes are small (hidden size 32, batch <= 64), so the
// kernels favor fixed accumulation order over blocking: results are
// bit-deterministic for a given input.

#include <cassert>
#include <cstddef>
#include <numeric>
#include <vector>

#include "fbt/common.hpp"

namespace fbt {

struct Tensor {
  std::vector<size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<size_t> s) : shape(std::move(s)) {
    data.assign(numel(), 0.0);
  }
  Tensor(size_t r, size_t c) : shape{r, c} { data.assign(r * c, 0.0); }

  size_t numel() const {
    size_t n = 1;
    for (size_t d : shape) n *= d;
    return n;
  }
  size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  double* row(size_t i) { return data.data() + i * cols(); }
  const double* row(size_t i) const { return data.data() + i * cols(); }

  double& at(size_t i, size_t j) { return data[i * cols() + j]; }
  double at(size_t i, size_t j) const { return data[i * cols() + j]; }

  void zero() { std::fill(data.begin(), data.end(), 0.0); }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

// Dot product with 4 accumulators; fixed order, good ILP without -ffast-math.
inline double dot(const double* a, const double* b, size_t n) {
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

inline void axpy(double alpha, const double* x, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

// C = A * B^T.  A: m x k, B: n x k, C: m x n.
inline void matmul_nt(const Tensor& a, const Tensor& b, Tensor& c) {
  const size_t m = a.rows(), k = a.cols(), n = b.rows();
  assert(b.cols() == k);
  c.shape = {m, n};
  c.data.resize(m * n);
  for (size_t i = 0; i < m; ++i) {
    const double* ai = a.row(i);
    double* ci = c.data.data() + i * n;
    for (size_t j = 0; j < n; ++j) ci[j] = dot(ai, b.row(j), k);
  }
}

// C += A * B^T, where C is preallocated m x n.
inline void matmul_nt_acc(const Tensor& a, const Tensor& b, Tensor& c) {
  const size_t m = a.rows(), k = a.cols(), n = b.rows();
  assert(b.cols() == k && c.rows() == m && c.cols() == n);
  for (size_t i = 0; i < m; ++i) {
    const double* ai = a.row(i);
    double* ci = c.row(i);
    for (size_t j = 0; j < n; ++j) ci[j] += dot(ai, b.row(j), k);
  }
}

// W += G^T * X.  G: m x o, X: m x k, W: o x k.
inline void matmul_tn_acc(const Tensor& g, const Tensor& x, Tensor& w) {
  const size_t m = g.rows(), o = g.cols(), k = x.cols();
  assert(x.rows() == m && w.rows() == o && w.cols() == k);
  for (size_t b = 0; b < m; ++b) {
    const double* gb = g.row(b);
    const double* xb = x.row(b);
    for (size_t j = 0; j < o; ++j)
      if (gb[j] != 0.0) axpy(gb[j], xb, w.row(j), k);
  }
}

// X = G * W.  G: m x o, W: o x k, X: m x k.
inline void matmul_nn(const Tensor& g, const Tensor& w, Tensor& x) {
  const size_t m = g.rows(), o = g.cols(), k = w.cols();
  assert(w.rows() == o);
  x.shape = {m, k};
  x.data.assign(m * k, 0.0);
  for (size_t b = 0; b < m; ++b) {
    const double* gb = g.row(b);
    double* xb = x.row(b);
    for (size_t j = 0; j < o; ++j)
      if (gb[j] != 0.0) axpy(gb[j], w.row(j), xb, k);
  }
}

// X += G * W.
inline void matmul_nn_acc(const Tensor& g, const Tensor& w, Tensor& x) {
  const size_t m = g.rows(), o = g.cols(), k = w.cols();
  assert(w.rows() == o && x.rows() == m && x.cols() == k);
  for (size_t b = 0; b < m; ++b) {
    const double* gb = g.row(b);
    double* xb = x.row(b);
    for (size_t j = 0; j < o; ++j)
      if (gb[j] != 0.0) axpy(gb[j], w.row(j), xb, k);
  }
}

inline void add_row_bias(Tensor& m, const Tensor& bias) {
  assert(bias.numel() == m.cols());
  for (size_t i = 0; i < m.rows(); ++i) {
    double* r = m.row(i);
    for (size_t j = 0; j < m.cols(); ++j) r[j] += bias.data[j];
  }
}

// bias_grad += column sums of g.
inline void sum_rows_acc(const Tensor& g, Tensor& bias_grad) {
  assert(bias_grad.numel() == g.cols());
  for (size_t i = 0; i < g.rows(); ++i) {
    const double* r = g.row(i);
    for (size_t j = 0; j < g.cols(); ++j) bias_grad.data[j] += r[j];
  }
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace fbt
