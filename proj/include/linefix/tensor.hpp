#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace linefix {

using Vec = std::vector<double>;

// Row-major dense matrix. Small enough on purpose: the model dimensions in
// this project never justify a BLAS dependency.
struct Mat {
  int rows = 0, cols = 0;
  Vec a;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * static_cast<size_t>(c), 0.0) {}

  double& at(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }
  const double* row(int r) const { return a.data() + static_cast<size_t>(r) * cols; }
  double* row(int r) { return a.data() + static_cast<size_t>(r) * cols; }
  size_t size() const { return a.size(); }
};

// y = M x (or y += M x when accumulate)
inline void matvec(const Mat& m, const double* x, double* y, bool accumulate = false) {
  for (int r = 0; r < m.rows; r++) {
    const double* row = m.row(r);
    double acc = accumulate ? y[r] : 0.0;
    for (int c = 0; c < m.cols; c++) acc += row[c] * x[c];
    y[r] = acc;
  }
}

// y += M^T x
inline void matvec_t_acc(const Mat& m, const double* x, double* y) {
  for (int r = 0; r < m.rows; r++) {
    const double* row = m.row(r);
    const double xr = x[r];
    for (int c = 0; c < m.cols; c++) y[c] += row[c] * xr;
  }
}

// M += u v^T
inline void add_outer(Mat& m, const double* u, const double* v) {
  for (int r = 0; r < m.rows; r++) {
    double* row = m.row(r);
    const double ur = u[r];
    for (int c = 0; c < m.cols; c++) row[c] += ur * v[c];
  }
}

inline void axpy(double a, const double* x, double* y, int n) {
  for (int i = 0; i < n; i++) y[i] += a * x[i];
}

inline double dot(const double* a, const double* b, int n) {
  double s = 0.0;
  for (int i = 0; i < n; i++) s += a[i] * b[i];
  return s;
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Max-subtracted softmax.
inline void softmax_inplace(double* p, int n) {
  double mx = p[0];
  for (int i = 1; i < n; i++) mx = std::max(mx, p[i]);
  double sum = 0.0;
  for (int i = 0; i < n; i++) {
    p[i] = std::exp(p[i] - mx);
    sum += p[i];
  }
  for (int i = 0; i < n; i++) p[i] /= sum;
}

// dlogits from dL/dp for p = softmax(logits): p_k * (g_k - sum_j g_j p_j)
inline void softmax_backward(const double* p, const double* g, double* dlogits, int n) {
  double inner = 0.0;
  for (int i = 0; i < n; i++) inner += g[i] * p[i];
  for (int i = 0; i < n; i++) dlogits[i] = p[i] * (g[i] - inner);
}

}  // namespace linefix
