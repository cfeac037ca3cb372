#pragma once

// Small dense vectors and matrices with fixed capacity. Every object in the
// geometric layer lives in R^n with n <= kMaxDim, so storage is inline and
// the types are cheap to copy inside per-node loops.

#include <array>
#include <cassert>
#include <cmath>
#include <initializer_list>
#include <span>

#include "hring/error.hpp"

namespace hring {

inline constexpr int kMaxDim = 8;

class Vec {
 public:
  Vec() = default;
  explicit Vec(int n, double fill = 0.0) : n_(checked(n)) { v_.fill(0.0); for (int i = 0; i < n_; ++i) v_[i] = fill; }
  Vec(std::initializer_list<double> init) : n_(checked(static_cast<int>(init.size()))) {
    v_.fill(0.0);
    int i = 0;
    for (double x : init) v_[i++] = x;
  }
  static Vec from(std::span<const double> xs) {
    Vec out(static_cast<int>(xs.size()));
    for (int i = 0; i < out.n_; ++i) out.v_[i] = xs[i];
    return out;
  }
  static Vec unit(int n, int i) {
    Vec e(n);
    e[i] = 1.0;
    return e;
  }

  int size() const noexcept { return n_; }
  double& operator[](int i) noexcept { assert(i >= 0 && i < n_); return v_[i]; }
  double operator[](int i) const noexcept { assert(i >= 0 && i < n_); return v_[i]; }
  std::span<const double> span() const noexcept { return {v_.data(), static_cast<size_t>(n_)}; }
  std::span<double> span() noexcept { return {v_.data(), static_cast<size_t>(n_)}; }
  const double* begin() const noexcept { return v_.data(); }
  const double* end() const noexcept { return v_.data() + n_; }

  Vec& operator+=(const Vec& o) noexcept { for (int i = 0; i < n_; ++i) v_[i] += o.v_[i]; return *this; }
  Vec& operator-=(const Vec& o) noexcept { for (int i = 0; i < n_; ++i) v_[i] -= o.v_[i]; return *this; }
  Vec& operator*=(double c) noexcept { for (int i = 0; i < n_; ++i) v_[i] *= c; return *this; }
  friend Vec operator+(Vec a, const Vec& b) noexcept { return a += b; }
  friend Vec operator-(Vec a, const Vec& b) noexcept { return a -= b; }
  friend Vec operator*(double c, Vec a) noexcept { return a *= c; }
  friend Vec operator*(Vec a, double c) noexcept { return a *= c; }
  friend Vec operator-(Vec a) noexcept { return a *= -1.0; }

 private:
  static int checked(int n) {
    if (n < 0 || n > kMaxDim) throw DomainError("dimension out of supported range [0, 8]");
    return n;
  }
  int n_ = 0;
  std::array<double, kMaxDim> v_{};
};

inline double dot(const Vec& a, const Vec& b) noexcept {
  double s = 0.0;
  for (int i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}
inline double norm(const Vec& a) noexcept { return std::sqrt(dot(a, a)); }
inline Vec normalized(const Vec& a) { return (1.0 / norm(a)) * a; }

/// General square matrix, row-major. Used for frames (orthonormal columns) and eigenvectors.
class Mat {
 public:
  Mat() = default;
  explicit Mat(int n) : n_(n) {
    if (n < 0 || n > kMaxDim) throw DomainError("dimension out of supported range [0, 8]");
    a_.fill(0.0);
  }
  static Mat identity(int n) {
    Mat m(n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
  /// Matrix whose j-th column is cols[j].
  static Mat from_columns(std::span<const Vec> cols) {
    Mat m(static_cast<int>(cols.size()));
    for (int j = 0; j < m.n_; ++j)
      for (int i = 0; i < m.n_; ++i) m(i, j) = cols[j][i];
    return m;
  }

  int dim() const noexcept { return n_; }
  double& operator()(int i, int j) noexcept { return a_[i * kMaxDim + j]; }
  double operator()(int i, int j) const noexcept { return a_[i * kMaxDim + j]; }
  Vec column(int j) const {
    Vec c(n_);
    for (int i = 0; i < n_; ++i) c[i] = (*this)(i, j);
    return c;
  }
  Mat transposed() const {
    Mat t(n_);
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) t(i, j) = (*this)(j, i);
    return t;
  }
  Vec operator*(const Vec& x) const {
    Vec y(n_);
    for (int i = 0; i < n_; ++i) {
      double s = 0.0;
      for (int j = 0; j < n_; ++j) s += (*this)(i, j) * x[j];
      y[i] = s;
    }
    return y;
  }
  Mat operator*(const Mat& b) const {
    Mat c(n_);
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) {
        double s = 0.0;
        for (int k = 0; k < n_; ++k) s += (*this)(i, k) * b(k, j);
        c(i, j) = s;
      }
    return c;
  }

 private:
  int n_ = 0;
  std::array<double, kMaxDim * kMaxDim> a_{};
};

/// Symmetric matrix. Writes go through set/add so that the stored entries
/// are symmetric bit-for-bit at all times.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(int n) : n_(n) {
    if (n < 0 || n > kMaxDim) throw DomainError("dimension out of supported range [0, 8]");
    a_.fill(0.0);
  }
  static SymMatrix identity(int n) { return scaled_identity(n, 1.0); }
  static SymMatrix scaled_identity(int n, double c) {
    SymMatrix m(n);
    for (int i = 0; i < n; ++i) m.set(i, i, c);
    return m;
  }
  static SymMatrix diagonal(std::span<const double> d) {
    SymMatrix m(static_cast<int>(d.size()));
    for (int i = 0; i < m.n_; ++i) m.set(i, i, d[i]);
    return m;
  }
  /// Outer product c * u u^T.
  static SymMatrix outer(const Vec& u, double c = 1.0) {
    SymMatrix m(u.size());
    for (int i = 0; i < m.n_; ++i)
      for (int j = i; j < m.n_; ++j) m.set(i, j, c * u[i] * u[j]);
    return m;
  }
  /// Symmetrized outer product c * (u v^T + v u^T).
  static SymMatrix sym_outer(const Vec& u, const Vec& v, double c = 1.0) {
    SymMatrix m(u.size());
    for (int i = 0; i < m.n_; ++i)
      for (int j = i; j < m.n_; ++j) m.set(i, j, c * (u[i] * v[j] + v[i] * u[j]));
    return m;
  }

  int dim() const noexcept { return n_; }
  double operator()(int i, int j) const noexcept { return a_[i * kMaxDim + j]; }
  void set(int i, int j, double v) noexcept { a_[i * kMaxDim + j] = v; a_[j * kMaxDim + i] = v; }
  void add(int i, int j, double v) noexcept { set(i, j, (*this)(i, j) + v); }

  SymMatrix& operator+=(const SymMatrix& o) noexcept {
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) a_[i * kMaxDim + j] += o.a_[i * kMaxDim + j];
    return *this;
  }
  SymMatrix& operator-=(const SymMatrix& o) noexcept {
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) a_[i * kMaxDim + j] -= o.a_[i * kMaxDim + j];
    return *this;
  }
  SymMatrix& operator*=(double c) noexcept {
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) a_[i * kMaxDim + j] *= c;
    return *this;
  }
  friend SymMatrix operator+(SymMatrix a, const SymMatrix& b) noexcept { return a += b; }
  friend SymMatrix operator-(SymMatrix a, const SymMatrix& b) noexcept { return a -= b; }
  friend SymMatrix operator*(double c, SymMatrix a) noexcept { return a *= c; }

  Vec operator*(const Vec& x) const {
    Vec y(n_);
    for (int i = 0; i < n_; ++i) {
      double s = 0.0;
      for (int j = 0; j < n_; ++j) s += (*this)(i, j) * x[j];
      y[i] = s;
    }
    return y;
  }
  double trace() const noexcept {
    double t = 0.0;
    for (int i = 0; i < n_; ++i) t += (*this)(i, i);
    return t;
  }
  double max_abs() const noexcept {
    double m = 0.0;
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) m = std::fmax(m, std::fabs((*this)(i, j)));
    return m;
  }
  double frobenius() const noexcept {
    double s = 0.0;
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) s += (*this)(i, j) * (*this)(i, j);
    return std::sqrt(s);
  }
  bool all_finite() const noexcept {
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j)
        if (!std::isfinite((*this)(i, j))) return false;
    return true;
  }
  /// Principal submatrix with row/column `skip` removed.
  SymMatrix without(int skip) const {
    SymMatrix m(n_ - 1);
    for (int i = 0, ii = 0; i < n_; ++i) {
      if (i == skip) continue;
      for (int j = 0, jj = 0; j < n_; ++j) {
        if (j == skip) continue;
        m.a_[ii * kMaxDim + jj] = (*this)(i, j);
        ++jj;
      }
      ++ii;
    }
    return m;
  }

 private:
  int n_ = 0;
  std::array<double, kMaxDim * kMaxDim> a_{};
};

/// Q S Q^T.
inline SymMatrix congruence(const Mat& q, const SymMatrix& s) {
  const int n = s.dim();
  SymMatrix out(n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      double acc = 0.0;
      for (int k = 0; k < n; ++k) {
        double row = 0.0;
        for (int l = 0; l < n; ++l) row += s(k, l) * q(j, l);
        acc += q(i, k) * row;
      }
      out.set(i, j, acc);
    }
  return out;
}

/// Components F^T S F of a Cartesian matrix in the orthonormal frame given by the columns of F.
inline SymMatrix to_frame(const Mat& frame, const SymMatrix& cart) { return congruence(frame.transposed(), cart); }
/// Inverse of to_frame: F S F^T.
inline SymMatrix from_frame(const Mat& frame, const SymMatrix& comp) { return congruence(frame, comp); }

}  // namespace hring
