#pragma once

// Elementary symmetric functions, Garding cones and the scalar constants of
// the quadratic target A = diag(a) with sigma_k(a) = 1.

#include <span>
#include <utility>
#include <vector>

#include "hring/linalg.hpp"

namespace hring {

/// Eigenvalues of a symmetric matrix, sorted non-decreasing.
class Spectrum {
 public:
  Spectrum() = default;
  /// Copies and sorts `values`.
  explicit Spectrum(std::span<const double> values);
  Spectrum(std::initializer_list<double> values);

  int size() const noexcept { return values_.size(); }
  double operator[](int i) const noexcept { return values_[i]; }
  std::span<const double> values() const noexcept { return values_.span(); }
  double min() const noexcept { return values_[0]; }
  double max() const noexcept { return values_[values_.size() - 1]; }

 private:
  Vec values_;
};

/// sigma_m of an arbitrary sequence; sigma_0 = 1. Incremental expansion of prod(1 + x_i t).
double sigma(int m, std::span<const double> x);
inline double sigma(int m, const Spectrum& lam) { return sigma(m, lam.values()); }

/// All of sigma_0..sigma_n in one pass.
std::vector<double> sigma_all(std::span<const double> x);

/// sigma_m(x | i): sigma_m of the sequence with entry i removed.
double sigma_excl(int m, std::span<const double> x, int i);

struct ConeTest {
  bool inside = false;
  double margin = 0.0;  ///< min_{j<=m} sigma_j, absolute.
};

/// Membership in Gamma_m = { sigma_1 > 0, ..., sigma_m > 0 }.
ConeTest in_gamma(int m, std::span<const double> lam);
inline ConeTest in_gamma(int m, const Spectrum& lam) { return in_gamma(m, lam.values()); }

/// Cyclic Jacobi eigensolver. Columns of `vectors` are the eigenvectors in
/// the order of `values` (ascending).
struct EigenSystem {
  Spectrum values;
  Mat vectors;
  int sweeps = 0;
};
EigenSystem eigen_decompose(const SymMatrix& m);
Spectrum eigenvalues(const SymMatrix& m);

inline double sigma(int m, const SymMatrix& h) { return sigma(m, eigenvalues(h)); }

/// h_m = max_i sigma_{m-1}(a|i) a_i. Requires a_i > 0.
double hk(std::span<const double> a, int k);
/// ubar_h_m = min_i sigma_{m-1}(a|i) a_i.
double hk_lower(std::span<const double> a, int m);

/// Maclaurin: sigma_m / C(n,m) >= (sigma_k / C(n,k))^{m/k} for lam in Gamma_k.
/// Throws PreconditionError when lam is outside Gamma_k.
bool maclaurin_holds(int m, int k, std::span<const double> lam);

double binomial(int n, int m);

/// Diagonal target A = diag(a) with sigma_k(a) = 1, a_i > 0 and its beta interval.
class QuadraticTarget {
 public:
  QuadraticTarget(std::vector<double> a, int k);
  /// a_i = C(n,k)^{-1/k}: the isotropic member of the admissible set.
  static QuadraticTarget isotropic(int n, int k);

  int n() const noexcept { return static_cast<int>(a_.size()); }
  int k() const noexcept { return k_; }
  std::span<const double> a() const noexcept { return a_; }
  double h_k() const noexcept { return h_k_; }
  /// Open interval (k/2, k/(2 h_k)).
  std::pair<double, double> beta_range() const noexcept { return {0.5 * k_, 0.5 * k_ / h_k_}; }
  bool beta_admissible(double beta) const noexcept {
    auto [lo, hi] = beta_range();
    return beta > lo && beta < hi;
  }

  /// s = 1/2 x^T A x.
  double s(const Vec& x) const noexcept;
  /// A x.
  Vec apply(const Vec& x) const;
  SymMatrix matrix() const;

 private:
  std::vector<double> a_;
  int k_;
  double h_k_;
};

}  // namespace hring
