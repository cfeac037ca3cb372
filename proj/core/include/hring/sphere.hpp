#pragma once

// Scalar functions on the unit sphere S^{n-1} together with their tangential
// derivatives, plus the structured direction grids used by sweeps and the
// ring solver.

#include <complex>
#include <cstddef>
#include <memory>
#include <vector>

#include "hring/linalg.hpp"

namespace hring {

/// Value, tangential gradient and covariant Hessian at a point p of the unit
/// sphere. grad lies in p^perp; hess is an ambient symmetric matrix that
/// annihilates p.
struct SphereJet {
  double value = 0.0;
  Vec grad;
  SymMatrix hess;
};

/// Restriction to the sphere of an ambient function with value F, gradient DF
/// and Hessian D2F at p (|p| = 1): grad = P DF, hess = P D2F P - (DF.p) P.
SphereJet restrict_to_sphere(const Vec& p, double f, const Vec& df, const SymMatrix& d2f);

/// Chain rule for g(f) with g, g', g'' evaluated at f.value.
SphereJet compose(const SphereJet& f, double g, double dg, double d2g);
SphereJet operator+(const SphereJet& a, const SphereJet& b);
SphereJet operator*(double c, const SphereJet& a);
SphereJet product(const SphereJet& a, const SphereJet& b);

/// Orthogonal projector I - p p^T.
SymMatrix tangent_projector(const Vec& p);

/// Deterministic orthonormal basis (columns) of p^perp; column n-1 is p itself.
Mat tangent_frame(const Vec& p);

class SphereFunction {
 public:
  virtual ~SphereFunction() = default;
  virtual int dim() const noexcept = 0;
  virtual SphereJet jet(const Vec& p) const = 0;
  virtual double value(const Vec& p) const { return jet(p).value; }
};

using SphereFunctionPtr = std::shared_ptr<const SphereFunction>;

class ConstantFunction final : public SphereFunction {
 public:
  ConstantFunction(int n, double c) : n_(n), c_(c) {}
  int dim() const noexcept override { return n_; }
  SphereJet jet(const Vec& p) const override;
  double value(const Vec&) const override { return c_; }
  double constant() const noexcept { return c_; }

 private:
  int n_;
  double c_;
};

/// (sum_i p_i^2 / c_i^2)^{-1/2}: the radial function of the ellipsoid with semi-axes c.
class EllipsoidRadius final : public SphereFunction {
 public:
  explicit EllipsoidRadius(std::vector<double> semi_axes);
  int dim() const noexcept override { return static_cast<int>(c_.size()); }
  SphereJet jet(const Vec& p) const override;
  double value(const Vec& p) const override;
  const std::vector<double>& semi_axes() const noexcept { return c_; }

 private:
  std::vector<double> c_;
};

/// One mode c * T_l(p_n) * Re((p_1 + i p_2)^m), T_l the Chebyshev polynomial.
struct SphereMode {
  int l = 0;
  int m = 0;
  double c = 0.0;
};

/// base * (1 + sum of modes). n >= 3.
class ModalFunction final : public SphereFunction {
 public:
  ModalFunction(int n, double base, std::vector<SphereMode> modes);
  int dim() const noexcept override { return n_; }
  SphereJet jet(const Vec& p) const override;
  double base() const noexcept { return base_; }
  const std::vector<SphereMode>& modes() const noexcept { return modes_; }

 private:
  int n_;
  double base_;
  std::vector<SphereMode> modes_;
};

/// g(p) = scale * f(p) + offset.
class AffineOf final : public SphereFunction {
 public:
  AffineOf(SphereFunctionPtr f, double scale, double offset) : f_(std::move(f)), scale_(scale), offset_(offset) {}
  int dim() const noexcept override { return f_->dim(); }
  SphereJet jet(const Vec& p) const override;

 private:
  SphereFunctionPtr f_;
  double scale_, offset_;
};

/// Periodic cubic spline through equally spaced samples y_j at x_j = x0 + j h.
class PeriodicSpline {
 public:
  PeriodicSpline() = default;
  PeriodicSpline(std::vector<double> y, double x0, double period);
  /// Value and first two derivatives at x.
  void eval(double x, double& f, double& df, double& d2f) const;

 private:
  std::vector<double> y_, m_;  // samples and second-derivative moments
  double x0_ = 0.0, h_ = 1.0;
};

/// Samples on the n = 3 colatitude/longitude grid with half-cell offsets:
/// theta_j = (j + 1/2) pi / n_lat, phi_l = 2 pi l / n_lon. Interpolated by
/// periodic splines in longitude and, after continuing each meridian through
/// the poles onto the antipodal longitude, periodic splines in colatitude.
class LatLonGridFunction final : public SphereFunction {
 public:
  LatLonGridFunction(int n_lat, int n_lon, std::vector<double> values);
  int dim() const noexcept override { return 3; }
  SphereJet jet(const Vec& p) const override;
  int n_lat() const noexcept { return n_lat_; }
  int n_lon() const noexcept { return n_lon_; }
  const std::vector<double>& values() const noexcept { return values_; }

  /// Samples f at the grid nodes.
  static std::shared_ptr<LatLonGridFunction> sample(const SphereFunction& f, int n_lat, int n_lon);

 private:
  int n_lat_, n_lon_;
  std::vector<double> values_;
  std::vector<PeriodicSpline> rows_;
};

/// Standard chart for n = 3: p = (sin t cos f, sin t sin f, cos t).
struct PolarChart {
  static Vec point(double theta, double phi);
  static void angles(const Vec& p, double& theta, double& phi);
  static Vec e_theta(double theta, double phi);
  static Vec e_phi(double phi);
  /// Jet from chart partials (f, f_t, f_f, f_tt, f_tf, f_ff), Christoffel terms of the round metric included.
  static SphereJet jet_from_partials(double theta, double phi, double f, double ft, double fp, double ftt, double ftp,
                                     double fpp);
};

/// Jet of f at p from central differences of values in the chart (n = 3 only).
SphereJet finite_difference_jet(const SphereFunction& f, const Vec& p, double h = 1e-4);

/// Product-of-angles grid on S^{n-1}: n-2 colatitudes psi_i with counts[i]
/// cells offset half a cell from the poles, and one longitude with an even
/// count. Coordinates: x_n = cos psi_1, x_{n-1} = sin psi_1 cos psi_2, ...,
/// x_1 = S cos phi, x_2 = S sin phi with S the product of the sines.
class SphereGrid {
 public:
  SphereGrid(int n, std::vector<int> counts);
  /// Grid with `colat` cells per colatitude and `lon` longitudes.
  static SphereGrid uniform(int n, int colat, int lon);

  int dim() const noexcept { return n_; }
  std::size_t size() const noexcept { return size_; }
  const std::vector<int>& counts() const noexcept { return counts_; }

  std::vector<int> multi_index(std::size_t flat) const;
  std::size_t flat_index(const std::vector<int>& idx) const;
  std::vector<double> angles(const std::vector<int>& idx) const;
  Vec direction(std::size_t flat) const;
  static Vec direction_from_angles(int n, const std::vector<double>& angles);

  /// Flat index of idx + offset, continued through the poles: a colatitude
  /// that leaves [0, count) is reflected, later colatitudes are mirrored and
  /// the longitude is rotated by half a turn.
  std::size_t neighbor(std::size_t flat, const std::vector<int>& offset) const;

 private:
  int n_;
  std::vector<int> counts_;
  std::size_t size_;
};

}  // namespace hring
