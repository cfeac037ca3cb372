#pragma once

// Star-shaped boundary Gamma = { rho(p) p : p in S^{n-1} } and its intrinsic
// quantities: metric, second fundamental form and principal curvatures.

#include <iosfwd>
#include <string>
#include <vector>

#include "hring/sphere.hpp"
#include "hring/symfunc.hpp"

namespace hring {

enum class SurfaceKind { ClosedForm, SampledGrid };

/// Smallest sigma-margin at which a surface counts as strictly j-convex.
inline constexpr double kStrictConvexityMargin = 1e-8;

class StarSurface {
 public:
  StarSurface(SphereFunctionPtr rho, SurfaceKind kind, std::string description);

  static StarSurface sphere(int n, double radius = 1.0);
  static StarSurface ellipsoid(std::vector<double> semi_axes);
  static StarSurface perturbed_sphere(int n, double radius, std::vector<SphereMode> modes);
  static StarSurface rho_grid(int n_lat, int n_lon, std::vector<double> values);
  /// The same surface with rho scaled by c.
  StarSurface scaled(double c) const;

  int n() const noexcept { return rho_->dim(); }
  SurfaceKind kind() const noexcept { return kind_; }
  /// Canonical text form; also the fixture format read by parse_surface.
  const std::string& description() const noexcept { return description_; }
  const SphereFunction& rho() const noexcept { return *rho_; }
  SphereFunctionPtr rho_ptr() const noexcept { return rho_; }

  /// rho at a unit vector p. Throws DomainError if rho <= 0.
  double rho_at(const Vec& p) const;
  SphereJet rho_jet(const Vec& p) const;
  /// The boundary point rho(p) p.
  Vec point(const Vec& p) const { return rho_at(p) * p; }

 private:
  SphereFunctionPtr rho_;
  SurfaceKind kind_;
  std::string description_;
};

/// Geometry of Gamma above a sphere point p, with tangential indices taken in
/// the orthonormal frame `frame` (columns 0..n-2 span p^perp).
struct SurfaceJet {
  Vec p;
  Mat frame;
  double rho = 0.0;
  Vec grad_rho;        ///< rho_i, n-1 components.
  SymMatrix hess_rho;  ///< covariant rho_{ij}.
  Vec dphi;            ///< Phi_i with Phi = log rho.
  SymMatrix d2phi;     ///< Phi_{i,j}.
  double w = 1.0;      ///< sqrt(1 + |grad Phi|^2).
  SymMatrix g, g_inv, gamma, h, a;
  Spectrum kappa;      ///< eigenvalues of a.
  Vec normal;          ///< outward unit normal at rho(p) p (ambient).
};

SurfaceJet jet_at(const StarSurface& surface, const Vec& p);
SurfaceJet jet_at(const StarSurface& surface, const Vec& p, const Mat& frame);

struct ConvexityReport {
  bool strictly = false;
  double min_margin = 0.0;
  Vec worst_direction;
};

/// kappa in Gamma_j at every grid direction with margin >= kStrictConvexityMargin.
ConvexityReport is_strictly_jconvex(const StarSurface& surface, int j, const SphereGrid& grid, int threads = 1);

/// |x| / rho(x / |x|).
double frak_b(const StarSurface& surface, const Vec& x);

/// Half the smallest interior tangent-ball radius over the grid, where the
/// radius at p is min(1 / kappa_max(p), reach(p)) and reach is the largest
/// ball tangent at p that contains no other sampled boundary point.
double interior_ball_radius(const StarSurface& surface, const SphereGrid& grid, int threads = 1);

/// Reads a fixture document: either keyword lines (kind, n, radius, axes, mode)
/// for a closed form, or a "rho-grid n_lat n_lon" header followed by values.
StarSurface parse_surface(const std::string& text);
StarSurface load_surface(const std::string& path);

}  // namespace hring
