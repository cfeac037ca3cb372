#pragma once

// Hessians in spherical coordinates and the structured Hessians of
// b = r / rho(theta) and phi(b) in the frame adapted to grad rho.

#include "hring/stargeom.hpp"

namespace hring {

/// Derivatives of f(theta, r) at a point in the frame {e_1..e_{n-1}} of the
/// unit sphere: f_a = e_a f, f_ab = e_b e_a f (covariant), f_ar = d_r e_a f.
struct SphericalHessianInput {
  double r = 1.0;
  Vec f_a;
  SymMatrix f_ab;
  Vec f_ar;
  double f_r = 0.0;
  double f_rr = 0.0;
};

/// Euclidean Hessian in the orthonormal frame {tau_1..tau_{n-1}, tau_r}, tau_a = e_a / r.
SymMatrix hessian_spherical(const SphericalHessianInput& in);

/// Separable f = R(r) Theta(theta): derivative input from the sphere jet of
/// Theta (ambient, projected into `frame`) and R, R', R''.
SphericalHessianInput separable_input(const SphereJet& theta, const Mat& frame, double r, double R, double dR,
                                      double d2R);

/// Full orthonormal frame of R^n at p: columns e_1..e_{n-1} with e_1 along
/// grad rho (when nonzero) and the remaining columns diagonalizing the
/// alpha-block of the shape operator; the last column is p.
Mat adapted_frame(const StarSurface& surface, const Vec& p);

/// Cartesian matrix from components in a full frame (last column p).
SymMatrix frame_to_cartesian(const Mat& frame, const SymMatrix& comp);
SymMatrix cartesian_to_frame(const Mat& frame, const SymMatrix& cart);

/// Hessian of b in the frame {tau_1..tau_{n-1}, tau_r} built from `frame`.
SymMatrix hessian_of_b(const StarSurface& surface, const Vec& x);
SymMatrix hessian_of_b(const StarSurface& surface, const Vec& x, const Mat& frame);

/// Hessian of phi(b) with M = phi'(b), B = phi''(b) in the adapted frame.
SymMatrix hessian_of_phi_of_b(const StarSurface& surface, const Vec& x, double M, double B);
SymMatrix hessian_of_phi_of_b(const StarSurface& surface, const Vec& x, double M, double B, const Mat& frame);

/// Closed form of sigma_m(D^2 phi(b)) from the curvature data, 1 <= m <= n-1.
double sigma_m_structured(const StarSurface& surface, const Vec& x, double M, double B, int m);
double sigma_m_structured(const StarSurface& surface, const Vec& x, double M, double B, int m, const Mat& frame);

/// Constants of the lower bound sigma_m >= (M/r)^{m-1} (c1 B / rho^2 - c0 M / r).
struct LowerBoundConstants {
  int m = 1;
  double c0 = 0.0;
  double c1 = 1.0;
};

/// c1 = min sigma_{m-1}(kappa) over the sweep (c1 = 1 for m = 1). c0 is the
/// larger of n^2 max(w^3 max|a_ij|) C(n-1, m) and 1.1 times the sweep
/// maximum of (C(n-1,m) + 2 C(n-2,m)) w^{m+2} |a|^m, the latter dominating
/// the negative part of the pure-M terms pointwise. Throws PreconditionError
/// unless the surface is strictly (m-1)-convex on the grid.
LowerBoundConstants lower_bound_constants(const StarSurface& surface, int m, const SphereGrid& grid, int threads = 1);

double sigma_m_lower_bound(const StarSurface& surface, const Vec& x, double M, double B,
                           const LowerBoundConstants& constants);
/// Convenience overload sweeping a 32 x 64 (or equivalent) grid for the constants.
double sigma_m_lower_bound(const StarSurface& surface, const Vec& x, double M, double B, int m);

}  // namespace hring
