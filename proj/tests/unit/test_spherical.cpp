#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "hring/spherical.hpp"

using namespace hring;

namespace {

Vec random_direction(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> g;
  Vec x(n);
  for (int i = 0; i < n; ++i) x[i] = g(rng);
  return normalized(x);
}

// Oracle: central-difference Cartesian Hessian.
SymMatrix fd_hessian(const std::function<double(const Vec&)>& g, const Vec& x, double h) {
  const int n = x.size();
  SymMatrix out(n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      const Vec ei = h * Vec::unit(n, i), ej = h * Vec::unit(n, j);
      out.set(i, j, (g(x + ei + ej) - g(x + ei - ej) - g(x - ei + ej) + g(x - ei - ej)) / (4 * h * h));
    }
  return out;
}

double rel_err(const SymMatrix& a, const SymMatrix& b) { return (a - b).max_abs() / std::max(1.0, b.max_abs()); }

std::vector<StarSurface> surfaces(int n) {
  std::vector<StarSurface> out;
  out.push_back(StarSurface::sphere(n, 1.0));
  std::vector<double> axes;
  for (int i = 0; i < n; ++i) axes.push_back(0.8 + 0.15 * i);
  out.push_back(StarSurface::ellipsoid(axes));
  out.push_back(StarSurface::perturbed_sphere(n, 1.0, {{2, 1, 0.08}, {3, 0, 0.05}, {1, 2, -0.04}}));
  return out;
}

SphereJet restricted_linear(const Vec& p, const Vec& c) { return restrict_to_sphere(p, dot(c, p), c, SymMatrix(p.size())); }

}  // namespace

TEST(HessianSpherical, RadialExamples) {
  const int n = 4;
  const double r = 1.7;
  SphericalHessianInput in;
  in.r = r;
  in.f_a = Vec(n - 1);
  in.f_ar = Vec(n - 1);
  in.f_ab = SymMatrix(n - 1);
  in.f_r = r;
  in.f_rr = 1.0;
  EXPECT_LE((hessian_spherical(in) - SymMatrix::identity(n)).max_abs(), 1e-15);
  in.f_r = 1.0;
  in.f_rr = 0.0;
  const SymMatrix h = hessian_spherical(in);
  for (int i = 0; i < n; ++i) EXPECT_NEAR(h(i, i), i < n - 1 ? 1.0 / r : 0.0, 1e-15);
  in.r = 0.0;
  EXPECT_THROW(hessian_spherical(in), DomainError);
}

TEST(HessianSpherical, CoordinateFunctionHasZeroHessian) {
  std::mt19937_64 rng(1);
  for (int n = 3; n <= 5; ++n) {
    const Vec p = random_direction(rng, n);
    const Mat fr = tangent_frame(p);
    const SphereJet th = restricted_linear(p, Vec::unit(n, 0));
    const double r = 2.3;
    const SymMatrix h = hessian_spherical(separable_input(th, fr, r, r, 1.0, 0.0));
    EXPECT_LE(h.max_abs(), 1e-10);
  }
}

TEST(HessianSpherical, QuadraticIsReproduced) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int n = 3; n <= 5; ++n)
    for (int t = 0; t < 10; ++t) {
      SymMatrix q(n);
      for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) q.set(i, j, u(rng));
      const Vec p = random_direction(rng, n);
      const double r = 0.5 + std::fabs(u(rng)) * 3;
      const SphereJet th = restrict_to_sphere(p, 0.5 * dot(p, q * p), q * p, q);
      const Mat fr = tangent_frame(p);
      const SymMatrix h = hessian_spherical(separable_input(th, fr, r, r * r, 2 * r, 2.0));
      EXPECT_LE((h - to_frame(fr, q)).max_abs(), 1e-10);
    }
}

TEST(HessianOfB, SphereIsRadialHessian) {
  const auto s = StarSurface::sphere(3);
  const SymMatrix h = hessian_of_b(s, Vec{0.0, 1.2, 0.9});
  const double r = 1.5;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(h(i, j), (i == j && i < 2) ? 1.0 / r : 0.0, 1e-14);
}

TEST(HessianOfB, AdaptedFrameEntriesMatchShapeOperatorForm) {
  std::mt19937_64 rng(3);
  for (int n = 3; n <= 5; ++n)
    for (const auto& s : surfaces(n)) {
      const Vec p = random_direction(rng, n);
      const double r = 1.3 * s.rho_at(p);
      const Vec x = r * p;
      const Mat fr = adapted_frame(s, p);
      const SurfaceJet j = jet_at(s, p, fr);
      const SymMatrix h = hessian_of_b(s, x, fr);
      const double w = j.w;
      EXPECT_NEAR(h(0, 0), w * w * w / r * j.a(0, 0), 1e-12);
      for (int a = 1; a < n - 1; ++a) {
        EXPECT_NEAR(h(0, a), w * w / r * j.a(0, a), 1e-12);
        EXPECT_NEAR(h(a, a), w / r * j.a(a, a), 1e-12);
        for (int b = a + 1; b < n - 1; ++b) {
          EXPECT_NEAR(j.a(a, b), 0.0, 1e-12);
          EXPECT_NEAR(h(a, b), 0.0, 1e-12);
        }
      }
      for (int i = 0; i < n; ++i) EXPECT_EQ(h(i, n - 1), 0.0);
      // grad rho lies along e_1.
      for (int a = 1; a < n - 1; ++a) EXPECT_NEAR(j.grad_rho[a], 0.0, 1e-12);
    }
}

TEST(HessianOfB, MatchesCartesianFiniteDifferences) {
  std::mt19937_64 rng(4);
  for (int n = 3; n <= 5; ++n)
    for (const auto& s : surfaces(n)) {
      for (int t = 0; t < 5; ++t) {
        const Vec p = random_direction(rng, n);
        const Vec x = (1.2 * s.rho_at(p)) * p;
        const Mat fr = adapted_frame(s, p);
        const SymMatrix cart = frame_to_cartesian(fr, hessian_of_b(s, x, fr));
        const SymMatrix fd = fd_hessian([&](const Vec& y) { return frak_b(s, y); }, x, 1e-4 * norm(x));
        EXPECT_LE((cart - fd).max_abs(), 1e-6);
      }
    }
}

TEST(HessianOfPhiOfB, Examples) {
  const auto e = StarSurface::ellipsoid({1.2, 0.9, 1.0});
  const Vec x{0.4, -0.9, 0.7};
  EXPECT_LE((hessian_of_phi_of_b(e, x, 1.0, 0.0) - hessian_of_b(e, x)).max_abs(), 1e-15);
  const auto unit = StarSurface::sphere(3);
  const double r = norm(x);
  const SymMatrix h = hessian_of_phi_of_b(unit, x, 2 * r, 2.0);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(h(i, j), i == j ? 2.0 : 0.0, 1e-14);
}

TEST(HessianOfPhiOfB, PowerMatchesCartesianFiniteDifferences) {
  std::mt19937_64 rng(5);
  for (int n = 3; n <= 5; ++n)
    for (const auto& s : surfaces(n))
      for (int N : {2, 4, 8}) {
        const Vec p = random_direction(rng, n);
        const Vec x = (1.15 * s.rho_at(p)) * p;
        const double b = frak_b(s, x);
        const Mat fr = adapted_frame(s, p);
        const SymMatrix cart =
            frame_to_cartesian(fr, hessian_of_phi_of_b(s, x, N * std::pow(b, N - 1), N * (N - 1.0) * std::pow(b, N - 2), fr));
        const SymMatrix fd = fd_hessian([&](const Vec& y) { return std::pow(frak_b(s, y), N); }, x, 1e-4 * norm(x));
        EXPECT_LE(rel_err(cart, fd), 1e-5);
      }
}

TEST(SigmaStructured, SphereMeanCurvature) {
  const auto s = StarSurface::sphere(4);
  const Vec x{0.3, 0.8, -1.1, 0.2};
  const double r = norm(x), M = 1.7, B = 0.6;
  EXPECT_NEAR(sigma_m_structured(s, x, M, B, 1), 3.0 * M / r + B, 1e-13);
}

TEST(SigmaStructured, MatchesEigenvalueRoute) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (int n = 3; n <= 5; ++n)
    for (const auto& s : surfaces(n))
      for (int t = 0; t < 8; ++t) {
        const Vec p = random_direction(rng, n);
        const Vec x = (1.0 + 0.5 * u(rng) / 5.0) * s.rho_at(p) * p;
        const double M = u(rng), B = u(rng) * 10;
        const SymMatrix h = hessian_of_phi_of_b(s, x, M, B);
        for (int m = 1; m <= n - 1; ++m) {
          const double ref = sigma(m, eigenvalues(h));
          EXPECT_NEAR(sigma_m_structured(s, x, M, B, m), ref, 1e-8 * std::max(1.0, std::fabs(ref)));
        }
      }
}

TEST(SigmaStructured, PureMTermsWhenBVanishes) {
  const auto s = StarSurface::ellipsoid({1.2, 0.9, 1.0, 1.1});
  const Vec x{0.4, -0.9, 0.7, 0.3};
  const Vec p = normalized(x);
  const Mat fr = adapted_frame(s, p);
  const SurfaceJet j = jet_at(s, p, fr);
  const double r = norm(x), M = 2.5, w = j.w;
  const Spectrum blk = eigenvalues(j.a.without(0));
  const int m = 2;
  const double expect = std::pow(M / r, m) * std::pow(w, m + 2) * (sigma(m, j.kappa) - sigma(m, blk)) +
                        std::pow(M * w / r, m) * sigma(m, blk);
  EXPECT_NEAR(sigma_m_structured(s, x, M, 0.0, m), expect, 1e-12);
}

TEST(SigmaStructured, IndependentOfAdmissibleRotation) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ang(0, 6.28);
  for (int n = 4; n <= 5; ++n)
    for (const auto& s : surfaces(n)) {
      const Vec p = random_direction(rng, n);
      const Vec x = 1.25 * s.rho_at(p) * p;
      const Mat fr = adapted_frame(s, p);
      // Rotate e_2, e_3 and flip e_{n-1}: the e_1 direction and p stay fixed.
      Mat alt = fr;
      const double c = std::cos(ang(rng)), sn = std::sin(ang(rng));
      const double c2 = c / std::hypot(c, sn), s2 = sn / std::hypot(c, sn);
      for (int i = 0; i < n; ++i) {
        alt(i, 1) = c2 * fr(i, 1) - s2 * fr(i, 2);
        alt(i, 2) = s2 * fr(i, 1) + c2 * fr(i, 2);
        alt(i, n - 2) = -alt(i, n - 2);
      }
      for (int m = 1; m <= n - 1; ++m) {
        const double a = sigma_m_structured(s, x, 1.3, 4.0, m, fr);
        const double b = sigma_m_structured(s, x, 1.3, 4.0, m, alt);
        const double e = sigma(m, eigenvalues(hessian_of_phi_of_b(s, x, 1.3, 4.0, alt)));
        EXPECT_NEAR(a, b, 1e-10 * std::max(1.0, std::fabs(a)));
        EXPECT_NEAR(a, e, 1e-10 * std::max(1.0, std::fabs(a)));
      }
    }
}

TEST(LowerBound, ConstantsAndDefiningInequality) {
  const SphereGrid g(3, {16, 32});
  const auto unit = StarSurface::sphere(3);
  const auto c1 = lower_bound_constants(unit, 1, g);
  EXPECT_EQ(c1.c1, 1.0);
  const Vec x{0.3, 1.1, 0.4};
  const double r = norm(x);
  EXPECT_NEAR(sigma_m_lower_bound(unit, x, 2.0, 3.0, c1), 3.0 - c1.c0 * 2.0 / r, 1e-14);
  // For the unit sphere sigma_1 of the n-1 unit curvatures is n-1.
  EXPECT_NEAR(lower_bound_constants(unit, 2, g).c1, 2.0, 1e-12);
  const SphereGrid g4(4, {8, 8, 16});
  EXPECT_NEAR(lower_bound_constants(StarSurface::sphere(4), 2, g4).c1, 3.0, 1e-12);

  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 20.0);
  for (int n = 3; n <= 4; ++n) {
    const SphereGrid gg = n == 3 ? g : g4;
    for (const auto& s : surfaces(n))
      for (int m = 1; m <= n - 1; ++m) {
        const auto c = lower_bound_constants(s, m, gg);
        for (int t = 0; t < 20; ++t) {
          const Vec p = random_direction(rng, n);
          const Vec xx = (1.0 + u(rng) / 20.0) * s.rho_at(p) * p;
          const double M = u(rng), B = u(rng) * u(rng);
          EXPECT_LE(sigma_m_lower_bound(s, xx, M, B, c), sigma_m_structured(s, xx, M, B, m));
        }
      }
  }
  EXPECT_THROW(sigma_m_lower_bound(unit, x, -1.0, 1.0, c1), PreconditionError);
}

TEST(LowerBound, RejectsNonConvexSurface) {
  const auto neck = StarSurface::perturbed_sphere(3, 1.0, {{2, 0, 0.3}});
  const SphereGrid g(3, {32, 16});
  EXPECT_THROW(lower_bound_constants(StarSurface::perturbed_sphere(4, 1.0, {{2, 0, 0.45}}), 3, SphereGrid(4, {8, 8, 16})),
               PreconditionError);
  EXPECT_NO_THROW(lower_bound_constants(neck, 2, g));  // sigma_1 > 0 everywhere
}

TEST(EigenvalueClaim, LargestEigenvalueDominatesAsNGrows) {
  const auto e = StarSurface::ellipsoid({1.2, 0.9, 1.0});
  const Vec p = normalized(Vec{0.5, -0.4, 0.6});
  const Vec x = (1.001 * e.rho_at(p)) * p;
  const SurfaceJet j = jet_at(e, p);
  const double rho = j.rho, rho1sq = dot(j.grad_rho, j.grad_rho);
  const double b = frak_b(e, x);
  double prev_dev = 1e300;
  for (int lg = 6; lg <= 12; lg += 2) {
    const double N = std::ldexp(1.0, lg);
    const double M = N * std::pow(b, N - 1), B = N * (N - 1) * std::pow(b, N - 2);
    const Spectrum s = eigenvalues(hessian_of_phi_of_b(e, x, M, B));
    const double ratio = s.max() / (B * (rho1sq / std::pow(rho, 4) + 1.0 / (rho * rho)));
    const double dev = std::fabs(ratio - 1.0);
    EXPECT_LT(dev, prev_dev);
    prev_dev = dev;
    for (int i = 0; i < 2; ++i) EXPECT_LE(std::fabs(s[i]), 10.0 * M);
  }
  EXPECT_LT(prev_dev, 0.05);
}
