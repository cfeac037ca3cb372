#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hring/stargeom.hpp"

using namespace hring;

namespace {

Vec random_direction(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> g;
  Vec x(n);
  for (int i = 0; i < n; ++i) x[i] = g(rng);
  return normalized(x);
}

// Oracle: principal curvatures of the level set sum x_i^2/c_i^2 = 1 at x, as
// eigenvalues of the projected Hessian of the defining function divided by
// its gradient norm, restricted to the tangent plane.
std::vector<double> implicit_curvatures(const std::vector<double>& c, const Vec& x) {
  const int n = x.size();
  Vec dg(n);
  SymMatrix d2g(n);
  for (int i = 0; i < n; ++i) {
    dg[i] = 2 * x[i] / (c[i] * c[i]);
    d2g.set(i, i, 2 / (c[i] * c[i]));
  }
  const double len = norm(dg);
  const Vec nu = (1.0 / len) * dg;
  const Mat fr = tangent_frame(nu);
  SymMatrix t(n - 1);
  for (int a = 0; a < n - 1; ++a)
    for (int b = a; b < n - 1; ++b) t.set(a, b, dot(fr.column(a), d2g * fr.column(b)) / len);
  const auto s = eigenvalues(t);
  return {s.values().begin(), s.values().end()};
}

}  // namespace

TEST(StarSurface, SphereJetIsExact) {
  for (double r0 : {1.0, 0.5, 2.0}) {
    const auto s = StarSurface::sphere(3, r0);
    const auto j = jet_at(s, normalized(Vec{0.3, -0.2, 0.9}));
    for (int i = 0; i < 2; ++i) EXPECT_NEAR(j.kappa[i], 1.0 / r0, 1e-12);
    EXPECT_DOUBLE_EQ(j.w, 1.0);
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) {
        EXPECT_NEAR(j.g(a, b), (a == b) * r0 * r0, 1e-12);
        EXPECT_NEAR(j.gamma(a, b), (a == b) / r0, 1e-12);
        EXPECT_NEAR(j.h(a, b), (a == b) * r0, 1e-12);
      }
  }
}

TEST(StarSurface, EllipsoidCurvaturesMatchImplicitOracle) {
  const std::vector<double> c{1.3, 1.0, 0.7};
  const auto s = StarSurface::ellipsoid(c);
  std::mt19937_64 rng(8);
  for (int t = 0; t < 50; ++t) {
    const Vec p = random_direction(rng, 3);
    const auto j = jet_at(s, p);
    const auto ref = implicit_curvatures(c, s.point(p));
    for (int i = 0; i < 2; ++i) EXPECT_NEAR(j.kappa[i], ref[i], 1e-5);
  }
  const std::vector<double> c4{1.2, 0.9, 1.0, 0.8};
  const auto s4 = StarSurface::ellipsoid(c4);
  for (int t = 0; t < 20; ++t) {
    const Vec p = random_direction(rng, 4);
    const auto j = jet_at(s4, p);
    const auto ref = implicit_curvatures(c4, s4.point(p));
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(j.kappa[i], ref[i], 1e-5);
  }
}

TEST(StarSurface, SquareRootOfInverseMetric) {
  const auto s = StarSurface::perturbed_sphere(3, 1.0, {{2, 1, 0.15}, {3, 0, 0.1}});
  std::mt19937_64 rng(9);
  for (int t = 0; t < 50; ++t) {
    const auto j = jet_at(s, random_direction(rng, 3));
    Mat gm(2);
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) gm(a, b) = j.gamma(a, b);
    const SymMatrix sq = congruence(gm, SymMatrix::identity(2));
    EXPECT_LE((sq - j.g_inv).max_abs(), 1e-10);
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) EXPECT_EQ(j.a(a, b), j.a(b, a));
  }
}

TEST(StarSurface, ScalingInvertsCurvature) {
  const auto s = StarSurface::ellipsoid({1.3, 1.0, 0.7});
  const Vec p = normalized(Vec{0.2, 0.5, -0.6});
  const auto j = jet_at(s, p);
  for (double c : {0.5, 2.0}) {
    const auto jc = jet_at(s.scaled(c), p);
    for (int i = 0; i < 2; ++i) EXPECT_NEAR(jc.kappa[i], j.kappa[i] / c, 1e-12);
  }
}

TEST(StarSurface, NormalIsOutwardAndOrthogonalToTangents) {
  const auto s = StarSurface::ellipsoid({1.3, 1.0, 0.7});
  std::mt19937_64 rng(10);
  for (int t = 0; t < 20; ++t) {
    const Vec p = random_direction(rng, 3);
    const auto j = jet_at(s, p);
    EXPECT_NEAR(norm(j.normal), 1.0, 1e-13);
    EXPECT_GT(dot(j.normal, p), 0.0);
    // Tangent vector of the radial graph along e: d/dt rho(p(t)) p(t) = rho_e p + rho e.
    for (int a = 0; a < 2; ++a) {
      const Vec e = j.frame.column(a);
      const Vec tan = j.grad_rho[a] * p + j.rho * e;
      EXPECT_NEAR(dot(tan, j.normal), 0.0, 1e-12);
    }
  }
}

TEST(StarSurface, SampledGridMatchesClosedForm) {
  const std::vector<double> c{1.2, 1.0, 0.8};
  const auto exact = StarSurface::ellipsoid(c);
  const auto grid = LatLonGridFunction::sample(exact.rho(), 64, 128);
  const auto sampled = StarSurface::rho_grid(64, 128, grid->values());
  EXPECT_EQ(sampled.kind(), SurfaceKind::SampledGrid);
  std::mt19937_64 rng(11);
  for (int t = 0; t < 20; ++t) {
    const Vec p = random_direction(rng, 3);
    if (std::fabs(p[2]) > 0.9) continue;
    const auto a = jet_at(exact, p), b = jet_at(sampled, p);
    for (int i = 0; i < 2; ++i) EXPECT_NEAR(a.kappa[i], b.kappa[i], 5e-3);
  }
}

TEST(Convexity, SphereAndMeanCurvature) {
  const SphereGrid g(3, {16, 32});
  const auto r = is_strictly_jconvex(StarSurface::sphere(3), 2, g);
  EXPECT_TRUE(r.strictly);
  EXPECT_NEAR(r.min_margin, 1.0, 1e-12);
  EXPECT_TRUE(is_strictly_jconvex(StarSurface::ellipsoid({1.3, 1, 0.7}), 1, g).strictly);
  EXPECT_THROW(is_strictly_jconvex(StarSurface::sphere(3), 3, g), DomainError);
}

TEST(Convexity, DumbbellNeckFailsGaussButPassesMean) {
  const auto s = parse_surface("kind perturbed-sphere\nn 3\nradius 1\nmode 2 0 0.3\n");
  const SphereGrid g(3, {32, 16});
  const auto full = is_strictly_jconvex(s, 2, g);
  EXPECT_FALSE(full.strictly);
  EXPECT_LT(full.min_margin, 0.0);
  // The worst point sits at the neck (equator).
  EXPECT_LT(std::fabs(full.worst_direction[2]), 0.3);
  EXPECT_TRUE(is_strictly_jconvex(s, 1, g).strictly);
}

TEST(Convexity, MonotoneInOrder) {
  const SphereGrid g(4, {8, 8, 16});
  for (const auto& s : {StarSurface::sphere(4), StarSurface::ellipsoid({1.2, 0.9, 1.0, 0.8}),
                        StarSurface::perturbed_sphere(4, 1.0, {{2, 0, 0.45}, {1, 2, 0.1}})}) {
    bool prev = true;
    for (int j = 1; j <= 3; ++j) {
      const bool now = is_strictly_jconvex(s, j, g).strictly;
      if (!prev) EXPECT_FALSE(now);
      prev = now;
    }
  }
}

TEST(FrakB, Values) {
  const auto unit = StarSurface::sphere(3);
  EXPECT_DOUBLE_EQ(frak_b(unit, Vec{0, 2, 0}), 2.0);
  const auto e = StarSurface::ellipsoid({1.3, 1.0, 0.7});
  std::mt19937_64 rng(12);
  for (int t = 0; t < 20; ++t) {
    const Vec p = random_direction(rng, 3);
    EXPECT_NEAR(frak_b(e, e.point(p)), 1.0, 1e-14);
    const Vec x = 1.7 * p;
    const double q = p[0] * p[0] / 1.69 + p[1] * p[1] + p[2] * p[2] / 0.49;
    EXPECT_NEAR(frak_b(e, x), 1.7 * std::sqrt(q), 1e-14);
  }
  EXPECT_THROW(frak_b(unit, Vec{0, 0, 0}), DomainError);
}

TEST(InteriorBall, SphereAndEllipsoid) {
  const SphereGrid g(3, {24, 48});
  EXPECT_NEAR(interior_ball_radius(StarSurface::sphere(3), g), 0.5, 1e-3);
  // Smallest radius of curvature of the ellipsoid is c_min^2 / c_max.
  const double r = interior_ball_radius(StarSurface::ellipsoid({1.2, 1.0, 0.8}), g);
  EXPECT_NEAR(r, 0.5 * 0.64 / 1.2, 0.03);
}

TEST(Fixture, RoundTripsThroughDescription) {
  const auto a = StarSurface::perturbed_sphere(3, 1.1, {{2, 1, 0.15}, {3, 0, -0.1}});
  const auto b = parse_surface(a.description());
  EXPECT_EQ(a.description(), b.description());
  const Vec p = normalized(Vec{0.3, 0.4, 0.5});
  EXPECT_EQ(a.rho_at(p), b.rho_at(p));
  const auto g = StarSurface::rho_grid(4, 8, std::vector<double>(32, 1.5));
  const auto h = parse_surface(g.description());
  EXPECT_NEAR(h.rho_at(p), 1.5, 1e-14);
}

TEST(Fixture, RejectsMalformedDocuments) {
  EXPECT_THROW(parse_surface(""), ConfigError);
  EXPECT_THROW(parse_surface("rho-grid 2 4\n1 1 1\n"), ConfigError);
  EXPECT_THROW(parse_surface("rho-grid 2 4\n1 1 1 1 1 1 1 -1\n"), ConfigError);
  EXPECT_THROW(parse_surface("kind torus\nn 3\n"), ConfigError);
  EXPECT_THROW(parse_surface("kind sphere\nn 3\nwobble 2\n"), ConfigError);
  EXPECT_THROW(parse_surface("kind ellipsoid\nn 3\naxes 1 1\n"), ConfigError);
}
