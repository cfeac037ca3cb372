#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "hring/solver.hpp"
#include "oracles.hpp"

using namespace hring;

namespace {

const QuadraticTarget kIso = QuadraticTarget::isotropic(3, 2);
const StarSurface kSphere = StarSurface::sphere(3, 1.0);

QuadraticTarget normalized_target(std::vector<double> raw, int k) {
  const double c = std::pow(sigma(k, raw), -1.0 / k);
  for (double& x : raw) x *= c;
  return QuadraticTarget(raw, k);
}

GridSpec full_spec(int n_t, int colat, int lon) {
  GridSpec g;
  g.mode = SolverMode::Full;
  g.n_t = n_t;
  g.angular = {colat, lon};
  return g;
}

GridSpec radial_spec(int n_r) {
  GridSpec g;
  g.mode = SolverMode::Radial;
  g.n_r = n_r;
  return g;
}

SymMatrix random_sym(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  SymMatrix m(n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) m.set(i, j, u(rng));
  return m;
}

const CertifiedBundle& fixture() {
  static const CertifiedBundle cb = [] {
    SweepConfig sw = SweepConfig::defaults(3);
    sw.surface_counts = {16, 32};
    sw.radial_inner = 48;
    sw.radial_outer = 48;
    return certify(kIso, kSphere, BoundaryData::constant(3, 0.0), SubsolutionBundle::initial_params(kIso), sw, 1.0,
                   {16.0, 32.0, 64.0});
  }();
  return cb;
}

RingField solve_fixture(const GridSpec& spec, double R, InitKind kind = InitKind::Ramp, double shape = 3.0) {
  const auto& cb = fixture();
  const auto g = RingGrid::build(kSphere, kIso, R, spec);
  const RingField f0 = initial_field(g, cb.bundle, cb.barriers, OuterData::Barrier, kind, shape);
  return newton_solve(f0, 2, NewtonOptions{});
}

double radial_oracle_error(int n_r, double R) {
  const auto& cb = fixture();
  const GridSpec spec = radial_spec(n_r);
  const RingField u = solve_fixture(spec, R);
  const auto& g = *u.grid;
  std::vector<double> radii;
  for (std::size_t i = 0; i < g.size(); ++i) radii.push_back(g.node(i)[0]);
  const double top = outer_data(cb.bundle, cb.barriers, R, OuterData::Barrier)(g.node(g.size() - 1));
  const auto ref = oracle::shooting_oracle(radii.back(), top, radii);
  double err = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    err = std::max(err, std::fabs(u.u[i] - ref[i]));
    scale = std::max(scale, std::fabs(ref[i]));
  }
  return err / scale;
}

}  // namespace

// ------------------------------------------------------------------ grid

TEST(RingGrid, TagsAndMapping) {
  const auto g = RingGrid::build(kSphere, kIso, 16.0, full_spec(8, 6, 12));
  EXPECT_EQ(g->size(), 8u * 72u);
  const double rR = std::sqrt(16.0) * std::sqrt(2.0 * std::sqrt(3.0));
  for (std::size_t i = 0; i < g->size(); ++i) {
    const double r = norm(g->node(i));
    if (g->tag(i) == NodeTag::Inner) EXPECT_NEAR(r, 1.0, 1e-14);
    if (g->tag(i) == NodeTag::Outer) EXPECT_NEAR(kIso.s(g->node(i)), 16.0, 1e-12);
    if (g->radial_index(i) > 0) {
      const double prev = norm(g->node(g->index(g->radial_index(i) - 1, g->direction_index(i))));
      EXPECT_GT(r, prev);
    }
    EXPECT_LE(r, rR * (1 + 1e-14));
    for (auto j : g->stencil(i).nodes) EXPECT_LT(j, g->size());
  }
}

TEST(RingGrid, RejectsBadInput) {
  EXPECT_THROW(RingGrid::build(StarSurface::sphere(3, 3.0), kIso, 2.0, full_spec(8, 6, 12)), ConfigError);
  EXPECT_THROW(RingGrid::build(kSphere, kIso, 16.0, full_spec(2, 6, 12)), ConfigError);
  const auto aniso = normalized_target({1.0, 2.0, 3.0}, 2);
  EXPECT_THROW(RingGrid::build(kSphere, aniso, 16.0, radial_spec(64)), ConfigError);
  EXPECT_THROW(RingGrid::build(StarSurface::perturbed_sphere(3, 0.2, {{2, 0, 0.1}}), kIso, 16.0, radial_spec(64)), ConfigError);
}

TEST(RingGrid, UncachedStencilsMatchCached) {
  GridSpec a = full_spec(6, 6, 12), b = a;
  b.stencil_cache_mb = 0.0;
  const auto ga = RingGrid::build(kSphere, kIso, 9.0, a), gb = RingGrid::build(kSphere, kIso, 9.0, b);
  for (std::size_t i = 0; i < ga->size(); i += 7) {
    const Stencil sa = ga->stencil(i), sb = gb->stencil(i);
    EXPECT_EQ(sa.nodes, sb.nodes);
    EXPECT_EQ(sa.hess_w, sb.hess_w);
  }
}

// ------------------------------------------------------------- operators

TEST(DiscreteHessian, ExactOnQuadraticsFull) {
  std::mt19937_64 rng(3);
  const auto surf = StarSurface::perturbed_sphere(3, 0.8, {{2, 0, 0.1}, {3, 1, 0.05}});
  const auto g = RingGrid::build(surf, kIso, 20.0, full_spec(10, 8, 16));
  const SymMatrix M = random_sym(rng, 3);
  const Vec b{0.3, -0.7, 0.2};
  const auto q = [&](const Vec& x) { return 0.5 * dot(x, M * x) + dot(b, x) + 1.5; };
  const RingField f = make_field(g, q, q, q);
  for (std::size_t i = 0; i < g->size(); ++i) {
    const SymMatrix H = discrete_hessian_any(f, i);
    const Vec gr = discrete_gradient(f, i);
    const Vec ex = M * g->node(i) + b;
    for (int a = 0; a < 3; ++a) {
      EXPECT_NEAR(gr[a], ex[a], 1e-9);
      for (int c = 0; c < 3; ++c) EXPECT_NEAR(H(a, c), M(a, c), 1e-9);
    }
  }
}

TEST(DiscreteHessian, ExactOnQuadraticsRadial) {
  const auto g = RingGrid::build(kSphere, kIso, 50.0, radial_spec(200));
  const auto q = [](const Vec& x) { return 0.5 * 0.7 * dot(x, x); };
  const RingField f = make_field(g, q, q, q);
  for (std::size_t i = 1; i + 1 < g->size(); ++i) {
    const SymMatrix H = discrete_hessian(f, i);
    for (int a = 0; a < 3; ++a) EXPECT_NEAR(H(a, a), 0.7, 1e-10);
  }
}

TEST(DiscreteHessian, AffineGivesZero) {
  const auto g = RingGrid::build(kSphere, kIso, 12.0, full_spec(8, 6, 12));
  const auto q = [](const Vec& x) { return 2.0 - x[0] + 3.0 * x[2]; };
  const RingField f = make_field(g, q, q, q);
  for (std::size_t i = 0; i < g->size(); ++i)
    if (g->tag(i) == NodeTag::Interior) EXPECT_LT(discrete_hessian(f, i).frobenius(), 1e-10);
}

TEST(DiscreteHessian, BoundaryNodeIsDomainError) {
  const auto g = RingGrid::build(kSphere, kIso, 12.0, full_spec(8, 6, 12));
  const auto q = [](const Vec& x) { return dot(x, x); };
  const RingField f = make_field(g, q, q, q);
  EXPECT_THROW(discrete_hessian(f, 0), DomainError);
  EXPECT_THROW(discrete_hessian(f, g->size() - 1), DomainError);
}

TEST(DiscreteHessian, SecondOrderOnOmega) {
  const auto& b = fixture().bundle;
  const auto P = b.params();
  // Root-mean-square error over interior nodes whose stencil stays in s >= 2.
  const auto err = [&](const GridSpec& spec) {
    const auto g = RingGrid::build(kSphere, kIso, 40.0, spec);
    // omega(s) with s = x^T A x / 2 > 1 only on the outer part; evaluate there.
    const auto w = [&](const Vec& x) { return omega(std::max(kIso.s(x), 1.0), P.alpha, P.beta, 2); };
    const RingField f = make_field(g, w, w, w);
    double e = 0.0;
    std::size_t cnt = 0;
    for (std::size_t i = 0; i < g->size(); ++i) {
      if (g->tag(i) != NodeTag::Interior) continue;
      const double s_lo = kIso.s(g->node(g->index(g->radial_index(i) - 1, g->direction_index(i))));
      if (s_lo < 2.0) continue;
      const SymMatrix ex = hessian_omega(g->node(i), kIso, P.alpha, P.beta);
      const double d = (discrete_hessian(f, i) - ex).frobenius();
      e += d * d;
      ++cnt;
    }
    return std::sqrt(e / cnt);
  };
  const double e1 = err(radial_spec(201)), e2 = err(radial_spec(401));
  EXPECT_GT(e1 / e2, 3.5);
  EXPECT_LT(e1 / e2, 4.5);
  const double f1 = err(full_spec(12, 8, 16)), f2 = err(full_spec(23, 16, 32));
  EXPECT_GT(f1 / f2, 3.5);
  EXPECT_LT(f1 / f2, 5.5);
}

TEST(LinearizedCoefficients, MatchFiniteDifferencesAndArePositive) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    SymMatrix H = random_sym(rng, 3);
    H += 2.5 * SymMatrix::identity(3);
    const SymMatrix C = linearized_coefficients(H, 2);
    const auto F = [](const SymMatrix& m) { return std::sqrt(sigma(2, eigenvalues(m).values())); };
    for (int a = 0; a < 3; ++a)
      for (int c = a; c < 3; ++c) {
        SymMatrix Hp = H, Hm = H;
        const double h = 1e-6;
        Hp.set(a, c, H(a, c) + h);
        Hm.set(a, c, H(a, c) - h);
        const double d = (F(Hp) - F(Hm)) / (2 * h);
        EXPECT_NEAR(d, (a == c ? 1.0 : 2.0) * C(a, c), 1e-6);
      }
    EXPECT_GT(eigenvalues(C).min(), 0.0);
  }
  EXPECT_THROW(linearized_coefficients(-1.0 * SymMatrix::identity(3), 2), PreconditionError);
}

// -------------------------------------------------------------- residual

TEST(Residual, QuadraticSolutionIsZero) {
  const auto t = normalized_target({1.0, 2.0, 3.0}, 2);
  const auto g = RingGrid::build(kSphere, t, 30.0, full_spec(10, 8, 16));
  const auto q = [&](const Vec& x) { return t.s(x); };
  const RingField f = make_field(g, q, q, q);
  const ResidualResult r = residual(f, 2);
  EXPECT_LE(r.max_abs, 1e-12);
  EXPECT_EQ(r.inadmissible, 0u);
}

TEST(Residual, GluedSubsolutionIsNonNegative) {
  const auto& cb = fixture();
  const auto g = RingGrid::build(kSphere, kIso, 64.0, full_spec(24, 16, 32));
  std::vector<Vec> xs;
  for (std::size_t i = 0; i < g->size(); ++i) xs.push_back(g->node(i));
  const RingField f{g, glued_values(cb.bundle, xs)};
  const ResidualResult r = residual(f, 2);
  std::size_t checked = 0;
  for (std::size_t i = 0; i < g->size(); ++i) {
    if (g->tag(i) != NodeTag::Interior) continue;
    bool smooth = true;
    const bool side = kIso.s(g->node(i)) > 1.0;
    for (auto j : g->stencil(i).nodes) smooth = smooth && ((kIso.s(g->node(j)) > 1.0) == side);
    if (!smooth) continue;
    ++checked;
    EXPECT_GE(r.r[i], -1e-8) << i;
  }
  EXPECT_GT(checked, g->size() / 2);
}

TEST(Residual, BumpIsFirstOrderInEpsilon) {
  const auto g = RingGrid::build(kSphere, kIso, 16.0, full_spec(10, 8, 16));
  const auto bumped = [&](double eps) {
    const auto u = [&, eps](const Vec& x) {
      const double d = norm(x - Vec{2.0, 0.5, 0.3});
      return kIso.s(x) + eps * std::exp(-d * d);
    };
    return residual(make_field(g, u, u, u), 2).max_abs;
  };
  const double r1 = bumped(1e-3), r2 = bumped(5e-4);
  EXPECT_GT(r1, 1e-6);
  EXPECT_NEAR(r1 / r2, 2.0, 0.05);
}

TEST(Residual, IndependentOfWorkerCount) {
  const auto g = RingGrid::build(kSphere, kIso, 16.0, full_spec(10, 8, 16));
  const auto u = [](const Vec& x) { return kIso.s(x) + 0.01 * std::sin(x[0]); };
  const RingField f = make_field(g, u, u, u);
  const auto a = residual(f, 2, 1), b = residual(f, 2, 4);
  EXPECT_EQ(a.r, b.r);
  EXPECT_EQ(a.max_abs, b.max_abs);
}

// ---------------------------------------------------------------- Newton

TEST(Newton, RecoversQuadraticFull) {
  const auto t = normalized_target({1.0, 1.5, 2.0}, 2);
  const auto g = RingGrid::build(StarSurface::sphere(3, 0.8), t, 12.0, full_spec(12, 8, 16));
  const auto q = [&](const Vec& x) { return t.s(x) + 0.25; };
  const auto init = [&](const Vec& x) { return q(x) + 0.02 * std::exp(-dot(x, x) / 8.0) * dot(x, x); };
  SolveReport rep;
  const RingField u = newton_solve(make_field(g, q, q, init), 2, NewtonOptions{}, &rep);
  double err = 0.0;
  for (std::size_t i = 0; i < g->size(); ++i) err = std::max(err, std::fabs(u.u[i] - q(g->node(i))));
  EXPECT_LE(err, 1e-8);
  EXPECT_LE(rep.final_residual, 1e-9);
  EXPECT_EQ(rep.final_residual, residual(u, 2).max_abs);
  EXPECT_GT(rep.admissibility_margin, 0.0);
}

TEST(Newton, InadmissibleInitIsPreconditionError) {
  const auto g = RingGrid::build(kSphere, kIso, 12.0, full_spec(8, 6, 12));
  const auto q = [](const Vec& x) { return kIso.s(x); };
  const auto bad = [](const Vec& x) { return -kIso.s(x); };
  EXPECT_THROW(newton_solve(make_field(g, q, q, bad), 2, NewtonOptions{}), PreconditionError);
}

TEST(Newton, IterationCapIsConvergenceError) {
  const auto& cb = fixture();
  const auto g = RingGrid::build(kSphere, kIso, 16.0, radial_spec(256));
  const RingField f0 = initial_field(g, cb.bundle, cb.barriers, OuterData::Barrier, InitKind::Ramp);
  NewtonOptions o;
  o.max_iter = 1;
  EXPECT_THROW(newton_solve(f0, 2, o), ConvergenceError);
}

TEST(Newton, RadialMatchesShootingOracle) {
  const double e1 = radial_oracle_error(512, 64.0), e2 = radial_oracle_error(1024, 64.0);
  EXPECT_LE(e2, 1e-3);
  EXPECT_GE(e1 / e2, 3.0);
}

TEST(Newton, InitializationIndependence) {
  const RingField a = solve_fixture(radial_spec(512), 32.0, InitKind::Ramp, 3.0);
  const RingField b = solve_fixture(radial_spec(512), 32.0, InitKind::MaxBarrier, 1.0);
  double d = 0.0;
  for (std::size_t i = 0; i < a.u.size(); ++i) d = std::max(d, std::fabs(a.u[i] - b.u[i]));
  EXPECT_LE(d, 1e-7);
}

TEST(Newton, FullConvergesToRadial) {
  const RingField rad = solve_fixture(radial_spec(2048), 16.0);
  const auto gap = [&](const GridSpec& spec) {
    const RingField full = solve_fixture(spec, 16.0);
    double d = 0.0;
    for (std::size_t i = 0; i < full.u.size(); ++i)
      d = std::max(d, std::fabs(full.u[i] - interpolate_on_ray(rad, 0, norm(full.grid->node(i)))));
    return d;
  };
  const double coarse = gap(full_spec(12, 6, 12)), fine = gap(full_spec(23, 12, 24));
  EXPECT_GE(coarse / fine, 3.0) << coarse << " " << fine;
}

TEST(Init, RampRequiresConvexExponent) {
  const auto& cb = fixture();
  const auto g = RingGrid::build(kSphere, kIso, 16.0, radial_spec(128));
  EXPECT_THROW(initial_field(g, cb.bundle, cb.barriers, OuterData::Barrier, InitKind::Ramp, 1.0), PreconditionError);
  const RingField f = initial_field(g, cb.bundle, cb.barriers, OuterData::Barrier, InitKind::Ramp, 3.0);
  const auto od = outer_data(cb.bundle, cb.barriers, 16.0, OuterData::Barrier);
  EXPECT_DOUBLE_EQ(f.u.back(), od(g->node(g->size() - 1)));
  EXPECT_DOUBLE_EQ(f.u.front(), 0.0);
}

// ---------------------------------------------------------------- checks

TEST(Checks, ComparisonAndMonotonicity) {
  const auto& cb = fixture();
  const RingField u16 = solve_fixture(radial_spec(1024), 16.0);
  const RingField u32 = solve_fixture(radial_spec(1024), 32.0);
  for (const RingField* f : {&u16, &u32}) {
    const ComparisonReport c = verify_comparison(*f, cb.bundle, cb.barriers);
    EXPECT_TRUE(c.ok()) << c.lower << " " << c.upper;
  }
  EXPECT_LE(verify_monotone(u16, u32), 1e-8);
  EXPECT_THROW(verify_monotone(u32, u16), ConfigError);
}

TEST(Checks, DiscreteComparisonDetectsViolation) {
  const auto& cb = fixture();
  RingField u = solve_fixture(radial_spec(256), 16.0);
  u.u[100] -= 50.0;
  EXPECT_FALSE(verify_comparison(u, cb.bundle, cb.barriers).ok());
  EXPECT_EQ(verify_comparison(u, cb.bundle, cb.barriers).lower_node, 100u);
}

TEST(Checks, GradientMaximaOnBoundary) {
  const RingField u = solve_fixture(radial_spec(1024), 32.0);
  const GradientReport g = verify_gradient_maximum(u);
  EXPECT_TRUE(g.ok()) << g.grad_interior << " " << g.grad_boundary << " " << g.lap_interior << " " << g.lap_boundary;
  EXPECT_GT(g.grad_outer, 0.0);
}

TEST(Checks, LinearizedOperatorPositiveAtSolution) {
  const RingField u = solve_fixture(full_spec(12, 8, 16), 16.0);
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<std::size_t> pick(0, u.grid->size() - 1);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t i = pick(rng);
    if (u.grid->tag(i) != NodeTag::Interior) continue;
    EXPECT_GT(eigenvalues(linearized_coefficients(discrete_hessian(u, i), 2)).min(), 0.0);
  }
}

TEST(Fit, PowerLawExact) {
  std::vector<double> x, y;
  for (int i = 0; i < 20; ++i) x.push_back(std::pow(10.0, 0.1 * i)), y.push_back(3.0 * std::pow(x.back(), -0.75));
  const PowerFit f = fit_power_law(x, y);
  EXPECT_NEAR(f.exponent, -0.75, 1e-12);
  EXPECT_NEAR(std::exp(f.intercept), 3.0, 1e-10);
  EXPECT_NEAR(f.r2, 1.0, 1e-12);
  EXPECT_THROW(fit_power_law({1.0}, {1.0}), AnalysisError);
}

TEST(Fit, DecayOfSyntheticField) {
  const auto& b = fixture().bundle;
  const double mu = b.params().mu;
  const auto g = RingGrid::build(kSphere, kIso, 4000.0, radial_spec(2000));
  const auto u = [&](const Vec& x) { return kIso.s(x) + mu + 2.0 * std::pow(norm(x), -0.5); };
  const DecayFit d = decay_fit(make_field(g, u, u, u), b, 1.0);
  EXPECT_NEAR(d.p0.exponent, -0.5, 1e-6);
  EXPECT_NEAR(d.p1.exponent, -1.5, 1e-3);
  EXPECT_NEAR(d.p2.exponent, -2.5, 1e-2);
  EXPECT_DOUBLE_EQ(d.target0, -0.5);
  const auto small = RingGrid::build(kSphere, kIso, 64.0, radial_spec(200));
  EXPECT_THROW(decay_fit(make_field(small, u, u, u), b, 1.0), AnalysisError);
}

// ---------------------------------------------------------------- output

TEST(Output, CsvAndBinaryRoundTrip) {
  const auto g = RingGrid::build(kSphere, kIso, 9.0, full_spec(6, 4, 8));
  const auto q = [](const Vec& x) { return kIso.s(x) + 0.1; };
  const RingField f = make_field(g, q, q, q);
  const FieldTable t = field_table(f, residual(f, 2));
  EXPECT_EQ(t.columns.front(), "node");
  EXPECT_EQ(t.columns.size(), 8u);
  const auto dir = std::filesystem::temp_directory_path() / "hring_test_output";
  std::filesystem::create_directories(dir);
  write_csv((dir / "u.csv").string(), t);
  write_binary((dir / "u.bin").string(), f, t);
  const FieldTable back = read_binary((dir / "u.bin").string());
  EXPECT_EQ(back.columns, t.columns);
  EXPECT_EQ(back.rows, t.rows);
  EXPECT_EQ(back.data, t.data);
  EXPECT_EQ(std::filesystem::file_size(dir / "u.bin"), 64 + t.data.size() * sizeof(double));
  std::FILE* fp = std::fopen((dir / "u.csv").string().c_str(), "r");
  ASSERT_NE(fp, nullptr);
  char line[256];
  ASSERT_NE(std::fgets(line, sizeof line, fp), nullptr);
  EXPECT_EQ(std::string(line), "node,x1,x2,x3,s,u,residual,admissibility_margin\n");
  std::fclose(fp);
  std::filesystem::remove_all(dir);
  EXPECT_THROW(read_binary("/nonexistent/file.bin"), ConfigError);
}
