#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>

#include <json.hpp>

#include "commands.hpp"
#include "config.hpp"
#include "hring/solver.hpp"

namespace hring::cli {

namespace {

using ojson = nlohmann::ordered_json;
using SigmaFn = std::function<double(int, std::span<const double>)>;

// Recurrence with the coefficient update run upward, so each x_i is used
// more than once; the mutation the suite should detect.
double corrupted_sigma(int m, std::span<const double> x) {
  std::vector<double> e(m + 1, 0.0);
  e[0] = 1.0;
  for (double xi : x)
    for (int j = 1; j <= m; ++j) e[j] += xi * e[j - 1];
  return e[m];
}

struct Suite {
  std::string name;
  std::size_t samples = 0;
  double max_error = 0.0;
  double tol = 0.0;
  bool ok() const { return max_error <= tol; }
  void add(double err) {
    ++samples;
    if (!(err <= max_error)) max_error = std::isnan(err) ? INFINITY : err;
  }
};

double brute_sigma(int m, const std::vector<double>& x) {
  const int n = static_cast<int>(x.size());
  double sum = 0.0;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (__builtin_popcount(mask) != m) continue;
    double prod = 1.0;
    for (int i = 0; i < n; ++i)
      if (mask & (1u << i)) prod *= x[i];
    sum += prod;
  }
  return sum;
}

double abs_sigma(int m, const std::vector<double>& x) {
  std::vector<double> a(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) a[i] = std::fabs(x[i]);
  return brute_sigma(m, a);
}

Suite sigma_suite(const SigmaFn& sig, std::mt19937_64& rng) {
  Suite s{"sigma_vs_subsets", 0, 0.0, 1e-12};
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int t = 0; t < 300; ++t) {
    const int n = 1 + t % 6;
    std::vector<double> x(n);
    for (double& v : x) v = u(rng);
    for (int m = 0; m <= n; ++m) s.add(std::fabs(sig(m, x) - brute_sigma(m, x)) / std::max(1.0, abs_sigma(m, x)));
  }
  return s;
}

Suite expansion_suite(const SigmaFn& sig, std::mt19937_64& rng) {
  Suite s{"expansion_identity", 0, 0.0, 1e-12};
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int t = 0; t < 200; ++t) {
    const int n = 2 + t % 5;
    std::vector<double> x(n);
    for (double& v : x) v = u(rng);
    for (int i = 0; i < n; ++i)
      for (int m = 1; m <= n; ++m) {
        const double rhs = (m < n ? sigma_excl(m, x, i) : 0.0) + x[i] * sigma_excl(m - 1, x, i);
        s.add(std::fabs(sig(m, x) - rhs) / std::max(1.0, abs_sigma(m, x)));
      }
  }
  return s;
}

Suite structured_suite(const SigmaFn& sig, std::mt19937_64& rng) {
  Suite s{"structured_hessian", 0, 0.0, 1e-8};
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g;
  for (int n = 3; n <= 5; ++n) {
    std::vector<double> axes(n);
    for (int i = 0; i < n; ++i) axes[i] = 0.8 + 0.1 * i;
    const StarSurface surfaces[] = {StarSurface::sphere(n, 1.0), StarSurface::ellipsoid(axes),
                                    StarSurface::perturbed_sphere(n, 1.0, {{2, 0, 0.05}, {1, 1, 0.03}})};
    for (const auto& surf : surfaces)
      for (int t = 0; t < 12; ++t) {
        Vec p(n);
        for (int i = 0; i < n; ++i) p[i] = g(rng);
        p = normalized(p);
        const Vec x = (1.0 + 0.5 * u(rng)) * surf.rho_at(p) * p;
        const double M = 5.0 * u(rng), B = 50.0 * u(rng);
        const Spectrum lam = eigenvalues(hessian_of_phi_of_b(surf, x, M, B));
        for (int m = 1; m <= n - 1; ++m) {
          const double ref = sig(m, lam.values());
          s.add(std::fabs(sigma_m_structured(surf, x, M, B, m) - ref) / std::max(1.0, std::fabs(ref)));
        }
      }
  }
  return s;
}

Suite quadratic_suite() {
  Suite s{"quadratic_exactness", 0, 0.0, 1e-10};
  const QuadraticTarget target = QuadraticTarget::isotropic(3, 2);
  const StarSurface sphere = StarSurface::sphere(3, 1.0);
  GridSpec spec;
  spec.n_t = 6;
  spec.angular = {4, 8};
  const auto grid = RingGrid::build(sphere, target, 6.0, spec);
  const auto q = [&](const Vec& x) { return target.s(x); };
  const RingField f = make_field(grid, q, q, q);
  const SymMatrix A = target.matrix();
  for (std::size_t i = 0; i < grid->size(); ++i) {
    if (grid->tag(i) != NodeTag::Interior) continue;
    const SymMatrix h = discrete_hessian(f, i);
    double e = 0.0;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) e = std::max(e, std::fabs(h(a, b) - A(a, b)));
    s.add(e);
  }
  s.add(residual(f, 2).max_abs);
  return s;
}

}  // namespace

int cmd_selftest(const Options& opt) {
  if (!opt.fault.empty() && opt.fault != "sigma") throw ConfigError("unknown fault '" + opt.fault + "'");
  const SigmaFn sig = opt.fault == "sigma" ? SigmaFn(corrupted_sigma)
                                           : SigmaFn([](int m, std::span<const double> x) { return sigma(m, x); });
  const std::uint64_t seed = opt.seed ? *opt.seed : opt.config.empty() ? 0 : load_config(opt.config).seed;
  std::mt19937_64 rng(seed);
  std::vector<Suite> suites;
  suites.push_back(sigma_suite(sig, rng));
  suites.push_back(expansion_suite(sig, rng));
  suites.push_back(structured_suite(sig, rng));
  suites.push_back(quadratic_suite());

  bool ok = true;
  ojson list = ojson::array();
  for (const auto& s : suites) {
    ok = ok && s.ok();
    list.push_back(ojson{{"name", s.name}, {"samples", s.samples}, {"max_error", s.max_error}, {"tol", s.tol},
                         {"ok", s.ok()}});
  }
  const ojson rep{{"version", kVersionTag}, {"command", "selftest"}, {"seed", seed}, {"fault", opt.fault},
                  {"suites", list}, {"ok", ok}};
  const std::string text = rep.dump(2) + "\n";
  std::cout << text;
  if (opt.out) {
    std::filesystem::create_directories(*opt.out);
    std::ofstream out(std::filesystem::path(*opt.out) / "selftest.json", std::ios::binary);
    out << text;
  }
  return ok ? kOk : kSelftestFailed;
}

}  // namespace hring::cli
