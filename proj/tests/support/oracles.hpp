#pragma once

// Independent oracles shared by the unit and acceptance tests.

#include <cmath>
#include <random>
#include <vector>

#include "hring/linalg.hpp"

namespace hring::oracle {

// Oracle: RK4 in r for (u'/r)^2 + 2 (u'/r) u'' = 1 with u(1) = 0, bisection
// on u'(1) so that u(r_end) = target. Returns u at the requested radii.
inline std::vector<double> shooting_oracle(double r_end, double target, const std::vector<double>& radii) {
  const auto rhs = [](double r, double v) { return (1.0 - (v / r) * (v / r)) * r / (2.0 * v); };
  const int steps = 40000;
  const auto integrate = [&](double slope, const std::vector<double>* ask, std::vector<double>* out) {
    double u = 0.0, v = slope;
    const double h = std::log(r_end) / steps;  // uniform in log r
    std::size_t q = 0;
    std::vector<double> rs(steps + 1), us(steps + 1);
    for (int i = 0; i <= steps; ++i) {
      const double x = i * h, r = std::exp(x);
      rs[i] = r;
      us[i] = u;
      if (i == steps) break;
      // d/dx with r = e^x: du/dx = r v, dv/dx = r f(r, v).
      const auto F = [&](double xx, double uu, double vv, double& du, double& dv) {
        const double rr = std::exp(xx);
        du = rr * vv;
        dv = rr * rhs(rr, vv);
      };
      double k1u, k1v, k2u, k2v, k3u, k3v, k4u, k4v;
      F(x, u, v, k1u, k1v);
      F(x + h / 2, u + h / 2 * k1u, v + h / 2 * k1v, k2u, k2v);
      F(x + h / 2, u + h / 2 * k2u, v + h / 2 * k2v, k3u, k3v);
      F(x + h, u + h * k3u, v + h * k3v, k4u, k4v);
      u += h / 6 * (k1u + 2 * k2u + 2 * k3u + k4u);
      v += h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v);
    }
    if (ask) {
      for (double r : *ask) {
        const double x = std::log(r) / h;
        std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(x), steps - 2);
        i = i > 0 ? i - 1 : 0;
        // cubic Lagrange in log r
        double val = 0.0;
        for (int a = 0; a < 4; ++a) {
          double w = 1.0;
          for (int b = 0; b < 4; ++b)
            if (b != a) w *= (x - double(i + b)) / double(a - b);
          val += w * us[i + a];
        }
        out->push_back(val);
        ++q;
      }
    }
    return u;
  };
  double lo = 1e-3, hi = 1e3;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (integrate(mid, nullptr, nullptr) < target ? lo : hi) = mid;
  }
  std::vector<double> out;
  integrate(0.5 * (lo + hi), &radii, &out);
  return out;
}

/// sigma_m by enumeration of all m-subsets.
inline double brute_sigma(int m, const std::vector<double>& x) {
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

/// Central-difference Cartesian Hessian with step h.
template <class F>
SymMatrix fd_hessian(const F& f, const Vec& x, double h) {
  const int n = x.size();
  SymMatrix out(n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      const auto at = [&](double si, double sj) {
        Vec y = x;
        y[i] += si * h;
        y[j] += sj * h;
        return f(y);
      };
      const double v = i == j ? (at(1, 0) - 2.0 * f(x) + at(-1, 0)) / (h * h)
                              : (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4.0 * h * h);
      out.set(i, j, v);
    }
  return out;
}

inline Vec random_direction(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> g;
  Vec p(n);
  for (int i = 0; i < n; ++i) p[i] = g(rng);
  return normalized(p);
}

}  // namespace hring::oracle
