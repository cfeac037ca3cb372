#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "hring/symfunc.hpp"

using namespace hring;

namespace {

// Oracle: enumerate every m-subset.
double sigma_brute(int m, const std::vector<double>& x) {
  const int n = static_cast<int>(x.size());
  double total = 0.0;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (__builtin_popcount(mask) != m) continue;
    double p = 1.0;
    for (int i = 0; i < n; ++i)
      if (mask & (1u << i)) p *= x[i];
    total += p;
  }
  return total;
}

// Oracle: roots of det(M - t I) by bisection on sign changes of the
// characteristic polynomial, evaluated through Gaussian elimination.
double char_poly(const SymMatrix& m, double t) {
  const int n = m.dim();
  std::vector<std::vector<double>> a(n, std::vector<double>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a[i][j] = m(i, j) - (i == j ? t : 0.0);
  double det = 1.0;
  for (int c = 0; c < n; ++c) {
    int piv = c;
    for (int r = c + 1; r < n; ++r)
      if (std::fabs(a[r][c]) > std::fabs(a[piv][c])) piv = r;
    if (a[piv][c] == 0.0) return 0.0;
    if (piv != c) {
      std::swap(a[piv], a[c]);
      det = -det;
    }
    det *= a[c][c];
    for (int r = c + 1; r < n; ++r) {
      const double f = a[r][c] / a[c][c];
      for (int j = c; j < n; ++j) a[r][j] -= f * a[c][j];
    }
  }
  return det;
}

std::vector<double> char_poly_roots(const SymMatrix& m) {
  const double bound = m.frobenius() + 1.0;
  const int steps = 20000;
  std::vector<double> roots;
  double prev_t = -bound, prev = char_poly(m, prev_t);
  for (int i = 1; i <= steps; ++i) {
    const double t = -bound + 2.0 * bound * i / steps;
    const double v = char_poly(m, t);
    if ((prev < 0) != (v < 0)) {
      double lo = prev_t, hi = t, flo = prev;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = char_poly(m, mid);
        if ((fm < 0) == (flo < 0)) {
          lo = mid;
          flo = fm;
        } else {
          hi = mid;
        }
      }
      roots.push_back(0.5 * (lo + hi));
    }
    prev_t = t;
    prev = v;
  }
  return roots;
}

SymMatrix random_sym(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  SymMatrix m(n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) m.set(i, j, u(rng));
  return m;
}

}  // namespace

TEST(Sigma, TraceAndConvention) {
  const std::vector<double> lam{1, 2, 3};
  EXPECT_DOUBLE_EQ(sigma(1, lam), 6.0);
  EXPECT_DOUBLE_EQ(sigma(0, lam), 1.0);
  EXPECT_DOUBLE_EQ(sigma(2, lam), 11.0);
  EXPECT_DOUBLE_EQ(sigma(3, lam), 6.0);
}

TEST(Sigma, OrderOutOfRangeThrows) {
  const std::vector<double> lam{1, 2, 3};
  EXPECT_THROW(sigma(-1, lam), DomainError);
  EXPECT_THROW(sigma(4, lam), DomainError);
}

TEST(Sigma, MatchesSubsetEnumeration) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 400; ++trial) {
    const int n = 2 + trial % 5;
    std::vector<double> x(n);
    for (auto& v : x) v = u(rng);
    for (int m = 0; m <= n; ++m) {
      const double ref = sigma_brute(m, x);
      double scale = 0.0;  // sum of |products| bounds the cancellation
      std::vector<double> ax(n);
      for (int i = 0; i < n; ++i) ax[i] = std::fabs(x[i]);
      scale = sigma_brute(m, ax);
      EXPECT_NEAR(sigma(m, x), ref, 1e-12 * std::max(1.0, scale));
    }
  }
}

TEST(Sigma, AllAgreesWithSingle) {
  const std::vector<double> x{0.3, -1.2, 2.5, 0.7};
  const auto e = sigma_all(x);
  ASSERT_EQ(e.size(), 5u);
  for (int m = 0; m <= 4; ++m) EXPECT_DOUBLE_EQ(e[m], sigma(m, x));
}

TEST(SigmaExcl, Examples) {
  EXPECT_DOUBLE_EQ(sigma_excl(1, std::vector<double>{1, 2, 3}, 2), 3.0);
  EXPECT_DOUBLE_EQ(sigma_excl(0, std::vector<double>{1, 2, 3}, 0), 1.0);
  EXPECT_DOUBLE_EQ(sigma_excl(2, std::vector<double>{1, 1, 1, 1}, 0), 3.0);
  EXPECT_THROW(sigma_excl(1, std::vector<double>{1, 2, 3}, 3), DomainError);
  EXPECT_THROW(sigma_excl(3, std::vector<double>{1, 2, 3}, 0), DomainError);
}

TEST(SigmaExcl, ExpansionIdentity) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.1, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 3 + trial % 4;
    std::vector<double> a(n);
    for (auto& v : a) v = u(rng);
    for (int i = 0; i < n; ++i)
      for (int m = 1; m <= n - 1; ++m) {
        const double lhs = sigma(m, a);
        const double rhs = sigma_excl(m, a, i) + a[i] * sigma_excl(m - 1, a, i);
        EXPECT_NEAR(lhs, rhs, 1e-12 * lhs);
      }
  }
}

TEST(Gamma, Examples) {
  EXPECT_TRUE(in_gamma(3, std::vector<double>{1, 1, 1}).inside);
  const auto t = in_gamma(2, std::vector<double>{-1, 1, 1});
  EXPECT_FALSE(t.inside);
  EXPECT_DOUBLE_EQ(t.margin, -1.0);
  EXPECT_FALSE(in_gamma(1, std::vector<double>{-2, 1, 0.5}).inside);
  EXPECT_THROW(in_gamma(0, std::vector<double>{1, 1}), DomainError);
}

TEST(Gamma, MonotoneInOrder) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 2.0);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> x(5);
    for (auto& v : x) v = u(rng);
    bool failed = false;
    for (int m = 1; m <= 5; ++m) {
      const bool in = in_gamma(m, x).inside;
      if (failed) EXPECT_FALSE(in);
      if (!in) failed = true;
    }
  }
}

TEST(Eigen, DiagonalAndIdentity) {
  const auto id = eigenvalues(SymMatrix::identity(3));
  for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(id[i], 1.0);
  const std::vector<double> d{3, 1, 2};
  const auto s = eigenvalues(SymMatrix::diagonal(d));
  EXPECT_DOUBLE_EQ(s[0], 1.0);
  EXPECT_DOUBLE_EQ(s[1], 2.0);
  EXPECT_DOUBLE_EQ(s[2], 3.0);
}

TEST(Eigen, MatchesCharacteristicPolynomialRoots) {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    const SymMatrix m = random_sym(rng, 4);
    const auto roots = char_poly_roots(m);
    const auto s = eigenvalues(m);
    ASSERT_EQ(roots.size(), 4u) << "oracle missed a root (clustered eigenvalues)";
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(s[i], roots[i], 1e-10);
  }
}

TEST(Eigen, ReconstructionResidual) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + trial % 6;
    const SymMatrix m = random_sym(rng, n);
    const auto es = eigen_decompose(m);
    double worst = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double r = 0.0;
        for (int l = 0; l < n; ++l) r += es.vectors(i, l) * es.values[l] * es.vectors(j, l);
        worst = std::max(worst, std::fabs(r - m(i, j)));
      }
    EXPECT_LE(worst, 1e-12 * (1.0 + m.max_abs()));
    for (int i = 1; i < n; ++i) EXPECT_LE(es.values[i - 1], es.values[i]);
    EXPECT_LE(es.sweeps, 60);
  }
}

TEST(Eigen, Deterministic) {
  std::mt19937_64 rng(9);
  const SymMatrix m = random_sym(rng, 5);
  const auto a = eigen_decompose(m), b = eigen_decompose(m);
  for (int i = 0; i < 5; ++i) {
    EXPECT_EQ(a.values[i], b.values[i]);
    for (int j = 0; j < 5; ++j) EXPECT_EQ(a.vectors(i, j), b.vectors(i, j));
  }
}

TEST(Eigen, NonFiniteThrows) {
  SymMatrix m = SymMatrix::identity(3);
  m.set(0, 1, std::nan(""));
  EXPECT_THROW(eigenvalues(m), DomainError);
}

TEST(Hk, IsotropicThreeTwo) {
  const double c = 1.0 / std::sqrt(3.0);
  const std::vector<double> a{c, c, c};
  EXPECT_NEAR(hk(a, 2), 2.0 / 3.0, 1e-15);
  const auto t = QuadraticTarget(a, 2);
  EXPECT_NEAR(t.beta_range().first, 1.0, 1e-15);
  EXPECT_NEAR(t.beta_range().second, 1.5, 1e-14);
}

TEST(Hk, DominantEntryIdentityAndRange) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.05, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 3 + trial % 3;
    std::vector<double> a(n);
    for (auto& v : a) v = u(rng);
    const int k = 2 + trial % (n - 2);
    // Rescale onto sigma_k = 1.
    const double f = std::pow(sigma(k, a), -1.0 / k);
    for (auto& v : a) v *= f;
    const int i0 = static_cast<int>(std::max_element(a.begin(), a.end()) - a.begin());
    const double h = hk(a, k);
    EXPECT_NEAR(h, sigma(k, a) - sigma_excl(k, a, i0), 1e-12);
    EXPECT_GT(h, 0.0);
    EXPECT_LE(h, sigma(k, a) + 1e-15);
    const QuadraticTarget t(a, k);
    EXPECT_LT(t.beta_range().first, t.beta_range().second);
    EXPECT_LE(t.h_k(), 1.0);
    EXPECT_LE(hk_lower(a, k), h);
  }
  EXPECT_THROW(hk(std::vector<double>{1, 0, 1}, 2), DomainError);
}

TEST(Maclaurin, Cases) {
  EXPECT_TRUE(maclaurin_holds(1, 3, std::vector<double>{1, 1, 1, 1}));
  EXPECT_TRUE(maclaurin_holds(2, 2, std::vector<double>{0.5, 1, 3}));
  EXPECT_THROW(maclaurin_holds(1, 2, std::vector<double>{-1, 1, 1}), PreconditionError);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 3.0);
  int accepted = 0;
  while (accepted < 300) {
    std::vector<double> x(5);
    for (auto& v : x) v = u(rng);
    const int k = 2 + accepted % 3;
    if (!in_gamma(k, x).inside) continue;
    ++accepted;
    for (int m = 1; m <= k; ++m) EXPECT_TRUE(maclaurin_holds(m, k, x));
  }
}

TEST(QuadraticTarget, Validation) {
  EXPECT_THROW(QuadraticTarget({1.0, 1.0, 1.0}, 2), DomainError);
  EXPECT_THROW(QuadraticTarget({-1.0, 1.0, 1.0}, 2), DomainError);
  const auto t = QuadraticTarget::isotropic(3, 2);
  EXPECT_NEAR(sigma(2, t.a()), 1.0, 1e-15);
  const Vec x{1.0, 2.0, -1.0};
  EXPECT_NEAR(t.s(x), 0.5 * 6.0 / std::sqrt(3.0), 1e-14);
  EXPECT_TRUE(t.beta_admissible(1.25));
  EXPECT_FALSE(t.beta_admissible(1.5));
}
