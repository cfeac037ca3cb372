#include "hring/symfunc.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace hring {

Spectrum::Spectrum(std::span<const double> values) : values_(Vec::from(values)) {
  std::sort(values_.span().begin(), values_.span().end());
}

Spectrum::Spectrum(std::initializer_list<double> values)
    : Spectrum(std::span<const double>(values.begin(), values.size())) {}

std::vector<double> sigma_all(std::span<const double> x) {
  const size_t n = x.size();
  std::vector<double> e(n + 1, 0.0);
  e[0] = 1.0;
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j >= 1; --j) e[j] += x[i] * e[j - 1];
  return e;
}

double sigma(int m, std::span<const double> x) {
  const int n = static_cast<int>(x.size());
  if (m < 0 || m > n) throw DomainError("sigma: order m=" + std::to_string(m) + " outside [0, " + std::to_string(n) + "]");
  if (m == 0) return 1.0;
  // Only coefficients up to degree m are needed.
  std::array<double, kMaxDim + 1> small{};
  std::vector<double> large;
  double* e = small.data();
  if (m > kMaxDim) {
    large.assign(m + 1, 0.0);
    e = large.data();
  }
  e[0] = 1.0;
  for (int i = 0; i < n; ++i) {
    const int top = std::min(i + 1, m);
    for (int j = top; j >= 1; --j) e[j] += x[i] * e[j - 1];
  }
  return e[m];
}

double sigma_excl(int m, std::span<const double> x, int i) {
  const int n = static_cast<int>(x.size());
  if (i < 0 || i >= n) throw DomainError("sigma_excl: index " + std::to_string(i) + " out of range");
  if (m < 0 || m > n - 1) throw DomainError("sigma_excl: order m=" + std::to_string(m) + " outside [0, n-1]");
  std::array<double, kMaxDim> buf{};
  std::vector<double> big;
  double* rest = buf.data();
  if (n - 1 > kMaxDim) {
    big.resize(n - 1);
    rest = big.data();
  }
  for (int j = 0, l = 0; j < n; ++j)
    if (j != i) rest[l++] = x[j];
  return sigma(m, std::span<const double>(rest, n - 1));
}

ConeTest in_gamma(int m, std::span<const double> lam) {
  const int n = static_cast<int>(lam.size());
  if (m < 1 || m > n) throw DomainError("in_gamma: order outside [1, n]");
  const auto e = sigma_all(lam);
  ConeTest out;
  out.margin = e[1];
  for (int j = 1; j <= m; ++j) out.margin = std::min(out.margin, e[j]);
  out.inside = out.margin > 0.0;
  return out;
}

namespace {

constexpr int kMaxSweeps = 60;
constexpr double kOffDiagTol = 1e-13;

double off_diagonal_norm(const Mat& a) {
  double s = 0.0;
  for (int i = 0; i < a.dim(); ++i)
    for (int j = 0; j < a.dim(); ++j)
      if (i != j) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}

}  // namespace

EigenSystem eigen_decompose(const SymMatrix& m) {
  if (!m.all_finite()) throw DomainError("eigenvalues: non-finite matrix entry");
  const int n = m.dim();
  Mat a(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = m(i, j);
  Mat v = Mat::identity(n);

  const double scale = m.frobenius();
  int sweep = 0;
  if (scale > 0.0) {
    for (; sweep < kMaxSweeps; ++sweep) {
      if (off_diagonal_norm(a) <= kOffDiagTol * scale) break;
      for (int p = 0; p < n - 1; ++p) {
        for (int q = p + 1; q < n; ++q) {
          const double apq = a(p, q);
          if (apq == 0.0) continue;
          // Rotation annihilating a(p,q); t is the smaller root of t^2 + 2 theta t - 1 = 0.
          const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
          const double t = std::copysign(1.0, theta) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
          const double c = 1.0 / std::sqrt(t * t + 1.0);
          const double s = t * c;
          const double tau = s / (1.0 + c);
          const double app = a(p, p), aqq = a(q, q);
          a(p, p) = app - t * apq;
          a(q, q) = aqq + t * apq;
          a(p, q) = a(q, p) = 0.0;
          for (int r = 0; r < n; ++r) {
            if (r == p || r == q) continue;
            const double arp = a(r, p), arq = a(r, q);
            a(r, p) = a(p, r) = arp - s * (arq + tau * arp);
            a(r, q) = a(q, r) = arq + s * (arp - tau * arq);
          }
          for (int r = 0; r < n; ++r) {
            const double vrp = v(r, p), vrq = v(r, q);
            v(r, p) = vrp - s * (vrq + tau * vrp);
            v(r, q) = vrq + s * (vrp - tau * vrq);
          }
        }
      }
    }
  }

  // Sort ascending; ties keep index order so results are reproducible.
  std::array<int, kMaxDim> order{};
  for (int i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.begin() + n, [&](int x, int y) { return a(x, x) < a(y, y); });
  Vec vals(n);
  Mat vecs(n);
  for (int j = 0; j < n; ++j) {
    vals[j] = a(order[j], order[j]);
    for (int i = 0; i < n; ++i) vecs(i, j) = v(i, order[j]);
  }
  EigenSystem out;
  out.values = Spectrum(vals.span());
  out.vectors = vecs;
  out.sweeps = sweep;
  return out;
}

Spectrum eigenvalues(const SymMatrix& m) { return eigen_decompose(m).values; }

double hk(std::span<const double> a, int k) {
  const int n = static_cast<int>(a.size());
  if (k < 1 || k > n) throw DomainError("hk: order outside [1, n]");
  double best = 0.0;
  for (int i = 0; i < n; ++i) {
    if (!(a[i] > 0.0)) throw DomainError("hk: entries of a must be positive");
    best = std::max(best, sigma_excl(k - 1, a, i) * a[i]);
  }
  // The maximizer is the largest entry: h_k = sigma_k(a) - sigma_k(a|i0).
  const int i0 = static_cast<int>(std::max_element(a.begin(), a.end()) - a.begin());
  const double alt = sigma(k, a) - sigma_excl(k, a, i0);
  if (k < n && std::fabs(alt - best) > 1e-10 * std::max(1.0, std::fabs(best)))
    throw Error("hk: internal identity check failed");
  return best;
}

double hk_lower(std::span<const double> a, int m) {
  const int n = static_cast<int>(a.size());
  if (m < 1 || m > n) throw DomainError("hk_lower: order outside [1, n]");
  double best = 0.0;
  for (int i = 0; i < n; ++i) {
    if (!(a[i] > 0.0)) throw DomainError("hk_lower: entries of a must be positive");
    const double v = sigma_excl(m - 1, a, i) * a[i];
    best = (i == 0) ? v : std::min(best, v);
  }
  return best;
}

double binomial(int n, int m) {
  if (m < 0 || m > n) return 0.0;
  double c = 1.0;
  for (int i = 1; i <= m; ++i) c = c * (n - m + i) / i;
  return c;
}

bool maclaurin_holds(int m, int k, std::span<const double> lam) {
  const int n = static_cast<int>(lam.size());
  if (m < 1 || m > k || k > n) throw DomainError("maclaurin_holds: need 1 <= m <= k <= n");
  if (!in_gamma(k, lam).inside) throw PreconditionError("maclaurin_holds: spectrum is not in Gamma_k");
  const double lhs = sigma(m, lam) / binomial(n, m);
  const double rhs = std::pow(sigma(k, lam) / binomial(n, k), static_cast<double>(m) / k);
  return lhs - rhs >= -1e-12 * std::max(1.0, std::fabs(rhs));
}

QuadraticTarget::QuadraticTarget(std::vector<double> a, int k) : a_(std::move(a)), k_(k) {
  const int n = static_cast<int>(a_.size());
  if (n < 2 || n > kMaxDim) throw DomainError("QuadraticTarget: dimension outside [2, 8]");
  if (k < 1 || k > n) throw DomainError("QuadraticTarget: k outside [1, n]");
  for (double ai : a_)
    if (!(ai > 0.0) || !std::isfinite(ai)) throw DomainError("QuadraticTarget: a_i must be positive and finite");
  const double sk = sigma(k, a_);
  if (std::fabs(sk - 1.0) > 1e-12) throw DomainError("QuadraticTarget: sigma_k(a) = " + std::to_string(sk) + " != 1");
  h_k_ = hk(a_, k);
}

QuadraticTarget QuadraticTarget::isotropic(int n, int k) {
  const double ai = std::pow(binomial(n, k), -1.0 / k);
  return QuadraticTarget(std::vector<double>(n, ai), k);
}

double QuadraticTarget::s(const Vec& x) const noexcept {
  double acc = 0.0;
  for (int i = 0; i < x.size(); ++i) acc += a_[i] * x[i] * x[i];
  return 0.5 * acc;
}

Vec QuadraticTarget::apply(const Vec& x) const {
  Vec y(x.size());
  for (int i = 0; i < x.size(); ++i) y[i] = a_[i] * x[i];
  return y;
}

SymMatrix QuadraticTarget::matrix() const { return SymMatrix::diagonal(a_); }

}  // namespace hring
