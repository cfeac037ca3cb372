#include "hring/sphere.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace hring {

SymMatrix tangent_projector(const Vec& p) {
  SymMatrix pr = SymMatrix::identity(p.size());
  pr -= SymMatrix::outer(p);
  return pr;
}

SphereJet restrict_to_sphere(const Vec& p, double f, const Vec& df, const SymMatrix& d2f) {
  const SymMatrix pr = tangent_projector(p);
  Mat pm(p.size());
  for (int i = 0; i < p.size(); ++i)
    for (int j = 0; j < p.size(); ++j) pm(i, j) = pr(i, j);
  SphereJet out;
  out.value = f;
  out.grad = pr * df;
  out.hess = congruence(pm, d2f);
  out.hess -= dot(df, p) * pr;
  return out;
}

SphereJet compose(const SphereJet& f, double g, double dg, double d2g) {
  SphereJet out;
  out.value = g;
  out.grad = dg * f.grad;
  out.hess = dg * f.hess;
  out.hess += SymMatrix::outer(f.grad, d2g);
  return out;
}

SphereJet operator+(const SphereJet& a, const SphereJet& b) {
  return {a.value + b.value, a.grad + b.grad, a.hess + b.hess};
}

SphereJet operator*(double c, const SphereJet& a) { return {c * a.value, c * a.grad, c * a.hess}; }

SphereJet product(const SphereJet& a, const SphereJet& b) {
  SphereJet out;
  out.value = a.value * b.value;
  out.grad = a.value * b.grad + b.value * a.grad;
  out.hess = a.value * b.hess + b.value * a.hess;
  out.hess += SymMatrix::sym_outer(a.grad, b.grad);
  return out;
}

Mat tangent_frame(const Vec& p) {
  const int n = p.size();
  Vec v = Vec::unit(n, n - 1) - p;
  const double vv = dot(v, v);
  Mat h = Mat::identity(n);
  if (vv > 0.0) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) h(i, j) -= 2.0 * v[i] * v[j] / vv;
  }
  // Householder reflection sends e_n to p; the remaining columns span p^perp.
  for (int i = 0; i < n; ++i) h(i, n - 1) = p[i];
  return h;
}

SphereJet ConstantFunction::jet(const Vec& p) const { return {c_, Vec(p.size()), SymMatrix(p.size())}; }

EllipsoidRadius::EllipsoidRadius(std::vector<double> semi_axes) : c_(std::move(semi_axes)) {
  for (double c : c_)
    if (!(c > 0.0)) throw DomainError("ellipsoid: semi-axes must be positive");
}

double EllipsoidRadius::value(const Vec& p) const {
  double q = 0.0;
  for (int i = 0; i < p.size(); ++i) q += p[i] * p[i] / (c_[i] * c_[i]);
  return 1.0 / std::sqrt(q);
}

SphereJet EllipsoidRadius::jet(const Vec& p) const {
  const int n = p.size();
  double q = 0.0;
  Vec dq(n);
  for (int i = 0; i < n; ++i) {
    q += p[i] * p[i] / (c_[i] * c_[i]);
    dq[i] = 2.0 * p[i] / (c_[i] * c_[i]);
  }
  const double f = std::pow(q, -0.5);
  const Vec df = (-0.5 * std::pow(q, -1.5)) * dq;
  SymMatrix d2f = SymMatrix::outer(dq, 0.75 * std::pow(q, -2.5));
  for (int i = 0; i < n; ++i) d2f.add(i, i, -0.5 * std::pow(q, -1.5) * 2.0 / (c_[i] * c_[i]));
  return restrict_to_sphere(p, f, df, d2f);
}

ModalFunction::ModalFunction(int n, double base, std::vector<SphereMode> modes)
    : n_(n), base_(base), modes_(std::move(modes)) {
  if (n < 3) throw DomainError("modal sphere function needs n >= 3");
  for (const auto& m : modes_)
    if (m.l < 0 || m.m < 0) throw DomainError("modal sphere function: negative mode index");
}

namespace {

// T_l, T_l', T_l'' at x by the three-term recurrence.
void chebyshev(int l, double x, double& t, double& dt, double& d2t) {
  double t0 = 1.0, d0 = 0.0, e0 = 0.0;
  if (l == 0) {
    t = t0, dt = d0, d2t = e0;
    return;
  }
  double t1 = x, d1 = 1.0, e1 = 0.0;
  for (int j = 1; j < l; ++j) {
    const double t2 = 2.0 * x * t1 - t0;
    const double d2 = 2.0 * t1 + 2.0 * x * d1 - d0;
    const double e2 = 4.0 * d1 + 2.0 * x * e1 - e0;
    t0 = t1, d0 = d1, e0 = e1;
    t1 = t2, d1 = d2, e1 = e2;
  }
  t = t1, dt = d1, d2t = e1;
}

}  // namespace

SphereJet ModalFunction::jet(const Vec& p) const {
  const int n = n_;
  double f = 1.0;
  Vec df(n);
  SymMatrix d2f(n);
  const std::complex<double> z(p[0], p[1]);
  for (const auto& mode : modes_) {
    double t, dt, d2t;
    chebyshev(mode.l, p[n - 1], t, dt, d2t);
    const int m = mode.m;
    // w = Re z^m and its partials in (y1, y2).
    const double w = std::real(std::pow(z, m));
    const std::complex<double> z1 = m >= 1 ? static_cast<double>(m) * std::pow(z, m - 1) : 0.0;
    const std::complex<double> z2 = m >= 2 ? static_cast<double>(m * (m - 1)) * std::pow(z, m - 2) : 0.0;
    const double w1 = std::real(z1), w2 = -std::imag(z1);
    const double w11 = std::real(z2), w12 = -std::imag(z2), w22 = -std::real(z2);
    const double c = mode.c;
    f += c * t * w;
    df[0] += c * t * w1;
    df[1] += c * t * w2;
    df[n - 1] += c * dt * w;
    d2f.add(0, 0, c * t * w11);
    d2f.add(0, 1, c * t * w12);
    d2f.add(1, 1, c * t * w22);
    d2f.add(0, n - 1, c * dt * w1);
    d2f.add(1, n - 1, c * dt * w2);
    d2f.add(n - 1, n - 1, c * d2t * w);
  }
  return restrict_to_sphere(p, base_ * f, base_ * df, base_ * d2f);
}

SphereJet AffineOf::jet(const Vec& p) const {
  SphereJet j = scale_ * f_->jet(p);
  j.value += offset_;
  return j;
}

PeriodicSpline::PeriodicSpline(std::vector<double> y, double x0, double period) : y_(std::move(y)), x0_(x0) {
  const int n = static_cast<int>(y_.size());
  if (n < 3) throw DomainError("periodic spline needs at least 3 samples");
  h_ = period / n;
  // Cyclic tridiagonal system (1, 4, 1) m = 6/h^2 (second difference),
  // solved by the Sherman-Morrison correction of a plain Thomas sweep.
  std::vector<double> rhs(n);
  for (int j = 0; j < n; ++j) {
    const double ym = y_[(j + n - 1) % n], yp = y_[(j + 1) % n];
    rhs[j] = 6.0 * (ym - 2.0 * y_[j] + yp) / (h_ * h_);
  }
  const double a = 1.0, b = 4.0, c = 1.0, alpha = c, beta = a;  // corner entries
  const double gamma = -b;
  std::vector<double> diag(n, b);
  diag[0] = b - gamma;
  diag[n - 1] = b - alpha * beta / gamma;
  auto thomas = [&](std::vector<double> r) {
    std::vector<double> cp(n), x(n);
    double den = diag[0];
    cp[0] = c / den;
    r[0] /= den;
    for (int i = 1; i < n; ++i) {
      den = diag[i] - a * cp[i - 1];
      cp[i] = c / den;
      r[i] = (r[i] - a * r[i - 1]) / den;
    }
    x[n - 1] = r[n - 1];
    for (int i = n - 2; i >= 0; --i) x[i] = r[i] - cp[i] * x[i + 1];
    return x;
  };
  const std::vector<double> x = thomas(rhs);
  std::vector<double> u(n, 0.0);
  u[0] = gamma;
  u[n - 1] = alpha;
  const std::vector<double> zz = thomas(u);
  const double fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + zz[0] + beta * zz[n - 1] / gamma);
  m_.resize(n);
  for (int i = 0; i < n; ++i) m_[i] = x[i] - fact * zz[i];
}

void PeriodicSpline::eval(double x, double& f, double& df, double& d2f) const {
  const int n = static_cast<int>(y_.size());
  const double u = (x - x0_) / h_;
  const double fl = std::floor(u);
  const double t = u - fl;
  int j = static_cast<int>(std::fmod(fl, static_cast<double>(n)));
  if (j < 0) j += n;
  const int j1 = (j + 1) % n;
  const double a = 1.0 - t, b = t;
  f = a * y_[j] + b * y_[j1] + ((a * a * a - a) * m_[j] + (b * b * b - b) * m_[j1]) * h_ * h_ / 6.0;
  df = (y_[j1] - y_[j]) / h_ - (3.0 * a * a - 1.0) / 6.0 * h_ * m_[j] + (3.0 * b * b - 1.0) / 6.0 * h_ * m_[j1];
  d2f = a * m_[j] + b * m_[j1];
}

LatLonGridFunction::LatLonGridFunction(int n_lat, int n_lon, std::vector<double> values)
    : n_lat_(n_lat), n_lon_(n_lon), values_(std::move(values)) {
  if (n_lat < 2 || n_lon < 4 || n_lon % 2 != 0) throw DomainError("rho-grid: need n_lat >= 2 and even n_lon >= 4");
  if (values_.size() != static_cast<std::size_t>(n_lat) * n_lon)
    throw DomainError("rho-grid: expected " + std::to_string(n_lat * n_lon) + " values, got " +
                      std::to_string(values_.size()));
  rows_.reserve(n_lat);
  for (int j = 0; j < n_lat; ++j) {
    std::vector<double> row(values_.begin() + j * n_lon, values_.begin() + (j + 1) * n_lon);
    rows_.emplace_back(std::move(row), 0.0, 2.0 * std::numbers::pi);
  }
}

std::shared_ptr<LatLonGridFunction> LatLonGridFunction::sample(const SphereFunction& f, int n_lat, int n_lon) {
  std::vector<double> v(static_cast<std::size_t>(n_lat) * n_lon);
  for (int j = 0; j < n_lat; ++j)
    for (int l = 0; l < n_lon; ++l) {
      const double th = (j + 0.5) * std::numbers::pi / n_lat, ph = 2.0 * std::numbers::pi * l / n_lon;
      v[j * n_lon + l] = f.value(PolarChart::point(th, ph));
    }
  return std::make_shared<LatLonGridFunction>(n_lat, n_lon, std::move(v));
}

SphereJet LatLonGridFunction::jet(const Vec& p) const {
  if (p.size() != 3) throw DomainError("rho-grid surfaces are defined for n = 3 only");
  double th, ph;
  PolarChart::angles(p, th, ph);
  const int m = 2 * n_lat_;
  std::vector<double> v0(m), v1(m), v2(m);
  for (int j = 0; j < n_lat_; ++j) {
    rows_[j].eval(ph, v0[j], v1[j], v2[j]);
    const int k = n_lat_ + (n_lat_ - 1 - j);
    rows_[j].eval(ph + std::numbers::pi, v0[k], v1[k], v2[k]);
  }
  const double x0 = 0.5 * std::numbers::pi / n_lat_, period = 2.0 * std::numbers::pi;
  const PeriodicSpline s0(std::move(v0), x0, period), s1(std::move(v1), x0, period), s2(std::move(v2), x0, period);
  double f, ft, ftt, fp, ftp, unused, fpp;
  s0.eval(th, f, ft, ftt);
  s1.eval(th, fp, ftp, unused);
  s2.eval(th, fpp, unused, unused);
  return PolarChart::jet_from_partials(th, ph, f, ft, fp, ftt, ftp, fpp);
}

Vec PolarChart::point(double theta, double phi) {
  return {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)};
}

void PolarChart::angles(const Vec& p, double& theta, double& phi) {
  theta = std::acos(std::fmax(-1.0, std::fmin(1.0, p[2] / norm(p))));
  phi = std::atan2(p[1], p[0]);
  if (phi < 0.0) phi += 2.0 * std::numbers::pi;
}

Vec PolarChart::e_theta(double theta, double phi) {
  return {std::cos(theta) * std::cos(phi), std::cos(theta) * std::sin(phi), -std::sin(theta)};
}

Vec PolarChart::e_phi(double phi) { return {-std::sin(phi), std::cos(phi), 0.0}; }

SphereJet PolarChart::jet_from_partials(double theta, double phi, double f, double ft, double fp, double ftt,
                                        double ftp, double fpp) {
  const double st = std::sin(theta), ct = std::cos(theta);
  if (std::fabs(st) < 1e-300) throw DomainError("polar chart: point at a pole");
  const Vec et = e_theta(theta, phi), ep = e_phi(phi);
  SphereJet out;
  out.value = f;
  out.grad = ft * et + (fp / st) * ep;
  const double htt = ftt;
  const double htp = (ftp - ct / st * fp) / st;
  const double hpp = (fpp + st * ct * ft) / (st * st);
  out.hess = SymMatrix::outer(et, htt);
  out.hess += SymMatrix::sym_outer(et, ep, htp);
  out.hess += SymMatrix::outer(ep, hpp);
  return out;
}

SphereJet finite_difference_jet(const SphereFunction& f, const Vec& p, double h) {
  if (p.size() != 3) throw DomainError("finite_difference_jet: n = 3 only");
  double th, ph;
  PolarChart::angles(p, th, ph);
  auto F = [&](double a, double b) { return f.value(PolarChart::point(a, b)); };
  const double f0 = F(th, ph);
  const double ft = (F(th + h, ph) - F(th - h, ph)) / (2 * h);
  const double fp = (F(th, ph + h) - F(th, ph - h)) / (2 * h);
  const double ftt = (F(th + h, ph) - 2 * f0 + F(th - h, ph)) / (h * h);
  const double fpp = (F(th, ph + h) - 2 * f0 + F(th, ph - h)) / (h * h);
  const double ftp = (F(th + h, ph + h) - F(th + h, ph - h) - F(th - h, ph + h) + F(th - h, ph - h)) / (4 * h * h);
  return PolarChart::jet_from_partials(th, ph, f0, ft, fp, ftt, ftp, fpp);
}

SphereGrid::SphereGrid(int n, std::vector<int> counts) : n_(n), counts_(std::move(counts)) {
  if (n < 2 || n > kMaxDim) throw DomainError("sphere grid: dimension outside [2, 8]");
  if (static_cast<int>(counts_.size()) != n - 1) throw DomainError("sphere grid: expected n-1 counts");
  size_ = 1;
  for (int i = 0; i < n - 1; ++i) {
    if (counts_[i] < 1) throw DomainError("sphere grid: counts must be positive");
    size_ *= counts_[i];
  }
  if (counts_.back() % 2 != 0 || counts_.back() < 2) throw DomainError("sphere grid: longitude count must be even");
}

SphereGrid SphereGrid::uniform(int n, int colat, int lon) {
  std::vector<int> c(n - 1, colat);
  c.back() = lon;
  return SphereGrid(n, std::move(c));
}

std::vector<int> SphereGrid::multi_index(std::size_t flat) const {
  std::vector<int> idx(n_ - 1);
  for (int i = n_ - 2; i >= 0; --i) {
    idx[i] = static_cast<int>(flat % counts_[i]);
    flat /= counts_[i];
  }
  return idx;
}

std::size_t SphereGrid::flat_index(const std::vector<int>& idx) const {
  std::size_t flat = 0;
  for (int i = 0; i < n_ - 1; ++i) flat = flat * counts_[i] + idx[i];
  return flat;
}

std::vector<double> SphereGrid::angles(const std::vector<int>& idx) const {
  std::vector<double> a(n_ - 1);
  for (int i = 0; i < n_ - 2; ++i) a[i] = (idx[i] + 0.5) * std::numbers::pi / counts_[i];
  a[n_ - 2] = 2.0 * std::numbers::pi * idx[n_ - 2] / counts_[n_ - 2];
  return a;
}

Vec SphereGrid::direction_from_angles(int n, const std::vector<double>& ang) {
  Vec x(n);
  double s = 1.0;
  for (int i = 1; i <= n - 2; ++i) {
    x[n - i] = s * std::cos(ang[i - 1]);
    s *= std::sin(ang[i - 1]);
  }
  x[0] = s * std::cos(ang[n - 2]);
  x[1] = s * std::sin(ang[n - 2]);
  return x;
}

Vec SphereGrid::direction(std::size_t flat) const { return direction_from_angles(n_, angles(multi_index(flat))); }

std::size_t SphereGrid::neighbor(std::size_t flat, const std::vector<int>& offset) const {
  std::vector<int> idx = multi_index(flat);
  for (int i = 0; i < n_ - 1; ++i) idx[i] += offset[i];
  const int lon = counts_.back();
  auto flip_after = [&](int i) {
    for (int j = i + 1; j < n_ - 2; ++j) idx[j] = counts_[j] - 1 - idx[j];
    idx[n_ - 2] += lon / 2;
  };
  for (int i = 0; i < n_ - 2; ++i) {
    const int c = counts_[i];
    while (idx[i] < 0 || idx[i] >= c) {
      if (idx[i] < 0)
        idx[i] = -idx[i] - 1;
      else
        idx[i] = 2 * c - 1 - idx[i];
      flip_after(i);
    }
  }
  idx[n_ - 2] = ((idx[n_ - 2] % lon) + lon) % lon;
  return flat_index(idx);
}

}  // namespace hring
