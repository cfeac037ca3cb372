#include "hring/subsolution.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "hring/parallel.hpp"
#include "hring/quadrature.hpp"
#include "hring/text.hpp"

namespace hring {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTailTolerance = 1e-13;

void check_omega_args(double s, double alpha, int k) {
  if (!(s > 0.0)) throw DomainError("omega: s must be positive");
  if (!(alpha >= 0.0)) throw DomainError("omega: alpha must be non-negative");
  if (k < 1) throw DomainError("omega: k must be positive");
}

// (1 + alpha t^{-beta})^{1/k} - 1 without cancellation.
double excess(double t, double alpha, double beta, int k) {
  return std::expm1(std::log1p(alpha * std::pow(t, -beta)) / k);
}

// int_a^b excess(t) dt in the variable u = log t.
double excess_integral(double a, double b, double alpha, double beta, int k) {
  if (a == b || alpha == 0.0) return 0.0;
  const auto f = [&](double u) {
    const double t = std::exp(u);
    return excess(t, alpha, beta, k) * t;
  };
  return integrate(f, std::log(a), std::log(b), 1e-13, 1e-300, 20000).value;
}

// Generalized binomial coefficient C(1/k, j).
double binom_frac(int k, int j) {
  double c = 1.0;
  const double e = 1.0 / k;
  for (int i = 0; i < j; ++i) c *= (e - i) / (i + 1);
  return c;
}

// Start of the binomial tail: alpha T^{-beta} <= 1/2 and the first neglected
// term of the alternating series integrates to at most kTailTolerance.
double tail_start(double alpha, double beta, int k) {
  const double c4 = std::fabs(binom_frac(k, 4));
  double T = std::max(1.0, std::pow(2.0 * alpha, 1.0 / beta));
  if (c4 > 0.0) {
    const double p = 4.0 * beta - 1.0;
    T = std::max(T, std::pow(c4 * std::pow(alpha, 4) / (p * kTailTolerance), 1.0 / p));
  }
  return T;
}

// int_T^inf excess by the three-term binomial expansion.
double binomial_tail(double T, double alpha, double beta, int k) {
  double sum = 0.0;
  for (int j = 1; j <= 3; ++j)
    sum += binom_frac(k, j) * std::pow(alpha, j) * std::pow(T, 1.0 - j * beta) / (j * beta - 1.0);
  return sum;
}

double omega_scale(double s, double alpha, double beta, int k) {
  return alpha * beta / (k * s * (std::pow(s, beta) + alpha));
}

std::vector<double> to_std(const Vec& v) { return {v.begin(), v.end()}; }

// sigma_k - 1 and min_{m<k} sigma_m of a Hessian; non-finite entries count as -inf.
std::pair<double, double> cone_margins(const SymMatrix& h, int k) {
  if (!h.all_finite()) return {-kInf, -kInf};
  const Spectrum lam = eigenvalues(h);
  const auto s = sigma_all(lam.values());
  double mk = s[k] - 1.0, mm = kInf;
  for (int m = 1; m < k; ++m) mm = std::min(mm, s[m]);
  if (!std::isfinite(mk)) mk = -kInf;
  if (std::isnan(mm)) mm = -kInf;
  return {mk, mm};
}

std::vector<double> log_space(double a, double b, int count) {
  std::vector<double> out(count);
  for (int j = 0; j < count; ++j) {
    const double t = count == 1 ? 0.0 : static_cast<double>(j) / (count - 1);
    out[j] = std::exp((1.0 - t) * std::log(a) + t * std::log(b));
  }
  if (count > 1) out.front() = a, out.back() = b;
  return out;
}

// phi(theta) = 1/2 X^T A X + offset at X = rho(theta) theta.
class SurfaceQuadratic final : public SphereFunction {
 public:
  SurfaceQuadratic(SphereFunctionPtr rho, std::vector<double> a, double offset)
      : rho_(std::move(rho)), a_(std::move(a)), offset_(offset) {}
  int dim() const noexcept override { return rho_->dim(); }
  SphereJet jet(const Vec& p) const override {
    const int n = dim();
    Vec ap(n);
    SymMatrix am(n);
    for (int i = 0; i < n; ++i) ap[i] = a_[i] * p[i], am.set(i, i, a_[i]);
    const SphereJet q = restrict_to_sphere(p, 0.5 * dot(p, ap), ap, am);
    const SphereJet r = rho_->jet(p);
    const SphereJet r2 = compose(r, r.value * r.value, 2.0 * r.value, 2.0);
    SphereJet out = product(r2, q);
    out.value += offset_;
    return out;
  }

 private:
  SphereFunctionPtr rho_;
  std::vector<double> a_;
  double offset_;
};

std::string describe_modes(const std::vector<SphereMode>& modes) {
  std::ostringstream os;
  for (const auto& m : modes) os << "\nmode " << m.l << ' ' << m.m << ' ' << format_double(m.c);
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------- omega, mu

double omega(double s, double alpha, double beta, int k) {
  check_omega_args(s, alpha, k);
  return (s - 1.0) + excess_integral(1.0, s, alpha, beta, k);
}

double omega_prime(double s, double alpha, double beta, int k) {
  check_omega_args(s, alpha, k);
  return std::pow(1.0 + alpha * std::pow(s, -beta), 1.0 / k);
}

double omega_double_prime(double s, double alpha, double beta, int k) {
  check_omega_args(s, alpha, k);
  const double wp = omega_prime(s, alpha, beta, k);
  return -alpha * beta * wp / (k * (std::pow(s, beta + 1.0) + alpha * s));
}

double omega_tail(double s, double alpha, double beta, int k) {
  check_omega_args(s, alpha, k);
  if (!(beta > 1.0)) throw DomainError("omega_tail: beta must exceed 1");
  if (alpha == 0.0) return 0.0;
  const double T = std::max(s, tail_start(alpha, beta, k));
  return excess_integral(s, T, alpha, beta, k) + binomial_tail(T, alpha, beta, k);
}

double omega_remainder(double s, double alpha, double beta, int k) { return -omega_tail(s, alpha, beta, k); }

std::vector<double> omega_many(const std::vector<double>& s, double alpha, double beta, int k) {
  std::vector<std::size_t> order(s.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return s[i] < s[j]; });
  std::vector<double> out(s.size());
  double prev_s = 1.0, prev = 0.0;
  for (std::size_t idx : order) {
    const double si = s[idx];
    check_omega_args(si, alpha, k);
    prev += (si - prev_s) + excess_integral(prev_s, si, alpha, beta, k);
    prev_s = si;
    out[idx] = prev;
  }
  return out;
}

double mu_of(double alpha, double beta, int k) {
  if (!(beta > 1.0)) throw DomainError("mu_of: beta must exceed 1 (divergent integral)");
  if (!(alpha >= 0.0)) throw DomainError("mu_of: alpha must be non-negative");
  if (k < 1) throw DomainError("mu_of: k must be positive");
  if (alpha == 0.0) return -1.0;
  const double T = tail_start(alpha, beta, k);
  return excess_integral(1.0, T, alpha, beta, k) + binomial_tail(T, alpha, beta, k) - 1.0;
}

SymMatrix hessian_omega(const Vec& x, const QuadraticTarget& target, double alpha, double beta) {
  if (!(norm(x) > 0.0)) throw DomainError("hessian_omega: x = 0");
  const int k = target.k();
  const double s = target.s(x);
  const double wp = omega_prime(s, alpha, beta, k);
  const Vec ax = target.apply(x);
  SymMatrix h = SymMatrix::diagonal(target.a());
  h -= SymMatrix::outer(ax, omega_scale(s, alpha, beta, k));
  return wp * h;
}

double sigma_m_omega(const Vec& x, const QuadraticTarget& target, double alpha, double beta, int m) {
  if (!(norm(x) > 0.0)) throw DomainError("sigma_m_omega: x = 0");
  const int n = target.n(), k = target.k();
  if (m < 0 || m > n) throw DomainError("sigma_m_omega: m outside [0, n]");
  const double s = target.s(x);
  const auto a = target.a();
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double ai = a[i] * x[i];
    sum += ai * ai * (m >= 1 ? sigma_excl(m - 1, a, i) : 0.0);
  }
  return std::pow(omega_prime(s, alpha, beta, k), m) * (sigma(m, a) - omega_scale(s, alpha, beta, k) * sum);
}

OmegaBound sigma_k_omega_bound(const Vec& x, const QuadraticTarget& target, double alpha, double beta) {
  const int k = target.k();
  const double s = target.s(x);
  const double eta = 0.5 * k / target.h_k() - beta;
  return {sigma_m_omega(x, target, alpha, beta, k),
          1.0 + 2.0 * alpha * target.h_k() * eta / (k * std::pow(s, beta))};
}

Sub7Sides sub7_sides(const Vec& x, const QuadraticTarget& target, double alpha, double beta, int m) {
  const int n = target.n(), k = target.k();
  if (m < 1 || m > k) throw DomainError("sub7_sides: m outside [1, k]");
  const double s = target.s(x);
  const auto a = target.a();
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += sigma_excl(m - 1, a, i) * (a[i] * x[i]) * (a[i] * x[i]);
  const double sb = std::pow(s, beta);
  const double eta = 0.5 * k / target.h_k() - beta;
  Sub7Sides out;
  out.lhs = sigma(m, a) - omega_scale(s, alpha, beta, k) * sum;
  out.rhs = sigma(m, a) * sb / (sb + alpha) + 2.0 * alpha * eta * hk_lower(a, m) / (k * (sb + alpha));
  return out;
}

// ------------------------------------------------------------ boundary data

BoundaryData BoundaryData::constant(int n, double c) {
  return {std::make_shared<ConstantFunction>(n, c), "constant " + format_double(c)};
}

BoundaryData BoundaryData::modal(int n, double offset, std::vector<SphereMode> modes) {
  const std::string desc = "modal " + format_double(offset) + describe_modes(modes);
  auto base = std::make_shared<ModalFunction>(n, 1.0, std::move(modes));
  return {std::make_shared<AffineOf>(base, 1.0, offset - 1.0), desc};
}

BoundaryData BoundaryData::surface_quadratic(const StarSurface& surface, const QuadraticTarget& target,
                                             double offset) {
  if (surface.n() != target.n()) throw ConfigError("boundary data: dimension mismatch");
  return {std::make_shared<SurfaceQuadratic>(surface.rho_ptr(), std::vector<double>(target.a().begin(), target.a().end()),
                                             offset),
          "surface-quadratic " + format_double(offset)};
}

BoundaryData BoundaryData::scaled(double c) const {
  return {std::make_shared<AffineOf>(phi, c, 0.0), description + "\nscale " + format_double(c)};
}

// ------------------------------------------------------------------ bundle

SweepConfig SweepConfig::defaults(int n) {
  SweepConfig c;
  if (n == 3)
    c.surface_counts = {64, 128};
  else
    c.surface_counts = SphereGrid::uniform(n, 12, 24).counts();
  return c;
}

SphereGrid SweepConfig::grid(int n) const {
  if (surface_counts.empty()) return defaults(n).grid(n);
  return SphereGrid(n, surface_counts);
}

namespace {

std::vector<double> semi_axes_of(const QuadraticTarget& t) {
  std::vector<double> c;
  for (double a : t.a()) c.push_back(std::sqrt(2.0 / a));
  return c;
}

}  // namespace

SubsolutionBundle::SubsolutionBundle(QuadraticTarget target, StarSurface surface, BoundaryData data,
                                     BundleParams params)
    : target_(std::move(target)),
      surface_(std::move(surface)),
      data_(std::move(data)),
      p_(params),
      level1_(semi_axes_of(target_)) {
  check_params();
  p_.mu = mu_of(p_.alpha, p_.beta, target_.k());
}

void SubsolutionBundle::check_params() const {
  if (surface_.n() != target_.n()) throw ConfigError("bundle: surface dimension differs from n");
  if (!data_.phi || data_.phi->dim() != target_.n()) throw ConfigError("bundle: boundary data dimension differs from n");
  if (!target_.beta_admissible(p_.beta)) throw DomainError("bundle: beta outside (k/2, k/(2 h_k))");
  if (!(p_.beta > 1.0)) throw DomainError("bundle: beta must exceed 1");
  if (!(p_.Lambda + 1.0 >= p_.beta - 1e-15)) throw DomainError("bundle: Lambda + 1 < beta");
  if (!(p_.alpha >= 0.0)) throw DomainError("bundle: alpha must be non-negative");
  if (p_.N < 0) throw DomainError("bundle: N must be non-negative");
}

double SubsolutionBundle::default_eta_gap(const QuadraticTarget& target) {
  const auto [lo, hi] = target.beta_range();
  return 0.5 * (hi - lo);
}

BundleParams SubsolutionBundle::initial_params(const QuadraticTarget& target, std::optional<double> eta_gap,
                                               std::optional<double> Lambda) {
  BundleParams p;
  p.eta_gap = eta_gap.value_or(default_eta_gap(target));
  if (!(p.eta_gap > 0.0)) throw ConfigError("eta_gap must be positive");
  p.beta = target.beta_range().second - p.eta_gap;
  p.Lambda = Lambda.value_or(p.beta - 1.0);
  return p;
}

SubsolutionBundle SubsolutionBundle::with_N(int N) const {
  BundleParams p = p_;
  p.N = N;
  return {target_, surface_, data_, p};
}

SubsolutionBundle SubsolutionBundle::with_alpha(double alpha) const {
  BundleParams p = p_;
  p.alpha = alpha;
  return {target_, surface_, data_, p};
}

double SubsolutionBundle::r1(const Vec& p) const { return level1_.value(p); }

double SubsolutionBundle::radius_of_level(const Vec& p, double level) const {
  if (!(level > 0.0)) throw DomainError("radius_of_level: level must be positive");
  return std::sqrt(level) * r1(p);
}

SphereJet SubsolutionBundle::phi_tilde(const Vec& p) const {
  const SphereJet rj = surface_.rho_jet(p);
  const double rho = rj.value;
  const SphereJet inv = compose(rj, 1.0 / rho, -1.0 / (rho * rho), 2.0 / (rho * rho * rho));
  const SphereJet q = product(level1_.jet(p), inv);
  const double N = p_.N, qv = q.value;
  SphereJet out = compose(q, std::pow(qv, N), N * std::pow(qv, N - 1.0),
                          N == 1.0 ? 0.0 : N * (N - 1.0) * std::pow(qv, N - 2.0));
  out = out + data_.phi->jet(p);
  out.value -= 1.0;
  return out;
}

namespace {

struct RayData {
  double r;
  Vec p;
};

RayData ray(const Vec& x) {
  const double r = norm(x);
  if (!(r > 0.0)) throw DomainError("subsolution: x = 0");
  return {r, (1.0 / r) * x};
}

// Direction-only data of the inner subsolution.
struct InnerDirection {
  Vec p;
  Mat frame;
  SurfaceJet j;
  SphereJet phi;
};

InnerDirection inner_direction(const SubsolutionBundle& b, const Vec& p) {
  InnerDirection d;
  d.p = p;
  d.frame = tangent_frame(p);
  d.j = jet_at(b.surface(), p, d.frame);
  d.phi = b.data().phi->jet(p);
  return d;
}

// Hessian of b^N - 1 + phi in the frame {tau_a, tau_r} at radius r.
SymMatrix inner_frame_hessian(const InnerDirection& d, double r, int N) {
  const int dim = d.frame.dim(), t = dim - 1;
  const double rho = d.j.rho;
  const double bb = r / rho;
  const double M = N * std::pow(bb, N - 1);
  const double B = N == 1 ? 0.0 : N * (N - 1.0) * std::pow(bb, N - 2);
  SymMatrix h = hessian_spherical(separable_input(d.phi, d.frame, r, 1.0, 0.0, 0.0));
  const double c = M * d.j.w / (r * rho * rho);
  Vec tb(dim);
  for (int a = 0; a < t; ++a) tb[a] = -d.j.grad_rho[a] / (rho * rho);
  tb[t] = 1.0 / rho;
  for (int a = 0; a < t; ++a)
    for (int e = a; e < t; ++e) h.add(a, e, c * d.j.h(a, e));
  h += SymMatrix::outer(tb, B);
  return h;
}

// Direction-only data of the outer subsolution: Theta = q^{-Lambda} phi~.
struct OuterDirection {
  Vec p;
  Mat frame;
  double q;
  SphereJet theta;
};

OuterDirection outer_direction(const SubsolutionBundle& b, const Vec& p) {
  const double L = b.params().Lambda;
  OuterDirection d;
  d.p = p;
  d.frame = tangent_frame(p);
  const Vec ap = b.target().apply(p);
  const SymMatrix am = b.target().matrix();
  const SphereJet qj = restrict_to_sphere(p, 0.5 * dot(p, ap), ap, am);
  d.q = qj.value;
  const SphereJet ql = compose(qj, std::pow(d.q, -L), -L * std::pow(d.q, -L - 1.0), L * (L + 1.0) * std::pow(d.q, -L - 2.0));
  d.theta = product(ql, b.phi_tilde(p));
  return d;
}

// Hessian of s^{-Lambda} phi~ = r^{-2 Lambda} Theta in the frame at radius r.
SymMatrix psi_frame_hessian(const OuterDirection& d, double r, double Lambda) {
  const double e = -2.0 * Lambda;
  const double R = std::pow(r, e), dR = e * std::pow(r, e - 1.0), d2R = e * (e - 1.0) * std::pow(r, e - 2.0);
  return hessian_spherical(separable_input(d.theta, d.frame, r, R, dR, d2R));
}

constexpr double kRegionTol = 1e-10;

}  // namespace

FieldJet SubsolutionBundle::inner(const Vec& x) const {
  const auto [r, p] = ray(x);
  const InnerDirection d = inner_direction(*this, p);
  const double bb = r / d.j.rho;
  if (bb < 1.0 - kRegionTol || target_.s(x) > 1.0 + kRegionTol)
    throw DomainError("inner_subsolution: x outside closure(E_1) \\ D");
  const int N = p_.N;
  FieldJet out;
  out.value = std::pow(bb, N) - 1.0 + d.phi.value;
  const SphereJet rj = surface_.rho_jet(p);
  const Vec db = (1.0 / d.j.rho) * p - (1.0 / (d.j.rho * d.j.rho)) * rj.grad;
  out.grad = (N * std::pow(bb, N - 1)) * db + (1.0 / r) * d.phi.grad;
  out.hess = frame_to_cartesian(d.frame, inner_frame_hessian(d, r, N));
  return out;
}

SymMatrix SubsolutionBundle::inner_hessian(const Vec& x) const {
  const auto [r, p] = ray(x);
  const InnerDirection d = inner_direction(*this, p);
  return frame_to_cartesian(d.frame, inner_frame_hessian(d, r, p_.N));
}

FieldJet SubsolutionBundle::outer(const Vec& x) const {
  const auto [r, p] = ray(x);
  const double s = target_.s(x);
  if (s < 1.0 - kRegionTol) throw DomainError("outer_subsolution: x inside E_1");
  const int k = target_.k();
  const OuterDirection d = outer_direction(*this, p);
  const double L = p_.Lambda;
  const double R = std::pow(r, -2.0 * L), dR = -2.0 * L * std::pow(r, -2.0 * L - 1.0);
  FieldJet out;
  out.value = omega(s, p_.alpha, p_.beta, k) + R * d.theta.value;
  out.grad = omega_prime(s, p_.alpha, p_.beta, k) * target_.apply(x) + (R / r) * d.theta.grad + (dR * d.theta.value) * p;
  out.hess = hessian_omega(x, target_, p_.alpha, p_.beta) + frame_to_cartesian(d.frame, psi_frame_hessian(d, r, L));
  return out;
}

SymMatrix SubsolutionBundle::outer_hessian(const Vec& x) const {
  const auto [r, p] = ray(x);
  const OuterDirection d = outer_direction(*this, p);
  return hessian_omega(x, target_, p_.alpha, p_.beta) + frame_to_cartesian(d.frame, psi_frame_hessian(d, r, p_.Lambda));
}

SubsolutionBundle::Glued SubsolutionBundle::glued(const Vec& x, double interface_tol) const {
  const double s = target_.s(x);
  Glued g;
  if (std::fabs(s - 1.0) <= interface_tol) {
    const FieldJet in = inner(x), out = outer(x);
    const Vec nu = normalized(target_.apply(x));
    g.on_interface = true;
    g.value = in.value;
    g.inner_normal = dot(in.grad, nu);
    g.outer_normal = dot(out.grad, nu);
    return g;
  }
  g.value = s < 1.0 ? inner(x).value : outer(x).value;
  return g;
}

// ------------------------------------------------------------ certification

namespace {

// First minimum in grid order; NaN margins count as -inf.
SweepResult reduce_min(const std::vector<SweepResult>& v) {
  SweepResult acc{kInf, Vec()};
  for (const auto& r : v) {
    const double m = std::isnan(r.margin) ? -kInf : r.margin;
    if (acc.worst_point.size() == 0 || m < acc.margin) acc = {m, r.worst_point};
  }
  return acc;
}

}  // namespace

InnerCertificate certify_inner(const SubsolutionBundle& b, const SweepConfig& sweep) {
  const int n = b.n(), k = b.k();
  const SphereGrid grid = sweep.grid(n);
  const int nr = std::max(2, sweep.radial_inner);
  std::vector<SweepResult> mk(grid.size()), mm(grid.size());
  parallel_for(grid.size(), sweep.threads, [&](std::size_t i) {
    const Vec p = grid.direction(i);
    const InnerDirection d = inner_direction(b, p);
    const double rho = d.j.rho, r1 = b.r1(p);
    SweepResult wk{kInf, rho * p}, wm{kInf, rho * p};
    for (int jr = 0; jr < nr; ++jr) {
      const double t = static_cast<double>(jr) / (nr - 1);
      const double r = std::pow(rho, 1.0 - t) * std::pow(r1, t);
      const auto [ck, cm] = cone_margins(inner_frame_hessian(d, r, b.params().N), k);
      if (ck < wk.margin) wk = {ck, r * p};
      if (cm < wm.margin) wm = {cm, r * p};
    }
    mk[i] = wk;
    mm[i] = wm;
  });
  return {reduce_min(mk), reduce_min(mm)};
}

namespace {

struct OuterParts {
  bool sigma = true, interface = true, gamma = true;
};

OuterCertificate outer_certificate(const SubsolutionBundle& b, const SweepConfig& sweep, OuterParts parts) {
  const int n = b.n(), k = b.k();
  const SphereGrid grid = sweep.grid(n);
  const std::vector<double> svals = log_space(1.0, std::max(1.0, sweep.outer_s_max), std::max(2, sweep.radial_outer));
  const auto& P = b.params();
  std::vector<SweepResult> sk(grid.size()), sm(grid.size()), jump(grid.size()), gam(grid.size());
  std::vector<double> cont(grid.size(), 0.0);
  parallel_for(grid.size(), sweep.threads, [&](std::size_t i) {
    const Vec p = grid.direction(i);
    const double r1 = b.r1(p);
    if (parts.sigma) {
      const OuterDirection d = outer_direction(b, p);
      SweepResult wk{kInf, r1 * p}, wm{kInf, r1 * p};
      for (double s : svals) {
        const double r = std::sqrt(s / d.q);
        const Vec x = r * p;
        SymMatrix h = to_frame(d.frame, hessian_omega(x, b.target(), P.alpha, P.beta));
        h += psi_frame_hessian(d, r, P.Lambda);
        const auto [ck, cm] = cone_margins(h, k);
        if (ck < wk.margin) wk = {ck, x};
        if (cm < wm.margin) wm = {cm, x};
      }
      sk[i] = wk;
      sm[i] = wm;
    }
    if (parts.interface) {
      const Vec x = r1 * p;
      const FieldJet in = b.inner(x), out = b.outer(x);
      const Vec nu = normalized(b.target().apply(x));
      double m = dot(out.grad, nu) - dot(in.grad, nu);
      if (!std::isfinite(m)) m = -kInf;
      jump[i] = {m, x};
      cont[i] = std::fabs(out.value - in.value);
      if (!std::isfinite(cont[i])) cont[i] = kInf;
    }
    if (parts.gamma) {
      const Vec X = b.surface().point(p);
      gam[i] = {b.target().s(X) + P.mu - b.data().phi->value(p), X};
    }
  });
  OuterCertificate c;
  const SweepResult none{std::numeric_limits<double>::quiet_NaN(), Vec()};
  c.sigma_k = parts.sigma ? reduce_min(sk) : none;
  c.sigma_m = parts.sigma ? reduce_min(sm) : none;
  c.jump = parts.interface ? reduce_min(jump) : none;
  c.gamma = parts.gamma ? reduce_min(gam) : none;
  c.continuity = parts.interface ? *std::max_element(cont.begin(), cont.end()) : std::numeric_limits<double>::quiet_NaN();
  return c;
}

}  // namespace

OuterCertificate certify_outer(const SubsolutionBundle& b, const SweepConfig& sweep) {
  return outer_certificate(b, sweep, {});
}

void check_domain_hypotheses(const SubsolutionBundle& b, const SweepConfig& sweep) {
  const int n = b.n(), k = b.k();
  const SphereGrid grid = sweep.grid(n);
  if (k >= 2) {
    const ConvexityReport rep = is_strictly_jconvex(b.surface(), k - 1, grid, sweep.threads);
    if (!rep.strictly)
      throw PreconditionError("surface convexity: Gamma is not strictly (k-1)-convex (margin " +
                              format_double(rep.min_margin) + ")");
  }
  const ArgMin worst = parallel_argmin(grid.size(), sweep.threads, [&](std::size_t i) {
    const Vec p = grid.direction(i);
    return b.r1(p) - b.surface().rho_at(p);
  });
  if (!(worst.value > 0.0))
    throw ConfigError("closure of D must lie in E_1 = {x^T A x < 2}; rescale the domain (worst gap " +
                      format_double(worst.value) + ")");
}

int choose_N(const SubsolutionBundle& b, const SweepConfig& sweep, InnerCertificate* certificate) {
  check_domain_hypotheses(b, sweep);
  InnerCertificate last;
  for (int e = 0; e <= 20; ++e) {
    const int N = 1 << e;
    last = certify_inner(b.with_N(N), sweep);
    if (last.passed(kInnerMarginThreshold)) {
      if (certificate) *certificate = last;
      return N;
    }
    if (!std::isfinite(last.sigma_k.margin) && !std::isfinite(last.sigma_m.margin)) break;
  }
  const SweepResult& w = last.sigma_k.margin < last.sigma_m.margin ? last.sigma_k : last.sigma_m;
  throw CertificationError("choose_N: no power of two N <= 2^20 certifies the inner subsolution",
                           to_std(w.worst_point), w.margin);
}

double choose_alpha(const SubsolutionBundle& b, const SweepConfig& sweep, OuterCertificate* certificate) {
  OuterCertificate last;
  for (int e = 0; e <= 30; ++e) {
    const SubsolutionBundle trial = b.with_alpha(std::ldexp(1.0, e));
    last = outer_certificate(trial, sweep, {false, true, true});
    if (!(last.jump.margin > 0.0 && last.gamma.margin >= 0.0)) continue;
    last = outer_certificate(trial, sweep, {});
    if (last.passed()) {
      if (certificate) *certificate = last;
      return trial.params().alpha;
    }
  }
  const SweepResult* w = &last.jump;
  for (const SweepResult* c : {&last.sigma_k, &last.sigma_m, &last.gamma})
    if (c->margin < w->margin) w = c;
  throw CertificationError("choose_alpha: no power of two alpha <= 2^30 certifies the outer subsolution",
                           to_std(w->worst_point), w->margin);
}

double alpha_for_mu(double c, double alpha_min, double beta, int k) {
  const double m0 = mu_of(alpha_min, beta, k);
  if (c < m0 - 1e-12)
    throw CertificationError("c below the certified minimum mu(alpha, beta) = " + format_double(m0), {}, c - m0);
  if (c <= m0) return alpha_min;
  double lo = std::max(alpha_min, 1e-300), hi = std::max(2.0 * lo, 1.0);
  while (mu_of(hi, beta, k) < c) {
    hi *= 2.0;
    if (hi > 1e18) throw CertificationError("alpha_for_mu: c too large", {}, c);
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = std::sqrt(lo * hi);
    (mu_of(mid, beta, k) < c ? lo : hi) = mid;
  }
  return hi;
}

// ---------------------------------------------------------------- barriers

double outer_upper_barrier(const Vec& x, double R, const SubsolutionBundle& b, double C_bar) {
  if (!(R > 0.0)) throw DomainError("outer_upper_barrier: R must be positive");
  return b.target().s(x) + b.params().mu + C_bar * std::pow(R, 1.0 - b.params().beta);
}

double outer_lower_barrier(const Vec& x, double R, const SubsolutionBundle& b, double C_bar, double lambda) {
  if (!(R > 0.0)) throw DomainError("outer_lower_barrier: R must be positive");
  const double tail = C_bar * std::pow(R, 1.0 - b.params().beta);
  return 2.0 * lambda * b.target().s(x) - (2.0 * lambda * R - R - b.params().mu - tail);
}

double UpperBarrier::value(const Vec& x) const {
  const double d = norm(x - z);
  if (!(d > 0.0)) throw DomainError("upper_barrier: x at the ball center");
  const double e = n - 2.0;
  return -C * std::pow(d, -e) + C * std::pow(eta, -e) + phi0 + dot(grad_phi, x - p_hat);
}

FieldJet UpperBarrier::jet(const Vec& x) const {
  const Vec y = x - z;
  const double d = norm(y);
  if (!(d > 0.0)) throw DomainError("upper_barrier: x at the ball center");
  const double c = C * (n - 2.0) * std::pow(d, -static_cast<double>(n));
  FieldJet out;
  out.value = value(x);
  out.grad = c * y + grad_phi;
  out.hess = c * (SymMatrix::identity(n) - SymMatrix::outer((1.0 / d) * y, static_cast<double>(n)));
  return out;
}

UpperBarrier make_upper_barrier(const SubsolutionBundle& b, const Vec& direction, double C, double eta) {
  const int n = b.n();
  if (n < 3) throw DomainError("upper_barrier: n >= 3 required");
  const Vec p = normalized(direction);
  const SurfaceJet j = jet_at(b.surface(), p);
  const SphereJet ph = b.data().phi->jet(p);
  UpperBarrier u;
  u.n = n;
  u.C = C;
  u.eta = eta;
  u.p_hat = j.rho * p;
  u.inward = -j.normal;
  u.z = u.p_hat + eta * u.inward;
  u.phi0 = ph.value;
  // grad_Gamma phi = g^{ab} phi_b X_a with X_a = rho_a p + rho e_a.
  u.grad_phi = Vec(n);
  for (int a = 0; a < n - 1; ++a) {
    const Vec Xa = j.grad_rho[a] * p + j.rho * j.frame.column(a);
    double c = 0.0;
    for (int e = 0; e < n - 1; ++e) c += j.g_inv(a, e) * dot(ph.grad, j.frame.column(e));
    u.grad_phi += c * Xa;
  }
  return u;
}

BarrierSet certify_barriers(const SubsolutionBundle& b, double R0, const std::vector<double>& R_list,
                            const SweepConfig& sweep, int barrier_points_colat) {
  const int n = b.n(), k = b.k();
  const auto& P = b.params();
  if (!(R0 >= 1.0)) throw ConfigError("barriers: R0 must be at least 1");
  for (double R : R_list)
    if (R < R0) throw ConfigError("barriers: every R must be at least R0");
  const SphereGrid grid = sweep.grid(n);
  const std::size_t m = grid.size();
  std::vector<Vec> dirs(m), gamma_pts(m), e1_pts(m);
  std::vector<double> phit(m), phi(m), sgamma(m);
  parallel_for(m, sweep.threads, [&](std::size_t i) {
    dirs[i] = grid.direction(i);
    phit[i] = b.phi_tilde(dirs[i]).value;
    phi[i] = b.data().phi->value(dirs[i]);
    gamma_pts[i] = b.surface().point(dirs[i]);
    e1_pts[i] = b.r1(dirs[i]) * dirs[i];
    sgamma[i] = b.target().s(gamma_pts[i]);
  });
  const double phit_min = *std::min_element(phit.begin(), phit.end());
  const double phit_max = *std::max_element(phit.begin(), phit.end());
  BarrierSet out;
  out.R0 = R0;

  // Outer upper barrier constant from the remainder of omega plus the Psi term.
  const std::vector<double> sv = log_space(R0, 10.0 * R0, std::max(2, sweep.radial_outer));
  const auto extreme = [&](double s) {
    const double rem = omega_remainder(s, P.alpha, P.beta, k);
    const double sl = std::pow(s, -P.Lambda);
    return std::max(std::fabs(rem + sl * phit_min), std::fabs(rem + sl * phit_max));
  };
  double sup = 0.0;
  for (double s : sv) sup = std::max(sup, extreme(s) * std::pow(s, P.beta - 1.0));
  out.C_bar = std::max(1.1 * sup, 1e-6);
  out.remainder_margin = kInf;
  for (double s : sv) out.remainder_margin = std::min(out.remainder_margin, out.C_bar * std::pow(s, 1.0 - P.beta) - extreme(s));

  std::vector<double> levels = R_list;
  levels.push_back(R0);
  levels.insert(levels.end(), sv.begin(), sv.end());
  out.upper_outer_margin = kInf;
  for (double R : levels) {
    const double rem = omega_remainder(R, P.alpha, P.beta, k);
    out.upper_outer_margin = std::min(out.upper_outer_margin, out.C_bar * std::pow(R, 1.0 - P.beta) - rem -
                                                                  std::pow(R, -P.Lambda) * phit_max);
  }
  const double R_max = *std::max_element(levels.begin(), levels.end());
  out.upper_gamma_margin = kInf;
  for (std::size_t i = 0; i < m; ++i)
    out.upper_gamma_margin =
        std::min(out.upper_gamma_margin, sgamma[i] + P.mu + out.C_bar * std::pow(R_max, 1.0 - P.beta) - phi[i]);

  // Lower barrier slope: worst case of the Gamma inequality is R = R0.
  double lam = 0.5;
  for (std::size_t i = 0; i < m; ++i)
    lam = std::max(lam, (R0 + P.mu + out.C_bar * std::pow(R0, 1.0 - P.beta) - phi[i]) / (2.0 * (R0 - sgamma[i])));
  out.lambda_low = lam + std::max(0.05 * lam, 1e-3);
  out.lower_gamma_margin = kInf;
  for (double R : levels)
    for (std::size_t i = 0; i < m; ++i)
      out.lower_gamma_margin =
          std::min(out.lower_gamma_margin, phi[i] - outer_lower_barrier(gamma_pts[i], R, b, out.C_bar, out.lambda_low));

  if (!(out.remainder_margin > 0.0 && out.upper_outer_margin > 0.0 && out.upper_gamma_margin > 0.0))
    throw CertificationError("outer upper barrier: u_bar_R does not dominate on dE_R and Gamma", {},
                             std::min({out.remainder_margin, out.upper_outer_margin, out.upper_gamma_margin}));
  if (!(out.lower_gamma_margin > 0.0))
    throw CertificationError("outer lower barrier: ubar_u_R >= phi somewhere on Gamma", {}, out.lower_gamma_margin);

  // Upper barrier at the boundary points of a coarse grid.
  out.eta0 = interior_ball_radius(b.surface(), grid, sweep.threads);
  const double ubar_e1 = 1.0 + P.mu + out.C_bar * std::pow(R0, 1.0 - P.beta);
  const SphereGrid hat_grid =
      n == 3 ? SphereGrid(3, {barrier_points_colat, 2 * barrier_points_colat})
             : SphereGrid::uniform(n, std::max(2, barrier_points_colat / 2), 2 * barrier_points_colat);
  double eta = out.eta0;
  double last_g = -kInf, last_o = -kInf;
  for (int halving = 0; halving <= 20; ++halving, eta *= 0.5) {
    for (int e = 0; e <= 40; ++e) {
      const double C = std::ldexp(1.0, e);
      std::vector<double> gm(hat_grid.size()), om(hat_grid.size());
      parallel_for(hat_grid.size(), sweep.threads, [&](std::size_t h) {
        const UpperBarrier u = make_upper_barrier(b, hat_grid.direction(h), C, eta);
        double g = kInf, o = kInf;
        for (std::size_t i = 0; i < m; ++i) {
          if (norm(gamma_pts[i] - u.p_hat) > 1e-9) g = std::min(g, u.value(gamma_pts[i]) - phi[i]);
          o = std::min(o, u.value(e1_pts[i]) - ubar_e1);
        }
        gm[h] = g;
        om[h] = o;
      });
      last_g = *std::min_element(gm.begin(), gm.end());
      last_o = *std::min_element(om.begin(), om.end());
      if (last_g >= -1e-12 && last_o > 0.0) {
        out.eta_ball = eta;
        out.C_hat = C;
        out.hat_gamma_margin = last_g;
        out.hat_outer_margin = last_o;
        return out;
      }
      if (last_g < -1e-12 && e > 8) break;
    }
  }
  throw CertificationError("upper barrier: no (C, eta) certified", {}, std::min(last_g, last_o));
}

// ----------------------------------------------------------- certification driver

CertifiedBundle certify(const QuadraticTarget& target, const StarSurface& surface, const BoundaryData& data,
                        const BundleParams& initial, const SweepConfig& sweep, double R0,
                        const std::vector<double>& R_list, std::optional<double> c) {
  SubsolutionBundle b(target, surface, data, initial);
  InnerCertificate inner;
  b = b.with_N(choose_N(b, sweep, &inner));
  OuterCertificate outer;
  b = b.with_alpha(choose_alpha(b, sweep, &outer));
  if (c) {
    const double alpha = alpha_for_mu(*c, b.params().alpha, b.params().beta, b.k());
    if (alpha != b.params().alpha) {
      b = b.with_alpha(alpha);
      outer = certify_outer(b, sweep);
      if (!outer.passed())
        throw CertificationError("outer subsolution fails at the alpha matching c", to_std(outer.jump.worst_point),
                                 std::min({outer.sigma_k.margin, outer.sigma_m.margin, outer.jump.margin}));
    }
  }
  BarrierSet barriers = certify_barriers(b, R0, R_list, sweep);
  return {b, inner, outer, barriers, sweep};
}

// ----------------------------------------------------------- serialization

std::string serialize_bundle(const CertifiedBundle& cb, const std::map<std::string, std::string>& extra) {
  const auto& b = cb.bundle;
  const auto& P = b.params();
  std::vector<std::pair<std::string, std::string>> kv;
  const auto put = [&](const std::string& k, const std::string& v) { kv.emplace_back(k, v); };
  const auto putd = [&](const std::string& k, double v) { put(k, format_double(v)); };
  put("format", "hring-bundle 1");
  put("n", std::to_string(b.n()));
  put("k", std::to_string(b.k()));
  put("a", join_doubles({b.target().a().begin(), b.target().a().end()}));
  put("N", std::to_string(P.N));
  putd("alpha", P.alpha);
  putd("beta", P.beta);
  putd("eta_gap", P.eta_gap);
  putd("Lambda", P.Lambda);
  putd("mu", P.mu);
  put("surface.hash", hex64(fnv1a64(b.surface().description())));
  put("data.hash", hex64(fnv1a64(b.data().description)));
  putd("margins.inner_sigma_k", cb.inner.sigma_k.margin);
  putd("margins.inner_sigma_m", cb.inner.sigma_m.margin);
  putd("margins.outer_sigma_k", cb.outer.sigma_k.margin);
  putd("margins.outer_sigma_m", cb.outer.sigma_m.margin);
  putd("margins.jump", cb.outer.jump.margin);
  putd("margins.gamma", cb.outer.gamma.margin);
  putd("margins.continuity", cb.outer.continuity);
  const auto& B = cb.barriers;
  putd("barrier.R0", B.R0);
  putd("barrier.C_bar", B.C_bar);
  putd("barrier.lambda_low", B.lambda_low);
  putd("barrier.eta0", B.eta0);
  putd("barrier.eta_ball", B.eta_ball);
  putd("barrier.C_hat", B.C_hat);
  putd("margins.remainder", B.remainder_margin);
  putd("margins.upper_outer", B.upper_outer_margin);
  putd("margins.upper_gamma", B.upper_gamma_margin);
  putd("margins.lower_gamma", B.lower_gamma_margin);
  putd("margins.hat_gamma", B.hat_gamma_margin);
  putd("margins.hat_outer", B.hat_outer_margin);
  std::string counts;
  const SphereGrid grid = cb.sweep.grid(b.n());
  for (int c : grid.counts()) counts += (counts.empty() ? "" : "x") + std::to_string(c);
  put("grid.surface", counts);
  put("grid.radial_inner", std::to_string(cb.sweep.radial_inner));
  put("grid.radial_outer", std::to_string(cb.sweep.radial_outer));
  putd("grid.outer_s_max", cb.sweep.outer_s_max);
  for (const auto& [k, v] : extra) put(k, v);
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

std::map<std::string, std::string> parse_bundle_document(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) throw ConfigError("bundle line " + std::to_string(lineno) + ": expected 'key = value'");
    out[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return out;
}

}  // namespace hring
