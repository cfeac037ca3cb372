#include "hring/spherical.hpp"

#include <algorithm>
#include <cmath>

#include "hring/parallel.hpp"

namespace hring {

namespace {

// sigma_j of a list shorter than j is zero.
double sigma_or_zero(int j, std::span<const double> x) {
  if (j < 0 || j > static_cast<int>(x.size())) return 0.0;
  return sigma(j, x);
}

double spectral_radius(const Spectrum& s) { return std::max(std::fabs(s.min()), std::fabs(s.max())); }

}  // namespace

SymMatrix hessian_spherical(const SphericalHessianInput& in) {
  if (!(in.r > 0.0)) throw DomainError("hessian_spherical: r must be positive");
  const int d = in.f_a.size();
  const double r = in.r;
  SymMatrix h(d + 1);
  for (int a = 0; a < d; ++a) {
    for (int b = a; b < d; ++b) h.set(a, b, in.f_ab(a, b) / (r * r) + (a == b ? in.f_r / r : 0.0));
    h.set(a, d, in.f_ar[a] / r - in.f_a[a] / (r * r));
  }
  h.set(d, d, in.f_rr);
  return h;
}

SphericalHessianInput separable_input(const SphereJet& theta, const Mat& frame, double r, double R, double dR,
                                      double d2R) {
  const int d = frame.dim() - 1;
  SphericalHessianInput in;
  in.r = r;
  in.f_a = Vec(d);
  in.f_ar = Vec(d);
  in.f_ab = SymMatrix(d);
  for (int a = 0; a < d; ++a) {
    const Vec ea = frame.column(a);
    const double ta = dot(ea, theta.grad);
    in.f_a[a] = R * ta;
    in.f_ar[a] = dR * ta;
    const Vec he = theta.hess * ea;
    for (int b = a; b < d; ++b) in.f_ab.set(a, b, R * dot(frame.column(b), he));
  }
  in.f_r = dR * theta.value;
  in.f_rr = d2R * theta.value;
  return in;
}

Mat adapted_frame(const StarSurface& surface, const Vec& p) {
  const int n = surface.n();
  const Mat base = tangent_frame(p);
  const SphereJet rj = surface.rho_jet(p);
  const double gn = norm(rj.grad);
  std::vector<Vec> cols;
  cols.push_back(gn > 1e-14 * rj.value ? (1.0 / gn) * rj.grad : base.column(0));
  // Complete {e_1, p} with the base columns of largest residual (pivoted Gram-Schmidt).
  std::vector<Vec> cand;
  for (int j = 0; j < n - 1; ++j) cand.push_back(base.column(j));
  while (static_cast<int>(cols.size()) < n - 1) {
    int best = -1;
    double best_norm = -1.0;
    Vec best_vec;
    for (int j = 0; j < static_cast<int>(cand.size()); ++j) {
      Vec v = cand[j] - dot(cand[j], p) * p;
      for (const auto& c : cols) v -= dot(v, c) * c;
      const double nv = norm(v);
      if (nv > best_norm) best = j, best_norm = nv, best_vec = v;
    }
    cols.push_back((1.0 / best_norm) * best_vec);
    cand.erase(cand.begin() + best);
  }
  cols.push_back(p);
  Mat frame = Mat::from_columns(cols);
  if (n - 2 >= 2) {
    const SurfaceJet j = jet_at(surface, p, frame);
    const EigenSystem es = eigen_decompose(j.a.without(0));
    std::vector<Vec> rot(cols);
    for (int i = 0; i < n - 2; ++i) {
      Vec v(n);
      for (int l = 0; l < n - 2; ++l) v += es.vectors(l, i) * cols[1 + l];
      rot[1 + i] = v;
    }
    frame = Mat::from_columns(rot);
  }
  return frame;
}

SymMatrix frame_to_cartesian(const Mat& frame, const SymMatrix& comp) { return from_frame(frame, comp); }
SymMatrix cartesian_to_frame(const Mat& frame, const SymMatrix& cart) { return to_frame(frame, cart); }

namespace {

struct PointData {
  double r;
  Vec p;
};

PointData split(const Vec& x) {
  const double r = norm(x);
  if (!(r > 0.0)) throw DomainError("structured Hessian: x = 0");
  return {r, (1.0 / r) * x};
}

}  // namespace

SymMatrix hessian_of_b(const StarSurface& surface, const Vec& x) {
  return hessian_of_b(surface, x, adapted_frame(surface, split(x).p));
}

SymMatrix hessian_of_b(const StarSurface& surface, const Vec& x, const Mat& frame) {
  const auto [r, p] = split(x);
  const SurfaceJet j = jet_at(surface, p, frame);
  const int d = surface.n() - 1;
  SymMatrix h(d + 1);
  const double c = j.w / (r * j.rho * j.rho);
  for (int a = 0; a < d; ++a)
    for (int b = a; b < d; ++b) h.set(a, b, c * j.h(a, b));
  return h;
}

SymMatrix hessian_of_phi_of_b(const StarSurface& surface, const Vec& x, double M, double B) {
  return hessian_of_phi_of_b(surface, x, M, B, adapted_frame(surface, split(x).p));
}

SymMatrix hessian_of_phi_of_b(const StarSurface& surface, const Vec& x, double M, double B, const Mat& frame) {
  const auto [r, p] = split(x);
  const SurfaceJet j = jet_at(surface, p, frame);
  const int d = surface.n() - 1;
  Vec tb(d + 1);
  for (int a = 0; a < d; ++a) tb[a] = -j.grad_rho[a] / (j.rho * j.rho);
  tb[d] = 1.0 / j.rho;
  SymMatrix h = M * hessian_of_b(surface, x, frame);
  h += SymMatrix::outer(tb, B);
  return h;
}

double sigma_m_structured(const StarSurface& surface, const Vec& x, double M, double B, int m) {
  return sigma_m_structured(surface, x, M, B, m, adapted_frame(surface, split(x).p));
}

double sigma_m_structured(const StarSurface& surface, const Vec& x, double M, double B, int m, const Mat& frame) {
  const int n = surface.n();
  if (m < 1 || m > n - 1) throw DomainError("sigma_m_structured: m outside [1, n-1]");
  const auto [r, p] = split(x);
  const SurfaceJet j = jet_at(surface, p, frame);
  const Spectrum block = eigenvalues(j.a.without(0));
  const double w = j.w;
  const double s_full = sigma_or_zero(m, j.kappa.values());
  const double s_full1 = sigma_or_zero(m - 1, j.kappa.values());
  const double s_blk = sigma_or_zero(m, block.values());
  const double mr = M / r;
  return std::pow(mr, m) * std::pow(w, m + 2) * (s_full - s_blk) +
         B / (j.rho * j.rho) * std::pow(mr, m - 1) * std::pow(w, m + 1) * s_full1 + std::pow(mr * w, m) * s_blk;
}

LowerBoundConstants lower_bound_constants(const StarSurface& surface, int m, const SphereGrid& grid, int threads) {
  const int n = surface.n();
  if (m < 1 || m > n - 1) throw DomainError("lower_bound_constants: m outside [1, n-1]");
  struct Sample {
    double recipe, sup, c1;
  };
  std::vector<Sample> samples(grid.size());
  parallel_for(grid.size(), threads, [&](std::size_t i) {
    const Vec p = grid.direction(i);
    const SurfaceJet j = jet_at(surface, p, adapted_frame(surface, p));
    const double w = j.w;
    samples[i].recipe = w * w * w * j.a.max_abs();
    samples[i].sup = (binomial(n - 1, m) + 2.0 * binomial(n - 2, m)) * std::pow(w, m + 2) *
                     std::pow(spectral_radius(j.kappa), m);
    samples[i].c1 = m == 1 ? 1.0 : sigma(m - 1, j.kappa);
  });
  double recipe = 0.0, sup = 0.0, c1 = samples.empty() ? 1.0 : samples[0].c1;
  for (const auto& s : samples) {
    recipe = std::max(recipe, s.recipe);
    sup = std::max(sup, s.sup);
    c1 = std::min(c1, s.c1);
  }
  if (m > 1 && c1 < kStrictConvexityMargin)
    throw PreconditionError("sigma_m_lower_bound: surface is not strictly (m-1)-convex on the sweep");
  LowerBoundConstants out;
  out.m = m;
  out.c1 = c1;
  out.c0 = std::max(static_cast<double>(n) * n * recipe * binomial(n - 1, m), 1.1 * sup);
  return out;
}

double sigma_m_lower_bound(const StarSurface& surface, const Vec& x, double M, double B,
                           const LowerBoundConstants& c) {
  if (M < 0.0 || B < 0.0) throw PreconditionError("sigma_m_lower_bound: M and B must be non-negative");
  const auto [r, p] = split(x);
  const double rho = surface.rho_at(p);
  return std::pow(M / r, c.m - 1) * (c.c1 * B / (rho * rho) - c.c0 * M / r);
}

double sigma_m_lower_bound(const StarSurface& surface, const Vec& x, double M, double B, int m) {
  const int n = surface.n();
  const SphereGrid grid = n == 3 ? SphereGrid(3, {32, 64}) : SphereGrid::uniform(n, 12, 24);
  return sigma_m_lower_bound(surface, x, M, B, lower_bound_constants(surface, m, grid));
}

}  // namespace hring
