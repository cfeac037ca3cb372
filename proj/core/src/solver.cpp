#include "hring/solver.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/QR>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "hring/parallel.hpp"
#include "hring/text.hpp"

namespace hring {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

int packed_size(int n) { return n * (n + 1) / 2; }

// Fornberg's recursion: weights of derivatives 0..m at x0 from nodes xs.
std::vector<std::vector<double>> fd_weights(double x0, const std::vector<double>& xs, int m) {
  const int np = static_cast<int>(xs.size());
  std::vector<std::vector<double>> c(m + 1, std::vector<double>(np, 0.0));
  double c1 = 1.0, c4 = xs[0] - x0;
  c[0][0] = 1.0;
  for (int i = 1; i < np; ++i) {
    const int mn = std::min(i, m);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = xs[i] - x0;
    for (int j = 0; j < i; ++j) {
      const double c3 = xs[i] - xs[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) c[k][i] = c1 * (k * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
        c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
      }
      for (int k = mn; k >= 1; --k) c[k][j] = (c4 * c[k][j] - k * c[k - 1][j]) / c3;
      c[0][j] = c4 * c[0][j] / c3;
    }
    c1 = c2;
  }
  return c;
}

bool is_isotropic(const QuadraticTarget& t) {
  const auto a = t.a();
  for (double x : a)
    if (std::fabs(x - a[0]) > 1e-14 * a[0]) return false;
  return true;
}

double r1_of(const QuadraticTarget& t, const Vec& p) {
  const double q = 0.5 * dot(p, t.apply(p));
  return std::sqrt(1.0 / q);
}

// Index offsets (dt, d_angles) of the 2n^2+1 point stencil.
std::vector<std::vector<int>> stencil_offsets(int n) {
  std::vector<std::vector<int>> out;
  out.push_back(std::vector<int>(n, 0));
  for (int i = 0; i < n; ++i)
    for (int s : {-1, 1}) {
      std::vector<int> o(n, 0);
      o[i] = s;
      out.push_back(o);
    }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      for (int si : {-1, 1})
        for (int sj : {-1, 1}) {
          std::vector<int> o(n, 0);
          o[i] = si;
          o[j] = sj;
          out.push_back(o);
        }
  return out;
}

SymMatrix unpack(const double* w, int n) {
  SymMatrix h(n);
  int q = 0;
  for (int a = 0; a < n; ++a)
    for (int b = a; b < n; ++b) h.set(a, b, w[q++]);
  return h;
}

}  // namespace

// ---------------------------------------------------------------- grid

std::shared_ptr<const RingGrid> RingGrid::build(const StarSurface& surface, const QuadraticTarget& target, double R,
                                                const GridSpec& spec) {
  const int n = target.n();
  if (surface.n() != n) throw ConfigError("ring grid: surface dimension differs from n");
  if (!(R > 1.0)) throw ConfigError("ring grid: R must exceed 1");
  std::shared_ptr<RingGrid> g(new RingGrid(spec.mode, target));
  g->n_ = n;
  g->R_ = R;
  if (spec.mode == SolverMode::Radial) {
    if (!is_isotropic(target)) throw ConfigError("radial mode requires an isotropic target");
    const SphereGrid probe = SphereGrid::uniform(n, 6, 12);
    const double rho0 = surface.rho_at(probe.direction(0));
    for (std::size_t i = 0; i < probe.size(); ++i)
      if (std::fabs(surface.rho_at(probe.direction(i)) - rho0) > 1e-12 * rho0)
        throw ConfigError("radial mode requires a round sphere");
    if (spec.n_r < 4) throw ConfigError("radial mode needs at least 4 nodes");
    const Vec e = Vec::unit(n, 0);
    const double rR = std::sqrt(R) * r1_of(target, e);
    if (!(rR > rho0)) throw ConfigError("ring grid: Gamma is not inside E_R");
    g->n_t_ = spec.n_r;
    g->n_dir_ = 1;
    for (int i = 0; i < spec.n_r; ++i) {
      const double t = static_cast<double>(i) / (spec.n_r - 1);
      g->t_.push_back(t);
      const double r = i == spec.n_r - 1 ? rR : rho0 * std::pow(rR / rho0, t);
      g->nodes_.push_back(r * e);
    }
  } else {
    if (spec.n_t < 3) throw ConfigError("full mode needs at least 3 radial nodes");
    g->sphere_ = std::make_unique<SphereGrid>(n, spec.angular);
    g->angular_ = spec.angular;
    g->n_t_ = spec.n_t;
    g->n_dir_ = g->sphere_->size();
    std::vector<double> rho(g->n_dir_), rR(g->n_dir_);
    std::vector<Vec> dirs(g->n_dir_);
    for (std::size_t d = 0; d < g->n_dir_; ++d) {
      dirs[d] = g->sphere_->direction(d);
      rho[d] = surface.rho_at(dirs[d]);
      rR[d] = std::sqrt(R) * r1_of(target, dirs[d]);
      // dr/dt = r log(r_R / rho) > 0 keeps the map a bijection onto the closed ring.
      if (!(std::log(rR[d] / rho[d]) > 0.0)) throw ConfigError("ring grid: Gamma is not inside E_R");
    }
    for (int it = 0; it < spec.n_t; ++it) {
      const double t = static_cast<double>(it) / (spec.n_t - 1);
      g->t_.push_back(t);
      for (std::size_t d = 0; d < g->n_dir_; ++d) {
        const double r = it == 0 ? rho[d] : it == spec.n_t - 1 ? rR[d] : std::pow(rho[d], 1.0 - t) * std::pow(rR[d], t);
        g->nodes_.push_back(r * dirs[d]);
      }
    }
  }
  const std::size_t per = (spec.mode == SolverMode::Radial ? 4 : 2 * n * n + 1) * (n + packed_size(n) + 1);
  const double mb = static_cast<double>(g->size()) * per * sizeof(double) / (1024.0 * 1024.0);
  if (mb <= spec.stencil_cache_mb) {
    g->cache_.resize(g->size());
    for (std::size_t i = 0; i < g->size(); ++i) g->cache_[i] = g->compute_stencil(i);
  }
  return g;
}

NodeTag RingGrid::tag(std::size_t i) const noexcept {
  const std::size_t it = radial_index(i);
  if (it == 0) return NodeTag::Inner;
  if (it + 1 == n_t_) return NodeTag::Outer;
  return NodeTag::Interior;
}

Stencil RingGrid::stencil(std::size_t node) const {
  if (node >= size()) throw DomainError("stencil: node out of range");
  if (!cache_.empty()) return cache_[node];
  return compute_stencil(node);
}

Stencil RingGrid::radial_stencil(std::size_t node) const {
  const std::size_t i = node;
  std::vector<std::size_t> idx;
  if (i == 0)
    idx = {0, 1, 2, 3};
  else if (i + 1 == n_t_)
    idx = {i - 3, i - 2, i - 1, i};
  else
    idx = {i - 1, i, i + 1};
  std::vector<double> xs;
  for (auto j : idx) xs.push_back(nodes_[j][0]);
  const double r = nodes_[i][0];
  const auto w = fd_weights(r, xs, 2);
  Stencil s;
  s.nodes = idx;
  const int P = packed_size(n_);
  s.grad_w.assign(idx.size() * n_, 0.0);
  s.hess_w.assign(idx.size() * P, 0.0);
  for (std::size_t j = 0; j < idx.size(); ++j) {
    s.grad_w[j * n_] = w[1][j];
    int q = 0;
    for (int a = 0; a < n_; ++a)
      for (int b = a; b < n_; ++b, ++q)
        if (a == b) s.hess_w[j * P + q] = a == 0 ? w[2][j] : w[1][j] / r;
  }
  return s;
}

Stencil RingGrid::compute_stencil(std::size_t node) const {
  if (mode_ == SolverMode::Radial) return radial_stencil(node);
  const int n = n_, P = packed_size(n);
  const std::size_t it = radial_index(node), dir = direction_index(node);
  const int shift = it == 0 ? 1 : (it + 1 == n_t_ ? -1 : 0);
  // Longitude-type offsets are stretched so that each angular step matches the
  // colatitude step; on rings near a pole the unit step is far shorter.
  const Vec& p0 = sphere_->direction(dir);
  const auto step = [&](int a) {
    std::vector<int> e(n - 1, 0);
    e[a] = 1;
    return norm(sphere_->direction(sphere_->neighbor(dir, e)) - p0);
  };
  std::vector<int> stretch(n - 1, 1);
  const double base = step(0);
  for (int a = 1; a < n - 1; ++a) {
    const double m = std::round(base / std::max(step(a), 1e-300));
    stretch[a] = static_cast<int>(std::clamp(m, 1.0, std::max(1.0, std::floor((angular_[a] - 1) / 6.0))));
  }
  std::vector<std::size_t> idx;
  for (const auto& o : stencil_offsets(n)) {
    const std::size_t jt = static_cast<std::size_t>(static_cast<long>(it) + o[0] + shift);
    std::vector<int> ang(o.begin() + 1, o.end());
    for (int a = 0; a < n - 1; ++a) ang[a] *= stretch[a];
    const bool moved = std::any_of(ang.begin(), ang.end(), [](int v) { return v != 0; });
    const std::size_t jd = moved ? sphere_->neighbor(dir, ang) : dir;
    idx.push_back(index(jt, jd));
  }
  const Vec& x0 = nodes_[node];
  const std::size_t m = idx.size();
  double h = 0.0;
  for (auto j : idx) h = std::max(h, norm(nodes_[j] - x0));
  const int p = 1 + n + P;
  Eigen::MatrixXd V(m, p);
  for (std::size_t j = 0; j < m; ++j) {
    const Vec d = (1.0 / h) * (nodes_[idx[j]] - x0);
    V(j, 0) = 1.0;
    for (int a = 0; a < n; ++a) V(j, 1 + a) = d[a];
    int q = 0;
    for (int a = 0; a < n; ++a)
      for (int b = a; b < n; ++b, ++q) V(j, 1 + n + q) = a == b ? 0.5 * d[a] * d[a] : d[a] * d[b];
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(V);
  if (cod.rank() < p) throw DomainError("ring grid: degenerate stencil at node " + std::to_string(node));
  const Eigen::MatrixXd pinv = cod.pseudoInverse();
  Stencil s;
  s.nodes = idx;
  s.grad_w.resize(m * n);
  s.hess_w.resize(m * P);
  for (std::size_t j = 0; j < m; ++j) {
    for (int a = 0; a < n; ++a) s.grad_w[j * n + a] = pinv(1 + a, j) / h;
    for (int q = 0; q < P; ++q) s.hess_w[j * P + q] = pinv(1 + n + q, j) / (h * h);
  }
  return s;
}

// ---------------------------------------------------------------- fields

RingField make_field(RingGridPtr grid, const ScalarField& inner, const ScalarField& outer, const ScalarField& interior) {
  RingField f{grid, std::vector<double>(grid->size())};
  for (std::size_t i = 0; i < grid->size(); ++i) {
    const Vec& x = grid->node(i);
    switch (grid->tag(i)) {
      case NodeTag::Inner: f.u[i] = inner(x); break;
      case NodeTag::Outer: f.u[i] = outer(x); break;
      default: f.u[i] = interior(x);
    }
  }
  return f;
}

namespace {

SymMatrix apply_hess(const Stencil& s, const std::vector<double>& u, int n) {
  const int P = packed_size(n);
  std::vector<double> acc(P, 0.0);
  for (std::size_t j = 0; j < s.nodes.size(); ++j) {
    const double uj = u[s.nodes[j]];
    for (int q = 0; q < P; ++q) acc[q] += s.hess_w[j * P + q] * uj;
  }
  return unpack(acc.data(), n);
}

Vec apply_grad(const Stencil& s, const std::vector<double>& u, int n) {
  Vec g(n);
  for (std::size_t j = 0; j < s.nodes.size(); ++j)
    for (int a = 0; a < n; ++a) g[a] += s.grad_w[j * n + a] * u[s.nodes[j]];
  return g;
}

}  // namespace

SymMatrix discrete_hessian(const RingField& f, std::size_t node) {
  if (f.grid->tag(node) != NodeTag::Interior) throw DomainError("discrete_hessian: boundary node");
  return apply_hess(f.grid->stencil(node), f.u, f.grid->n());
}

SymMatrix discrete_hessian_any(const RingField& f, std::size_t node) {
  return apply_hess(f.grid->stencil(node), f.u, f.grid->n());
}

Vec discrete_gradient(const RingField& f, std::size_t node) {
  return apply_grad(f.grid->stencil(node), f.u, f.grid->n());
}

SymMatrix linearized_coefficients(const SymMatrix& h, int k) {
  const EigenSystem es = eigen_decompose(h);
  const auto lam = es.values.values();
  const int n = h.dim();
  const auto all = sigma_all(lam);
  for (int m = 1; m <= k; ++m)
    if (!(all[m] > 0.0)) throw PreconditionError("linearized_coefficients: spectrum outside Gamma_k");
  const double sk = all[k];
  const double c = std::pow(sk, 1.0 / k - 1.0) / k;
  SymMatrix out(n);
  for (int i = 0; i < n; ++i) out += SymMatrix::outer(es.vectors.column(i), c * sigma_excl(k - 1, lam, i));
  return out;
}

ResidualResult residual(const RingField& f, int k, int threads) {
  const auto& g = *f.grid;
  ResidualResult out;
  out.r.assign(g.size(), 0.0);
  out.margin.assign(g.size(), kInf);
  parallel_for(g.size(), threads, [&](std::size_t i) {
    if (g.tag(i) != NodeTag::Interior) return;
    const SymMatrix h = discrete_hessian(f, i);
    if (!h.all_finite()) {
      out.margin[i] = -kInf;
      out.r[i] = kInf;
      return;
    }
    const auto s = sigma_all(eigenvalues(h).values());
    double m = kInf;
    for (int j = 1; j <= k; ++j) m = std::min(m, s[j]);
    out.margin[i] = m;
    out.r[i] = std::pow(std::max(s[k], 0.0), 1.0 / k) - 1.0;
  });
  out.min_margin = kInf;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g.tag(i) != NodeTag::Interior) continue;
    const double a = std::fabs(out.r[i]);
    if (a > out.max_abs || std::isnan(a)) out.max_abs = std::isnan(a) ? kInf : a, out.worst = i;
    out.min_margin = std::min(out.min_margin, out.margin[i]);
    if (!(out.margin[i] > 0.0)) ++out.inadmissible;
  }
  return out;
}

// ---------------------------------------------------------------- Newton

namespace {

double l2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Thomas algorithm for a tridiagonal system given as (lower, diag, upper).
std::vector<double> thomas(std::vector<double> lo, std::vector<double> d, std::vector<double> up, std::vector<double> b) {
  const std::size_t m = d.size();
  for (std::size_t i = 1; i < m; ++i) {
    if (d[i - 1] == 0.0) throw ConvergenceError("radial Newton: singular tridiagonal system");
    const double w = lo[i] / d[i - 1];
    d[i] -= w * up[i - 1];
    b[i] -= w * b[i - 1];
  }
  std::vector<double> x(m);
  x[m - 1] = b[m - 1] / d[m - 1];
  for (std::size_t i = m - 1; i-- > 0;) x[i] = (b[i] - up[i] * x[i + 1]) / d[i];
  return x;
}

std::string node_info(const RingGrid& g, std::size_t i) {
  const Vec& x = g.node(i);
  std::string s = "node " + std::to_string(i) + " at (";
  for (int a = 0; a < x.size(); ++a) s += (a ? ", " : "") + format_double(x[a]);
  return s + ")";
}

}  // namespace

RingField newton_solve(const RingField& init, int k, const NewtonOptions& opt, SolveReport* report) {
  const auto t0 = std::chrono::steady_clock::now();
  const RingGrid& g = *init.grid;
  const int n = g.n(), P = packed_size(n);
  std::vector<long> unknown(g.size(), -1);
  std::vector<std::size_t> interior;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (g.tag(i) == NodeTag::Interior) unknown[i] = static_cast<long>(interior.size()), interior.push_back(i);
  const std::size_t m = interior.size();

  RingField u = init;
  ResidualResult res = residual(u, k, opt.threads);
  if (res.inadmissible > 0)
    throw PreconditionError("newton_solve: initial field not admissible at " + std::to_string(res.inadmissible) +
                            " nodes, e.g. " + node_info(g, res.worst));
  SolveReport rep;
  rep.residual_history.push_back(res.max_abs);
  std::string solver_used;

  struct Row {
    std::vector<std::pair<long, double>> entries;
  };
  std::vector<Row> rows(m);
  int stage = 0;

  std::vector<double> noise(m);
  const auto assemble = [&] {
    parallel_for(m, opt.threads, [&](std::size_t q) {
      const std::size_t i = interior[q];
      const Stencil st = g.stencil(i);
      const SymMatrix h = apply_hess(st, u.u, n);
      const SymMatrix c = linearized_coefficients(h, k);
      rows[q].entries.clear();
      double nz = 0.0;
      for (std::size_t j = 0; j < st.nodes.size(); ++j) {
        double v = 0.0, va = 0.0;
        int qq = 0;
        for (int a = 0; a < n; ++a)
          for (int b = a; b < n; ++b, ++qq) {
            const double t = (a == b ? 1.0 : 2.0) * c(a, b) * st.hess_w[j * P + qq];
            v += t;
            va += std::fabs(t);
          }
        nz += va * std::fabs(u.u[st.nodes[j]]);
        const long col = unknown[st.nodes[j]];
        if (col >= 0) rows[q].entries.emplace_back(col, v);
      }
      noise[q] = nz;
    });
    double worst = 0.0;
    for (double v : noise) worst = std::max(worst, v);
    return 4.0 * std::numeric_limits<double>::epsilon() * worst;
  };

  int iter = 0;
  double floor = 0.0;
  while (res.max_abs > opt.tol) {
    floor = assemble();
    if (res.max_abs <= floor) {
      rep.at_noise_floor = true;
      break;
    }
    if (iter >= opt.max_iter)
      throw ConvergenceError("newton_solve: iteration cap reached with residual " + format_double(res.max_abs) +
                             " at " + node_info(g, res.worst));
    ++iter;
    Eigen::VectorXd rhs(m);
    for (std::size_t q = 0; q < m; ++q) rhs[q] = -res.r[interior[q]];
    Eigen::VectorXd delta(m);
    if (g.mode() == SolverMode::Radial) {
      std::vector<double> lo(m, 0.0), d(m, 0.0), up(m, 0.0), b(m);
      for (std::size_t q = 0; q < m; ++q) {
        b[q] = rhs[q];
        for (const auto& [col, v] : rows[q].entries) {
          const long off = col - static_cast<long>(q);
          if (off == 0) d[q] += v;
          else if (off == -1) lo[q] += v;
          else if (off == 1) up[q] += v;
        }
      }
      const auto x = thomas(lo, d, up, b);
      for (std::size_t q = 0; q < m; ++q) delta[q] = x[q];
      solver_used = "thomas";
    } else {
      std::vector<Eigen::Triplet<double>> trip;
      for (std::size_t q = 0; q < m; ++q)
        for (const auto& [col, v] : rows[q].entries) trip.emplace_back(static_cast<int>(q), static_cast<int>(col), v);
      Eigen::SparseMatrix<double, Eigen::RowMajor> J(m, m);
      J.setFromTriplets(trip.begin(), trip.end());
      const double target = opt.linear_rel_tol;
      const auto good = [&](const Eigen::VectorXd& x) { return (J * x - rhs).norm() <= 10.0 * target * rhs.norm(); };
      // Diagonal BiCGSTAB first; after a failure the next stage is kept for later iterations.
      const Eigen::Index cap = std::max<Eigen::Index>(300, static_cast<Eigen::Index>(4 * std::sqrt(double(m))));
      bool ok = false;
      if (stage == 0) {
        Eigen::BiCGSTAB<Eigen::SparseMatrix<double, Eigen::RowMajor>, Eigen::DiagonalPreconditioner<double>> s;
        s.setTolerance(target);
        s.setMaxIterations(cap);
        s.compute(J);
        delta = s.solve(rhs);
        ok = s.info() == Eigen::Success && delta.allFinite() && good(delta);
        solver_used = "bicgstab-diagonal";
        if (!ok) stage = 1;
      }
      if (!ok && stage == 1) {
        Eigen::BiCGSTAB<Eigen::SparseMatrix<double, Eigen::RowMajor>, Eigen::IncompleteLUT<double>> s;
        s.setTolerance(target);
        s.setMaxIterations(cap);
        s.preconditioner().setFillfactor(10);
        s.compute(J);
        delta = s.solve(rhs);
        ok = s.info() == Eigen::Success && delta.allFinite() && good(delta);
        solver_used = "bicgstab-ilut";
        if (!ok) stage = 2;
      }
      if (!ok) {
        Eigen::SparseMatrix<double> Jc = J;
        Eigen::SparseLU<Eigen::SparseMatrix<double>> s;
        s.compute(Jc);
        if (s.info() != Eigen::Success) throw ConvergenceError("newton_solve: linearized operator is singular");
        delta = s.solve(rhs);
        solver_used = "sparse-lu";
      }
    }
    // Damped step: admissible everywhere and a decrease of the l2 residual.
    const double base = l2(res.r);
    double tau = 1.0;
    bool accepted = false;
    for (int hcount = 0; hcount <= opt.max_halvings; ++hcount, tau *= 0.5) {
      RingField trial = u;
      for (std::size_t q = 0; q < m; ++q) trial.u[interior[q]] += tau * delta[q];
      ResidualResult rt = residual(trial, k, opt.threads);
      if (rt.inadmissible == 0 &&
          (rt.max_abs <= std::max(opt.tol, floor) || l2(rt.r) <= (1.0 - 1e-4 * tau) * base)) {
        u = std::move(trial);
        res = std::move(rt);
        rep.halvings += hcount;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (rep.restarts >= opt.max_restarts)
        throw ConvergenceError("newton_solve: line search failed after " + std::to_string(opt.max_halvings) +
                               " halvings; worst residual " + format_double(res.max_abs) + " at " +
                               node_info(g, res.worst));
      // The discrete Hessian is linear in u and Gamma_k is convex, so the
      // midpoint with the admissible initial field is admissible.
      for (std::size_t i = 0; i < u.u.size(); ++i) u.u[i] = 0.5 * (u.u[i] + init.u[i]);
      res = residual(u, k, opt.threads);
      ++rep.restarts;
    }
    rep.residual_history.push_back(res.max_abs);
  }
  const ResidualResult fresh = residual(u, k, opt.threads);
  rep.final_residual = fresh.max_abs;
  rep.admissibility_margin = fresh.min_margin;
  rep.noise_floor = fresh.max_abs > opt.tol ? assemble() : floor;
  rep.iterations = iter;
  rep.linear_solver = solver_used.empty() ? "none" : solver_used;
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (report) *report = rep;
  return u;
}

// ------------------------------------------------------------ problem data

std::vector<double> glued_values(const SubsolutionBundle& b, const std::vector<Vec>& xs, int threads) {
  const auto& P = b.params();
  const int N = P.N;
  std::vector<double> out(xs.size());
  std::vector<std::size_t> outer_idx;
  std::vector<double> outer_s;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double s = b.target().s(xs[i]);
    if (s > 1.0) outer_idx.push_back(i), outer_s.push_back(s);
  }
  const std::vector<double> om = omega_many(outer_s, P.alpha, P.beta, b.k());
  std::vector<double> om_full(xs.size(), 0.0);
  for (std::size_t q = 0; q < outer_idx.size(); ++q) om_full[outer_idx[q]] = om[q];
  parallel_for(xs.size(), threads, [&](std::size_t i) {
    const Vec& x = xs[i];
    const double r = norm(x);
    if (!(r > 0.0)) throw DomainError("glued_values: x = 0");
    const Vec p = (1.0 / r) * x;
    const double rho = b.surface().rho_at(p);
    const double phi = b.data().phi->value(p);
    const double s = b.target().s(x);
    if (s <= 1.0) {
      if (r < rho * (1.0 - 1e-10)) throw DomainError("glued_values: x inside D");
      out[i] = std::pow(r / rho, N) - 1.0 + phi;
    } else {
      const double phit = std::pow(b.r1(p) / rho, N) - 1.0 + phi;
      out[i] = om_full[i] + std::pow(s, -P.Lambda) * phit;
    }
  });
  return out;
}

ScalarField inner_data(const SubsolutionBundle& b) {
  const SphereFunctionPtr phi = b.data().phi;
  return [phi](const Vec& x) { return phi->value(normalized(x)); };
}

ScalarField outer_data(const SubsolutionBundle& b, const BarrierSet& barriers, double R, OuterData mode) {
  const QuadraticTarget t = b.target();
  const double mu = b.params().mu;
  const double tail = mode == OuterData::Barrier ? barriers.C_bar * std::pow(R, 1.0 - b.params().beta) : 0.0;
  return [t, mu, tail](const Vec& x) { return t.s(x) + mu + tail; };
}

RingField initial_field(RingGridPtr grid, const SubsolutionBundle& b, const BarrierSet& barriers, OuterData mode,
                        InitKind kind, double shape, int threads) {
  const double R = grid->R();
  std::vector<Vec> xs(grid->size());
  for (std::size_t i = 0; i < grid->size(); ++i) xs[i] = grid->node(i);
  const std::vector<double> ubar = glued_values(b, xs, threads);
  const ScalarField in = inner_data(b), out = outer_data(b, barriers, R, mode);
  const double cbar = mode == OuterData::Barrier ? barriers.C_bar : 0.0;
  const double lam = shape * barriers.lambda_low;
  if (kind == InitKind::MaxBarrier && !(lam > 0.5))
    throw PreconditionError("initial_field: lower-barrier slope must exceed 1/2");
  if (kind == InitKind::Ramp && !(shape >= 2.0)) throw PreconditionError("initial_field: ramp exponent must be >= 2");
  RingField f{grid, std::vector<double>(grid->size())};
  for (std::size_t i = 0; i < grid->size(); ++i) {
    const Vec& x = xs[i];
    switch (grid->tag(i)) {
      case NodeTag::Inner: f.u[i] = in(x); break;
      case NodeTag::Outer: f.u[i] = out(x); break;
      default:
        if (kind == InitKind::MaxBarrier) {
          f.u[i] = std::max(ubar[i], outer_lower_barrier(x, R, b, cbar, lam));
        } else {
          const double y = std::clamp((b.target().s(x) - 1.0) / (R - 1.0), 0.0, 1.0);
          f.u[i] = ubar[i] + std::pow(y, shape) * (out(x) - ubar[i]);
        }
    }
  }
  const ResidualResult r = residual(f, b.k(), threads);
  if (r.inadmissible > 0)
    throw PreconditionError(std::string("initial_field: ") + (kind == InitKind::Ramp ? "ramp" : "max-barrier") +
                            " initialization is not admissible at " + std::to_string(r.inadmissible) + " nodes");
  return f;
}

// ---------------------------------------------------------------- checks

ComparisonReport verify_comparison(const RingField& f, const SubsolutionBundle& b, const BarrierSet& barriers,
                                   int threads) {
  const auto& g = *f.grid;
  std::vector<Vec> xs(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) xs[i] = g.node(i);
  const std::vector<double> ubar = glued_values(b, xs, threads);
  ComparisonReport rep;
  rep.lower = rep.upper = kInf;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double lo = f.u[i] - ubar[i];
    const double hi = outer_upper_barrier(xs[i], g.R(), b, barriers.C_bar) - f.u[i];
    if (lo < rep.lower) rep.lower = lo, rep.lower_node = i;
    if (hi < rep.upper) rep.upper = hi, rep.upper_node = i;
  }
  return rep;
}

double interpolate_on_ray(const RingField& f, std::size_t dir, double r) {
  const auto& g = *f.grid;
  const std::size_t nt = g.n_t();
  const auto rad = [&](std::size_t it) { return norm(g.node(g.index(it, dir))); };
  const double r0 = rad(0), r1 = rad(nt - 1);
  if (r < r0 * (1.0 - 1e-12) || r > r1 * (1.0 + 1e-12)) throw DomainError("interpolate_on_ray: radius outside the ring");
  std::size_t lo = 0, hi = nt - 1;
  while (hi - lo > 1) {
    const std::size_t mid = (lo + hi) / 2;
    (rad(mid) <= r ? lo : hi) = mid;
  }
  const std::size_t start = std::min(nt - 4, lo > 0 ? lo - 1 : 0);
  std::vector<double> xs;
  for (std::size_t j = 0; j < 4; ++j) xs.push_back(std::log(rad(start + j)));
  const auto w = fd_weights(std::log(r), xs, 0);
  double v = 0.0;
  for (std::size_t j = 0; j < 4; ++j) v += w[0][j] * f.u[g.index(start + j, dir)];
  return v;
}

double verify_monotone(const RingField& small_R, const RingField& large_R) {
  const auto& gs = *small_R.grid;
  const auto& gl = *large_R.grid;
  if (gs.n_dir() != gl.n_dir() || gs.angular_counts() != gl.angular_counts() || gs.mode() != gl.mode())
    throw ConfigError("verify_monotone: grids do not share directions");
  if (gs.R() > gl.R()) throw ConfigError("verify_monotone: first field must have the smaller R");
  double worst = -kInf;
  for (std::size_t i = 0; i < gs.size(); ++i) {
    const double v = interpolate_on_ray(large_R, gs.direction_index(i), norm(gs.node(i)));
    worst = std::max(worst, v - small_R.u[i]);
  }
  return worst;
}

GradientReport verify_gradient_maximum(const RingField& f) {
  const auto& g = *f.grid;
  GradientReport rep;
  rep.grad_interior = rep.grad_boundary = rep.lap_interior = rep.lap_boundary = -kInf;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double gr = norm(discrete_gradient(f, i));
    const double lap = discrete_hessian_any(f, i).trace();
    if (g.tag(i) == NodeTag::Interior) {
      rep.grad_interior = std::max(rep.grad_interior, gr);
      rep.lap_interior = std::max(rep.lap_interior, lap);
    } else {
      rep.grad_boundary = std::max(rep.grad_boundary, gr);
      rep.lap_boundary = std::max(rep.lap_boundary, lap);
      if (g.tag(i) == NodeTag::Outer) rep.grad_outer = std::max(rep.grad_outer, gr);
    }
  }
  rep.scale = std::max({1.0, std::fabs(rep.grad_boundary), std::fabs(rep.lap_boundary)});
  return rep;
}

PowerFit fit_power_law(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw AnalysisError("fit_power_law: size mismatch");
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  std::size_t m = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0 && y[i] > 0.0) || !std::isfinite(y[i])) continue;
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx, sy += ly, sxx += lx * lx, sxy += lx * ly, syy += ly * ly;
    ++m;
  }
  if (m < 2) throw AnalysisError("fit_power_law: fewer than two positive samples");
  const double vx = sxx - sx * sx / m, vy = syy - sy * sy / m, cxy = sxy - sx * sy / m;
  if (!(vx > 0.0)) throw AnalysisError("fit_power_law: degenerate abscissae");
  PowerFit fit;
  fit.exponent = cxy / vx;
  fit.intercept = (sy - fit.exponent * sx) / m;
  fit.r2 = vy > 0.0 ? cxy * cxy / (vx * vy) : 1.0;
  fit.points = m;
  return fit;
}

DecayFit decay_fit(const RingField& f, const SubsolutionBundle& b, double R0) {
  const auto& g = *f.grid;
  DecayFit out;
  out.s_lo = 4.0 * std::sqrt(R0);
  out.s_hi = 0.5 * g.R();
  out.target0 = -(2.0 * b.params().beta - 2.0);
  if (!(out.s_hi >= 10.0 * out.s_lo))
    throw AnalysisError("decay_fit: window s in [" + format_double(out.s_lo) + ", " + format_double(out.s_hi) +
                        "] spans less than a decade");
  const SymMatrix A = b.target().matrix();
  std::vector<double> r, e0, e1, e2;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g.tag(i) != NodeTag::Interior) continue;
    const Vec& x = g.node(i);
    const double s = b.target().s(x);
    if (s < out.s_lo || s > out.s_hi) continue;
    r.push_back(norm(x));
    e0.push_back(std::fabs(f.u[i] - s - b.params().mu));
    e1.push_back(norm(discrete_gradient(f, i) - b.target().apply(x)));
    const Spectrum lam = eigenvalues(discrete_hessian(f, i) - A);
    e2.push_back(std::max(std::fabs(lam.min()), std::fabs(lam.max())));
  }
  out.p0 = fit_power_law(r, e0);
  out.p1 = fit_power_law(r, e1);
  out.p2 = fit_power_law(r, e2);
  return out;
}

// ---------------------------------------------------------------- output

FieldTable field_table(const RingField& f, const ResidualResult& res) {
  const auto& g = *f.grid;
  const int n = g.n();
  FieldTable t;
  t.columns.push_back("node");
  for (int a = 0; a < n; ++a) t.columns.push_back("x" + std::to_string(a + 1));
  for (const char* c : {"s", "u", "residual", "admissibility_margin"}) t.columns.push_back(c);
  t.rows = g.size();
  t.data.reserve(t.rows * t.columns.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Vec& x = g.node(i);
    t.data.push_back(static_cast<double>(i));
    for (int a = 0; a < n; ++a) t.data.push_back(x[a]);
    t.data.push_back(g.target().s(x));
    t.data.push_back(f.u[i]);
    t.data.push_back(res.r[i]);
    double m = res.margin[i];
    if (g.tag(i) != NodeTag::Interior) {
      const auto s = sigma_all(eigenvalues(discrete_hessian_any(f, i)).values());
      m = kInf;
      for (int j = 1; j < static_cast<int>(s.size()); ++j) m = std::min(m, s[j]);
    }
    t.data.push_back(m);
  }
  return t;
}

void write_csv(const std::string& path, const FieldTable& t) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  for (std::size_t c = 0; c < t.columns.size(); ++c) out << (c ? "," : "") << t.columns[c];
  out << '\n';
  const std::size_t nc = t.columns.size();
  for (std::size_t i = 0; i < t.rows; ++i) {
    for (std::size_t c = 0; c < nc; ++c) {
      const double v = t.data[i * nc + c];
      out << (c ? "," : "") << (c == 0 ? std::to_string(static_cast<std::size_t>(v)) : format_double(v));
    }
    out << '\n';
  }
}

namespace {

struct BinaryHeader {
  char magic[4];
  std::uint32_t version, n, mode;
  std::uint64_t rows;
  std::uint32_t cols, n_t, n_dir, ang0, ang1;
  char pad[20];
};
static_assert(sizeof(BinaryHeader) == 64, "binary header must be 64 bytes");

}  // namespace

void write_binary(const std::string& path, const RingField& f, const FieldTable& t) {
  const auto& g = *f.grid;
  BinaryHeader h{};
  std::memcpy(h.magic, "HRNG", 4);
  h.version = 1;
  h.n = static_cast<std::uint32_t>(g.n());
  h.mode = g.mode() == SolverMode::Full ? 0u : 1u;
  h.rows = t.rows;
  h.cols = static_cast<std::uint32_t>(t.columns.size());
  h.n_t = static_cast<std::uint32_t>(g.n_t());
  h.n_dir = static_cast<std::uint32_t>(g.n_dir());
  const auto& ang = g.angular_counts();
  h.ang0 = ang.size() > 0 ? static_cast<std::uint32_t>(ang[0]) : 0u;
  h.ang1 = ang.size() > 1 ? static_cast<std::uint32_t>(ang[1]) : 0u;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(&h), sizeof h);
  out.write(reinterpret_cast<const char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * sizeof(double)));
}

FieldTable read_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  BinaryHeader h{};
  in.read(reinterpret_cast<char*>(&h), sizeof h);
  if (!in || std::memcmp(h.magic, "HRNG", 4) != 0) throw ConfigError(path + ": not an HRNG field file");
  if (h.version != 1) throw ConfigError(path + ": unsupported version");
  FieldTable t;
  t.columns.push_back("node");
  for (std::uint32_t a = 0; a < h.n; ++a) t.columns.push_back("x" + std::to_string(a + 1));
  for (const char* c : {"s", "u", "residual", "admissibility_margin"}) t.columns.push_back(c);
  if (t.columns.size() != h.cols) throw ConfigError(path + ": column count mismatch");
  t.rows = h.rows;
  t.data.resize(h.rows * h.cols);
  in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * sizeof(double)));
  if (!in) throw ConfigError(path + ": truncated");
  return t;
}

}  // namespace hring
