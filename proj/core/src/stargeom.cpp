#include "hring/stargeom.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "hring/parallel.hpp"

namespace hring {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

StarSurface::StarSurface(SphereFunctionPtr rho, SurfaceKind kind, std::string description)
    : rho_(std::move(rho)), kind_(kind), description_(std::move(description)) {
  if (!rho_) throw DomainError("StarSurface: null radial function");
}

StarSurface StarSurface::sphere(int n, double radius) {
  if (!(radius > 0.0)) throw DomainError("sphere: radius must be positive");
  return {std::make_shared<ConstantFunction>(n, radius), SurfaceKind::ClosedForm,
          "kind sphere\nn " + std::to_string(n) + "\nradius " + fmt(radius) + "\n"};
}

StarSurface StarSurface::ellipsoid(std::vector<double> semi_axes) {
  std::string d = "kind ellipsoid\nn " + std::to_string(semi_axes.size()) + "\naxes";
  for (double c : semi_axes) d += " " + fmt(c);
  d += "\n";
  return {std::make_shared<EllipsoidRadius>(std::move(semi_axes)), SurfaceKind::ClosedForm, d};
}

StarSurface StarSurface::perturbed_sphere(int n, double radius, std::vector<SphereMode> modes) {
  std::string d = "kind perturbed-sphere\nn " + std::to_string(n) + "\nradius " + fmt(radius) + "\n";
  for (const auto& m : modes) d += "mode " + std::to_string(m.l) + " " + std::to_string(m.m) + " " + fmt(m.c) + "\n";
  return {std::make_shared<ModalFunction>(n, radius, std::move(modes)), SurfaceKind::ClosedForm, d};
}

StarSurface StarSurface::rho_grid(int n_lat, int n_lon, std::vector<double> values) {
  for (double v : values)
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("rho-grid: values must be positive and finite");
  std::string d = "rho-grid " + std::to_string(n_lat) + " " + std::to_string(n_lon) + "\n";
  for (int j = 0; j < n_lat; ++j) {
    for (int l = 0; l < n_lon; ++l) d += (l ? " " : "") + fmt(values[j * n_lon + l]);
    d += "\n";
  }
  return {std::make_shared<LatLonGridFunction>(n_lat, n_lon, std::move(values)), SurfaceKind::SampledGrid, d};
}

StarSurface StarSurface::scaled(double c) const {
  if (!(c > 0.0)) throw DomainError("scaled: factor must be positive");
  return {std::make_shared<AffineOf>(rho_, c, 0.0), kind_, description_ + "scale " + fmt(c) + "\n"};
}

double StarSurface::rho_at(const Vec& p) const {
  const double r = rho_->value(p);
  if (!(r > 0.0)) throw DomainError("radial function is not positive at a sample direction");
  return r;
}

SphereJet StarSurface::rho_jet(const Vec& p) const {
  SphereJet j = rho_->jet(p);
  if (!(j.value > 0.0)) throw DomainError("radial function is not positive at a sample direction");
  return j;
}

SurfaceJet jet_at(const StarSurface& surface, const Vec& p) { return jet_at(surface, p, tangent_frame(p)); }

SurfaceJet jet_at(const StarSurface& surface, const Vec& p, const Mat& frame) {
  const int n = surface.n();
  const int d = n - 1;
  if (p.size() != n) throw DomainError("jet_at: dimension mismatch");
  const SphereJet rj = surface.rho_jet(p);
  SurfaceJet s;
  s.p = p;
  s.frame = frame;
  s.rho = rj.value;
  s.grad_rho = Vec(d);
  s.hess_rho = SymMatrix(d);
  for (int i = 0; i < d; ++i) {
    const Vec ei = frame.column(i);
    s.grad_rho[i] = dot(ei, rj.grad);
    const Vec he = rj.hess * ei;
    for (int j = i; j < d; ++j) s.hess_rho.set(i, j, dot(frame.column(j), he));
  }
  const double r = s.rho;
  s.dphi = (1.0 / r) * s.grad_rho;
  s.d2phi = (1.0 / r) * s.hess_rho;
  s.d2phi -= SymMatrix::outer(s.dphi);
  const double q = dot(s.dphi, s.dphi);
  s.w = std::sqrt(1.0 + q);
  const double w = s.w;
  s.g = r * r * (SymMatrix::identity(d) + SymMatrix::outer(s.dphi));
  s.g_inv = (1.0 / (r * r)) * (SymMatrix::identity(d) - SymMatrix::outer(s.dphi, 1.0 / (w * w)));
  s.gamma = (1.0 / r) * (SymMatrix::identity(d) - SymMatrix::outer(s.dphi, 1.0 / (w * (1.0 + w))));
  s.h = (r / w) * (SymMatrix::identity(d) + SymMatrix::outer(s.dphi) - s.d2phi);
  Mat gm(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) gm(i, j) = s.gamma(i, j);
  s.a = congruence(gm, s.h);
  s.kappa = eigenvalues(s.a);
  s.normal = (1.0 / w) * (p - (1.0 / r) * rj.grad);
  return s;
}

ConvexityReport is_strictly_jconvex(const StarSurface& surface, int j, const SphereGrid& grid, int threads) {
  const int n = surface.n();
  if (j < 1 || j > n - 1) throw DomainError("is_strictly_jconvex: j outside [1, n-1]");
  const ArgMin best = parallel_argmin(grid.size(), threads, [&](std::size_t i) {
    return in_gamma(j, jet_at(surface, grid.direction(i)).kappa).margin;
  });
  ConvexityReport out;
  out.min_margin = best.value;
  out.worst_direction = grid.direction(best.index);
  out.strictly = best.value >= kStrictConvexityMargin;
  return out;
}

double frak_b(const StarSurface& surface, const Vec& x) {
  const double r = norm(x);
  if (!(r > 0.0)) throw DomainError("frak_b: x = 0");
  return r / surface.rho_at((1.0 / r) * x);
}

double interior_ball_radius(const StarSurface& surface, const SphereGrid& grid, int threads) {
  const std::size_t m = grid.size();
  std::vector<Vec> pts(m), inward(m);
  std::vector<double> curv(m);
  parallel_for(m, threads, [&](std::size_t i) {
    const Vec p = grid.direction(i);
    const SurfaceJet s = jet_at(surface, p);
    pts[i] = s.rho * p;
    inward[i] = -s.normal;
    curv[i] = s.kappa.max();
  });
  const ArgMin best = parallel_argmin(m, threads, [&](std::size_t i) {
    double r = curv[i] > 0.0 ? 1.0 / curv[i] : std::numeric_limits<double>::infinity();
    for (std::size_t q = 0; q < m; ++q) {
      if (q == i) continue;
      const Vec d = pts[q] - pts[i];
      const double den = 2.0 * dot(d, inward[i]);
      if (den > 0.0) r = std::min(r, dot(d, d) / den);
    }
    return r;
  });
  return 0.5 * best.value;
}

namespace {

std::string strip_comment(const std::string& line) {
  const auto pos = line.find('#');
  return pos == std::string::npos ? line : line.substr(0, pos);
}

}  // namespace

StarSurface parse_surface(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) {
    line = strip_comment(line);
    if (line.find_first_not_of(" \t\r") != std::string::npos) lines.push_back(line);
  }
  if (lines.empty()) throw ConfigError("surface document is empty");

  std::istringstream head(lines[0]);
  std::string first;
  head >> first;
  if (first == "rho-grid") {
    int n_lat = 0, n_lon = 0;
    if (!(head >> n_lat >> n_lon) || n_lat <= 0 || n_lon <= 0) throw ConfigError("rho-grid: bad header");
    std::vector<double> vals;
    for (std::size_t i = 1; i < lines.size(); ++i) {
      std::istringstream ls(lines[i]);
      std::string tok;
      while (ls >> tok) {
        try {
          std::size_t used = 0;
          vals.push_back(std::stod(tok, &used));
          if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::logic_error&) {
          throw ConfigError("rho-grid: non-numeric token '" + tok + "'");
        }
      }
    }
    if (vals.size() != static_cast<std::size_t>(n_lat) * n_lon)
      throw ConfigError("rho-grid: expected " + std::to_string(n_lat * n_lon) + " values, found " +
                        std::to_string(vals.size()));
    try {
      return StarSurface::rho_grid(n_lat, n_lon, std::move(vals));
    } catch (const DomainError& e) {
      throw ConfigError(e.what());
    }
  }

  std::string kind;
  int n = 0;
  double radius = 1.0, scale = 1.0;
  std::vector<double> axes;
  std::vector<SphereMode> modes;
  for (const auto& l : lines) {
    std::istringstream ls(l);
    std::string key;
    ls >> key;
    if (key == "kind") {
      ls >> kind;
    } else if (key == "n") {
      ls >> n;
    } else if (key == "radius") {
      ls >> radius;
    } else if (key == "scale") {
      ls >> scale;
    } else if (key == "axes") {
      double v;
      while (ls >> v) axes.push_back(v);
    } else if (key == "mode") {
      SphereMode m;
      if (!(ls >> m.l >> m.m >> m.c)) throw ConfigError("surface: mode needs 'l m c'");
      modes.push_back(m);
    } else {
      throw ConfigError("surface: unknown key '" + key + "'");
    }
    if (ls.fail() && !ls.eof()) throw ConfigError("surface: malformed line '" + l + "'");
  }
  try {
    StarSurface s = [&] {
      if (kind == "sphere") return StarSurface::sphere(n, radius);
      if (kind == "ellipsoid") {
        if (n != 0 && static_cast<int>(axes.size()) != n) throw ConfigError("ellipsoid: axes count differs from n");
        return StarSurface::ellipsoid(axes);
      }
      if (kind == "perturbed-sphere") return StarSurface::perturbed_sphere(n, radius, modes);
      throw ConfigError("surface: unknown kind '" + kind + "'");
    }();
    if (s.n() < 2) throw ConfigError("surface: dimension n must be given and >= 2");
    return scale == 1.0 ? s : s.scaled(scale);
  } catch (const DomainError& e) {
    throw ConfigError(std::string("surface: ") + e.what());
  }
}

StarSurface load_surface(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open surface fixture " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_surface(ss.str());
}

}  // namespace hring
