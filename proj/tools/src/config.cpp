#include "config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "hring/text.hpp"

namespace hring::cli {

namespace {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

// Checked access to one JSON object; every key read is recorded so that
// leftovers can be reported as unknown.
class Node {
 public:
  Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("expected an object");
  }
  ~Node() = default;

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }
  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }
  double number(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_number()) fail(key, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(key, "must be finite");
    return x;
  }
  double number(const std::string& key, double def) { return has(key) ? number(key) : def; }
  int integer(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_number_integer()) fail(key, "expected an integer");
    return v.get<int>();
  }
  int integer(const std::string& key, int def) { return has(key) ? integer(key) : def; }
  bool boolean(const std::string& key, bool def) {
    if (!has(key)) return def;
    const json& v = raw(key);
    if (!v.is_boolean()) fail(key, "expected true or false");
    return v.get<bool>();
  }
  std::string string(const std::string& key, const std::string& def) {
    if (!has(key)) return def;
    const json& v = raw(key);
    if (!v.is_string()) fail(key, "expected a string");
    return v.get<std::string>();
  }
  std::vector<double> numbers(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_array()) fail(key, "expected an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) fail(key, "expected an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }
  std::vector<int> integers(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_array()) fail(key, "expected an array of integers");
    std::vector<int> out;
    for (const auto& e : v) {
      if (!e.is_number_integer()) fail(key, "expected an array of integers");
      out.push_back(e.get<int>());
    }
    return out;
  }
  Node child(const std::string& key) { return Node(raw(key), path_ + "." + key); }
  std::string path(const std::string& key) const { return path_ + "." + key; }

  void finish() const {
    for (const auto& [key, _] : j_.items())
      if (!seen_.count(key)) throw ConfigError(path_ + "." + key + ": unknown key");
  }
  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ConfigError(path_ + "." + key + ": " + what);
  }
  [[noreturn]] void fail(const std::string& what) const { throw ConfigError(path_ + ": " + what); }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::vector<SphereMode> parse_modes(Node& node, const std::string& key) {
  const json& v = node.raw(key);
  if (!v.is_array()) node.fail(key, "expected an array of modes");
  std::vector<SphereMode> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    Node m(v[i], node.path(key) + "[" + std::to_string(i) + "]");
    SphereMode s;
    s.l = m.integer("l");
    s.m = m.integer("m");
    s.c = m.number("c");
    m.finish();
    out.push_back(s);
  }
  return out;
}

ojson modes_json(const std::vector<SphereMode>& modes) {
  ojson a = ojson::array();
  for (const auto& m : modes) a.push_back(ojson{{"l", m.l}, {"m", m.m}, {"c", m.c}});
  return a;
}

void require(bool ok, const std::string& where, const std::string& what) {
  if (!ok) throw ConfigError(where + ": " + what);
}

}  // namespace

ExperimentConfig parse_config(const json& doc) {
  ExperimentConfig cfg;
  Node root(doc, "config");

  {
    Node p = root.child("problem");
    cfg.n = p.integer("n");
    cfg.k = p.integer("k");
    require(cfg.n >= 3 && cfg.n <= 5, "config.problem.n", "must be in [3, 5]");
    require(cfg.k >= 2 && cfg.k <= cfg.n - 1, "config.problem.k", "must be in [2, n-1]");
    cfg.a = p.numbers("a");
    require(static_cast<int>(cfg.a.size()) == cfg.n, "config.problem.a", "needs n entries");
    for (double x : cfg.a) require(x > 0.0, "config.problem.a", "entries must be positive");
    cfg.normalize_a = p.boolean("normalize_a", false);
    if (cfg.normalize_a) {
      const double sc = std::pow(sigma(cfg.k, cfg.a), -1.0 / cfg.k);
      for (double& x : cfg.a) x *= sc;
    }
    require(std::fabs(sigma(cfg.k, cfg.a) - 1.0) <= 1e-12, "config.problem.a",
            "sigma_k(a) must equal 1 (set normalize_a to rescale)");
    cfg.b = p.has("b") ? p.numbers("b") : std::vector<double>(cfg.n, 0.0);
    require(static_cast<int>(cfg.b.size()) == cfg.n, "config.problem.b", "needs n entries");
    if (p.has("c")) cfg.c = p.number("c");

    Node s = p.child("surface");
    cfg.surface.type = s.string("type", "sphere");
    const std::string& t = cfg.surface.type;
    if (t == "sphere") {
      cfg.surface.radius = s.number("radius", 1.0);
    } else if (t == "ellipsoid") {
      cfg.surface.semi_axes = s.numbers("semi_axes");
    } else if (t == "perturbed_sphere") {
      cfg.surface.radius = s.number("radius", 1.0);
      cfg.surface.modes = parse_modes(s, "modes");
    } else if (t == "rho_grid") {
      cfg.surface.n_lat = s.integer("n_lat");
      cfg.surface.n_lon = s.integer("n_lon");
      cfg.surface.values = s.numbers("values");
    } else if (t == "file") {
      cfg.surface.path = s.string("path", "");
      require(!cfg.surface.path.empty(), "config.problem.surface.path", "required for type 'file'");
    } else {
      s.fail("type", "unknown surface type '" + t + "'");
    }
    s.finish();

    Node f = p.child("phi");
    cfg.phi.type = f.string("type", "constant");
    if (cfg.phi.type == "constant") {
      cfg.phi.value = f.number("value", 0.0);
    } else if (cfg.phi.type == "modal") {
      cfg.phi.offset = f.number("offset", 0.0);
      cfg.phi.modes = parse_modes(f, "modes");
    } else if (cfg.phi.type == "surface_quadratic") {
      cfg.phi.offset = f.number("offset", 0.0);
    } else {
      f.fail("type", "unknown phi type '" + cfg.phi.type + "'");
    }
    f.finish();
    p.finish();
  }

  cfg.sweep = SweepConfig::defaults(cfg.n);
  if (root.has("construction")) {
    Node c = root.child("construction");
    if (c.has("beta")) cfg.beta = c.number("beta");
    if (c.has("eta_gap")) cfg.eta_gap = c.number("eta_gap");
    require(!(cfg.beta && cfg.eta_gap), "config.construction", "give beta or eta_gap, not both");
    if (c.has("Lambda")) cfg.Lambda = c.number("Lambda");
    const QuadraticTarget target(cfg.a, cfg.k);
    const auto [lo, hi] = target.beta_range();
    require(lo < hi, "config.problem.a", "empty beta range (k/2, k/(2 h_k))");
    const auto range = "(" + format_double(lo) + ", " + format_double(hi) + ")";
    if (cfg.beta) require(target.beta_admissible(*cfg.beta), "config.construction.beta", "outside " + range);
    if (cfg.eta_gap)
      require(target.beta_admissible(hi - *cfg.eta_gap), "config.construction.eta_gap", "beta = k/(2 h_k) - eta_gap outside " + range);
    if (cfg.Lambda) {
      const double beta = cfg.beta ? *cfg.beta : cfg.eta_gap ? hi - *cfg.eta_gap : 0.5 * (lo + hi);
      require(*cfg.Lambda >= beta - 1.0, "config.construction.Lambda", "must be at least beta - 1");
    }
    cfg.R0 = c.number("R0", 1.0);
    require(cfg.R0 >= 1.0, "config.construction.R0", "must be at least 1");
    if (c.has("sweep")) {
      Node w = c.child("sweep");
      if (w.has("surface")) cfg.sweep.surface_counts = w.integers("surface");
      cfg.sweep.radial_inner = w.integer("radial_inner", cfg.sweep.radial_inner);
      cfg.sweep.radial_outer = w.integer("radial_outer", cfg.sweep.radial_outer);
      cfg.sweep.outer_s_max = w.number("outer_s_max", cfg.sweep.outer_s_max);
      w.finish();
    }
    require(static_cast<int>(cfg.sweep.surface_counts.size()) == cfg.n - 1, "config.construction.sweep.surface",
            "needs n-1 counts");
    c.finish();
  }

  if (root.has("solver")) {
    Node s = root.child("solver");
    if (s.has("R")) cfg.R_list = s.numbers("R");
    require(!cfg.R_list.empty(), "config.solver.R", "needs at least one radius");
    for (std::size_t i = 0; i < cfg.R_list.size(); ++i) {
      require(cfg.R_list[i] >= cfg.R0, "config.solver.R", "every R must be at least R0");
      if (i) require(cfg.R_list[i] > cfg.R_list[i - 1], "config.solver.R", "must be strictly increasing");
    }
    const std::string mode = s.string("mode", "full");
    require(mode == "full" || mode == "radial", "config.solver.mode", "must be 'full' or 'radial'");
    cfg.grid.mode = mode == "full" ? SolverMode::Full : SolverMode::Radial;
    cfg.grid.n_t = s.integer("n_t", cfg.grid.n_t);
    if (s.has("angular")) cfg.grid.angular = s.integers("angular");
    cfg.grid.n_r = s.integer("n_r", cfg.grid.n_r);
    cfg.grid.stencil_cache_mb = s.number("stencil_cache_mb", cfg.grid.stencil_cache_mb);
    cfg.newton.tol = s.number("tol", cfg.newton.tol);
    cfg.newton.max_iter = s.integer("max_iter", cfg.newton.max_iter);
    cfg.newton.max_halvings = s.integer("max_halvings", cfg.newton.max_halvings);
    cfg.newton.linear_rel_tol = s.number("linear_rel_tol", cfg.newton.linear_rel_tol);
    const std::string od = s.string("outer_data", "barrier");
    require(od == "barrier" || od == "asymptote", "config.solver.outer_data", "must be 'barrier' or 'asymptote'");
    cfg.outer_data = od == "barrier" ? OuterData::Barrier : OuterData::Asymptote;
    const std::string init = s.string("init", "ramp");
    require(init == "ramp" || init == "max_barrier", "config.solver.init", "must be 'ramp' or 'max_barrier'");
    cfg.init = init == "ramp" ? InitKind::Ramp : InitKind::MaxBarrier;
    cfg.init_shape = s.number("init_shape", cfg.init == InitKind::Ramp ? 3.0 : 1.0);
    s.finish();
  }
  require(static_cast<int>(cfg.grid.angular.size()) == cfg.n - 1, "config.solver.angular", "needs n-1 counts");
  require(cfg.newton.tol > 0 && cfg.newton.max_iter > 0 && cfg.newton.max_halvings >= 0, "config.solver",
          "tolerances and iteration counts must be positive");

  if (root.has("outputs")) {
    Node o = root.child("outputs");
    cfg.out_dir = o.string("directory", cfg.out_dir);
    if (o.has("formats")) {
      cfg.write_csv = cfg.write_binary = false;
      const json& f = o.raw("formats");
      require(f.is_array(), "config.outputs.formats", "expected an array");
      for (const auto& e : f) {
        const std::string v = e.is_string() ? e.get<std::string>() : "";
        if (v == "csv") cfg.write_csv = true;
        else if (v == "binary") cfg.write_binary = true;
        else throw ConfigError("config.outputs.formats: unknown format '" + e.dump() + "'");
      }
    }
    o.finish();
  }
  if (root.has("seed")) {
    const json& v = root.raw("seed");
    require(v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0), "config.seed",
            "expected a non-negative integer");
    cfg.seed = v.get<std::uint64_t>();
  }
  root.finish();

  // Normalized document: every default made explicit, fixed key order.
  ojson problem{{"n", cfg.n}, {"k", cfg.k}, {"a", cfg.a}, {"b", cfg.b}};
  problem["c"] = cfg.c ? ojson(*cfg.c) : ojson(nullptr);
  ojson surf{{"type", cfg.surface.type}};
  if (cfg.surface.type == "sphere") surf["radius"] = cfg.surface.radius;
  if (cfg.surface.type == "ellipsoid") surf["semi_axes"] = cfg.surface.semi_axes;
  if (cfg.surface.type == "perturbed_sphere") {
    surf["radius"] = cfg.surface.radius;
    surf["modes"] = modes_json(cfg.surface.modes);
  }
  if (cfg.surface.type == "rho_grid") {
    surf["n_lat"] = cfg.surface.n_lat;
    surf["n_lon"] = cfg.surface.n_lon;
    surf["values"] = cfg.surface.values;
  }
  if (cfg.surface.type == "file") surf["path"] = cfg.surface.path;
  problem["surface"] = surf;
  ojson phi{{"type", cfg.phi.type}};
  if (cfg.phi.type == "constant") phi["value"] = cfg.phi.value;
  else phi["offset"] = cfg.phi.offset;
  if (cfg.phi.type == "modal") phi["modes"] = modes_json(cfg.phi.modes);
  problem["phi"] = phi;
  ojson cons;
  cons["beta"] = cfg.beta ? ojson(*cfg.beta) : ojson(nullptr);
  cons["eta_gap"] = cfg.eta_gap ? ojson(*cfg.eta_gap) : ojson(nullptr);
  cons["Lambda"] = cfg.Lambda ? ojson(*cfg.Lambda) : ojson(nullptr);
  cons["R0"] = cfg.R0;
  cons["sweep"] = ojson{{"surface", cfg.sweep.surface_counts},
                        {"radial_inner", cfg.sweep.radial_inner},
                        {"radial_outer", cfg.sweep.radial_outer},
                        {"outer_s_max", cfg.sweep.outer_s_max}};
  ojson solver{{"R", cfg.R_list},
               {"mode", cfg.grid.mode == SolverMode::Full ? "full" : "radial"},
               {"n_t", cfg.grid.n_t},
               {"angular", cfg.grid.angular},
               {"n_r", cfg.grid.n_r},
               {"stencil_cache_mb", cfg.grid.stencil_cache_mb},
               {"tol", cfg.newton.tol},
               {"max_iter", cfg.newton.max_iter},
               {"max_halvings", cfg.newton.max_halvings},
               {"linear_rel_tol", cfg.newton.linear_rel_tol},
               {"outer_data", cfg.outer_data == OuterData::Barrier ? "barrier" : "asymptote"},
               {"init", cfg.init == InitKind::Ramp ? "ramp" : "max_barrier"},
               {"init_shape", cfg.init_shape}};
  ojson formats = ojson::array();
  if (cfg.write_csv) formats.push_back("csv");
  if (cfg.write_binary) formats.push_back("binary");
  cfg.normalized = ojson{{"problem", problem},
                         {"construction", cons},
                         {"solver", solver},
                         {"outputs", ojson{{"directory", cfg.out_dir}, {"formats", formats}}},
                         {"seed", cfg.seed}};
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  ExperimentConfig cfg = parse_config(doc);
  if (cfg.surface.type == "file") {
    std::filesystem::path p(cfg.surface.path);
    if (p.is_relative()) p = std::filesystem::path(path).parent_path() / p;
    cfg.surface.path = p.lexically_normal().string();
  }
  return cfg;
}

std::string config_hash(const ExperimentConfig& cfg) { return hex64(fnv1a64(cfg.normalized.dump())); }

std::string certification_hash(const ExperimentConfig& cfg) {
  ojson part{{"problem", cfg.normalized["problem"]},
             {"construction", cfg.normalized["construction"]},
             {"R", cfg.normalized["solver"]["R"]}};
  if (cfg.surface.type == "file") {
    std::ifstream in(cfg.surface.path);
    std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    part["surface_file"] = hex64(fnv1a64(body));
  }
  return hex64(fnv1a64(part.dump()));
}

// ------------------------------------------------------------------ problem

namespace {

StarSurface make_surface(const ExperimentConfig& cfg) {
  const auto& s = cfg.surface;
  try {
    if (s.type == "sphere") return StarSurface::sphere(cfg.n, s.radius);
    if (s.type == "ellipsoid") {
      require(static_cast<int>(s.semi_axes.size()) == cfg.n, "config.problem.surface.semi_axes", "needs n entries");
      return StarSurface::ellipsoid(s.semi_axes);
    }
    if (s.type == "perturbed_sphere") return StarSurface::perturbed_sphere(cfg.n, s.radius, s.modes);
    if (s.type == "rho_grid") {
      require(cfg.n == 3, "config.problem.surface", "rho_grid needs n = 3");
      return StarSurface::rho_grid(s.n_lat, s.n_lon, s.values);
    }
    StarSurface f = load_surface(s.path);
    require(f.n() == cfg.n, "config.problem.surface", "fixture dimension differs from n");
    return f;
  } catch (const DomainError& e) {
    throw ConfigError(std::string("config.problem.surface: ") + e.what());
  }
}

// Boundary data read at the original surface point hit by the ray from x0.
class ShiftedData final : public SphereFunction {
 public:
  ShiftedData(SphereFunctionPtr phi, StarSurface shifted, Vec x0)
      : phi_(std::move(phi)), shifted_(std::move(shifted)), x0_(std::move(x0)) {}
  int dim() const noexcept override { return phi_->dim(); }
  SphereJet jet(const Vec&) const override { throw DomainError("shifted data: sampled values only"); }
  double value(const Vec& p) const override { return phi_->value(normalized(x0_ + shifted_.rho_at(p) * p)); }

 private:
  SphereFunctionPtr phi_;
  StarSurface shifted_;
  Vec x0_;
};

// Radial function of D seen from x0, sampled on a lat-lon grid by bisection
// along each ray.
StarSurface shift_surface(const StarSurface& s, const Vec& x0, int n_lat, int n_lon) {
  const auto g = [&](const Vec& dir, double t) {
    const Vec y = x0 + t * dir;
    const double r = norm(y);
    return r - (r > 0.0 ? s.rho_at((1.0 / r) * y) : 0.0);
  };
  const Vec origin_dir = norm(x0) > 0.0 ? normalized(x0) : Vec::unit(3, 2);
  if (!(norm(x0) < s.rho_at(origin_dir))) throw ConfigError("config.problem.b: -A^{-1} b must lie inside D");
  std::vector<double> vals(static_cast<std::size_t>(n_lat) * n_lon);
  for (int j = 0; j < n_lat; ++j)
    for (int l = 0; l < n_lon; ++l) {
      const Vec dir = PolarChart::point((j + 0.5) * M_PI / n_lat, 2.0 * M_PI * l / n_lon);
      double hi = 1.0;
      while (g(dir, hi) < 0.0) hi *= 2.0;
      int changes = 0;
      double prev = g(dir, 1e-9 * hi);
      for (int q = 1; q <= 256; ++q) {
        const double cur = g(dir, hi * q / 128.0);
        if ((cur > 0.0) != (prev > 0.0)) ++changes;
        prev = cur;
      }
      if (changes != 1) throw ConfigError("config.problem.b: D is not star-shaped about -A^{-1} b");
      double lo = 0.0;
      for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (g(dir, mid) < 0.0 ? lo : hi) = mid;
      }
      vals[static_cast<std::size_t>(j) * n_lon + l] = 0.5 * (lo + hi);
    }
  return StarSurface::rho_grid(n_lat, n_lon, std::move(vals));
}

}  // namespace

Problem build_problem(const ExperimentConfig& cfg) {
  const QuadraticTarget target(cfg.a, cfg.k);
  StarSurface surface = make_surface(cfg);
  Vec x0(cfg.n);
  double shift_c = 0.0;
  bool shifted = false;
  for (int i = 0; i < cfg.n; ++i) {
    x0[i] = -cfg.b[i] / cfg.a[i];
    shift_c += 0.5 * cfg.a[i] * x0[i] * x0[i];
    shifted = shifted || cfg.b[i] != 0.0;
  }
  const auto data_on = [&](const StarSurface& surf) {
    if (cfg.phi.type == "constant") return BoundaryData::constant(cfg.n, cfg.phi.value);
    if (cfg.phi.type == "modal") return BoundaryData::modal(cfg.n, cfg.phi.offset, cfg.phi.modes);
    return BoundaryData::surface_quadratic(surf, target, cfg.phi.offset);
  };
  Problem p{target, surface, data_on(surface), x0, {}};
  if (cfg.c) p.c = *cfg.c - shift_c;
  if (!shifted) return p;
  require(cfg.n == 3, "config.problem.b", "a nonzero b is supported for n = 3");
  const int n_lat = std::max(64, 2 * cfg.sweep.surface_counts[0]);
  const int n_lon = std::max(128, 2 * cfg.sweep.surface_counts[1]);
  p.surface = shift_surface(surface, x0, n_lat, n_lon);
  if (cfg.phi.type == "surface_quadratic") {
    // 1/2 X^T A X + b.X + offset at the boundary point X; in y = X - x0 this
    // is 1/2 y^T A y + offset - shift_c.
    p.data = BoundaryData::surface_quadratic(p.surface, target, cfg.phi.offset - shift_c);
  } else {
    const BoundaryData orig = data_on(surface);
    const auto phi = std::make_shared<ShiftedData>(orig.phi, p.surface, x0);
    p.data = BoundaryData{LatLonGridFunction::sample(*phi, n_lat, n_lon), orig.description + " shifted"};
  }
  return p;
}

}  // namespace hring::cli
