#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "config.hpp"
#include "hring/text.hpp"

namespace hring::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

ExperimentConfig load(const Options& opt) {
  ExperimentConfig cfg = load_config(opt.config);
  if (opt.out) cfg.out_dir = *opt.out;
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const ojson& j) { write_text(path, j.dump(2) + "\n"); }

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ojson header(const ExperimentConfig& cfg, const std::string& command) {
  return ojson{{"version", kVersionTag}, {"command", command}, {"config_hash", config_hash(cfg)}};
}

std::string r_label(double R) {
  std::ostringstream os;
  os << R;
  return os.str();
}

ojson margins_json(const CertifiedBundle& cb) {
  const auto& B = cb.barriers;
  return ojson{{"inner_sigma_k", cb.inner.sigma_k.margin},
               {"inner_sigma_m", cb.inner.sigma_m.margin},
               {"outer_sigma_k", cb.outer.sigma_k.margin},
               {"outer_sigma_m", cb.outer.sigma_m.margin},
               {"jump", cb.outer.jump.margin},
               {"gamma", cb.outer.gamma.margin},
               {"continuity", cb.outer.continuity},
               {"remainder", B.remainder_margin},
               {"upper_outer", B.upper_outer_margin},
               {"upper_gamma", B.upper_gamma_margin},
               {"lower_gamma", B.lower_gamma_margin},
               {"hat_gamma", B.hat_gamma_margin},
               {"hat_outer", B.hat_outer_margin}};
}

BundleParams initial_params(const ExperimentConfig& cfg, const Problem& p) {
  std::optional<double> eta = cfg.eta_gap;
  if (cfg.beta) eta = p.target.beta_range().second - *cfg.beta;
  return SubsolutionBundle::initial_params(p.target, eta, cfg.Lambda);
}

struct Certified {
  SubsolutionBundle bundle;
  BarrierSet barriers;
};

CertifiedBundle run_certification(const ExperimentConfig& cfg, const Problem& p, int threads) {
  SweepConfig sw = cfg.sweep;
  sw.threads = threads;
  return certify(p.target, p.surface, p.data, initial_params(cfg, p), sw, cfg.R0, cfg.R_list, p.c);
}

std::string bundle_text(const CertifiedBundle& cb, const ExperimentConfig& cfg) {
  return serialize_bundle(cb, {{"certification.hash", certification_hash(cfg)}, {"version", kVersionTag}});
}

// Rebuilds the bundle and barriers from a bundle document, after checking that
// it was certified for this configuration.
Certified load_bundle(const fs::path& path, const ExperimentConfig& cfg, const Problem& p) {
  const auto doc = parse_bundle_document(read_text(path));
  const auto get = [&](const std::string& key) -> const std::string& {
    const auto it = doc.find(key);
    if (it == doc.end()) throw ConfigError(path.string() + ": missing key '" + key + "'");
    return it->second;
  };
  const auto num = [&](const std::string& key) {
    const std::string& v = get(key);
    try {
      std::size_t used = 0;
      const double x = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return x;
    } catch (const std::logic_error&) {
      throw ConfigError(path.string() + ": '" + key + "' is not a number");
    }
  };
  const std::string want = certification_hash(cfg);
  if (get("certification.hash") != want)
    throw ConfigError("bundle hash mismatch: " + path.string() + " has " + get("certification.hash") +
                      ", config needs " + want);
  if (get("surface.hash") != hex64(fnv1a64(p.surface.description())) ||
      get("data.hash") != hex64(fnv1a64(p.data.description)))
    throw ConfigError("bundle hash mismatch: surface or boundary data differ from the config");
  BundleParams P;
  P.N = static_cast<int>(num("N"));
  P.alpha = num("alpha");
  P.beta = num("beta");
  P.eta_gap = num("eta_gap");
  P.Lambda = num("Lambda");
  P.mu = num("mu");
  BarrierSet B;
  B.R0 = num("barrier.R0");
  B.C_bar = num("barrier.C_bar");
  B.lambda_low = num("barrier.lambda_low");
  B.eta0 = num("barrier.eta0");
  B.eta_ball = num("barrier.eta_ball");
  B.C_hat = num("barrier.C_hat");
  B.remainder_margin = num("margins.remainder");
  B.upper_outer_margin = num("margins.upper_outer");
  B.upper_gamma_margin = num("margins.upper_gamma");
  B.lower_gamma_margin = num("margins.lower_gamma");
  B.hat_gamma_margin = num("margins.hat_gamma");
  B.hat_outer_margin = num("margins.hat_outer");
  try {
    return {SubsolutionBundle(p.target, p.surface, p.data, P), B};
  } catch (const DomainError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

Certified bundle_for(const Options& opt, const ExperimentConfig& cfg, const Problem& p) {
  if (opt.bundle) return load_bundle(*opt.bundle, cfg, p);
  const fs::path def = fs::path(cfg.out_dir) / "bundle.txt";
  if (fs::exists(def)) return load_bundle(def, cfg, p);
  std::cerr << "hring: no bundle given, certifying\n";
  const CertifiedBundle cb = run_certification(cfg, p, opt.threads);
  return {cb.bundle, cb.barriers};
}

ojson fit_json(const PowerFit& f) {
  return ojson{{"exponent", f.exponent}, {"intercept", f.intercept}, {"r2", f.r2}, {"points", f.points}};
}

}  // namespace

// ------------------------------------------------------------------ certify

int cmd_certify(const Options& opt) {
  const ExperimentConfig cfg = load(opt);
  const Problem p = build_problem(cfg);
  const CertifiedBundle cb = run_certification(cfg, p, opt.threads);
  const fs::path dir(cfg.out_dir);
  write_text(dir / "bundle.txt", bundle_text(cb, cfg));
  const auto& P = cb.bundle.params();
  ojson rep = header(cfg, "certify");
  rep["certification_hash"] = certification_hash(cfg);
  rep["params"] = ojson{{"N", P.N}, {"alpha", P.alpha}, {"beta", P.beta},  {"eta_gap", P.eta_gap},
                        {"Lambda", P.Lambda}, {"mu", P.mu}};
  rep["barriers"] = ojson{{"R0", cb.barriers.R0},         {"C_bar", cb.barriers.C_bar},
                          {"lambda_low", cb.barriers.lambda_low}, {"eta0", cb.barriers.eta0},
                          {"eta_ball", cb.barriers.eta_ball},     {"C_hat", cb.barriers.C_hat}};
  rep["margins"] = margins_json(cb);
  write_json(dir / "certify_report.json", rep);
  std::cout << "certified: N = " << P.N << ", alpha = " << format_double(P.alpha) << ", mu = " << format_double(P.mu)
            << "\nbundle: " << (dir / "bundle.txt").string() << "\n";
  return kOk;
}

// ------------------------------------------------------------------- solve

int cmd_solve(const Options& opt) {
  ExperimentConfig cfg = load(opt);
  const Problem p = build_problem(cfg);
  const Certified c = bundle_for(opt, cfg, p);
  NewtonOptions nopt = cfg.newton;
  nopt.threads = opt.threads;
  const int k = cfg.k;
  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir);

  std::vector<RingField> fields;
  ojson runs = ojson::array();
  std::vector<double> outer_grad;
  bool checks_ok = true;
  for (double R : cfg.R_list) {
    const auto t0 = std::chrono::steady_clock::now();
    const RingGridPtr g = RingGrid::build(p.surface, p.target, R, cfg.grid);
    RingField f0;
    try {
      f0 = initial_field(g, c.bundle, c.barriers, cfg.outer_data, cfg.init, cfg.init_shape, opt.threads);
    } catch (const PreconditionError& e) {
      throw ConvergenceError(std::string("R = ") + r_label(R) + ": initialization: " + e.what());
    }
    SolveReport rep;
    RingField u;
    try {
      u = newton_solve(f0, k, nopt, &rep);
    } catch (const ConvergenceError& e) {
      throw ConvergenceError(std::string("R = ") + r_label(R) + ": " + e.what());
    }
    const ResidualResult res = residual(u, k, opt.threads);
    const ComparisonReport cmp = verify_comparison(u, c.bundle, c.barriers, opt.threads);
    const GradientReport gr = verify_gradient_maximum(u);
    outer_grad.push_back(gr.grad_outer);
    checks_ok = checks_ok && cmp.ok() && gr.ok();

    const std::string label = r_label(R);
    const FieldTable table = field_table(u, res);
    if (cfg.write_csv) write_csv((dir / ("field_R" + label + ".csv")).string(), table);
    if (cfg.write_binary) write_binary((dir / ("field_R" + label + ".bin")).string(), u, table);

    ojson hist = ojson::array();
    for (double h : rep.residual_history) hist.push_back(h);
    ojson r = header(cfg, "solve");
    r["R"] = R;
    r["mode"] = cfg.grid.mode == SolverMode::Full ? "full" : "radial";
    r["nodes"] = g->size();
    r["newton"] = ojson{{"residual_history", hist},
                        {"final_residual", res.max_abs},
                        {"tolerance", nopt.tol},
                        {"noise_floor", rep.noise_floor},
                        {"at_noise_floor", rep.at_noise_floor},
                        {"admissibility_margin", res.min_margin},
                        {"inadmissible_nodes", res.inadmissible},
                        {"iterations", rep.iterations},
                        {"halvings", rep.halvings},
                        {"restarts", rep.restarts},
                        {"linear_solver", rep.linear_solver}};
    r["comparison"] = ojson{{"min_u_minus_lower", cmp.lower},
                            {"lower_node", cmp.lower_node},
                            {"min_upper_minus_u", cmp.upper},
                            {"upper_node", cmp.upper_node},
                            {"ok", cmp.ok()}};
    r["gradient"] = ojson{{"grad_interior", gr.grad_interior}, {"grad_boundary", gr.grad_boundary},
                          {"lap_interior", gr.lap_interior},   {"lap_boundary", gr.lap_boundary},
                          {"grad_outer", gr.grad_outer},       {"scale", gr.scale},
                          {"ok", gr.ok()}};
    write_json(dir / ("report_R" + label + ".json"), r);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "R = " << label << ": residual " << format_double(res.max_abs) << " after " << rep.iterations
              << " iterations (" << std::fixed << std::setprecision(2) << secs << std::defaultfloat << " s)\n";
    if (!cmp.ok()) std::cerr << "hring: R = " << label << ": barrier ordering violated\n";
    if (!gr.ok()) std::cerr << "hring: R = " << label << ": interior gradient or Laplacian maximum\n";
    fields.push_back(std::move(u));
  }

  ojson mono = ojson::array();
  for (std::size_t i = 0; i + 1 < fields.size(); ++i) {
    const double inc = verify_monotone(fields[i], fields[i + 1]);
    const bool ok = inc <= 1e-8;
    checks_ok = checks_ok && ok;
    mono.push_back(ojson{{"R_small", cfg.R_list[i]}, {"R_large", cfg.R_list[i + 1]}, {"max_increase", inc}, {"ok", ok}});
    if (!ok) std::cerr << "hring: u_R not decreasing between R = " << cfg.R_list[i] << " and " << cfg.R_list[i + 1] << "\n";
  }
  ojson summary = header(cfg, "solve");
  summary["R"] = cfg.R_list;
  summary["monotone"] = mono;
  if (fields.size() >= 2) {
    const PowerFit f = fit_power_law(cfg.R_list, outer_grad);
    ojson j = fit_json(f);
    j["target"] = 0.5;
    j["ok"] = std::fabs(f.exponent - 0.5) <= 0.1;
    summary["outer_gradient_fit"] = j;
  }
  summary["checks_ok"] = checks_ok;
  write_json(dir / "solve_summary.json", summary);
  return kOk;
}

// ------------------------------------------------------------------- decay

int cmd_decay(const Options& opt) {
  const ExperimentConfig cfg = load(opt);
  const Problem p = build_problem(cfg);
  const Certified c = bundle_for(opt, cfg, p);
  const double R = cfg.R_list.back();
  const fs::path dir(cfg.out_dir);
  const fs::path bin = dir / ("field_R" + r_label(R) + ".bin");
  if (!fs::exists(bin)) throw ConfigError("missing " + bin.string() + " (run solve with binary output first)");

  const RingGridPtr g = RingGrid::build(p.surface, p.target, R, cfg.grid);
  const FieldTable t = read_binary(bin.string());
  const std::size_t nc = t.columns.size();
  if (t.rows != g->size() || nc != static_cast<std::size_t>(cfg.n) + 5)
    throw ConfigError(bin.string() + ": grid differs from the config");
  RingField f{g, std::vector<double>(t.rows)};
  for (std::size_t i = 0; i < t.rows; ++i) {
    const double* row = &t.data[i * nc];
    for (int a = 0; a < cfg.n; ++a)
      if (std::fabs(row[1 + a] - g->node(i)[a]) > 1e-12 * (1.0 + std::fabs(row[1 + a])))
        throw ConfigError(bin.string() + ": node positions differ from the config grid");
    f.u[i] = row[cfg.n + 2];
  }

  const DecayFit d = decay_fit(f, c.bundle, cfg.R0);
  const double beta = c.bundle.params().beta;
  std::ostringstream csv;
  csv << "m,exponent,target,s_lo,s_hi,r2,points\n";
  ojson rows = ojson::array();
  const PowerFit* fits[3] = {&d.p0, &d.p1, &d.p2};
  for (int m = 0; m < 3; ++m) {
    const double target = -(2.0 * beta - 2.0 + m);
    csv << m << "," << format_double(fits[m]->exponent) << "," << format_double(target) << ","
        << format_double(d.s_lo) << "," << format_double(d.s_hi) << "," << format_double(fits[m]->r2) << ","
        << fits[m]->points << "\n";
    ojson j = fit_json(*fits[m]);
    j["m"] = m;
    j["target"] = target;
    rows.push_back(j);
  }
  write_text(dir / "decay.csv", csv.str());
  ojson rep = header(cfg, "decay");
  rep["R"] = R;
  rep["window"] = ojson{{"s_lo", d.s_lo}, {"s_hi", d.s_hi}};
  rep["fits"] = rows;
  write_json(dir / "decay_report.json", rep);
  std::cout << csv.str();
  return kOk;
}

// ------------------------------------------------------------------ errors

int exit_code(const std::exception_ptr& e) {
  try {
    std::rethrow_exception(e);
  } catch (const ConfigError& x) {
    std::cerr << "hring: config error: " << x.what() << "\n";
    return kConfig;
  } catch (const CertificationError& x) {
    std::cerr << "hring: certification failure: " << x.reason() << "\n  worst margin "
              << format_double(x.worst_margin()) << " at (";
    for (std::size_t i = 0; i < x.worst_point().size(); ++i)
      std::cerr << (i ? ", " : "") << format_double(x.worst_point()[i]);
    std::cerr << ")\n";
    return kCertification;
  } catch (const PreconditionError& x) {
    std::cerr << "hring: certification failure: " << x.what() << "\n";
    return kCertification;
  } catch (const ConvergenceError& x) {
    std::cerr << "hring: solver failure: " << x.what() << "\n";
    return kSolver;
  } catch (const AnalysisError& x) {
    std::cerr << "hring: analysis failure: " << x.what() << "\n";
    return kAnalysis;
  } catch (const DomainError& x) {
    std::cerr << "hring: config error: " << x.what() << "\n";
    return kConfig;
  } catch (const std::exception& x) {
    std::cerr << "hring: error: " << x.what() << "\n";
    return kConfig;
  }
}

}  // namespace hring::cli
