#pragma once

// Experiment configuration: JSON document validated against the shipped
// schema (schema/experiment.schema.json), unknown keys rejected.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hring/solver.hpp"

namespace hring::cli {

struct SurfaceSpec {
  std::string type = "sphere";  ///< sphere | ellipsoid | perturbed_sphere | rho_grid | file
  double radius = 1.0;
  std::vector<double> semi_axes;
  std::vector<SphereMode> modes;
  int n_lat = 0, n_lon = 0;
  std::vector<double> values;
  std::string path;  ///< fixture file, relative to the config file
};

struct PhiSpec {
  std::string type = "constant";  ///< constant | modal | surface_quadratic
  double value = 0.0;
  double offset = 0.0;
  std::vector<SphereMode> modes;
};

struct ExperimentConfig {
  // problem
  int n = 3, k = 2;
  std::vector<double> a;
  bool normalize_a = false;
  std::vector<double> b;
  std::optional<double> c;
  SurfaceSpec surface;
  PhiSpec phi;
  // construction
  std::optional<double> beta, eta_gap, Lambda;
  double R0 = 1.0;
  SweepConfig sweep;
  // solver
  std::vector<double> R_list{8.0, 16.0, 32.0, 64.0};
  GridSpec grid;
  NewtonOptions newton;
  OuterData outer_data = OuterData::Barrier;
  InitKind init = InitKind::Ramp;
  double init_shape = 3.0;
  // outputs
  std::string out_dir = "out";
  bool write_csv = true, write_binary = true;
  std::uint64_t seed = 0;

  nlohmann::ordered_json normalized;  ///< fully defaulted document
};

/// Throws ConfigError with the offending key path.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::string& path);

/// Hash of the normalized document.
std::string config_hash(const ExperimentConfig& cfg);
/// Hash of the parts a certified bundle depends on (problem, construction, R list).
std::string certification_hash(const ExperimentConfig& cfg);

/// Problem in solver coordinates y = x - x0, x0 = -A^{-1} b.
struct Problem {
  QuadraticTarget target;
  StarSurface surface;
  BoundaryData data;
  Vec x0;
  std::optional<double> c;  ///< prescribed constant in solver coordinates
};

Problem build_problem(const ExperimentConfig& cfg);

}  // namespace hring::cli
