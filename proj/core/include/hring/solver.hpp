#pragma once

// Finite-difference solver for sigma_k(D^2 u) = 1 on the ring E_R \ closure(D)
// with Dirichlet data, plus the post-solve checks: barrier ordering,
// monotonicity in R, boundary maxima of |Du| and Laplacian, and decay fits.

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "hring/subsolution.hpp"

namespace hring {

enum class SolverMode { Full, Radial };
enum class NodeTag : std::uint8_t { Interior, Inner, Outer };

struct GridSpec {
  SolverMode mode = SolverMode::Full;
  int n_t = 24;                      ///< radial nodes (full mode), boundaries included
  std::vector<int> angular{16, 32};  ///< SphereGrid counts (full mode)
  int n_r = 4096;                    ///< radial nodes (radial mode)
  double stencil_cache_mb = 512.0;   ///< stencils are cached below this size
};

/// Linear weights of a node's stencil: grad = sum_j u_j g_j, hess = sum_j u_j H_j.
struct Stencil {
  std::vector<std::size_t> nodes;
  std::vector<double> grad_w;  ///< nodes.size() x n
  std::vector<double> hess_w;  ///< nodes.size() x n(n+1)/2, packed upper triangle (row-major)
};

/// Nodes of closure(E_R \ D). Full mode: r = rho^{1-t} r_R^t along the rays of
/// a SphereGrid, with r_R the radius of dE_R; derivatives by least-squares
/// quadratic fits on the 2n^2+1 point index stencil (exact for quadratics).
/// Radial mode: log-spaced radii along e_1 with three-point Lagrange
/// derivatives; requires a round sphere and an isotropic target.
class RingGrid {
 public:
  static std::shared_ptr<const RingGrid> build(const StarSurface& surface, const QuadraticTarget& target, double R,
                                               const GridSpec& spec);

  SolverMode mode() const noexcept { return mode_; }
  int n() const noexcept { return n_; }
  double R() const noexcept { return R_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  std::size_t n_t() const noexcept { return n_t_; }
  std::size_t n_dir() const noexcept { return n_dir_; }
  const std::vector<int>& angular_counts() const noexcept { return angular_; }
  std::size_t index(std::size_t it, std::size_t dir) const noexcept { return it * n_dir_ + dir; }
  std::size_t radial_index(std::size_t node) const noexcept { return node / n_dir_; }
  std::size_t direction_index(std::size_t node) const noexcept { return node % n_dir_; }
  const Vec& node(std::size_t i) const noexcept { return nodes_[i]; }
  NodeTag tag(std::size_t i) const noexcept;
  const QuadraticTarget& target() const noexcept { return target_; }
  /// Symmetric stencil at interior nodes, one-sided at boundary nodes.
  Stencil stencil(std::size_t node) const;
  /// Radial coordinate t in [0, 1] of a node.
  double t_of(std::size_t node) const noexcept { return t_[radial_index(node)]; }

 private:
  RingGrid(SolverMode mode, const QuadraticTarget& target) : mode_(mode), target_(target) {}
  Stencil compute_stencil(std::size_t node) const;
  Stencil radial_stencil(std::size_t node) const;

  SolverMode mode_;
  QuadraticTarget target_;
  int n_ = 3;
  double R_ = 0.0;
  std::size_t n_t_ = 0, n_dir_ = 1;
  std::vector<int> angular_;
  std::vector<double> t_;
  std::vector<Vec> nodes_;
  std::unique_ptr<SphereGrid> sphere_;
  std::vector<Stencil> cache_;
};

using RingGridPtr = std::shared_ptr<const RingGrid>;

struct RingField {
  RingGridPtr grid;
  std::vector<double> u;
};

using ScalarField = std::function<double(const Vec&)>;

/// Field with u = inner on Gamma, outer on dE_R and interior elsewhere.
RingField make_field(RingGridPtr grid, const ScalarField& inner, const ScalarField& outer, const ScalarField& interior);

SymMatrix discrete_hessian(const RingField& f, std::size_t node);      ///< interior nodes only
SymMatrix discrete_hessian_any(const RingField& f, std::size_t node);  ///< one-sided at the boundary
Vec discrete_gradient(const RingField& f, std::size_t node);

/// dF/dH for F = sigma_k^{1/k}, H with spectrum in Gamma_k.
SymMatrix linearized_coefficients(const SymMatrix& h, int k);

struct ResidualResult {
  std::vector<double> r;       ///< sigma_k^{1/k} - 1 at interior nodes (0 on the boundary)
  std::vector<double> margin;  ///< min_{m<=k} sigma_m at interior nodes (+inf on the boundary)
  double max_abs = 0.0;
  std::size_t worst = 0;
  double min_margin = 0.0;
  std::size_t inadmissible = 0;
};
/// Inadmissible nodes are flagged (margin <= 0) and report sigma_k^{1/k} of max(sigma_k, 0).
ResidualResult residual(const RingField& f, int k, int threads = 1);

struct NewtonOptions {
  double tol = 1e-9;
  int max_iter = 100;
  int max_halvings = 30;
  double linear_rel_tol = 1e-3;
  int max_restarts = 3;  ///< restarts from the midpoint with the initial field
  int threads = 1;
};

struct SolveReport {
  std::vector<double> residual_history;
  double final_residual = 0.0;
  double admissibility_margin = 0.0;
  double noise_floor = 0.0;  ///< rounding level of the residual at the final iterate
  bool at_noise_floor = false;  ///< stopped at the rounding level above tol
  int iterations = 0;
  int halvings = 0;
  int restarts = 0;
  std::string linear_solver;
  double seconds = 0.0;
};

/// Damped Newton iteration. `init` must be admissible at every interior node
/// and carries the Dirichlet data on its boundary nodes. Stops once the
/// max-norm residual is below max(tol, noise floor); the floor is
/// 4 eps max_i sum_j |dF/dH : W_ij| |u_j|, the rounding level of the residual.
RingField newton_solve(const RingField& init, int k, const NewtonOptions& options, SolveReport* report = nullptr);

// ------------------------------------------------------------ problem data

enum class OuterData { Barrier, Asymptote };

/// Values of the glued subsolution at many points (batched omega).
std::vector<double> glued_values(const SubsolutionBundle& b, const std::vector<Vec>& xs, int threads = 1);

/// Dirichlet data of the ring problem: phi on Gamma and u_bar_R (or s + mu) on dE_R.
ScalarField inner_data(const SubsolutionBundle& b);
ScalarField outer_data(const SubsolutionBundle& b, const BarrierSet& barriers, double R, OuterData mode);

enum class InitKind { Ramp, MaxBarrier };
/// Ramp: u_bar + y^shape (g - u_bar) with y = (s - 1) / (R - 1) clamped to [0, 1]
/// and g the outer data extended by its formula in s; shape >= 2 keeps the ramp convex.
/// MaxBarrier: max(u_bar, ubar_u_R) with slope shape * lambda_low.
/// Throws PreconditionError when the result is not admissible.
RingField initial_field(RingGridPtr grid, const SubsolutionBundle& b, const BarrierSet& barriers, OuterData mode,
                        InitKind kind, double shape = 3.0, int threads = 1);

// ---------------------------------------------------------------- checks

struct ComparisonReport {
  double lower = 0.0;      ///< min (u - u_bar)
  double upper = 0.0;      ///< min (u_bar_R - u)
  std::size_t lower_node = 0, upper_node = 0;
  bool ok(double tol = 1e-8) const { return lower > -tol && upper > -tol; }
};
ComparisonReport verify_comparison(const RingField& f, const SubsolutionBundle& b, const BarrierSet& barriers,
                                   int threads = 1);

/// Interpolates a field along its rays at radius r of direction index dir (cubic in log r).
double interpolate_on_ray(const RingField& f, std::size_t dir, double r);

/// max over nodes of the smaller-R field of (u_large - u_small); both grids share directions.
double verify_monotone(const RingField& small_R, const RingField& large_R);

struct GradientReport {
  double grad_interior = 0.0, grad_boundary = 0.0;
  double lap_interior = 0.0, lap_boundary = 0.0;
  double grad_outer = 0.0;  ///< max |Du| on dE_R
  double scale = 1.0;
  bool ok(double rel = 1e-6) const {
    return grad_interior <= grad_boundary + rel * scale && lap_interior <= lap_boundary + rel * scale;
  }
};
GradientReport verify_gradient_maximum(const RingField& f);

struct PowerFit {
  double exponent = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::size_t points = 0;
};
/// Least squares of log y on log x over entries with x, y > 0.
PowerFit fit_power_law(const std::vector<double>& x, const std::vector<double>& y);

struct DecayFit {
  PowerFit p0, p1, p2;
  double s_lo = 0.0, s_hi = 0.0;
  double target0 = 0.0;  ///< -(2 beta - 2)
};
/// Fits |E|, |D E| and |D^2 E| against |x| on nodes with s in [4 sqrt(R0), R/2],
/// E = u - (s + mu). Throws AnalysisError when the window spans less than a decade.
DecayFit decay_fit(const RingField& f, const SubsolutionBundle& b, double R0);

// ---------------------------------------------------------------- output

struct FieldTable {
  std::vector<std::string> columns;
  std::vector<double> data;  ///< row-major
  std::size_t rows = 0;
};
FieldTable field_table(const RingField& f, const ResidualResult& res);
void write_csv(const std::string& path, const FieldTable& t);
/// 64-byte header: "HRNG", u32 version, u32 n, u32 mode, u64 rows, u32 cols,
/// u32 n_t, u32 n_dir, u32 angular counts[2], padding; then rows x cols doubles.
void write_binary(const std::string& path, const RingField& f, const FieldTable& t);
FieldTable read_binary(const std::string& path);

}  // namespace hring
