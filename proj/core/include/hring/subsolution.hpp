#pragma once

// Explicit subsolutions of sigma_k(D^2 u) = 1 outside a star-shaped domain:
// the inner power of b, the radial omega family, its corrected outer
// version, the glued function, and the barriers bracketing the ring problem.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hring/spherical.hpp"

namespace hring {

/// Value, Cartesian gradient and Cartesian Hessian of a scalar field.
struct FieldJet {
  double value = 0.0;
  Vec grad;
  SymMatrix hess;
};

// ---------------------------------------------------------------- omega, mu

/// omega(s) = int_1^s (1 + alpha t^{-beta})^{1/k} dt, s > 0.
double omega(double s, double alpha, double beta, int k);
double omega_prime(double s, double alpha, double beta, int k);
double omega_double_prime(double s, double alpha, double beta, int k);
/// int_s^inf [(1 + alpha t^{-beta})^{1/k} - 1] dt, beta > 1.
double omega_tail(double s, double alpha, double beta, int k);
/// omega(s) - s - mu, computed as -omega_tail(s) (no cancellation).
double omega_remainder(double s, double alpha, double beta, int k);
/// omega at many points by incremental integration between sorted abscissae.
std::vector<double> omega_many(const std::vector<double>& s, double alpha, double beta, int k);
/// mu = int_1^inf [(1 + alpha t^{-beta})^{1/k} - 1] dt - 1. Requires beta > 1.
double mu_of(double alpha, double beta, int k);

SymMatrix hessian_omega(const Vec& x, const QuadraticTarget& target, double alpha, double beta);
/// Closed form sigma_m(D^2 omega) = omega'^m { sigma_m(a) - c sum (a_i x_i)^2 sigma_{m-1}(a|i) }.
double sigma_m_omega(const Vec& x, const QuadraticTarget& target, double alpha, double beta, int m);

struct OmegaBound {
  double exact = 0.0;
  double bound = 0.0;
};
/// exact = sigma_k(D^2 omega); bound = 1 + 2 alpha h_k eta / (k s^beta) with eta = k/(2h_k) - beta.
OmegaBound sigma_k_omega_bound(const Vec& x, const QuadraticTarget& target, double alpha, double beta);

struct Sub7Sides {
  double lhs = 0.0;  ///< sigma_m(a) - (alpha beta / (k s (s^beta + alpha))) sum sigma_{m-1}(a|i) (a_i x_i)^2
  double rhs = 0.0;  ///< sigma_m(a) s^beta / (s^beta + alpha) + 2 alpha eta ubar_h_m / (k (s^beta + alpha))
};
Sub7Sides sub7_sides(const Vec& x, const QuadraticTarget& target, double alpha, double beta, int m);

// ------------------------------------------------------------ boundary data

/// phi on Gamma, given on the sphere through the star parametrization and
/// extended to R^n \ {0} as phi(r, theta) = phi(theta).
struct BoundaryData {
  SphereFunctionPtr phi;
  std::string description;

  static BoundaryData constant(int n, double c);
  static BoundaryData modal(int n, double offset, std::vector<SphereMode> modes);
  /// phi(theta) = 1/2 X^T A X + offset at X = rho(theta) theta.
  static BoundaryData surface_quadratic(const StarSurface& surface, const QuadraticTarget& target, double offset);
  BoundaryData scaled(double c) const;
};

// ------------------------------------------------------------------ bundle

struct BundleParams {
  int N = 0;
  double alpha = 0.0;
  double beta = 0.0;
  double eta_gap = 0.0;  ///< beta = k/(2 h_k) - eta_gap
  double Lambda = 0.0;
  double mu = 0.0;
};

/// Sampling used by every certification sweep.
struct SweepConfig {
  std::vector<int> surface_counts;  ///< SphereGrid counts (n-1 entries)
  int radial_inner = 256;           ///< samples from Gamma to dE_1 along each ray
  int radial_outer = 256;           ///< log-spaced samples of s in [1, outer_s_max]
  double outer_s_max = 1e6;
  int threads = 1;

  static SweepConfig defaults(int n);
  SphereGrid grid(int n) const;
};

class SubsolutionBundle {
 public:
  SubsolutionBundle(QuadraticTarget target, StarSurface surface, BoundaryData data, BundleParams params);

  /// beta-slack placing beta at the midpoint of (k/2, k/(2h_k)).
  static double default_eta_gap(const QuadraticTarget& target);
  /// Parameters with beta from eta_gap, Lambda = beta - 1 unless given, N = alpha = 0.
  static BundleParams initial_params(const QuadraticTarget& target, std::optional<double> eta_gap = {},
                                     std::optional<double> Lambda = {});

  SubsolutionBundle with_N(int N) const;
  SubsolutionBundle with_alpha(double alpha) const;

  const QuadraticTarget& target() const noexcept { return target_; }
  const StarSurface& surface() const noexcept { return surface_; }
  const BoundaryData& data() const noexcept { return data_; }
  const BundleParams& params() const noexcept { return p_; }
  int n() const noexcept { return target_.n(); }
  int k() const noexcept { return target_.k(); }

  /// Radius of dE_1 along the unit vector p.
  double r1(const Vec& p) const;
  /// Radius of dE_lambda along p.
  double radius_of_level(const Vec& p, double level) const;

  /// phi~ = (b^N - 1 + phi) restricted to dE_1, as a function on the sphere.
  SphereJet phi_tilde(const Vec& p) const;

  /// b^N - 1 + phi on closure(E_1) \ D.
  FieldJet inner(const Vec& x) const;
  /// omega(s) + s^{-Lambda} phi~(theta) on R^n \ E_1.
  FieldJet outer(const Vec& x) const;
  /// Hessians only, skipping the quadrature for omega(s); used by sweeps.
  SymMatrix inner_hessian(const Vec& x) const;
  SymMatrix outer_hessian(const Vec& x) const;

  struct Glued {
    double value = 0.0;
    bool on_interface = false;
    double inner_normal = 0.0;  ///< D_nu of the inner piece (nu outward normal of E_1)
    double outer_normal = 0.0;
  };
  /// Piecewise value; on dE_1 (|s - 1| <= tol) both one-sided normal derivatives.
  Glued glued(const Vec& x, double interface_tol = 1e-12) const;
  double value(const Vec& x) const { return glued(x).value; }

 private:
  void check_params() const;
  QuadraticTarget target_;
  StarSurface surface_;
  BoundaryData data_;
  BundleParams p_;
  EllipsoidRadius level1_;
};

// ------------------------------------------------------------ certification

/// Worst sample of a sweep.
struct SweepResult {
  double margin = 0.0;
  Vec worst_point;
};

struct InnerCertificate {
  SweepResult sigma_k;  ///< min (sigma_k - 1)
  SweepResult sigma_m;  ///< min over m < k of sigma_m
  bool passed(double threshold) const { return sigma_k.margin > threshold && sigma_m.margin > threshold; }
};

struct OuterCertificate {
  SweepResult sigma_k;  ///< min (sigma_k - 1) on the outer sweep
  SweepResult sigma_m;  ///< min over m < k of sigma_m
  SweepResult jump;     ///< min (D_nu outer - D_nu inner) on dE_1
  SweepResult gamma;    ///< min (s + mu - phi) on Gamma
  double continuity = 0.0;  ///< max |outer - inner| on dE_1
  bool passed() const {
    return sigma_k.margin > 0.0 && sigma_m.margin > 0.0 && jump.margin > 0.0 && gamma.margin >= 0.0;
  }
};

inline constexpr double kInnerMarginThreshold = 1e-6;

InnerCertificate certify_inner(const SubsolutionBundle& bundle, const SweepConfig& sweep);
OuterCertificate certify_outer(const SubsolutionBundle& bundle, const SweepConfig& sweep);

/// Throws PreconditionError unless Gamma is strictly (k-1)-convex on the sweep
/// grid, and ConfigError unless closure(D) lies in E_1.
void check_domain_hypotheses(const SubsolutionBundle& bundle, const SweepConfig& sweep);

/// Smallest power of two N in [1, 2^20] whose inner sweep passes.
int choose_N(const SubsolutionBundle& bundle, const SweepConfig& sweep, InnerCertificate* certificate = nullptr);
/// Smallest power of two alpha in [1, 2^30] whose outer certificate passes (N fixed).
double choose_alpha(const SubsolutionBundle& bundle, const SweepConfig& sweep,
                    OuterCertificate* certificate = nullptr);
/// alpha >= alpha_min with mu(alpha, beta) = c, by bisection in log alpha.
double alpha_for_mu(double c, double alpha_min, double beta, int k);

// ---------------------------------------------------------------- barriers

struct BarrierSet {
  double R0 = 0.0;
  double C_bar = 0.0;       ///< outer upper barrier constant
  double lambda_low = 0.0;  ///< outer lower barrier slope (> 1/2)
  double eta0 = 0.0;        ///< computed interior-ball radius of Gamma
  double eta_ball = 0.0;    ///< eta used in the upper barrier (<= eta0)
  double C_hat = 0.0;       ///< upper barrier constant
  double remainder_margin = 0.0;     ///< min (C_bar s^{1-beta} - |u_bar - s - mu|) on the s-sweep
  double upper_outer_margin = 0.0;   ///< min (u_bar_R - u_bar) on dE_R, R in the sweep
  double upper_gamma_margin = 0.0;   ///< min (u_bar_R - phi) on Gamma
  double lower_gamma_margin = 0.0;   ///< min (phi - ubar_u_R) on Gamma (R = R0)
  double hat_gamma_margin = 0.0;     ///< min (u_hat - phi) on Gamma away from the tangency point
  double hat_outer_margin = 0.0;     ///< min (u_hat - u_bar_R0) on dE_1
};

/// u_bar_R = s + mu + C_bar R^{1 - beta}.
double outer_upper_barrier(const Vec& x, double R, const SubsolutionBundle& bundle, double C_bar);
/// ubar_u_R = lambda x^T A x - (2 lambda R - R - mu - C_bar R^{1 - beta}).
double outer_lower_barrier(const Vec& x, double R, const SubsolutionBundle& bundle, double C_bar, double lambda);

/// Harmonic-type upper barrier at the boundary point above direction p_hat.
struct UpperBarrier {
  Vec p_hat;       ///< boundary point
  Vec inward;      ///< unit inward normal at p_hat
  Vec z;           ///< ball center p_hat + eta * inward
  Vec grad_phi;    ///< tangential gradient of phi along Gamma at p_hat
  double phi0 = 0.0;
  double C = 0.0;
  double eta = 0.0;
  int n = 3;

  double value(const Vec& x) const;
  FieldJet jet(const Vec& x) const;
};
UpperBarrier make_upper_barrier(const SubsolutionBundle& bundle, const Vec& direction, double C, double eta);

/// C_bar = 1.1 max |u_bar - s - mu| s^{beta-1} over s in [R0, 10 R0].
BarrierSet certify_barriers(const SubsolutionBundle& bundle, double R0, const std::vector<double>& R_list,
                            const SweepConfig& sweep, int barrier_points_colat = 8);

// ----------------------------------------------------------- serialization

struct CertifiedBundle {
  SubsolutionBundle bundle;
  InnerCertificate inner;
  OuterCertificate outer;
  BarrierSet barriers;
  SweepConfig sweep;
};

/// Runs the hypotheses check, choose_N, choose_alpha (and alpha_for_mu when
/// c is given) and the barrier certification.
CertifiedBundle certify(const QuadraticTarget& target, const StarSurface& surface, const BoundaryData& data,
                        const BundleParams& initial, const SweepConfig& sweep, double R0,
                        const std::vector<double>& R_list, std::optional<double> c = {});

/// Key-value text, one "key = value" per line in a fixed order; doubles in %.17g.
std::string serialize_bundle(const CertifiedBundle& cb, const std::map<std::string, std::string>& extra = {});
/// Parses the key-value document back into a map.
std::map<std::string, std::string> parse_bundle_document(const std::string& text);

}  // namespace hring
