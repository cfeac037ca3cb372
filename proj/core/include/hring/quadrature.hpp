#pragma once

#include <functional>

namespace hring {

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;  ///< Kronrod-minus-Gauss estimate, summed over panels.
  int evaluations = 0;
  bool converged = false;
};

/// Globally adaptive Gauss-Kronrod (7/15) on [a, b]. Bisects the panel with the
/// largest error estimate until error <= max(abs_tol, rel_tol * |value|) or
/// the panel budget is exhausted.
QuadratureResult integrate(const std::function<double(double)>& f, double a, double b, double rel_tol = 1e-12,
                           double abs_tol = 0.0, int max_panels = 4000);

}  // namespace hring
