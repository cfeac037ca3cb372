#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace hring {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation (x = 0, m > n, s <= 0, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Caller-side contract violated (e.g. spectrum not in the required cone).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A certification sweep could not exhibit the requested witness.
class CertificationError : public Error {
 public:
  CertificationError(std::string reason, std::vector<double> worst_point, double worst_margin)
      : Error(reason + " (worst margin " + std::to_string(worst_margin) + ")"),
        reason_(std::move(reason)),
        worst_point_(std::move(worst_point)),
        worst_margin_(worst_margin) {}

  const std::string& reason() const noexcept { return reason_; }
  const std::vector<double>& worst_point() const noexcept { return worst_point_; }
  double worst_margin() const noexcept { return worst_margin_; }

 private:
  std::string reason_;
  std::vector<double> worst_point_;
  double worst_margin_;
};

/// Newton iteration failed (line search exhausted or iteration cap without tolerance).
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Invalid experiment configuration or mismatched inputs.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Post-processing could not be carried out (e.g. fit window too narrow).
class AnalysisError : public Error {
 public:
  using Error::Error;
};

}  // namespace hring
