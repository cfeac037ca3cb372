#pragma once

// Subcommands of the hring tool. Each returns the process exit code; library
// errors propagate and are mapped by exit_code().

#include <cstdint>
#include <exception>
#include <optional>
#include <string>

namespace hring::cli {

inline constexpr const char* kVersionTag = "hring " HRING_VERSION;

enum Exit : int { kOk = 0, kSelftestFailed = 1, kConfig = 2, kCertification = 3, kSolver = 4, kAnalysis = 5 };

struct Options {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::string> bundle;
  int threads = 1;
  std::optional<std::uint64_t> seed;
  std::string fault;  ///< selftest only: "sigma" corrupts the sigma recurrence
};

int cmd_certify(const Options& opt);
int cmd_solve(const Options& opt);
int cmd_decay(const Options& opt);
int cmd_selftest(const Options& opt);

/// Exit code for an exception escaping a command; writes the message to stderr.
int exit_code(const std::exception_ptr& e);

}  // namespace hring::cli
