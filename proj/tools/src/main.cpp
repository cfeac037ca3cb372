#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"

int main(int argc, char** argv) {
  using namespace hring::cli;
  CLI::App app{"Certified subsolutions and ring solver for sigma_k(D^2 u) = 1 in exterior domains", "hring"};
  app.set_version_flag("--version", kVersionTag);
  app.require_subcommand(1);

  Options opt;
  std::uint64_t seed = 0;
  const auto common = [&](CLI::App* sub, bool needs_config) {
    auto* c = sub->add_option("--config", opt.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
    if (needs_config) c->required();
    sub->add_option("--out", opt.out, "Output directory (overrides outputs.directory)");
    sub->add_option("--threads", opt.threads, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "Seed for randomized sampling");
  };
  auto* certify = app.add_subcommand("certify", "Certify the subsolution bundle and barriers");
  common(certify, true);
  auto* solve = app.add_subcommand("solve", "Solve the ring problem for every R in the config");
  common(solve, true);
  solve->add_option("--bundle", opt.bundle, "Bundle from certify")->check(CLI::ExistingFile);
  auto* decay = app.add_subcommand("decay", "Fit decay exponents of the largest-R solution");
  common(decay, true);
  decay->add_option("--bundle", opt.bundle, "Bundle from certify")->check(CLI::ExistingFile);
  auto* selftest = app.add_subcommand("selftest", "Run the fast identity suites");
  common(selftest, false);
  selftest->add_option("--fault", opt.fault, "Inject a fault (sigma)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kConfig;
  }
  for (auto* sub : {certify, solve, decay, selftest})
    if (sub->get_option("--seed")->count()) opt.seed = seed;

  try {
    if (*certify) return cmd_certify(opt);
    if (*solve) return cmd_solve(opt);
    if (*decay) return cmd_decay(opt);
    return cmd_selftest(opt);
  } catch (...) {
    return exit_code(std::current_exception());
  }
}
