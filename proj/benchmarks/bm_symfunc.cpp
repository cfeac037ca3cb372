#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "hring/spherical.hpp"
#include "hring/subsolution.hpp"

namespace {

std::vector<double> random_vector(int n) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<double> x(n);
  for (double& v : x) v = u(rng);
  return x;
}

void BM_SigmaK(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto x = random_vector(n);
  for (auto _ : state) benchmark::DoNotOptimize(hring::sigma(n / 2, x));
}
BENCHMARK(BM_SigmaK)->Arg(3)->Arg(5)->Arg(16)->Arg(64);

void BM_SigmaAll(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto x = random_vector(n);
  for (auto _ : state) benchmark::DoNotOptimize(hring::sigma_all(x));
}
BENCHMARK(BM_SigmaAll)->Arg(3)->Arg(5)->Arg(16)->Arg(64);

void BM_Eigenvalues(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto x = random_vector(n * n);
  hring::SymMatrix m(n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) m.set(i, j, x[i * n + j]);
  for (auto _ : state) benchmark::DoNotOptimize(hring::eigenvalues(m));
}
BENCHMARK(BM_Eigenvalues)->Arg(3)->Arg(5);

void BM_StructuredSigma(benchmark::State& state) {
  const auto s = hring::StarSurface::ellipsoid({0.9, 1.0, 1.1});
  const hring::Vec x{1.1, 0.3, -0.4};
  for (auto _ : state) benchmark::DoNotOptimize(hring::sigma_m_structured(s, x, 3.0, 40.0, 2));
}
BENCHMARK(BM_StructuredSigma);

void BM_HessianOfPhiOfB(benchmark::State& state) {
  const auto s = hring::StarSurface::ellipsoid({0.9, 1.0, 1.1});
  const hring::Vec x{1.1, 0.3, -0.4};
  for (auto _ : state) benchmark::DoNotOptimize(hring::hessian_of_phi_of_b(s, x, 3.0, 40.0));
}
BENCHMARK(BM_HessianOfPhiOfB);

void BM_MuOf(benchmark::State& state) {
  const double alpha = static_cast<double>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(hring::mu_of(alpha, 1.25, 2));
}
BENCHMARK(BM_MuOf)->Arg(1)->Arg(16)->Arg(100);

}  // namespace

BENCHMARK_MAIN();
