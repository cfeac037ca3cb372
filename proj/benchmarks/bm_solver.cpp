#include <benchmark/benchmark.h>

#include "hring/solver.hpp"

namespace {

const hring::CertifiedBundle& fixture() {
  static const auto t = hring::QuadraticTarget::isotropic(3, 2);
  static const auto s = hring::StarSurface::sphere(3, 1.0);
  static const hring::CertifiedBundle cb =
      hring::certify(t, s, hring::BoundaryData::constant(3, 0.0), hring::SubsolutionBundle::initial_params(t),
                     hring::SweepConfig::defaults(3), 1.0, {16.0});
  return cb;
}

hring::RingField initial(const hring::GridSpec& spec) {
  const auto& cb = fixture();
  const auto g = hring::RingGrid::build(cb.bundle.surface(), cb.bundle.target(), 16.0, spec);
  return hring::initial_field(g, cb.bundle, cb.barriers, hring::OuterData::Barrier, hring::InitKind::Ramp);
}

hring::GridSpec full_spec(int n_t, int colat) {
  hring::GridSpec g;
  g.n_t = n_t;
  g.angular = {colat, 2 * colat};
  return g;
}

hring::GridSpec radial_spec(int n_r) {
  hring::GridSpec g;
  g.mode = hring::SolverMode::Radial;
  g.n_r = n_r;
  return g;
}

void BM_BuildFullGrid(benchmark::State& state) {
  const auto& cb = fixture();
  const auto spec = full_spec(static_cast<int>(state.range(0)), static_cast<int>(state.range(0)) / 2);
  for (auto _ : state) benchmark::DoNotOptimize(hring::RingGrid::build(cb.bundle.surface(), cb.bundle.target(), 16.0, spec));
}
BENCHMARK(BM_BuildFullGrid)->Arg(12)->Arg(24)->Unit(benchmark::kMillisecond);

void BM_ResidualFull(benchmark::State& state) {
  const auto f = initial(full_spec(static_cast<int>(state.range(0)), static_cast<int>(state.range(0)) / 2));
  for (auto _ : state) benchmark::DoNotOptimize(hring::residual(f, 2));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(f.u.size()));
}
BENCHMARK(BM_ResidualFull)->Arg(12)->Arg(24)->Unit(benchmark::kMillisecond);

void BM_NewtonRadial(benchmark::State& state) {
  const auto f = initial(radial_spec(static_cast<int>(state.range(0))));
  for (auto _ : state) benchmark::DoNotOptimize(hring::newton_solve(f, 2, hring::NewtonOptions{}));
}
BENCHMARK(BM_NewtonRadial)->Arg(1024)->Arg(4096)->Unit(benchmark::kMillisecond);

void BM_NewtonFull(benchmark::State& state) {
  const auto f = initial(full_spec(12, 6));
  for (auto _ : state) benchmark::DoNotOptimize(hring::newton_solve(f, 2, hring::NewtonOptions{}));
}
BENCHMARK(BM_NewtonFull)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
