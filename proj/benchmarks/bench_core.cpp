#include <benchmark/benchmark.h>

#include <random>

#include "mcflab/flow.hpp"
#include "mcflab/grid.hpp"
#include "mcflab/smallalg.hpp"

using namespace mcflab;

namespace {

InitialData fourier_initial(int points) {
  Scenario s;
  s.name = "fourier";
  s.generator = GeneratorKind::fourier;
  s.dim = 2;
  s.codim = 2;
  s.points = points;
  return generate_initial(s);
}

void BM_SingularSpectrum(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  std::vector<Jacobian> jacs(256, Jacobian(n, n));
  for (auto& j : jacs)
    for (int a = 0; a < n; ++a)
      for (int i = 0; i < n; ++i) j(a, i) = normal(rng);
  std::size_t k = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(singular_spectrum(jacs[k++ % jacs.size()]));
  }
}
BENCHMARK(BM_SingularSpectrum)->Arg(1)->Arg(2)->Arg(3)->Arg(4);

void BM_Step(benchmark::State& state) {
  const InitialData init = fourier_initial(static_cast<int>(state.range(0)));
  const double dt = cfl_dt(init.state, 0.25);
  GraphState out = init.state;
  for (auto _ : state) {
    step_into(init.state, dt, out);
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(init.state.grid.node_count()));
}
BENCHMARK(BM_Step)->Arg(33)->Arg(65)->Arg(129);

void BM_MtLaplacian(benchmark::State& state) {
  const InitialData init = fourier_initial(static_cast<int>(state.range(0)));
  const MetricField metric = metric_field(init.state);
  ScalarField f = ScalarField::filled(init.state.grid.node_count(), 0.0);
  f.values = init.state.heights[0];
  for (auto _ : state) {
    benchmark::DoNotOptimize(mt_laplacian(metric, f));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(init.state.grid.node_count()));
}
BENCHMARK(BM_MtLaplacian)->Arg(33)->Arg(65)->Arg(129);

}  // namespace

BENCHMARK_MAIN();
