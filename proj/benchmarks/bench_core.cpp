// Microbenchmarks for the hot paths: Hamiltonian application, one spectral
// step over a drive period, a Husimi grid row, and the stroboscopic map.
#include <benchmark/benchmark.h>

#include "dimerlab/coherent.hpp"
#include "dimerlab/meanfield.hpp"
#include "dimerlab/model.hpp"
#include "dimerlab/propagate.hpp"

using namespace dimerlab;

namespace {

DimerParams scaled_params(int n) {
  DimerParams p;
  p.n = n;
  p.kappa = 0.92 / n;
  return p;
}

void bm_apply_hamiltonian(benchmark::State& state) {
  const DimerParams p = scaled_params(static_cast<int>(state.range(0)));
  ManyBodyState psi = coherent_state(p, {-0.497, 0.0});
  Vector out(p.dim());
  double t = 0.0;
  for (auto _ : state) {
    apply_hamiltonian(p, t, psi.amps, out);
    benchmark::DoNotOptimize(out.data());
    t += 1e-3;
  }
  state.SetItemsProcessed(state.iterations() * p.dim());
}
BENCHMARK(bm_apply_hamiltonian)->Arg(500)->Arg(2000)->Arg(5000);

void bm_spectral_period(benchmark::State& state) {
  const DimerParams p = scaled_params(static_cast<int>(state.range(0)));
  SpectralPropagator prop(p);
  ManyBodyState psi = coherent_state(p, {-0.497, 0.0});
  Vector work = psi.amps;
  double t = 0.0;
  const double period = p.period();
  for (auto _ : state) {
    prop.advance(work, t, t + period);
    benchmark::DoNotOptimize(work.data());
    t += period;
  }
}
BENCHMARK(bm_spectral_period)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

void bm_husimi_row(benchmark::State& state) {
  const DimerParams p = scaled_params(static_cast<int>(state.range(0)));
  const ManyBodyState psi = coherent_state(p, {0.3, 1.0});
  // One grid row = a fixed p slice, sweeping phi.
  int row = 0;
  for (auto _ : state) {
    const double pv = -1.0 + 2.0 * (row % 201) / 200.0;
    double acc = 0.0;
    for (int j = 0; j < 201; ++j) {
      const double phi = -M_PI + 2.0 * M_PI * (j + 1) / 201;
      acc += husimi_value(psi, {pv, phi});
    }
    benchmark::DoNotOptimize(acc);
    ++row;
  }
  state.SetItemsProcessed(state.iterations() * 201);
}
BENCHMARK(bm_husimi_row)->Arg(500)->Arg(2000);

void bm_poincare_map(benchmark::State& state) {
  MeanFieldParams mf;
  PhasePoint x{0.45, 0.0};
  for (auto _ : state) {
    x = poincare_map(mf, x, 1);
    benchmark::DoNotOptimize(x);
  }
}
BENCHMARK(bm_poincare_map)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
