#include <benchmark/benchmark.h>

#include "memsim/meminductor.hpp"

using namespace memsim;

static void BM_hysteresis_trace(benchmark::State& state) {
  const MeminductorParams p = meminductor_preset("sim-3mhz");
  for (auto _ : state) {
    benchmark::DoNotOptimize(hysteresis_trace(p, 0.5, 3e6, 4, 1000));
  }
}
BENCHMARK(BM_hysteresis_trace)->Unit(benchmark::kMillisecond);

static void BM_rk4_step(benchmark::State& state) {
  const MeminductorParams p = meminductor_preset("sim-3mhz");
  MeminductorState s;
  s.phi = 1e-8;
  for (auto _ : state) {
    const StepResult r = step(s, 0.3, 1e-9, p);
    s = r.state;
    benchmark::DoNotOptimize(s);
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_rk4_step);
