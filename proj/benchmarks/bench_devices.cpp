#include <benchmark/benchmark.h>

#include "memsim/devices.hpp"

using namespace memsim;

static void BM_weight_update_curve(benchmark::State& state) {
  const DeviceParams p = device_preset("tiox-memristor");
  double pulse = 0.0;
  for (auto _ : state) {
    pulse = pulse < p.p_max ? pulse + 0.5 : 0.0;
    benchmark::DoNotOptimize(weight_update_curve(pulse, PulseDirection::ltp, p, 10.0));
  }
}
BENCHMARK(BM_weight_update_curve);

static void BM_apply_pulses_population(benchmark::State& state) {
  DeviceParams p = device_preset("tiox-memristor");
  p.stuck_prob = 0.0;
  Rng rng(1);
  DevicePopulation pop = sample_population(p, 128, 128, rng);
  int n = 1;
  for (auto _ : state) {
    n = n == 5 ? -5 : 5;
    for (auto& cell : pop.cells()) cell = apply_pulses(cell, n, p, rng);
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(pop.cells().size()));
}
BENCHMARK(BM_apply_pulses_population)->Unit(benchmark::kMillisecond);
