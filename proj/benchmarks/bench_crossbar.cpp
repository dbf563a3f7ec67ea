#include <benchmark/benchmark.h>

#include "memsim/crossbar.hpp"

using namespace memsim;

namespace {

CrossbarArray random_array(int rows, int cols, double r_line, std::uint64_t seed) {
  DeviceParams p = device_preset("tiox-memristor");
  p.sigma_d2d = p.sigma_c2c = p.stuck_prob = 0.0;
  Rng rng(seed);
  Eigen::MatrixXd w(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) w(i, j) = rng.uniform(-1.0, 1.0);
  }
  CrossbarConfig c;
  c.r_line = r_line;
  return map_weights(w, WeightMapping{-1.0, 1.0, p.x_max, p.x_min}, p, c, rng);
}

}  // namespace

static void BM_ideal_vmm(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const CrossbarArray arr = random_array(n, n, 0.0, 3);
  Rng rng(4);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.uniform(0.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(ideal_vmm(arr, v));
}
BENCHMARK(BM_ideal_vmm)->Arg(64)->Arg(128);

static void BM_parasitic_vmm(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const CrossbarArray arr = random_array(n, n, 0.5, 3);
  Rng rng(4);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.uniform(0.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(parasitic_vmm(arr, v));
}
BENCHMARK(BM_parasitic_vmm)->Arg(32)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

static void BM_parasitic_transfer_build(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const CrossbarArray arr = random_array(n, n, 0.5, 3);
  for (auto _ : state) {
    ParasiticSolver solver(arr);
    benchmark::DoNotOptimize(solver.transfer());
  }
}
BENCHMARK(BM_parasitic_transfer_build)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
