#include <benchmark/benchmark.h>

#include "memsim/periphery.hpp"
#include "memsim/rng.hpp"

using namespace memsim;

static void BM_encode_input(benchmark::State& state) {
  Rng rng(7);
  Eigen::VectorXd x(4096);
  for (int i = 0; i < 4096; ++i) x(i) = rng.uniform(-1.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(encode_input(x, 8));
  state.SetItemsProcessed(state.iterations() * 4096);
}
BENCHMARK(BM_encode_input);

static void BM_bulk_quantize(benchmark::State& state) {
  Rng rng(9);
  std::vector<double> samples(65536);
  for (auto& s : samples) s = rng.normal(0.0, 2.0);
  const QuantizerConfig q = calibrate_edges(samples, 5);
  const BulkQuantizer bulk(q);
  Eigen::MatrixXd m(256, 256);
  for (int i = 0; i < 256; ++i) {
    for (int j = 0; j < 256; ++j) m(i, j) = rng.normal(0.0, 2.0);
  }
  for (auto _ : state) {
    Eigen::MatrixXd copy = m;
    bulk.apply_in_place(copy);
    benchmark::DoNotOptimize(copy);
  }
  state.SetItemsProcessed(state.iterations() * 256 * 256);
}
BENCHMARK(BM_bulk_quantize);
