#include <benchmark/benchmark.h>

#include <vector>

#include "somreplay/som.hpp"

namespace somreplay {
namespace {

std::vector<Vector> random_rows(std::size_t count, std::size_t dim, Rng& rng) {
  std::vector<Vector> rows;
  for (std::size_t n = 0; n < count; ++n) {
    Vector v(dim);
    for (double& x : v) x = rng.uniform();
    rows.push_back(std::move(v));
  }
  return rows;
}

// Args: grid side, input dimension.
void BM_FindBmu(benchmark::State& state) {
  Rng rng(1);
  const int side = static_cast<int>(state.range(0));
  const auto dim = static_cast<std::size_t>(state.range(1));
  const auto seeds = random_rows(64, dim, rng);
  const SomGrid grid = init_from_samples(side, dim, seeds, false, rng);
  const auto queries = random_rows(256, dim, rng);
  std::size_t k = 0;
  for (auto _ : state) benchmark::DoNotOptimize(find_bmu(grid, queries[k++ % queries.size()]));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_FindBmu)->Args({10, 784})->Args({20, 784})->Args({20, 32});

// Args: grid side, input dimension, covariance tracking.
void BM_TrainStep(benchmark::State& state) {
  Rng rng(2);
  const int side = static_cast<int>(state.range(0));
  const auto dim = static_cast<std::size_t>(state.range(1));
  const auto seeds = random_rows(64, dim, rng);
  SomGrid grid = init_from_samples(side, dim, seeds, state.range(2) != 0, rng);
  const auto samples = random_rows(256, dim, rng);
  const SomHyperParams params;
  std::size_t k = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(train_step(grid, samples[k % samples.size()], 0, params, 0.5));
    ++k;
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_TrainStep)->Args({10, 784, 0})->Args({20, 784, 0})->Args({20, 32, 1});

}  // namespace
}  // namespace somreplay
