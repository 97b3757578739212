#include <benchmark/benchmark.h>

#include "somreplay/replay.hpp"

namespace somreplay {
namespace {

SomGrid labeled_grid(std::size_t dim, bool cov) {
  Rng rng(3);
  std::vector<Vector> seeds;
  for (int n = 0; n < 64; ++n) {
    Vector v(dim);
    for (double& x : v) x = rng.uniform();
    seeds.push_back(std::move(v));
  }
  SomGrid grid = init_from_samples(10, dim, seeds, cov, rng);
  const SomHyperParams params;
  for (int n = 0; n < 2000; ++n) train_step(grid, seeds[n % seeds.size()], n % 2, params, 0.5);
  return grid;
}

// Args: dimension, covariance tracking.
void BM_Generate(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  const bool cov = state.range(1) != 0;
  const SomGrid grid = labeled_grid(dim, cov);
  ReplayPlan plan;
  plan.classes = {0, 1};
  plan.per_class_count = 100;
  plan.space = cov ? SampleSpace::latent : SampleSpace::pixel;
  Rng rng(4);
  for (auto _ : state) benchmark::DoNotOptimize(generate(grid, plan, rng));
  state.SetItemsProcessed(state.iterations() * 200);
}
BENCHMARK(BM_Generate)->Args({784, 0})->Args({32, 1});

}  // namespace
}  // namespace somreplay
