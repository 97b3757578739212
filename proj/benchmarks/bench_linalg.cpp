#include <benchmark/benchmark.h>

#include "somreplay/linalg.hpp"
#include "somreplay/rng.hpp"

namespace somreplay {
namespace {

SymMatrix random_symmetric(std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  SymMatrix a(dim);
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = i; j < dim; ++j) a.set(i, j, 2.0 * rng.uniform() - 1.0);
  return a;
}

void BM_Eigh(benchmark::State& state) {
  const SymMatrix a = random_symmetric(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(eigh(a));
}
BENCHMARK(BM_Eigh)->Arg(8)->Arg(32)->Arg(64)->Arg(128);

void BM_RegularizeCov(benchmark::State& state) {
  const SymMatrix a = random_symmetric(static_cast<std::size_t>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(regularize_cov(a));
}
BENCHMARK(BM_RegularizeCov)->Arg(8)->Arg(32)->Arg(64);

void BM_Cholesky(benchmark::State& state) {
  const SymMatrix a = regularize_cov(random_symmetric(static_cast<std::size_t>(state.range(0)), 3));
  for (auto _ : state) benchmark::DoNotOptimize(cholesky(a));
}
BENCHMARK(BM_Cholesky)->Arg(8)->Arg(32)->Arg(128);

}  // namespace
}  // namespace somreplay
