#include <benchmark/benchmark.h>

#include "somreplay/vae.hpp"

namespace somreplay {
namespace {

Eigen::MatrixXd random_batch(std::size_t dim, std::size_t n) {
  Rng rng(5);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(n));
  for (Eigen::Index k = 0; k < x.size(); ++k) x.data()[k] = 2.0 * rng.uniform() - 1.0;
  return x;
}

// Args: hidden width, latent size. Batch of 32 CIFAR-sized inputs.
void BM_VaeStep(benchmark::State& state) {
  VaeConfig config;
  config.hidden = {static_cast<std::size_t>(state.range(0))};
  config.latent_dim = static_cast<std::size_t>(state.range(1));
  VaeModel model(config);
  const Eigen::MatrixXd x = random_batch(config.input_dim(), 32);
  Rng rng(6);
  ParamBuffer grad(model.parameter_count());
  for (auto _ : state) {
    Eigen::MatrixXd noise(static_cast<Eigen::Index>(config.latent_dim), x.cols());
    for (Eigen::Index k = 0; k < noise.size(); ++k) noise.data()[k] = rng.normal();
    benchmark::DoNotOptimize(model.loss_with_noise(x, noise, &grad));
    model.apply_gradient(grad);
  }
  state.SetItemsProcessed(state.iterations() * x.cols());
}
BENCHMARK(BM_VaeStep)->Args({512, 128})->Args({512, 32})->Args({64, 16});

void BM_VaeEncode(benchmark::State& state) {
  const VaeModel model{VaeConfig{}};
  const Eigen::MatrixXd x = random_batch(model.config().input_dim(), 256);
  Eigen::MatrixXd mu, logvar;
  for (auto _ : state) {
    model.encode(x, mu, logvar);
    benchmark::DoNotOptimize(mu.data());
  }
  state.SetItemsProcessed(state.iterations() * x.cols());
}
BENCHMARK(BM_VaeEncode);

}  // namespace
}  // namespace somreplay
