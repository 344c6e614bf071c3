#include <benchmark/benchmark.h>

#include "sfnn/diagnostics.hpp"
#include "sfnn/linalg.hpp"
#include "sfnn/matrix.hpp"
#include "sfnn/model.hpp"
#include "sfnn/rng.hpp"

namespace {

sfnn::Matrix gaussian(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  sfnn::SeededRng rng(seed);
  return {rows, cols, sfnn::rng_standard_normal(rng, rows * cols)};
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = gaussian(n, n, 1), b = gaussian(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(sfnn::matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->RangeMultiplier(2)->Range(64, 512);

void BM_LeastSquares(benchmark::State& state) {
  const auto a = gaussian(static_cast<std::size_t>(state.range(0)), 64, 3);
  const auto b = gaussian(a.rows(), 8, 4);
  for (auto _ : state) benchmark::DoNotOptimize(sfnn::least_squares(a, b));
}
BENCHMARK(BM_LeastSquares)->Arg(512)->Arg(4096);

sfnn::SFNNConfig model_config(bool mixing) {
  sfnn::SFNNConfig c;
  c.lookback = 96;
  c.horizon = 96;
  c.hidden_width = 512;
  c.n_series = 7;
  c.use_mean_centering = true;
  c.use_layer_norm = true;
  c.use_series_mixing = mixing;
  return c;
}

// One batch of 32 windows of a 7-series dataset.
void BM_ForwardBackward(benchmark::State& state) {
  const auto config = model_config(state.range(0) != 0);
  sfnn::SeededRng rng(5);
  const auto params = sfnn::init_params(config, rng);
  const auto input = gaussian(config.lookback, config.n_series * 32, 6);
  const sfnn::Matrix grad(config.horizon, input.cols(), 1e-3);
  for (auto _ : state) {
    const auto fwd = sfnn::forward(params, config, input);
    benchmark::DoNotOptimize(sfnn::backward(params, config, fwd.trace, grad));
  }
}
BENCHMARK(BM_ForwardBackward)->Arg(0)->Arg(1);

void BM_JohansenTrace(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  sfnn::Matrix walks(2000, n);
  sfnn::SeededRng rng(7);
  for (std::size_t t = 1; t < walks.rows(); ++t) {
    for (std::size_t j = 0; j < n; ++j) walks(t, j) = walks(t - 1, j) + rng.standard_normal();
  }
  for (auto _ : state) benchmark::DoNotOptimize(sfnn::johansen_trace(walks, 8, n - 1));
}
BENCHMARK(BM_JohansenTrace)->Arg(3)->Arg(7)->Arg(12);

}  // namespace

BENCHMARK_MAIN();
