#include <benchmark/benchmark.h>

#include "pmn/nn/layers.hpp"
#include "pmn/signal.hpp"

using namespace pmn;

namespace {

Tensor<float> random_input(Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  Tensor<float> x(std::move(shape));
  for (auto& v : x.values()) v = static_cast<float>(rng.uniform(-1, 1));
  return x;
}

}  // namespace

static void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_input({n, n}, 1), b = random_input({n, n}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(256);

// First encoder stage of the standard network: 1 -> 8 channels, k9 s2 p4.
static void BM_Conv1dForward(benchmark::State& state) {
  nn::Conv1d<float> conv(1, 8, {9, 2, 4});
  Rng rng(3);
  conv.initialize(rng);
  const auto x = random_input({128, 1, 1024}, 4);
  for (auto _ : state) benchmark::DoNotOptimize(conv.forward(x, nn::Mode::train));
}
BENCHMARK(BM_Conv1dForward)->Unit(benchmark::kMillisecond);

static void BM_Conv1dBackward(benchmark::State& state) {
  nn::Conv1d<float> conv(16, 32, {11, 4, 5});
  Rng rng(5);
  conv.initialize(rng);
  const auto x = random_input({128, 16, 256}, 6);
  const auto y = conv.forward(x, nn::Mode::train);
  const auto g = random_input(y.shape(), 7);
  for (auto _ : state) benchmark::DoNotOptimize(conv.backward(g));
}
BENCHMARK(BM_Conv1dBackward)->Unit(benchmark::kMillisecond);

static void BM_Deconv1dForward(benchmark::State& state) {
  nn::Deconv1d<float> deconv(16, 8, {8, 2, 3});
  Rng rng(8);
  deconv.initialize(rng);
  const auto x = random_input({128, 16, 256}, 9);
  for (auto _ : state) benchmark::DoNotOptimize(deconv.forward(x, nn::Mode::train));
}
BENCHMARK(BM_Deconv1dForward)->Unit(benchmark::kMillisecond);

static void BM_Spectrum(benchmark::State& state) {
  Rng rng(10);
  std::vector<double> x(2048);
  for (auto& v : x) v = rng.gaussian();
  for (auto _ : state) benchmark::DoNotOptimize(signal::to_spectrum(x));
}
BENCHMARK(BM_Spectrum);
