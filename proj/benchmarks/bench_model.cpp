#include <benchmark/benchmark.h>

#include "pmn/interpret.hpp"
#include "pmn/losses.hpp"
#include "pmn/nn/adam.hpp"

using namespace pmn;

namespace {

ModelConfig standard(Variant variant) {
  ModelConfig c;
  c.variant = variant;
  c.seed = 1;
  return c;
}

Tensor<float> spectra(std::size_t n) {
  Rng rng(2);
  Tensor<float> x({n, 1024});
  for (auto& v : x.values()) v = static_cast<float>(rng.uniform());
  return x;
}

}  // namespace

// One minibatch of the combined objective: forward, backward and Adam step.
static void BM_TrainStep(benchmark::State& state) {
  PmnModel<float> model(standard(static_cast<Variant>(state.range(0))));
  nn::Adam<float> adam(nn::AdamConfig{}, model.params());
  const auto x = spectra(128);
  std::vector<int> labels(128);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(total_loss(model, x, labels, LossWeights{}));
    adam.step(0);
  }
  state.SetItemsProcessed(state.iterations() * 128);
}
BENCHMARK(BM_TrainStep)->Arg(static_cast<int>(Variant::pmn))->Arg(static_cast<int>(Variant::ae_mlp))->Unit(benchmark::kMillisecond);

static void BM_Classify(benchmark::State& state) {
  PmnModel<float> model(standard(Variant::pmn));
  const auto x = spectra(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(model.classify(x));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Classify)->Arg(1)->Arg(128)->Unit(benchmark::kMicrosecond);

static void BM_GradCam(benchmark::State& state) {
  PmnModel<float> model(standard(Variant::pmn));
  const auto x = spectra(1);
  for (auto _ : state) benchmark::DoNotOptimize(grad_cam<float>(model, x.values()));
}
BENCHMARK(BM_GradCam)->Unit(benchmark::kMicrosecond);

static void BM_ExplainMatch(benchmark::State& state) {
  PmnModel<float> model(standard(Variant::pmn));
  const auto x = spectra(1);
  for (auto _ : state) benchmark::DoNotOptimize(explain_match<float>(model, x.values()));
}
BENCHMARK(BM_ExplainMatch)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
