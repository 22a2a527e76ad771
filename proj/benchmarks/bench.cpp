#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "kws/arch.hpp"
#include "kws/frontend.hpp"
#include "kws/network.hpp"
#include "kws/ops.hpp"

namespace {
using namespace kws;

Tensor random_tensor(Shape shape, std::uint64_t seed) {
  Tensor t(std::move(shape));
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> dist;
  for (float& v : t.data()) v = dist(rng);
  return t;
}

// One residual-block conv of the wide models at full input resolution.
void BM_Conv2dForward(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const Tensor x = random_tensor({1, 45, 98, 40}, 1);
  const ConvParams p{random_tensor({45, 45, 3, 3}, 2), {d, d}};
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, p));
}
BENCHMARK(BM_Conv2dForward)->Arg(1)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_Conv2dBackward(benchmark::State& state) {
  const Tensor x = random_tensor({1, 45, 98, 40}, 1);
  const ConvParams p{random_tensor({45, 45, 3, 3}, 2), {1, 1}};
  const Tensor g = random_tensor({1, 45, 98, 40}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(conv2d_backward(g, x, p));
}
BENCHMARK(BM_Conv2dBackward)->Unit(benchmark::kMillisecond);

void BM_Mfcc(benchmark::State& state) {
  AudioBuffer audio{std::vector<float>(16000), 16000};
  for (std::size_t i = 0; i < audio.samples.size(); ++i) {
    audio.samples[i] = 0.3f * std::sin(2.0f * 3.14159265f * 440.0f * static_cast<float>(i) / 16000.0f);
  }
  for (auto _ : state) benchmark::DoNotOptimize(extract_mfcc(audio));
}
BENCHMARK(BM_Mfcc)->Unit(benchmark::kMicrosecond);

void BM_NetworkForward(benchmark::State& state, const char* arch) {
  Network net(arch_by_name(arch), 1);
  const Tensor x = random_tensor({static_cast<std::size_t>(state.range(0)), 1, 98, 40}, 4);
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(x, Mode::eval));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK_CAPTURE(BM_NetworkForward, res8_narrow, "res8-narrow")->Arg(1)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_NetworkForward, res15, "res15")->Arg(1)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  Network net(arch_by_name("res8-narrow"), 1);
  const Tensor x = random_tensor({64, 1, 98, 40}, 5);
  std::vector<int> labels(64);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 12);
  for (auto _ : state) benchmark::DoNotOptimize(net.forward_backward(x, labels));
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
