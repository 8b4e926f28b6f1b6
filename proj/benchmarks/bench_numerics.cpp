#include <benchmark/benchmark.h>

#include <random>

#include "exattn/numerics/autograd.hpp"
#include "exattn/numerics/losses.hpp"
#include "exattn/numerics/ops.hpp"

using namespace exattn::num;

namespace {

Tensor gaussian(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.3);
  Tensor t({rows, cols}, 0.0);
  for (double& x : t.values()) x = g(rng);
  return t;
}

void BM_SelfAttentionForward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0)), d = static_cast<std::size_t>(state.range(1));
  const auto f = constant(gaussian(n, d, 1));
  const auto wq = constant(gaussian(d, d, 2)), wk = constant(gaussian(d, d, 3)), wv = constant(gaussian(d, d, 4));
  for (auto _ : state) benchmark::DoNotOptimize(self_attention(f, wq, wk, wv));
}
BENCHMARK(BM_SelfAttentionForward)->Args({5, 8})->Args({14, 32})->Args({30, 64});

void BM_SelfAttentionBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0)), d = static_cast<std::size_t>(state.range(1));
  const auto f = constant(gaussian(n, d, 1));
  Parameter wq("wq", gaussian(d, d, 2)), wk("wk", gaussian(d, d, 3)), wv("wv", gaussian(d, d, 4));
  for (auto _ : state) {
    backward(sum(self_attention(f, wq.var(), wk.var(), wv.var())));
    wq.zero_grad();
    wk.zero_grad();
    wv.zero_grad();
  }
}
BENCHMARK(BM_SelfAttentionBackward)->Args({5, 8})->Args({14, 32})->Args({30, 64});

void BM_MmdSquared(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = constant(gaussian(n, 32, 5)), b = constant(gaussian(n, 32, 6));
  for (auto _ : state) benchmark::DoNotOptimize(mmd_squared(a, b, 0.5));
}
BENCHMARK(BM_MmdSquared)->Arg(4)->Arg(16)->Arg(64);

}  // namespace
