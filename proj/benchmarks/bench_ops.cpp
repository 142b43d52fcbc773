#include <benchmark/benchmark.h>

#include <random>

#include "tst/ops.hpp"

namespace {

tst::Tensor<float> uniform(tst::Shape shape, std::uint64_t seed) {
  tst::Tensor<float> t = tst::Tensor<float>::zeros(shape);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  for (auto& v : t.mutable_data()) v = u(rng);
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = uniform({n, n}, 1), b = uniform({n, n}, 2);
  tst::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(tst::matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->RangeMultiplier(2)->Range(32, 256);

void BM_BatchedMatmul(benchmark::State& state) {
  const auto a = uniform({32, 65, 32}, 3), b = uniform({32, 32, 65}, 4);
  tst::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(tst::matmul(a, b));
}
BENCHMARK(BM_BatchedMatmul);

void BM_Softmax(benchmark::State& state) {
  const auto a = uniform({64, 65, 65}, 5);
  tst::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(tst::softmax(a, -1));
}
BENCHMARK(BM_Softmax);

void BM_LayerNormBackward(benchmark::State& state) {
  auto x = uniform({32, 65, 32}, 6);
  x.set_requires_grad(true);
  const auto g = tst::Tensor<float>::full({32}, 1.0f), b = tst::Tensor<float>::zeros({32});
  for (auto _ : state) {
    auto y = tst::sum(tst::layer_norm(x, g, b));
    y.backward();
    benchmark::DoNotOptimize(x.grad());
  }
}
BENCHMARK(BM_LayerNormBackward);

}  // namespace
