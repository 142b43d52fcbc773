#include <benchmark/benchmark.h>

#include <random>

#include "tst/analysis/tsne.hpp"

namespace {

std::vector<double> clusters(std::size_t n, std::size_t dim) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> p(n * dim);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t d = 0; d < dim; ++d) p[i * dim + d] = g(rng) + (d == 0 ? 10.0 * static_cast<double>(i % 4) : 0.0);
  return p;
}

void BM_TsneAffinities(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto p = clusters(n, 32);
  for (auto _ : state) benchmark::DoNotOptimize(tst::analysis::tsne_affinities(p, n, 32, 30.0));
}
BENCHMARK(BM_TsneAffinities)->Arg(200)->Arg(800)->Unit(benchmark::kMillisecond);

void BM_TsneEmbed(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto p = clusters(n, 32);
  tst::analysis::TsneOptions opt;
  opt.iterations = 300;
  for (auto _ : state) benchmark::DoNotOptimize(tst::analysis::tsne_embed(p, n, 32, opt));
}
BENCHMARK(BM_TsneEmbed)->Arg(200)->Unit(benchmark::kMillisecond);

}  // namespace
