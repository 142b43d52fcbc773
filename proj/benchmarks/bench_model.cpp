#include <benchmark/benchmark.h>

#include "tst/data.hpp"
#include "tst/model.hpp"

namespace {

tst::TSTConfig desk() {
  tst::TSTConfig c;
  c.series_length = 512;
  c.num_subsequences = 64;
  c.dim = 32;
  c.dim_mlp = 64;
  c.key_dim = 16;
  c.num_heads = 2;
  c.depth = 2;
  return c;
}

tst::Batch<float> batch(std::size_t n) {
  const auto windows = tst::generate_synthetic(tst::SyntheticSpec::bearing_default(512), (n + 9) / 10, 1);
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return tst::make_batch<float>(windows, idx);
}

void BM_ForwardInference(benchmark::State& state) {
  const tst::TSTModel<float> model(desk(), 1);
  const auto b = batch(static_cast<std::size_t>(state.range(0)));
  tst::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(b.inputs).probs);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardInference)->Arg(1)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_ForwardBackward(benchmark::State& state) {
  tst::TSTModel<float> model(desk(), 1);
  const auto b = batch(32);
  for (auto _ : state) {
    model.zero_grad();
    auto loss = tst::classification_loss(model.forward(b.inputs).logits, b.labels);
    loss.backward();
  }
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_ForwardBackward)->Unit(benchmark::kMillisecond);

}  // namespace
