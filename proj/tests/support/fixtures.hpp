#pragma once

#include <random>

#include "tst/config.hpp"
#include "tst/data.hpp"
#include "tst/model.hpp"

namespace tst::testing {

/// The small architecture used for gradient checks.
inline TSTConfig tiny_config() {
  TSTConfig c;
  c.series_length = 32;
  c.num_subsequences = 4;
  c.dim = 8;
  c.dim_mlp = 16;
  c.key_dim = 4;
  c.num_heads = 2;
  c.depth = 1;
  c.p_drop = 0.0;
  c.num_classes = 10;
  return c;
}

/// Architecture of the desk-scale training runs.
inline TSTConfig desk_config() {
  TSTConfig c;
  c.series_length = 512;
  c.num_subsequences = 64;
  c.dim = 32;
  c.dim_mlp = 64;
  c.key_dim = 16;
  c.num_heads = 2;
  c.depth = 2;
  c.p_drop = 0.1;
  c.num_classes = 10;
  c.initial_lr = 1e-3;
  c.batch_size = 32;
  c.epochs = 30;
  return c;
}

template <typename T>
Tensor<T> random_input(std::size_t batch, std::size_t length, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<T> v(batch * length);
  for (auto& x : v) x = static_cast<T>(n(rng));
  return Tensor<T>({batch, length}, std::move(v));
}

template <typename T>
void fill(Tensor<T>& t, T value) {
  for (auto& x : t.mutable_data()) x = value;
}

}  // namespace tst::testing
