#pragma once

#include <cstdint>

namespace tst {

/// Mixes a base seed with a stream id (splitmix64 finalizer) so that model
/// init, shuffling and dropout draw from independent generators.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

enum class SeedStream : std::uint64_t { Init = 1, Shuffle = 2, Dropout = 3, Split = 4, Synth = 5, Tsne = 6 };

constexpr std::uint64_t derive_seed(std::uint64_t seed, SeedStream stream) {
  return derive_seed(seed, static_cast<std::uint64_t>(stream));
}

}  // namespace tst
