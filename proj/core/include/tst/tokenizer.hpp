#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tst/config.hpp"
#include "tst/ops.hpp"

namespace tst {

struct TokenizerConfig {
  std::size_t series_length = 2048;
  std::size_t num_subsequences = 256;
  std::size_t embed_dim = 128;
  PositionEncoding position_encoding = PositionEncoding::Learned1D;

  static TokenizerConfig from(const TSTConfig& c) {
    return {c.series_length, c.num_subsequences, c.dim, c.position_encoding};
  }
  std::size_t subsequence_length() const { return series_length / num_subsequences; }
  /// L must split into Ns equal chunks.
  void validate() const;
};

/// Trainable state of the tokenizer. `position` is undefined when position
/// encoding is disabled.
template <typename T>
struct TokenizerParams {
  Tensor<T> embedding;    // [L/Ns, dim], shared by every subsequence
  Tensor<T> class_token;  // [1, dim]
  Tensor<T> position;     // [Ns+1, dim]

  static TokenizerParams init(const TokenizerConfig& config, Rng& rng);
  std::vector<std::pair<std::string, Tensor<T>>> named_parameters() const;
};

/// [B, L] -> [B, Ns, L/Ns], contiguous non-overlapping chunks in order.
template <typename T>
Tensor<T> split_subsequences(const Tensor<T>& series, std::size_t num_subsequences);

/// [B, Ns, L/Ns] x [L/Ns, dim] -> [B, Ns, dim]; no bias.
template <typename T>
Tensor<T> embed(const Tensor<T>& subsequences, const Tensor<T>& embedding);

/// Full tokenizer: split, embed, prepend class token, add position
/// encoding, then dropout. Returns [B, Ns+1, dim] with the class token at 0.
template <typename T>
Tensor<T> tokenize(const Tensor<T>& series, const TokenizerParams<T>& params, const TokenizerConfig& config,
                   double p_drop, const ForwardContext& ctx);

}  // namespace tst
