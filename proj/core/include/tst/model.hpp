#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tst/config.hpp"
#include "tst/tokenizer.hpp"
#include "tst/transformer.hpp"

namespace tst {

template <typename T>
struct ModelOutput {
  Tensor<T> probs;   // [B, N_class], rows sum to 1
  Tensor<T> logits;  // [B, N_class]
  Tensor<T> feature;
  std::vector<Tensor<T>> class_tokens;  // one [B, dim] per block
  std::vector<Tensor<T>> attention;     // filled when requested
};

template <typename T>
using NamedParameter = std::pair<std::string, Tensor<T>>;

/// Tokenizer, Transformer stack and softmax classification head.
template <typename T>
class TSTModel {
 public:
  /// Validates `config` and initializes every parameter from `seed`.
  TSTModel(const TSTConfig& config, std::uint64_t seed);

  const TSTConfig& config() const { return config_; }

  TokenizerParams<T>& tokenizer() { return tokenizer_; }
  const TokenizerParams<T>& tokenizer() const { return tokenizer_; }
  TransformerStack<T>& stack() { return stack_; }
  const TransformerStack<T>& stack() const { return stack_; }
  Tensor<T>& head_weight() { return head_weight_; }
  Tensor<T>& head_bias() { return head_bias_; }
  const Tensor<T>& head_weight() const { return head_weight_; }
  const Tensor<T>& head_bias() const { return head_bias_; }

  /// Every trainable leaf in a fixed declaration order.
  std::vector<NamedParameter<T>> named_parameters() const;
  std::vector<Tensor<T>> parameters() const;
  std::size_t parameter_count() const;
  void zero_grad();

  /// x is [B, L]. Dropout is active only when ctx.training is set.
  ModelOutput<T> forward(const Tensor<T>& x, const ForwardContext& ctx = {}, bool capture_attention = false) const;

  /// Row-wise argmax of the class probabilities; ties go to the lowest index.
  std::vector<int> predict(const Tensor<T>& x) const;

  /// Deep copy of all parameters converted to another precision.
  template <typename U>
  TSTModel<U> cast() const;

 private:
  TSTConfig config_;
  TokenizerParams<T> tokenizer_;
  TransformerStack<T> stack_;
  Tensor<T> head_weight_;  // [dim, N_class]
  Tensor<T> head_bias_;    // [N_class]
};

/// Cross-entropy evaluated on probabilities: -(1/B) sum_i log p[i, label_i].
template <typename T>
double cross_entropy(const Tensor<T>& probs, std::span<const int> labels);

/// Differentiable training loss computed from logits via log-sum-exp.
template <typename T>
Tensor<T> classification_loss(const Tensor<T>& logits, std::span<const int> labels);

/// Row-wise argmax, lowest index on ties.
template <typename T>
std::vector<int> argmax_rows(const Tensor<T>& scores);

/// FNV-1a over the raw bytes of every parameter, in declaration order.
template <typename T>
std::uint64_t parameter_hash(const TSTModel<T>& model);

extern template class TSTModel<float>;
extern template class TSTModel<double>;

}  // namespace tst
