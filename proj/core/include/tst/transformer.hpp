#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tst/config.hpp"
#include "tst/ops.hpp"

namespace tst {

/// Value dimension equals key dimension throughout.
struct AttentionConfig {
  std::size_t num_heads = 6;
  std::size_t key_dim = 64;
  std::size_t value_dim = 64;
  std::size_t model_dim = 128;

  static AttentionConfig from(const TSTConfig& c) { return {c.num_heads, c.key_dim, c.key_dim, c.dim}; }
  void validate() const;
};

/// One pre-norm block. Per-head projections are stored fused along the
/// column axis: head i owns columns [i*d_k, (i+1)*d_k).
template <typename T>
struct BlockParams {
  Tensor<T> norm1_gain, norm1_bias;  // [dim]
  Tensor<T> w_query, w_key;          // [dim, h*d_k]
  Tensor<T> w_value;                 // [dim, h*d_v]
  Tensor<T> w_out;                   // [h*d_v, dim]
  Tensor<T> norm2_gain, norm2_bias;  // [dim]
  Tensor<T> mlp_w1, mlp_b1;          // [dim, dim_mlp], [dim_mlp]
  Tensor<T> mlp_w2, mlp_b2;          // [dim_mlp, dim], [dim]

  static BlockParams init(const AttentionConfig& attn, std::size_t dim_mlp, Rng& rng);
  std::vector<std::pair<std::string, Tensor<T>>> named_parameters(const std::string& prefix) const;
};

template <typename T>
struct TransformerStack {
  std::vector<BlockParams<T>> blocks;
  Tensor<T> final_gain, final_bias;

  static TransformerStack init(const AttentionConfig& attn, std::size_t dim_mlp, std::size_t depth, Rng& rng);
  std::vector<std::pair<std::string, Tensor<T>>> named_parameters() const;
};

template <typename T>
struct AttentionOutput {
  Tensor<T> values;   // [..., n, d_v]
  Tensor<T> weights;  // [..., n, n], rows sum to 1
};

/// softmax(Q K^T / sqrt(d_k)) V over the last two axes.
template <typename T>
AttentionOutput<T> scaled_dot_product_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v);

template <typename T>
struct MultiHeadOutput {
  Tensor<T> values;   // [B, n, dim]
  Tensor<T> weights;  // [B, h, n, n]; set only when requested
};

/// Multi-head self-attention of x [B, n, dim] with the block's projections.
template <typename T>
MultiHeadOutput<T> multi_head(const Tensor<T>& x, const BlockParams<T>& block, const AttentionConfig& attn,
                              bool return_weights = false);

template <typename T>
struct BlockOutput {
  Tensor<T> values;
  Tensor<T> attention;  // [B, h, n, n] when captured
};

/// y = x + Dropout(MSA(LN(x))); out = y + Dropout(MLP(LN(y))).
template <typename T>
BlockOutput<T> block_forward(const Tensor<T>& x, const BlockParams<T>& block, const AttentionConfig& attn,
                             double p_drop, const ForwardContext& ctx, bool capture_attention = false);

template <typename T>
struct StackOutput {
  Tensor<T> feature;                    // [B, dim], LayerNorm of the final class token
  std::vector<Tensor<T>> class_tokens;  // per block, [B, dim], before the final norm
  std::vector<Tensor<T>> attention;     // per block, when captured
};

template <typename T>
StackOutput<T> stack_forward(const Tensor<T>& tokens, const TransformerStack<T>& stack, const AttentionConfig& attn,
                             double p_drop, const ForwardContext& ctx, bool capture_attention = false);

/// Token 0 of a [B, n, dim] sequence as [B, dim].
template <typename T>
Tensor<T> class_token_slice(const Tensor<T>& tokens);

}  // namespace tst
