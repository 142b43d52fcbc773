#include "tst/transformer.hpp"

#include <cmath>

#include "tst/errors.hpp"
#include "tst/init.hpp"

namespace tst {

void AttentionConfig::validate() const {
  if (num_heads == 0 || key_dim == 0 || value_dim == 0 || model_dim == 0)
    throw ConfigError("attention extents (h, d_k, d_v, dim) must all be at least 1");
}

template <typename T>
BlockParams<T> BlockParams<T>::init(const AttentionConfig& attn, std::size_t dim_mlp, Rng& rng) {
  attn.validate();
  const std::size_t dim = attn.model_dim;
  BlockParams b;
  b.norm1_gain = Tensor<T>::full({dim}, T{1}, true);
  b.norm1_bias = Tensor<T>::zeros({dim}, true);
  b.w_query = xavier_uniform<T>(dim, attn.num_heads * attn.key_dim, rng);
  b.w_key = xavier_uniform<T>(dim, attn.num_heads * attn.key_dim, rng);
  b.w_value = xavier_uniform<T>(dim, attn.num_heads * attn.value_dim, rng);
  b.w_out = xavier_uniform<T>(attn.num_heads * attn.value_dim, dim, rng);
  b.norm2_gain = Tensor<T>::full({dim}, T{1}, true);
  b.norm2_bias = Tensor<T>::zeros({dim}, true);
  b.mlp_w1 = xavier_uniform<T>(dim, dim_mlp, rng);
  b.mlp_b1 = Tensor<T>::zeros({dim_mlp}, true);
  b.mlp_w2 = xavier_uniform<T>(dim_mlp, dim, rng);
  b.mlp_b2 = Tensor<T>::zeros({dim}, true);
  return b;
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>>> BlockParams<T>::named_parameters(const std::string& prefix) const {
  return {{prefix + "norm1.gain", norm1_gain}, {prefix + "norm1.bias", norm1_bias},
          {prefix + "attn.w_query", w_query},  {prefix + "attn.w_key", w_key},
          {prefix + "attn.w_value", w_value},  {prefix + "attn.w_out", w_out},
          {prefix + "norm2.gain", norm2_gain}, {prefix + "norm2.bias", norm2_bias},
          {prefix + "mlp.w1", mlp_w1},         {prefix + "mlp.b1", mlp_b1},
          {prefix + "mlp.w2", mlp_w2},         {prefix + "mlp.b2", mlp_b2}};
}

template <typename T>
TransformerStack<T> TransformerStack<T>::init(const AttentionConfig& attn, std::size_t dim_mlp, std::size_t depth,
                                              Rng& rng) {
  if (depth == 0) throw ConfigError("depth must be at least 1");
  TransformerStack s;
  for (std::size_t l = 0; l < depth; ++l) s.blocks.push_back(BlockParams<T>::init(attn, dim_mlp, rng));
  s.final_gain = Tensor<T>::full({attn.model_dim}, T{1}, true);
  s.final_bias = Tensor<T>::zeros({attn.model_dim}, true);
  return s;
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>>> TransformerStack<T>::named_parameters() const {
  std::vector<std::pair<std::string, Tensor<T>>> out;
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    auto p = blocks[l].named_parameters("blocks." + std::to_string(l) + ".");
    out.insert(out.end(), p.begin(), p.end());
  }
  out.emplace_back("final_norm.gain", final_gain);
  out.emplace_back("final_norm.bias", final_bias);
  return out;
}

template <typename T>
AttentionOutput<T> scaled_dot_product_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v) {
  if (q.rank() < 2 || k.rank() != q.rank() || v.rank() != q.rank())
    throw DimensionError("attention: Q, K, V must share rank >= 2");
  if (q.extent(-1) != k.extent(-1))
    throw DimensionError("attention: Q " + to_string(q.shape()) + " and K " + to_string(k.shape()) +
                         " disagree on d_k");
  if (k.extent(-2) != v.extent(-2))
    throw DimensionError("attention: K " + to_string(k.shape()) + " and V " + to_string(v.shape()) +
                         " disagree on token count");
  const T inv_scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(q.extent(-1))));
  auto scores = scale(matmul(q, transpose(k)), inv_scale);
  auto weights = softmax(scores, -1);
  return {matmul(weights, v), weights};
}

template <typename T>
MultiHeadOutput<T> multi_head(const Tensor<T>& x, const BlockParams<T>& block, const AttentionConfig& attn,
                              bool return_weights) {
  if (x.rank() != 3 || x.extent(-1) != attn.model_dim)
    throw DimensionError("multi_head: expected [B, n, " + std::to_string(attn.model_dim) + "], got " +
                         to_string(x.shape()));
  const std::size_t batch = x.shape()[0];
  const std::size_t n = x.shape()[1];
  const std::size_t h = attn.num_heads;
  // [B, n, h*d] -> [B, h, n, d]
  auto heads = [&](const Tensor<T>& projected, std::size_t d) {
    return permute(reshape(projected, {batch, n, h, d}), {0, 2, 1, 3});
  };
  auto q = heads(matmul(x, block.w_query), attn.key_dim);
  auto k = heads(matmul(x, block.w_key), attn.key_dim);
  auto v = heads(matmul(x, block.w_value), attn.value_dim);
  auto att = scaled_dot_product_attention(q, k, v);
  auto merged = reshape(permute(att.values, {0, 2, 1, 3}), {batch, n, h * attn.value_dim});
  MultiHeadOutput<T> out{matmul(merged, block.w_out), {}};
  if (return_weights) out.weights = att.weights;
  return out;
}

template <typename T>
BlockOutput<T> block_forward(const Tensor<T>& x, const BlockParams<T>& block, const AttentionConfig& attn,
                             double p_drop, const ForwardContext& ctx, bool capture_attention) {
  auto msa = multi_head(layer_norm(x, block.norm1_gain, block.norm1_bias), block, attn, capture_attention);
  auto y = add(x, dropout(msa.values, p_drop, ctx.training, ctx.rng));
  auto hidden = gelu(add(matmul(layer_norm(y, block.norm2_gain, block.norm2_bias), block.mlp_w1), block.mlp_b1));
  auto mlp = add(matmul(hidden, block.mlp_w2), block.mlp_b2);
  return {add(y, dropout(mlp, p_drop, ctx.training, ctx.rng)), msa.weights};
}

template <typename T>
Tensor<T> class_token_slice(const Tensor<T>& tokens) {
  if (tokens.rank() != 3) throw DimensionError("expected [B, n, dim], got " + to_string(tokens.shape()));
  return reshape(slice(tokens, 1, 0, 1), {tokens.shape()[0], tokens.shape()[2]});
}

template <typename T>
StackOutput<T> stack_forward(const Tensor<T>& tokens, const TransformerStack<T>& stack, const AttentionConfig& attn,
                             double p_drop, const ForwardContext& ctx, bool capture_attention) {
  if (stack.blocks.empty()) throw ConfigError("transformer stack has no blocks");
  StackOutput<T> out;
  Tensor<T> y = tokens;
  for (const auto& block : stack.blocks) {
    auto b = block_forward(y, block, attn, p_drop, ctx, capture_attention);
    y = b.values;
    out.class_tokens.push_back(class_token_slice(y));
    if (capture_attention) out.attention.push_back(b.attention);
  }
  out.feature = layer_norm(out.class_tokens.back(), stack.final_gain, stack.final_bias);
  return out;
}

#define TST_INSTANTIATE_TRANSFORMER(T)                                                                       \
  template struct BlockParams<T>;                                                                            \
  template struct TransformerStack<T>;                                                                       \
  template AttentionOutput<T> scaled_dot_product_attention(const Tensor<T>&, const Tensor<T>&,               \
                                                           const Tensor<T>&);                                \
  template MultiHeadOutput<T> multi_head(const Tensor<T>&, const BlockParams<T>&, const AttentionConfig&,    \
                                         bool);                                                              \
  template BlockOutput<T> block_forward(const Tensor<T>&, const BlockParams<T>&, const AttentionConfig&,     \
                                        double, const ForwardContext&, bool);                                \
  template StackOutput<T> stack_forward(const Tensor<T>&, const TransformerStack<T>&, const AttentionConfig&, \
                                        double, const ForwardContext&, bool);                                \
  template Tensor<T> class_token_slice(const Tensor<T>&);

TST_INSTANTIATE_TRANSFORMER(float)
TST_INSTANTIATE_TRANSFORMER(double)

#undef TST_INSTANTIATE_TRANSFORMER

}  // namespace tst
