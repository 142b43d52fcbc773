#include "tst/tokenizer.hpp"

#include "tst/errors.hpp"
#include "tst/init.hpp"

namespace tst {

void TokenizerConfig::validate() const {
  if (series_length == 0 || num_subsequences == 0 || embed_dim == 0)
    throw ConfigError("tokenizer extents must be positive");
  if (series_length % num_subsequences != 0)
    throw ConfigError("series length L=" + std::to_string(series_length) +
                      " is not divisible by the number of subsequences Ns=" + std::to_string(num_subsequences));
}

template <typename T>
TokenizerParams<T> TokenizerParams<T>::init(const TokenizerConfig& config, Rng& rng) {
  config.validate();
  TokenizerParams p;
  p.embedding = xavier_uniform<T>(config.subsequence_length(), config.embed_dim, rng);
  p.class_token = normal<T>({1, config.embed_dim}, 0.02, rng);
  if (config.position_encoding == PositionEncoding::Learned1D)
    p.position = normal<T>({config.num_subsequences + 1, config.embed_dim}, 0.02, rng);
  return p;
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>>> TokenizerParams<T>::named_parameters() const {
  std::vector<std::pair<std::string, Tensor<T>>> out{{"tokenizer.embedding", embedding},
                                                     {"tokenizer.class_token", class_token}};
  if (position.defined()) out.emplace_back("tokenizer.position", position);
  return out;
}

template <typename T>
Tensor<T> split_subsequences(const Tensor<T>& series, std::size_t num_subsequences) {
  if (series.rank() != 2) throw DimensionError("split: series must be [B, L], got " + to_string(series.shape()));
  const std::size_t batch = series.shape()[0];
  const std::size_t length = series.shape()[1];
  if (num_subsequences == 0 || length % num_subsequences != 0)
    throw ConfigError("series length L=" + std::to_string(length) +
                      " is not divisible by the number of subsequences Ns=" + std::to_string(num_subsequences));
  return reshape(series, {batch, num_subsequences, length / num_subsequences});
}

template <typename T>
Tensor<T> embed(const Tensor<T>& subsequences, const Tensor<T>& embedding) {
  if (subsequences.rank() != 3 || embedding.rank() != 2 || subsequences.extent(-1) != embedding.shape()[0])
    throw DimensionError("embed: subsequences " + to_string(subsequences.shape()) +
                         " incompatible with embedding matrix " + to_string(embedding.shape()));
  return matmul(subsequences, embedding);
}

template <typename T>
Tensor<T> tokenize(const Tensor<T>& series, const TokenizerParams<T>& params, const TokenizerConfig& config,
                   double p_drop, const ForwardContext& ctx) {
  config.validate();
  if (series.rank() != 2 || series.shape()[1] != config.series_length)
    throw DimensionError("tokenize: expected [B, " + std::to_string(config.series_length) + "], got " +
                         to_string(series.shape()));
  const std::size_t batch = series.shape()[0];
  auto embedded = embed(split_subsequences(series, config.num_subsequences), params.embedding);
  auto cls = broadcast_to(reshape(params.class_token, {1, 1, config.embed_dim}), {batch, 1, config.embed_dim});
  auto tokens = concat<T>({cls, embedded}, 1);
  if (config.position_encoding == PositionEncoding::Learned1D) tokens = add(tokens, params.position);
  return dropout(tokens, p_drop, ctx.training, ctx.rng);
}

template struct TokenizerParams<float>;
template struct TokenizerParams<double>;
template Tensor<float> split_subsequences(const Tensor<float>&, std::size_t);
template Tensor<double> split_subsequences(const Tensor<double>&, std::size_t);
template Tensor<float> embed(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> embed(const Tensor<double>&, const Tensor<double>&);
template Tensor<float> tokenize(const Tensor<float>&, const TokenizerParams<float>&, const TokenizerConfig&, double,
                                const ForwardContext&);
template Tensor<double> tokenize(const Tensor<double>&, const TokenizerParams<double>&, const TokenizerConfig&,
                                 double, const ForwardContext&);

}  // namespace tst
