#include "tst/model.hpp"

#include <cmath>
#include <cstring>

#include "tst/errors.hpp"
#include "tst/init.hpp"
#include "tst/random.hpp"

namespace tst {

template <typename T>
TSTModel<T>::TSTModel(const TSTConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(derive_seed(seed, SeedStream::Init));
  tokenizer_ = TokenizerParams<T>::init(TokenizerConfig::from(config_), rng);
  stack_ = TransformerStack<T>::init(AttentionConfig::from(config_), config_.dim_mlp, config_.depth, rng);
  head_weight_ = xavier_uniform<T>(config_.dim, config_.num_classes, rng);
  head_bias_ = Tensor<T>::zeros({config_.num_classes}, true);
}

template <typename T>
std::vector<NamedParameter<T>> TSTModel<T>::named_parameters() const {
  auto out = tokenizer_.named_parameters();
  auto s = stack_.named_parameters();
  out.insert(out.end(), s.begin(), s.end());
  out.emplace_back("head.weight", head_weight_);
  out.emplace_back("head.bias", head_bias_);
  return out;
}

template <typename T>
std::vector<Tensor<T>> TSTModel<T>::parameters() const {
  std::vector<Tensor<T>> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

template <typename T>
std::size_t TSTModel<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : named_parameters()) n += t.size();
  return n;
}

template <typename T>
void TSTModel<T>::zero_grad() {
  for (auto& t : parameters()) t.zero_grad();
}

template <typename T>
ModelOutput<T> TSTModel<T>::forward(const Tensor<T>& x, const ForwardContext& ctx, bool capture_attention) const {
  auto tokens = tokenize(x, tokenizer_, TokenizerConfig::from(config_), config_.p_drop, ctx);
  auto s = stack_forward(tokens, stack_, AttentionConfig::from(config_), config_.p_drop, ctx, capture_attention);
  ModelOutput<T> out;
  out.logits = add(matmul(s.feature, head_weight_), head_bias_);
  out.probs = softmax(out.logits, -1);
  out.feature = s.feature;
  out.class_tokens = std::move(s.class_tokens);
  out.attention = std::move(s.attention);
  return out;
}

template <typename T>
std::vector<int> TSTModel<T>::predict(const Tensor<T>& x) const {
  NoGradGuard guard;
  return argmax_rows(forward(x).probs);
}

template <typename T>
template <typename U>
TSTModel<U> TSTModel<T>::cast() const {
  TSTModel<U> out(config_, 0);
  auto src = named_parameters();
  auto dst = out.named_parameters();
  for (std::size_t i = 0; i < src.size(); ++i) {
    auto s = src[i].second.data();
    auto d = dst[i].second.mutable_data();
    for (std::size_t j = 0; j < s.size(); ++j) d[j] = static_cast<U>(s[j]);
  }
  return out;
}

template <typename T>
double cross_entropy(const Tensor<T>& probs, std::span<const int> labels) {
  if (probs.rank() != 2 || probs.shape()[0] != labels.size())
    throw DimensionError("cross_entropy: probs " + to_string(probs.shape()) + " vs " +
                         std::to_string(labels.size()) + " labels");
  const std::size_t classes = probs.shape()[1];
  auto p = probs.data();
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes)
      throw DataError("label " + std::to_string(labels[i]) + " outside [0, " + std::to_string(classes) + ")");
    total -= std::log(static_cast<double>(p[i * classes + static_cast<std::size_t>(labels[i])]));
  }
  // -0.0 for a perfect prediction reads oddly in reports
  return total == 0.0 ? 0.0 : total / static_cast<double>(labels.size());
}

template <typename T>
Tensor<T> classification_loss(const Tensor<T>& logits, std::span<const int> labels) {
  return cross_entropy_with_logits(logits, labels);
}

template <typename T>
std::vector<int> argmax_rows(const Tensor<T>& scores) {
  if (scores.rank() != 2) throw DimensionError("argmax_rows: expected [B, C], got " + to_string(scores.shape()));
  const std::size_t rows = scores.shape()[0];
  const std::size_t cols = scores.shape()[1];
  auto d = scores.data();
  std::vector<int> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < cols; ++c)
      if (d[r * cols + c] > d[r * cols + best]) best = c;
    out[r] = static_cast<int>(best);
  }
  return out;
}

template <typename T>
std::uint64_t parameter_hash(const TSTModel<T>& model) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& [name, t] : model.named_parameters()) {
    auto d = t.data();
    const auto* bytes = reinterpret_cast<const unsigned char*>(d.data());
    for (std::size_t i = 0; i < d.size_bytes(); ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

template class TSTModel<float>;
template class TSTModel<double>;
template TSTModel<double> TSTModel<float>::cast<double>() const;
template TSTModel<float> TSTModel<double>::cast<float>() const;
template TSTModel<float> TSTModel<float>::cast<float>() const;
template TSTModel<double> TSTModel<double>::cast<double>() const;
template double cross_entropy(const Tensor<float>&, std::span<const int>);
template double cross_entropy(const Tensor<double>&, std::span<const int>);
template Tensor<float> classification_loss(const Tensor<float>&, std::span<const int>);
template Tensor<double> classification_loss(const Tensor<double>&, std::span<const int>);
template std::vector<int> argmax_rows(const Tensor<float>&);
template std::vector<int> argmax_rows(const Tensor<double>&);
template std::uint64_t parameter_hash(const TSTModel<float>&);
template std::uint64_t parameter_hash(const TSTModel<double>&);

}  // namespace tst
