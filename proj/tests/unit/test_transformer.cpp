#include <doctest.h>

#include <cmath>
#include <numeric>

#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "tst/model.hpp"
#include "tst/transformer.hpp"

using namespace tst;
using namespace tst::testing;

namespace {

BlockParams<double> make_block(const AttentionConfig& attn, std::size_t dim_mlp, std::uint64_t seed) {
  Rng rng(seed);
  auto b = BlockParams<double>::init(attn, dim_mlp, rng);
  // non-trivial LayerNorm affine so its gradient path is exercised
  std::mt19937_64 gen(seed);
  b.norm1_gain = random_tensor<double>({attn.model_dim}, gen, 0.5, 1.5);
  b.norm1_bias = random_tensor<double>({attn.model_dim}, gen, -0.2, 0.2);
  b.norm2_gain = random_tensor<double>({attn.model_dim}, gen, 0.5, 1.5);
  b.mlp_b1 = random_tensor<double>({dim_mlp}, gen, -0.2, 0.2);
  b.mlp_b2 = random_tensor<double>({attn.model_dim}, gen, -0.2, 0.2);
  return b;
}

// Naive evaluation of softmax(q k^T / sqrt(d)) v for one [n, d] slice.
std::vector<double> naive_attention(const std::vector<double>& q, const std::vector<double>& k,
                                    const std::vector<double>& v, std::size_t n, std::size_t d, std::size_t dv) {
  std::vector<double> out(n * dv, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> s(n);
    for (std::size_t j = 0; j < n; ++j) {
      double dot = 0.0;
      for (std::size_t t = 0; t < d; ++t) dot += q[i * d + t] * k[j * d + t];
      s[j] = dot / std::sqrt(static_cast<double>(d));
    }
    double z = 0.0;
    for (double x : s) z += std::exp(x);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t t = 0; t < dv; ++t) out[i * dv + t] += std::exp(s[j]) / z * v[j * dv + t];
  }
  return out;
}

Tensor<double> columns(const Tensor<double>& w, std::size_t begin, std::size_t end) {
  return slice(w, 1, begin, end);
}

// tokens [B, n, dim] with token order 1..n-1 permuted by `perm`
Tensor<double> permute_tokens(const Tensor<double>& x, const std::vector<std::size_t>& perm) {
  std::vector<Tensor<double>> parts{slice(x, 1, 0, 1)};
  for (std::size_t p : perm) parts.push_back(slice(x, 1, p + 1, p + 2));
  return concat(parts, 1);
}

}  // namespace

TEST_SUITE("transformer") {

TEST_CASE("single token attention returns V") {
  std::mt19937_64 rng(1);
  auto q = random_tensor<double>({2, 1, 3}, rng, -5, 5, false);
  auto k = random_tensor<double>({2, 1, 3}, rng, -5, 5, false);
  auto v = random_tensor<double>({2, 1, 4}, rng, -5, 5, false);
  auto out = scaled_dot_product_attention(q, k, v);
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(out.values.at(i) == doctest::Approx(v.at(i)));
}

TEST_CASE("zero scores average the value rows") {
  std::mt19937_64 rng(2);
  auto q = Tensor<double>::zeros({1, 4, 3});
  auto k = random_tensor<double>({1, 4, 3}, rng, -1, 1, false);
  auto v = random_tensor<double>({1, 4, 2}, rng, -1, 1, false);
  auto out = scaled_dot_product_attention(q, k, v);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t c = 0; c < 2; ++c) {
      double m = 0.0;
      for (std::size_t j = 0; j < 4; ++j) m += v.at(j * 2 + c) / 4.0;
      CHECK(out.values.at(i * 2 + c) == doctest::Approx(m));
    }
}

TEST_CASE("attention agrees with a per-row loop") {
  std::mt19937_64 rng(3);
  auto q = random_tensor<double>({4, 5}, rng, -2, 2, false);
  auto k = random_tensor<double>({4, 5}, rng, -2, 2, false);
  auto v = random_tensor<double>({4, 3}, rng, -2, 2, false);
  auto out = scaled_dot_product_attention(q, k, v);
  auto ref = naive_attention({q.data().begin(), q.data().end()}, {k.data().begin(), k.data().end()},
                             {v.data().begin(), v.data().end()}, 4, 5, 3);
  for (std::size_t i = 0; i < ref.size(); ++i) CHECK(out.values.at(i) == doctest::Approx(ref[i]).epsilon(1e-12));
}

TEST_CASE("one head with identity projections is plain self-attention") {
  const std::size_t dim = 4;
  AttentionConfig attn{1, dim, dim, dim};
  auto b = make_block(attn, 8, 4);
  std::vector<double> eye(dim * dim, 0.0);
  for (std::size_t i = 0; i < dim; ++i) eye[i * dim + i] = 1.0;
  b.w_query = b.w_key = b.w_value = b.w_out = Tensor<double>({dim, dim}, eye);
  std::mt19937_64 rng(4);
  auto x = random_tensor<double>({2, 5, dim}, rng, -1, 1, false);
  auto mh = multi_head(x, b, attn);
  auto ref = scaled_dot_product_attention(x, x, x);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(mh.values.at(i) == doctest::Approx(ref.values.at(i)));
}

TEST_CASE("zero output projection silences attention") {
  AttentionConfig attn{3, 2, 2, 6};
  auto b = make_block(attn, 8, 5);
  fill(b.w_out, 0.0);
  std::mt19937_64 rng(5);
  auto out = multi_head(random_tensor<double>({2, 4, 6}, rng, -1, 1, false), b, attn);
  for (double v : out.values.data()) CHECK(v == 0.0);
}

TEST_CASE("two heads equal the concatenation of two single-head runs") {
  AttentionConfig attn{2, 3, 3, 5};
  auto b = make_block(attn, 8, 6);
  std::mt19937_64 rng(6);
  auto x = random_tensor<double>({2, 4, 5}, rng, -1, 1, false);
  auto mh = multi_head(x, b, attn, true);
  std::vector<Tensor<double>> heads;
  for (std::size_t h = 0; h < 2; ++h) {
    auto q = matmul(x, columns(b.w_query, h * 3, h * 3 + 3));
    auto k = matmul(x, columns(b.w_key, h * 3, h * 3 + 3));
    auto v = matmul(x, columns(b.w_value, h * 3, h * 3 + 3));
    heads.push_back(scaled_dot_product_attention(q, k, v).values);
  }
  auto ref = matmul(concat(heads, 2), b.w_out);
  for (std::size_t i = 0; i < ref.size(); ++i) CHECK(mh.values.at(i) == doctest::Approx(ref.at(i)).epsilon(1e-12));
  CHECK(mh.weights.shape() == Shape{2, 2, 4, 4});
}

TEST_CASE("MSA is permutation equivariant") {
  AttentionConfig attn{2, 3, 3, 6};
  auto b = make_block(attn, 8, 7);
  std::mt19937_64 rng(7);
  auto x = random_tensor<double>({1, 5, 6}, rng, -1, 1, false);
  const std::vector<std::size_t> perm{2, 0, 3, 1};
  auto y = multi_head(x, b, attn).values;
  auto yp = multi_head(permute_tokens(x, perm), b, attn).values;
  auto expected = permute_tokens(y, perm);
  for (std::size_t i = 0; i < yp.size(); ++i) CHECK(yp.at(i) == doctest::Approx(expected.at(i)).epsilon(1e-12));
}

TEST_CASE("a block with zeroed W_O, W2 and b2 is the identity") {
  AttentionConfig attn{2, 4, 4, 8};
  auto b = make_block(attn, 16, 8);
  fill(b.w_out, 0.0);
  fill(b.mlp_w2, 0.0);
  fill(b.mlp_b2, 0.0);
  std::mt19937_64 rng(8);
  auto x = random_tensor<double>({2, 5, 8}, rng, -1, 1, false);
  auto y = block_forward(x, b, attn, 0.0, {});
  CHECK(y.values.shape() == x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(y.values.at(i) == x.at(i));
}

TEST_CASE("block gradients for every parameter") {
  AttentionConfig attn{2, 4, 4, 8};
  auto b = make_block(attn, 16, 9);
  std::mt19937_64 rng(9);
  auto x = random_tensor<double>({2, 5, 8}, rng);
  auto params = b.named_parameters("block");
  params.emplace_back("x", x);
  auto checks = gradcheck([&] { return weighted_sum(block_forward(x, b, attn, 0.0, {}).values); }, params);
  for (const auto& c : checks) {
    CAPTURE(c.name);
    CHECK(c.rel_error < 1e-3);
  }
  CHECK(checks.size() == 13);
}

TEST_CASE("depth-1 stack is a block followed by the final norm on token 0") {
  TSTConfig c = tiny_config();
  auto attn = AttentionConfig::from(c);
  Rng rng(10);
  auto stack = TransformerStack<double>::init(attn, c.dim_mlp, 1, rng);
  std::mt19937_64 gen(10);
  auto x = random_tensor<double>({2, 5, 8}, gen, -1, 1, false);
  auto s = stack_forward(x, stack, attn, 0.0, {});
  auto y = block_forward(x, stack.blocks[0], attn, 0.0, {}).values;
  auto ref = layer_norm(class_token_slice(y), stack.final_gain, stack.final_bias);
  CHECK(s.feature.shape() == Shape{2, 8});
  for (std::size_t i = 0; i < ref.size(); ++i) CHECK(s.feature.at(i) == ref.at(i));
  REQUIRE(s.class_tokens.size() == 1);
}

TEST_CASE("residual degeneracy across the stack") {
  TSTConfig c = tiny_config();
  c.depth = 3;
  auto attn = AttentionConfig::from(c);
  Rng rng(11);
  auto stack = TransformerStack<double>::init(attn, c.dim_mlp, c.depth, rng);
  for (auto& b : stack.blocks) {
    fill(b.w_out, 0.0);
    fill(b.mlp_w2, 0.0);
    fill(b.mlp_b2, 0.0);
  }
  std::mt19937_64 gen(11);
  stack.final_gain = random_tensor<double>({8}, gen, 0.5, 1.5);
  auto x = random_tensor<double>({3, 5, 8}, gen, -1, 1, false);
  auto s = stack_forward(x, stack, attn, 0.0, {});
  auto ref = layer_norm(class_token_slice(x), stack.final_gain, stack.final_bias);
  for (std::size_t i = 0; i < ref.size(); ++i) CHECK(s.feature.at(i) == doctest::Approx(ref.at(i)).epsilon(1e-14));
}

TEST_CASE("default stack reports one class token per block and stochastic attention maps") {
  TSTModel<float> model(TSTConfig{}, 1);
  auto out = model.forward(random_input<float>(1, 2048, 12), {}, true);
  CHECK(out.class_tokens.size() == 6);
  REQUIRE(out.attention.size() == 6);
  for (const auto& a : out.attention) {
    CHECK(a.shape() == Shape{1, 6, 257, 257});
    for (std::size_t row = 0; row < a.size() / 257; ++row) {
      double s = 0.0;
      for (std::size_t j = 0; j < 257; ++j) {
        CHECK_MESSAGE(a.at(row * 257 + j) >= 0.0f, "negative attention weight");
        s += a.at(row * 257 + j);
      }
      if (std::abs(s - 1.0) > 1e-5) FAIL_CHECK("row " << row << " sums to " << s);
    }
  }
}

TEST_CASE("feature shape is (B, dim) for any Ns and depth") {
  for (std::size_t ns : {1, 2, 8, 32})
    for (std::size_t depth : {1, 3}) {
      TSTConfig c = tiny_config();
      c.num_subsequences = ns;
      c.depth = depth;
      TSTModel<float> m(c, 3);
      auto out = m.forward(random_input<float>(3, 32, 13));
      CHECK(out.feature.shape() == Shape{3, 8});
      CHECK(out.class_tokens.size() == depth);
    }
}

TEST_CASE("class-token feature ignores token order only without position encoding") {
  for (auto pe : {PositionEncoding::None, PositionEncoding::Learned1D}) {
    TSTConfig c = tiny_config();
    c.depth = 2;
    c.position_encoding = pe;
    TSTModel<double> model(c, 21);
    auto x = random_input<double>(2, 32, 14);
    // swap subsequences 0 and 2 (8 samples each) inside every window
    std::vector<double> swapped(x.data().begin(), x.data().end());
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t t = 0; t < 8; ++t) std::swap(swapped[b * 32 + t], swapped[b * 32 + 16 + t]);
    auto f1 = model.forward(x).feature;
    auto f2 = model.forward(Tensor<double>({2, 32}, swapped)).feature;
    double gap = 0.0;
    for (std::size_t i = 0; i < f1.size(); ++i) gap = std::max(gap, std::abs(f1.at(i) - f2.at(i)));
    if (pe == PositionEncoding::None)
      CHECK(gap <= 1e-5);
    else
      CHECK(gap > 1e-4);
  }
}

}
