#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "tst/analysis/confusion.hpp"
#include "tst/analysis/cost.hpp"
#include "tst/analysis/embedding.hpp"
#include "tst/analysis/tsne.hpp"
#include "tst/errors.hpp"

using namespace tst;
using namespace tst::analysis;
using namespace tst::testing;

namespace {

TSTConfig random_config(std::mt19937_64& rng) {
  auto pick = [&](std::initializer_list<std::size_t> xs) {
    std::uniform_int_distribution<std::size_t> u(0, xs.size() - 1);
    return *(xs.begin() + u(rng));
  };
  TSTConfig c;
  c.series_length = pick({16, 32, 48, 64});
  std::vector<std::size_t> divisors;
  for (std::size_t d = 1; d <= c.series_length; ++d)
    if (c.series_length % d == 0) divisors.push_back(d);
  c.num_subsequences = divisors[std::uniform_int_distribution<std::size_t>(0, divisors.size() - 1)(rng)];
  c.dim = pick({2, 4, 8, 12});
  c.dim_mlp = pick({3, 8, 16});
  c.key_dim = pick({1, 2, 4, 5});
  c.num_heads = pick({1, 2, 3});
  c.depth = pick({1, 2, 3});
  c.num_classes = pick({2, 4, 10});
  c.position_encoding = pick({0, 1}) == 0 ? PositionEncoding::Learned1D : PositionEncoding::None;
  return c;
}

// Linear-layer MACs read off the actual weight matrices: each matrix costs
// rows x cols per token it is applied to.
std::uint64_t macs_from_leaves(const TSTModel<float>& m) {
  const auto& c = m.config();
  std::uint64_t total = 0;
  for (const auto& [name, t] : m.named_parameters()) {
    if (t.rank() != 2 || name == "tokenizer.class_token" || name == "tokenizer.position") continue;
    std::uint64_t tokens = c.num_tokens();
    if (name == "tokenizer.embedding") tokens = c.num_subsequences;
    if (name == "head.weight") tokens = 1;
    total += tokens * t.size();
  }
  return total;
}

int perceptron_errors(const std::vector<std::array<double, 2>>& y, const std::vector<int>& labels) {
  double w0 = 0, w1 = 0, b = 0;
  for (int epoch = 0; epoch < 1000; ++epoch) {
    int errors = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double t = labels[i] == 1 ? 1.0 : -1.0;
      if (t * (w0 * y[i][0] + w1 * y[i][1] + b) <= 0) {
        w0 += t * y[i][0];
        w1 += t * y[i][1];
        b += t;
        ++errors;
      }
    }
    if (errors == 0) return 0;
  }
  int errors = 0;
  for (std::size_t i = 0; i < y.size(); ++i)
    errors += ((w0 * y[i][0] + w1 * y[i][1] + b) > 0) != (labels[i] == 1);
  return errors;
}

std::vector<std::vector<double>> two_clusters(std::size_t per_cluster, std::size_t dim, double separation,
                                              std::uint64_t seed, std::vector<int>& labels) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<std::vector<double>> pts;
  labels.clear();
  for (int c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < per_cluster; ++i) {
      std::vector<double> p(dim);
      for (auto& v : p) v = n(rng);
      p[0] += c * separation;
      pts.push_back(p);
      labels.push_back(c);
    }
  return pts;
}

}  // namespace

TEST_SUITE("cost") {

TEST_CASE("closed-form parameter count equals leaf enumeration on random configs") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 50; ++i) {
    const TSTConfig c = random_config(rng);
    CAPTURE(config_to_json(c, -1));
    TSTModel<float> m(c, static_cast<std::uint64_t>(i));
    const auto r = count_parameters(c);
    CHECK(r.params_full == m.parameter_count());
    const std::uint64_t standalone =
        c.dim + (c.position_encoding == PositionEncoding::Learned1D ? c.num_tokens() * c.dim : 0);
    CHECK(r.params_comparable == r.params_full - standalone);
    CHECK(count_linear_macs(c).macs_linear == macs_from_leaves(m));
  }
}

TEST_CASE("linear MACs are affine in the token count") {
  TSTConfig c;
  c.series_length = 4096;
  auto body = [&](std::size_t ns) {
    c.num_subsequences = ns;
    const auto r = count_linear_macs(c);
    return static_cast<std::int64_t>(r.macs_linear - c.series_length * c.dim - c.dim * c.num_classes);
  };
  // two points fix the line through (Ns+1); every other Ns must lie on it
  const std::int64_t f1 = body(1), f2 = body(2);
  const std::int64_t slope = f2 - f1;
  CHECK(f1 == 2 * slope);  // the line passes through the origin at Ns+1 = 0
  for (std::size_t ns : {4, 16, 64, 256, 1024, 4096}) CHECK(body(ns) == slope * static_cast<std::int64_t>(ns + 1));
}

TEST_CASE("published sweep rows reconcile") {
  const auto rows = reconcile_table4();
  CHECK(rows.size() == 23);
  for (const auto& r : rows) {
    CAPTURE(r.row.label);
    CHECK(std::abs(r.flops_rel_error) <= 0.02);
    CHECK(std::abs(r.params_rel_error) <= 0.05);
    CHECK(r.cost.params_comparable <= r.cost.params_full);
    CHECK(r.cost.macs_linear > 0);
  }
  const auto base = cost_report(TSTConfig{});
  CHECK(base.macs_linear / 1e6 == doctest::Approx(405.52).epsilon(0.02));
  CHECK(base.params_comparable / 1e6 == doctest::Approx(1.58).epsilon(0.03));
  CHECK(base.params_full == 1613834);
}

TEST_CASE("selected rows") {
  auto find = [](const std::string& label) {
    for (const auto& r : reconcile_table4())
      if (r.row.label == label) return r;
    FAIL("row " << label << " missing");
    return reconcile_table4().front();
  };
  CHECK(find("A8").row.flops_m == 3.41);
  CHECK(find("A8").cost.params_comparable / 1e6 == doctest::Approx(1.84).epsilon(0.03));
  CHECK(find("A7").row.flops_m == 4.98);
  CHECK(find("B1").cost.params_comparable / 1e6 == doctest::Approx(0.15).epsilon(0.05));
  CHECK(find("C4").cost.macs_linear / 1e6 == doctest::Approx(707.69).epsilon(0.02));
  CHECK(find("F").row.config.position_encoding == PositionEncoding::None);
}

TEST_CASE("cost tables are deterministic and complete") {
  std::ostringstream a, b, tsv;
  write_cost_table(a, reconcile_table4());
  write_cost_table(b, reconcile_table4());
  write_cost_tsv(tsv, reconcile_table4());
  CHECK(a.str() == b.str());
  CHECK(a.str().find("405.52") != std::string::npos);
  CHECK(a.str().find("MISMATCH") == std::string::npos);
  std::size_t lines = 0;
  for (char ch : tsv.str()) lines += ch == '\n';
  CHECK(lines == 24);
}

}

TEST_SUITE("confusion") {

TEST_CASE("perfect and constant predictions") {
  const std::vector<int> truth{0, 1, 2, 2, 1};
  const auto perfect = confusion(truth, truth, 3);
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t p = 0; p < 3; ++p)
      if (t != p) CHECK(perfect.at(t, p) == 0);
  CHECK(perfect.accuracy() == 1.0);
  const auto zero = confusion(truth, std::vector<int>(5, 0), 3);
  for (std::size_t t = 0; t < 3; ++t) {
    CHECK(zero.at(t, 0) == zero.row_total(t));
    CHECK(zero.at(t, 1) + zero.at(t, 2) == 0);
  }
  CHECK(zero.row_total(2) == 2);
}

TEST_CASE("trace over total is the accuracy") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> label(0, 9);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<int> t(200), p(200);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < 200; ++i) {
      t[i] = label(rng);
      p[i] = rng() % 3 == 0 ? t[i] : label(rng);
      hits += t[i] == p[i];
    }
    CHECK(confusion(t, p, 10).accuracy() == doctest::Approx(hits / 200.0).epsilon(1e-15));
  }
}

TEST_CASE("collapsing never lowers accuracy") {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> label(0, 9);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> t(50), p(50);
    for (std::size_t i = 0; i < 50; ++i) {
      t[i] = label(rng);
      p[i] = label(rng);
    }
    const auto m = confusion(t, p, 10);
    const auto m4 = collapse_to_4class(m);
    CHECK(m4.accuracy() >= m.accuracy());
    CHECK(m4.total() == m.total());
    CHECK(m4 == confusion(collapse_labels(t), collapse_labels(p), 4));
  }
}

TEST_CASE("fault-type mapping") {
  CHECK(collapse_label(0) == 0);
  CHECK(collapse_label(1) == 1);
  CHECK(collapse_label(3) == 1);
  CHECK(collapse_label(4) == 2);
  CHECK(collapse_label(9) == 3);
  CHECK_THROWS_AS(collapse_label(10), DataError);
  const std::vector<int> t{1, 2}, p{2, 1};  // IR007 <-> IR014
  CHECK(collapse_to_4class(confusion(t, p, 10)).accuracy() == 1.0);
  const std::vector<int> diag{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  const auto d4 = collapse_to_4class(confusion(diag, diag, 10));
  CHECK(d4.at(1, 1) == 3);
  CHECK(d4.at(0, 0) == 1);
  CHECK(d4.accuracy() == 1.0);
  CHECK_THROWS_AS(collapse_to_4class(ConfusionMatrix(4)), ConfigError);
  CHECK_THROWS_AS(confusion(t, std::vector<int>{1}, 10), DimensionError);
  CHECK_THROWS_AS(confusion(t, std::vector<int>{1, 11}, 10), DataError);
}

}

TEST_SUITE("tsne") {

TEST_CASE("joint affinities are symmetric, non-negative and normalized") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> x(60 * 7);
  for (auto& v : x) v = n(rng);
  const auto p = tsne_affinities(x, 60, 7, 10.0);
  double total = 0.0;
  for (std::size_t i = 0; i < 60; ++i) {
    CHECK(p[i * 60 + i] == 0.0);
    for (std::size_t j = 0; j < 60; ++j) {
      CHECK(p[i * 60 + j] >= 0.0);
      CHECK(p[i * 60 + j] == p[j * 60 + i]);
      total += p[i * 60 + j];
    }
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("well separated clusters stay separable, KL falls, seed fixes the result") {
  std::vector<int> labels;
  const auto pts = two_clusters(20, 5, 100.0, 6, labels);
  TsneOptions opt;
  opt.perplexity = 5.0;
  opt.learning_rate = 50.0;  // max(n / (4 * exaggeration), 50) for 40 points
  opt.seed = 3;
  const auto r = tsne_embed(pts, opt);
  REQUIRE(r.coords.size() == 40);
  CHECK(perceptron_errors(r.coords, labels) == 0);
  CHECK(r.kl_final < r.kl_after_exaggeration);
  const auto again = tsne_embed(pts, opt);
  CHECK(again.coords == r.coords);
  opt.seed = 4;
  CHECK(tsne_embed(pts, opt).coords != r.coords);
}

TEST_CASE("invalid t-SNE requests") {
  std::vector<int> labels;
  const auto pts = two_clusters(5, 3, 10.0, 7, labels);
  TsneOptions opt;
  opt.perplexity = 30.0;  // 10 points < 3 * 30
  CHECK_THROWS_AS(tsne_embed(pts, opt), ConfigError);
  opt.perplexity = 0.5;
  CHECK_THROWS_AS(tsne_embed(pts, opt), ConfigError);
  opt.perplexity = 2.0;
  CHECK_NOTHROW(tsne_embed(pts, opt));
  std::vector<double> many((kTsneMaxPoints + 1) * 1, 0.0);
  CHECK_THROWS_AS(tsne_affinities(many, kTsneMaxPoints + 1, 1, 5.0), ConfigError);
}

}

TEST_SUITE("embedding") {

TEST_CASE("one point per sample per stage, labels preserved") {
  TSTConfig c = tiny_config();
  c.depth = 3;
  TSTModel<float> m(c, 8);
  const auto windows = generate_synthetic(SyntheticSpec::bearing_default(32, 12000.0), 2, 8);
  EmbeddingOptions opt;
  opt.tsne.perplexity = 5.0;
  opt.tsne.iterations = 300;
  opt.jobs = 2;
  const std::string path = "embedding_unit_test.csv";
  const auto pts = export_embeddings(m, windows, path, opt);
  CHECK(pts.size() == 4 * windows.size());
  std::set<std::size_t> blocks;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    blocks.insert(pts[k].block_index);
    CHECK(pts[k].label == windows[k % windows.size()].label);
    CHECK(std::isfinite(pts[k].x));
    CHECK(std::isfinite(pts[k].y));
  }
  CHECK(blocks == std::set<std::size_t>{0, 1, 2, 3});

  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "block_index,label,x,y");
  std::size_t rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  CHECK(rows == pts.size());
  in.close();
  std::remove(path.c_str());

  opt.jobs = 1;
  CHECK(embed_class_tokens(m, windows, opt)[7].x == pts[7].x);
  opt.tsne.perplexity = 8.0;  // 20 windows < 3 * 8
  CHECK_THROWS_AS(embed_class_tokens(m, windows, opt), ConfigError);
}

TEST_CASE("stage features are the raw input and the class tokens") {
  TSTConfig c = tiny_config();
  c.depth = 2;
  TSTModel<float> m(c, 9);
  const auto windows = generate_synthetic(SyntheticSpec::bearing_default(32, 12000.0), 1, 9);
  const auto stages = collect_stage_features(m, windows, 3);
  REQUIRE(stages.size() == 3);
  CHECK(stages[0].size() == 10);
  CHECK(stages[0][0].size() == 32);
  CHECK(stages[2][0].size() == 8);
  const auto out = m.forward(make_batch<float>(windows).inputs);
  CHECK(stages[2][4][1] == out.class_tokens[1].at(4 * 8 + 1));
}

}
