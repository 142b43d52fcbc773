#include <doctest.h>

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "tst/errors.hpp"
#include "tst/data.hpp"

using namespace tst;

namespace {

std::vector<float> ramp(std::size_t n) {
  std::vector<float> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<float>(i);
  return v;
}

std::string row(int label, std::size_t n, float value = 0.5f) {
  std::string s = std::to_string(label);
  for (std::size_t i = 0; i < n; ++i) s += "," + std::to_string(value);
  return s + "\n";
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("window counts for strided and delay sampling") {
  const auto signal = ramp(10240);
  CHECK(resample_windows(signal, 1, {2048, 2048}).size() == 5);
  CHECK(resample_windows(signal, 1, {2048, 1024}).size() == 9);
  CHECK_THROWS_AS(resample_windows(ramp(2047), 1, {2048, 2048}), DataError);
  CHECK_THROWS_AS(resample_windows(signal, 1, {2048, 0}), ConfigError);
  CHECK_THROWS_AS(resample_windows(signal, 1, {2048, 4096}), ConfigError);
}

TEST_CASE("count formula and overlap hold for every stride") {
  for (std::size_t len : {64, 65, 100, 257})
    for (std::size_t stride = 1; stride <= 64; stride += 7) {
      const auto w = resample_windows(ramp(len), 2, {64, stride});
      CHECK(w.size() == (len - 64) / stride + 1);
      CHECK(w.size() == window_count(len, {64, stride}));
      for (std::size_t i = 0; i < w.size(); ++i) {
        CHECK(w[i].samples.front() == static_cast<float>(i * stride));
        CHECK(w[i].label == 2);
      }
      if (w.size() > 1) {
        std::size_t shared = 0;
        for (std::size_t t = stride; t < 64; ++t) shared += w[0].samples[t] == w[1].samples[t - stride];
        CHECK(shared == 64 - stride);
      }
    }
}

TEST_CASE("split sizes, disjointness and determinism") {
  std::vector<LabeledWindow> windows;
  for (int i = 0; i < 9000; ++i) windows.push_back({{static_cast<float>(i)}, i % 10, std::to_string(i)});
  const auto s = split_train_test(windows, 7000, 2000, 3);
  CHECK(s.train.size() == 7000);
  CHECK(s.test.size() == 2000);
  std::set<std::string> ids;
  for (const auto& w : s.train) ids.insert(w.source_id);
  for (const auto& w : s.test) CHECK(ids.insert(w.source_id).second);
  const auto again = split_train_test(windows, 7000, 2000, 3);
  for (std::size_t i = 0; i < again.test.size(); ++i) CHECK(again.test[i].source_id == s.test[i].source_id);
  const auto full = split_train_test(windows, 7000, 2000, 4);
  CHECK(ids.size() == 9000);
  CHECK(full.train.size() + full.test.size() == 9000);
  CHECK_THROWS_AS(split_train_test(windows, 8000, 2000, 3), DataError);
}

TEST_CASE("random splits are label-balanced on average") {
  std::vector<LabeledWindow> windows;
  for (int i = 0; i < 900; ++i) windows.push_back({{0.0f}, i % 10, std::to_string(i)});
  std::map<int, double> train_fraction;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = split_train_test(windows, 700, 200, seed);
    std::map<int, int> count;
    for (const auto& w : s.train) ++count[w.label];
    for (int c = 0; c < 10; ++c) train_fraction[c] += count[c] / 90.0 / 20.0;
  }
  for (const auto& [label, f] : train_fraction) CHECK(std::abs(f - 700.0 / 900.0) < 0.05);
}

TEST_CASE("csv parsing") {
  std::istringstream ok("# header\n" + row(3, 2048, 0.1f) + row(0, 2048));
  const auto c = read_csv(ok, {});
  REQUIRE(c.records.size() == 2);
  CHECK(c.records[0].label == 3);
  CHECK(c.records[0].samples.size() == 2048);
  CHECK(c.records[0].samples[5] == doctest::Approx(0.1f));

  std::istringstream empty("");
  const auto e = read_csv(empty, {});
  CHECK(e.records.empty());
  CHECK(e.warnings.size() == 1);

  CsvPolicy fixed;
  fixed.expected_length = 2048;
  std::istringstream short_row(row(1, 2048) + row(1, 2047));
  try {
    read_csv(short_row, fixed);
    FAIL("expected a data error");
  } catch (const DataError& err) {
    CHECK(std::string(err.what()).find("line 2") != std::string::npos);
  }
  std::istringstream ragged(row(1, 4) + row(1, 5));
  CHECK_THROWS_AS(read_csv(ragged, {}), DataError);
  std::istringstream text("1,0.5,abc,0.2\n");
  CHECK_THROWS_AS(read_csv(text, {}), DataError);
  std::istringstream label("10,0.5,0.2\n");
  CHECK_THROWS_AS(read_csv(label, {}), DataError);
  CHECK_THROWS_AS(load_csv("/nonexistent/file.csv", {}), IoError);
}

TEST_CASE("csv round trip is exact") {
  auto w = generate_synthetic(SyntheticSpec::bearing_default(256), 2, 11);
  std::stringstream buf;
  write_csv(buf, w);
  const auto back = read_csv(buf, {});
  REQUIRE(back.records.size() == w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    CHECK(back.records[i].label == w[i].label);
    CHECK(back.records[i].samples == w[i].samples);
  }
}

TEST_CASE("synthetic generator: balance, determinism, validation") {
  const auto spec = SyntheticSpec::bearing_default();
  CHECK(spec.classes().size() == 10);
  const auto w = generate_synthetic(spec, 10, 1);
  CHECK(w.size() == 100);
  std::map<int, int> counts;
  for (const auto& x : w) {
    ++counts[x.label];
    CHECK(x.samples.size() == 2048);
  }
  for (int c = 0; c < 10; ++c) CHECK(counts[c] == 10);
  const auto again = generate_synthetic(spec, 10, 1);
  for (std::size_t i = 0; i < w.size(); ++i) CHECK(w[i].samples == again[i].samples);
  CHECK(generate_synthetic(spec, 10, 2)[0].samples != w[0].samples);

  const ClassSignature a{100.0, 3000.0, 500.0, 1.0, 0.1};
  CHECK_THROWS_AS(SyntheticSpec(12000.0, 512, {a, a}), ConfigError);
  CHECK_THROWS_AS(SyntheticSpec(12000.0, 512, {{100.0, 6000.0, 500.0, 1.0, 0.1}}), ConfigError);
  CHECK(spec.first_classes(4).classes().size() == 4);
}

TEST_CASE("noise-free windows repeat at the impulse period") {
  // 500 Hz at 12 kHz: exactly 24 samples per period
  const SyntheticSpec spec(12000.0, 480, {{500.0, 3000.0, 800.0, 1.0, 0.0}});
  for (const auto& w : generate_synthetic(spec, 3, 4)) {
    const auto& x = w.samples;
    double worst = 0.0;
    for (std::size_t t = 0; t + 24 < x.size(); ++t) worst = std::max(worst, std::abs(double(x[t + 24]) - x[t]));
    CHECK(worst < 1e-5);
    std::size_t best_lag = 0;
    double best = -1e300;
    for (std::size_t lag = 2; lag <= 36; ++lag) {
      double r = 0.0;
      for (std::size_t t = 0; t + lag < x.size(); ++t) r += double(x[t]) * x[t + lag];
      r /= static_cast<double>(x.size() - lag);
      if (r > best) {
        best = r;
        best_lag = lag;
      }
    }
    CHECK(best_lag == 24);
  }
}

TEST_CASE("standardize and batching") {
  std::vector<float> x{1, 2, 3, 4};
  standardize(x);
  double m = 0.0, v = 0.0;
  for (float f : x) m += f / 4.0;
  for (float f : x) v += (f - m) * (f - m) / 4.0;
  CHECK(std::abs(m) < 1e-6);
  CHECK(std::abs(v - 1.0) < 1e-5);
  std::vector<float> flat{2, 2, 2};
  standardize(flat);
  for (float f : flat) CHECK(f == 0.0f);

  const auto w = generate_synthetic(SyntheticSpec::bearing_default(64), 2, 5);
  const auto b = make_batch<float>(w);
  CHECK(b.inputs.shape() == Shape{20, 64});
  CHECK(b.labels.size() == 20);
}

}
