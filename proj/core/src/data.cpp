#include "tst/data.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>

#include "tst/errors.hpp"
#include "tst/ops.hpp"
#include "tst/random.hpp"

namespace tst {

void ResampleConfig::validate() const {
  if (window_length == 0) throw ConfigError("window length must be at least 1");
  if (stride == 0 || stride > window_length)
    throw ConfigError("stride must lie in [1, window_length], got " + std::to_string(stride));
}

std::size_t window_count(std::size_t signal_length, const ResampleConfig& config) {
  config.validate();
  if (signal_length < config.window_length) return 0;
  return (signal_length - config.window_length) / config.stride + 1;
}

std::vector<LabeledWindow> resample_windows(std::span<const float> signal, int label, const ResampleConfig& config,
                                            const std::string& source_id) {
  config.validate();
  if (signal.size() < config.window_length)
    throw DataError("signal '" + source_id + "' has " + std::to_string(signal.size()) +
                    " samples, shorter than the window length " + std::to_string(config.window_length));
  const std::size_t count = window_count(signal.size(), config);
  std::vector<LabeledWindow> out;
  out.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    const std::size_t start = w * config.stride;
    LabeledWindow win;
    win.samples.assign(signal.begin() + static_cast<std::ptrdiff_t>(start),
                       signal.begin() + static_cast<std::ptrdiff_t>(start + config.window_length));
    win.label = label;
    win.source_id = source_id + "@" + std::to_string(start);
    out.push_back(std::move(win));
  }
  return out;
}

DatasetSplit split_train_test(const std::vector<LabeledWindow>& windows, std::size_t n_train, std::size_t n_test,
                              std::uint64_t seed) {
  if (n_train + n_test > windows.size())
    throw DataError("cannot draw " + std::to_string(n_train) + " train + " + std::to_string(n_test) +
                    " test windows from " + std::to_string(windows.size()));
  std::vector<std::size_t> order(windows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, SeedStream::Split));
  std::shuffle(order.begin(), order.end(), rng);
  DatasetSplit split;
  split.split_seed = seed;
  split.train.reserve(n_train);
  split.test.reserve(n_test);
  for (std::size_t i = 0; i < n_train; ++i) split.train.push_back(windows[order[i]]);
  for (std::size_t i = n_train; i < n_train + n_test; ++i) split.test.push_back(windows[order[i]]);
  return split;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

}  // namespace

CsvContents read_csv(std::istream& in, const CsvPolicy& policy) {
  CsvContents result;
  std::string line;
  std::size_t line_no = 0;
  std::optional<std::size_t> width = policy.expected_length;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = trim(line);
    if (view.empty() || view.front() == '#') continue;

    LabeledSignal rec;
    rec.line = line_no;
    std::size_t column = 0;
    std::size_t pos = 0;
    while (pos <= view.size()) {
      std::size_t comma = view.find(',', pos);
      if (comma == std::string_view::npos) comma = view.size();
      std::string_view field = trim(view.substr(pos, comma - pos));
      const char* first = field.data();
      const char* last = field.data() + field.size();
      if (column == 0) {
        int label = 0;
        auto [p, ec] = std::from_chars(first, last, label);
        if (ec != std::errc() || p != last || field.empty())
          throw DataError("line " + std::to_string(line_no) + ": label '" + std::string(field) +
                          "' is not an integer");
        if (label < 0 || static_cast<std::size_t>(label) >= policy.num_classes)
          throw DataError("line " + std::to_string(line_no) + ": unknown label " + std::to_string(label) +
                          " (expected 0.." + std::to_string(policy.num_classes - 1) + ")");
        rec.label = label;
      } else {
        float value = 0.0f;
        auto [p, ec] = std::from_chars(first, last, value);
        if (ec != std::errc() || p != last || field.empty() || !std::isfinite(value))
          throw DataError("line " + std::to_string(line_no) + ", column " + std::to_string(column + 1) +
                          ": '" + std::string(field) + "' is not a finite number");
        rec.samples.push_back(value);
      }
      ++column;
      pos = comma + 1;
    }
    if (rec.samples.empty()) throw DataError("line " + std::to_string(line_no) + ": row has no samples");
    if (width && rec.samples.size() != *width)
      throw DataError("line " + std::to_string(line_no) + ": expected " + std::to_string(*width) +
                      " samples, found " + std::to_string(rec.samples.size()));
    width = rec.samples.size();
    result.records.push_back(std::move(rec));
  }
  if (result.records.empty()) result.warnings.emplace_back("no data rows found");
  return result;
}

CsvContents load_csv(const std::string& path, const CsvPolicy& policy) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset " + path);
  auto contents = read_csv(in, policy);
  for (auto& w : contents.warnings) w = path + ": " + w;
  return contents;
}

void write_csv(std::ostream& out, const std::vector<LabeledWindow>& windows) {
  if (!windows.empty())
    out << "# label followed by " << windows.front().samples.size() << " samples\n";
  std::array<char, 32> buf;
  for (const auto& w : windows) {
    out << w.label;
    for (float v : w.samples) {
      auto [p, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
      out << ',';
      out.write(buf.data(), p - buf.data());
    }
    out << '\n';
  }
}

void save_csv(const std::string& path, const std::vector<LabeledWindow>& windows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  write_csv(out, windows);
  if (!out) throw IoError("failed writing " + path);
}

SyntheticSpec::SyntheticSpec(double sample_rate, std::size_t window_length, std::vector<ClassSignature> classes)
    : sample_rate_(sample_rate), window_length_(window_length), classes_(std::move(classes)) {
  if (!(sample_rate_ > 0.0)) throw ConfigError("sample rate must be positive");
  if (window_length_ == 0) throw ConfigError("window length must be at least 1");
  if (classes_.empty()) throw ConfigError("synthetic spec needs at least one class");
  const double nyquist = sample_rate_ / 2.0;
  for (std::size_t i = 0; i < classes_.size(); ++i) {
    const auto& c = classes_[i];
    if (!(c.repetition_hz > 0.0 && c.repetition_hz < nyquist && c.resonance_hz > 0.0 && c.resonance_hz < nyquist))
      throw ConfigError("class " + std::to_string(i) + ": frequencies must lie in (0, sample_rate/2)");
    if (!(c.decay >= 0.0 && c.amplitude >= 0.0 && c.noise_std >= 0.0))
      throw ConfigError("class " + std::to_string(i) + ": decay, amplitude and noise must be non-negative");
    for (std::size_t j = 0; j < i; ++j)
      if (classes_[j] == c)
        throw ConfigError("classes " + std::to_string(j) + " and " + std::to_string(i) + " have identical signatures");
  }
}

SyntheticSpec SyntheticSpec::bearing_default(std::size_t window_length, double sample_rate) {
  // Characteristic frequencies of a 6205 bearing at ~1797 rpm: shaft 29.95 Hz,
  // BPFI 162.2 Hz, BPFO 107.4 Hz, BSF 141.2 Hz. Larger faults ring louder and longer.
  const double noise = 0.25;
  struct Mode {
    double rep, res;
  };
  const Mode ir{162.2, 3300.0}, orr{107.4, 2500.0}, rb{141.2, 4100.0};
  const double amp[3] = {1.5, 2.4, 3.6};
  const double decay[3] = {1000.0, 700.0, 450.0};
  std::vector<ClassSignature> classes;
  classes.push_back({29.95, 600.0, 300.0, 0.3, noise});
  for (const Mode& m : {ir, orr, rb})
    for (int s = 0; s < 3; ++s) classes.push_back({m.rep, m.res, decay[s], amp[s], noise});
  return SyntheticSpec(sample_rate, window_length, std::move(classes));
}

SyntheticSpec SyntheticSpec::first_classes(std::size_t n) const {
  if (n == 0 || n > classes_.size())
    throw ConfigError("requested " + std::to_string(n) + " classes, spec has " + std::to_string(classes_.size()));
  return SyntheticSpec(sample_rate_, window_length_, {classes_.begin(), classes_.begin() + static_cast<std::ptrdiff_t>(n)});
}

std::vector<LabeledWindow> generate_synthetic(const SyntheticSpec& spec, std::size_t n_per_class, std::uint64_t seed) {
  Rng rng(derive_seed(seed, SeedStream::Synth));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double fs = spec.sample_rate();
  const std::size_t len = spec.window_length();
  std::vector<LabeledWindow> out;
  out.reserve(n_per_class * spec.classes().size());
  for (std::size_t label = 0; label < spec.classes().size(); ++label) {
    const ClassSignature& c = spec.classes()[label];
    const double period = 1.0 / c.repetition_hz;
    // Impulses older than this have decayed below 1e-7 of their peak.
    const double horizon = c.decay > 0.0 ? std::log(1e7) / c.decay : len / fs;
    const auto lookback = static_cast<long>(std::min(std::ceil(horizon / period), 4096.0));
    std::normal_distribution<double> noise(0.0, c.noise_std > 0.0 ? c.noise_std : 1.0);
    for (std::size_t n = 0; n < n_per_class; ++n) {
      std::vector<double> x(len, 0.0);
      const double t0 = unit(rng) * period;
      for (long k = -lookback;; ++k) {
        const double tk = t0 + static_cast<double>(k) * period;
        if (tk * fs >= static_cast<double>(len)) break;
        const auto first = static_cast<std::size_t>(std::max(0.0, std::ceil(tk * fs)));
        for (std::size_t i = first; i < len; ++i) {
          const double dt = static_cast<double>(i) / fs - tk;
          if (dt > horizon) break;
          x[i] += c.amplitude * std::exp(-c.decay * dt) * std::sin(2.0 * std::numbers::pi * c.resonance_hz * dt);
        }
      }
      LabeledWindow w;
      w.samples.resize(len);
      for (std::size_t i = 0; i < len; ++i)
        w.samples[i] = static_cast<float>(x[i] + (c.noise_std > 0.0 ? noise(rng) : 0.0));
      w.label = static_cast<int>(label);
      w.source_id = "synthetic/c" + std::to_string(label) + "/" + std::to_string(n);
      out.push_back(std::move(w));
    }
  }
  return out;
}

void standardize(std::span<float> window) {
  if (window.empty()) return;
  double mean = 0.0;
  for (float v : window) mean += v;
  mean /= static_cast<double>(window.size());
  double var = 0.0;
  for (float v : window) var += (v - mean) * (v - mean);
  var /= static_cast<double>(window.size());
  const double sd = std::sqrt(var);
  if (!std::isfinite(sd)) throw NumericError("non-finite sample in window");
  for (float& v : window) v = sd > 0.0 ? static_cast<float>((v - mean) / sd) : 0.0f;
}

template <typename T>
Batch<T> make_batch(const std::vector<LabeledWindow>& windows, std::span<const std::size_t> indices) {
  if (indices.empty()) throw DataError("cannot build an empty batch");
  const std::size_t len = windows.at(indices[0]).samples.size();
  std::vector<T> values;
  values.reserve(indices.size() * len);
  Batch<T> batch;
  std::vector<float> row;
  for (auto idx : indices) {
    const auto& w = windows.at(idx);
    if (w.samples.size() != len)
      throw DataError("window '" + w.source_id + "' has " + std::to_string(w.samples.size()) + " samples, expected " +
                      std::to_string(len));
    row = w.samples;
    standardize(row);
    values.insert(values.end(), row.begin(), row.end());
    batch.labels.push_back(w.label);
  }
  batch.inputs = Tensor<T>({indices.size(), len}, std::move(values));
  return batch;
}

template <typename T>
Batch<T> make_batch(const std::vector<LabeledWindow>& windows) {
  std::vector<std::size_t> idx(windows.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return make_batch<T>(windows, idx);
}

template Batch<float> make_batch(const std::vector<LabeledWindow>&, std::span<const std::size_t>);
template Batch<double> make_batch(const std::vector<LabeledWindow>&, std::span<const std::size_t>);
template Batch<float> make_batch(const std::vector<LabeledWindow>&);
template Batch<double> make_batch(const std::vector<LabeledWindow>&);

}  // namespace tst
