#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tst/tensor.hpp"

namespace tst {

/// One fixed-length vibration window with its fault-class label.
struct LabeledWindow {
  std::vector<float> samples;
  int label = 0;
  std::string source_id;
};

struct ResampleConfig {
  std::size_t window_length = 2048;
  /// Distance between window starts; below window_length the windows overlap.
  std::size_t stride = 2048;

  void validate() const;
};

/// Windows start at 0, stride, 2*stride, ...; count is
/// floor((len - window_length) / stride) + 1.
std::vector<LabeledWindow> resample_windows(std::span<const float> signal, int label, const ResampleConfig& config,
                                            const std::string& source_id = "signal");

std::size_t window_count(std::size_t signal_length, const ResampleConfig& config);

struct DatasetSplit {
  std::vector<LabeledWindow> train;
  std::vector<LabeledWindow> test;
  std::uint64_t split_seed = 0;
};

/// Uniform draw without replacement; the remainder is discarded.
DatasetSplit split_train_test(const std::vector<LabeledWindow>& windows, std::size_t n_train, std::size_t n_test,
                              std::uint64_t seed);

struct LabeledSignal {
  std::vector<float> samples;
  int label = 0;
  std::size_t line = 0;
};

struct CsvPolicy {
  std::size_t num_classes = 10;
  /// When set every row must carry exactly this many samples; otherwise all
  /// rows must agree with the first one.
  std::optional<std::size_t> expected_length;
};

struct CsvContents {
  std::vector<LabeledSignal> records;
  std::vector<std::string> warnings;
};

/// Rows are "label,s1,...,sL"; lines starting with '#' are comments.
CsvContents read_csv(std::istream& in, const CsvPolicy& policy);
CsvContents load_csv(const std::string& path, const CsvPolicy& policy);

/// Shortest round-trip float formatting, so reading back is exact.
void write_csv(std::ostream& out, const std::vector<LabeledWindow>& windows);
void save_csv(const std::string& path, const std::vector<LabeledWindow>& windows);

/// Impulse signature of one fault class.
struct ClassSignature {
  double repetition_hz = 0.0;  // impulse repetition frequency
  double resonance_hz = 0.0;   // ringing frequency of each impulse
  double decay = 0.0;          // exponential decay rate, 1/s
  double amplitude = 0.0;
  double noise_std = 0.0;

  bool operator==(const ClassSignature&) const = default;
};

class SyntheticSpec {
 public:
  /// Throws ConfigError on frequencies at/above Nyquist or duplicate classes.
  SyntheticSpec(double sample_rate, std::size_t window_length, std::vector<ClassSignature> classes);

  /// Ten classes laid out as NC, IR x3, OR x3, RB x3 (severity ascending).
  static SyntheticSpec bearing_default(std::size_t window_length = 2048, double sample_rate = 12000.0);

  double sample_rate() const { return sample_rate_; }
  std::size_t window_length() const { return window_length_; }
  const std::vector<ClassSignature>& classes() const { return classes_; }
  /// Keeps the first `n` classes.
  SyntheticSpec first_classes(std::size_t n) const;

 private:
  double sample_rate_;
  std::size_t window_length_;
  std::vector<ClassSignature> classes_;
};

/// Trains of exponentially decaying sinusoids at each class's repetition
/// period, random initial phase, plus Gaussian noise. Balanced by class.
std::vector<LabeledWindow> generate_synthetic(const SyntheticSpec& spec, std::size_t n_per_class, std::uint64_t seed);

/// Zero mean, unit variance in place (constant windows become all zero).
/// Throws NumericError if the window holds a non-finite value.
void standardize(std::span<float> window);

/// Standardized windows packed as [B, L] plus their labels.
template <typename T>
struct Batch {
  Tensor<T> inputs;
  std::vector<int> labels;
};

template <typename T>
Batch<T> make_batch(const std::vector<LabeledWindow>& windows, std::span<const std::size_t> indices);

template <typename T>
Batch<T> make_batch(const std::vector<LabeledWindow>& windows);

}  // namespace tst
