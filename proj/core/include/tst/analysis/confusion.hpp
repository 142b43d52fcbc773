#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace tst::analysis {

/// counts(t, p) = number of samples with true class t predicted as p.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes);

  std::size_t classes() const { return n_; }
  std::uint64_t at(std::size_t truth, std::size_t predicted) const { return counts_[truth * n_ + predicted]; }
  void add(std::size_t truth, std::size_t predicted, std::uint64_t count = 1);

  std::uint64_t total() const;
  std::uint64_t row_total(std::size_t truth) const;
  /// Trace over total; 0 for an empty matrix.
  double accuracy() const;
  /// Fraction of row `truth` predicted as `predicted`; 0 for an empty row.
  double rate(std::size_t truth, std::size_t predicted) const;

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t n_;
  std::vector<std::uint64_t> counts_;
};

/// Throws DimensionError on length mismatch, DataError on labels outside [0, num_classes).
ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> predicted, std::size_t num_classes);

// Ten-class layout: 0 NC, 1-3 IR, 4-6 OR, 7-9 RB (severity ascending).
// Four-class layout: 0 NC, 1 IR, 2 OR, 3 RB.
inline constexpr std::size_t kFaultClasses = 10;
inline constexpr std::size_t kFaultTypes = 4;

/// DataError for labels outside the ten-class layout.
int collapse_label(int label);
std::vector<int> collapse_labels(std::span<const int> labels);
/// Sums blocks of the ten-class matrix; ConfigError for any other size.
ConfusionMatrix collapse_to_4class(const ConfusionMatrix& ten_class);

/// Rows are true classes, columns predictions; one header line.
void write_confusion_csv(std::ostream& out, const ConfusionMatrix& m);

}  // namespace tst::analysis
