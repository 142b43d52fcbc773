#include "tst/analysis/confusion.hpp"

#include <numeric>
#include <ostream>
#include <string>

#include "tst/errors.hpp"

namespace tst::analysis {

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes) : n_(num_classes), counts_(num_classes * num_classes, 0) {
  if (num_classes == 0) throw ConfigError("confusion matrix needs at least one class");
}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted, std::uint64_t count) {
  if (truth >= n_ || predicted >= n_)
    throw DataError("confusion entry (" + std::to_string(truth) + ", " + std::to_string(predicted) +
                    ") outside " + std::to_string(n_) + " classes");
  counts_[truth * n_ + predicted] += count;
}

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::row_total(std::size_t truth) const {
  std::uint64_t s = 0;
  for (std::size_t p = 0; p < n_; ++p) s += at(truth, p);
  return s;
}

double ConfusionMatrix::accuracy() const {
  const std::uint64_t t = total();
  if (t == 0) return 0.0;
  std::uint64_t diag = 0;
  for (std::size_t i = 0; i < n_; ++i) diag += at(i, i);
  return static_cast<double>(diag) / static_cast<double>(t);
}

double ConfusionMatrix::rate(std::size_t truth, std::size_t predicted) const {
  const std::uint64_t r = row_total(truth);
  return r == 0 ? 0.0 : static_cast<double>(at(truth, predicted)) / static_cast<double>(r);
}

ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> predicted, std::size_t num_classes) {
  if (truth.size() != predicted.size())
    throw DimensionError("confusion: " + std::to_string(truth.size()) + " labels but " +
                         std::to_string(predicted.size()) + " predictions");
  ConfusionMatrix m(num_classes);
  const int n = static_cast<int>(num_classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= n || predicted[i] < 0 || predicted[i] >= n)
      throw DataError("confusion: label pair (" + std::to_string(truth[i]) + ", " + std::to_string(predicted[i]) +
                      ") at index " + std::to_string(i) + " outside [0, " + std::to_string(n) + ")");
    m.add(static_cast<std::size_t>(truth[i]), static_cast<std::size_t>(predicted[i]));
  }
  return m;
}

int collapse_label(int label) {
  if (label < 0 || label >= static_cast<int>(kFaultClasses))
    throw DataError("label " + std::to_string(label) + " is not part of the ten-class fault layout");
  return label == 0 ? 0 : 1 + (label - 1) / 3;
}

std::vector<int> collapse_labels(std::span<const int> labels) {
  std::vector<int> out;
  out.reserve(labels.size());
  for (int l : labels) out.push_back(collapse_label(l));
  return out;
}

ConfusionMatrix collapse_to_4class(const ConfusionMatrix& m) {
  if (m.classes() != kFaultClasses)
    throw ConfigError("cannot collapse a " + std::to_string(m.classes()) +
                      "-class matrix: the fault-type layout is defined for 10 classes");
  ConfusionMatrix out(kFaultTypes);
  for (std::size_t t = 0; t < kFaultClasses; ++t)
    for (std::size_t p = 0; p < kFaultClasses; ++p)
      if (const auto c = m.at(t, p))
        out.add(static_cast<std::size_t>(collapse_label(static_cast<int>(t))),
                static_cast<std::size_t>(collapse_label(static_cast<int>(p))), c);
  return out;
}

void write_confusion_csv(std::ostream& out, const ConfusionMatrix& m) {
  out << "true\\pred";
  for (std::size_t p = 0; p < m.classes(); ++p) out << ',' << p;
  out << '\n';
  for (std::size_t t = 0; t < m.classes(); ++t) {
    out << t;
    for (std::size_t p = 0; p < m.classes(); ++p) out << ',' << m.at(t, p);
    out << '\n';
  }
}

}  // namespace tst::analysis
