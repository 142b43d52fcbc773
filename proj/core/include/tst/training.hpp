#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "tst/config.hpp"
#include "tst/data.hpp"
#include "tst/model.hpp"

namespace tst {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moment estimates for a fixed list of parameters.
template <typename T>
struct AdamState {
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
  std::uint64_t step = 0;
  AdamHyper hyper;

  static AdamState zeros_like(const std::vector<Tensor<T>>& params, AdamHyper hyper = {});
};

/// One bias-corrected Adam update of `params` from their accumulated grads.
/// Parameters without a grad are treated as having a zero grad. Throws
/// NumericError if any grad is not finite.
template <typename T>
void adam_step(std::vector<Tensor<T>>& params, AdamState<T>& state, double lr);

/// initial_lr * gamma^floor(epoch / step)
double lr_at_epoch(const TSTConfig& config, std::size_t epoch);

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double test_loss = 0.0;
  double train_acc = 0.0;
  double test_acc = 0.0;
};

struct TrialReport {
  std::uint64_t seed = 0;
  std::vector<EpochRecord> epochs;
  double final_test_acc = 0.0;
  bool failed = false;
  std::string error;
  /// Predictions on the test set after the final epoch.
  std::vector<int> test_predictions;
};

struct StudyReport {
  std::vector<TrialReport> trials;  // sorted by seed
  std::size_t succeeded = 0;
  double top_acc = 0.0;
  double min_acc = 0.0;
  double avg_acc = 0.0;
  double std_acc = 0.0;  // population standard deviation
};

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
  std::vector<int> predictions;
};

/// Eval-mode loss/accuracy; parameters are left untouched.
EvalResult evaluate(const TSTModel<float>& model, const std::vector<LabeledWindow>& windows,
                    std::size_t batch_size = 256);

struct TrainOptions {
  std::function<void(const EpochRecord&)> on_epoch;
};

/// Mini-batch training for config.epochs epochs with a fresh shuffle per
/// epoch (last partial batch kept) and test evaluation after every epoch.
/// Throws NumericError on a non-finite loss.
TrialReport train(TSTModel<float>& model, const DatasetSplit& split, const TSTConfig& config, std::uint64_t seed,
                  const TrainOptions& options = {});

/// Fresh model + training per seed, up to `jobs` trials at a time. Failed
/// trials are kept in the report and excluded from the statistics.
StudyReport repeat_trials(const TSTConfig& config, const DatasetSplit& split, std::span<const std::uint64_t> seeds,
                          std::size_t jobs = 1);

StudyReport summarize(std::vector<TrialReport> trials);

/// Tab-separated: "epoch lr train_loss test_loss train_acc test_acc", then a
/// "# seed=... final_test_acc=..." summary line.
void write_trial_report(std::ostream& out, const TrialReport& report);
/// One "trial seed status final_test_acc" line per trial, then
/// "# TopAcc=... MinAcc=... AvgAcc=... Std=... succeeded=N/M".
void write_study_report(std::ostream& out, const StudyReport& report);

}  // namespace tst
