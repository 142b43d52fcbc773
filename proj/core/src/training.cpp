#include "tst/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <thread>

#include "tst/errors.hpp"
#include "tst/random.hpp"

namespace tst {

template <typename T>
AdamState<T> AdamState<T>::zeros_like(const std::vector<Tensor<T>>& params, AdamHyper hyper) {
  AdamState s;
  s.hyper = hyper;
  for (const auto& p : params) {
    s.m.emplace_back(p.size(), T{0});
    s.v.emplace_back(p.size(), T{0});
  }
  return s;
}

template <typename T>
void adam_step(std::vector<Tensor<T>>& params, AdamState<T>& state, double lr) {
  if (state.m.size() != params.size() || state.v.size() != params.size())
    throw DimensionError("adam_step: state tracks " + std::to_string(state.m.size()) + " parameters, got " +
                         std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.m[i].size() != params[i].size())
      throw DimensionError("adam_step: moment size mismatch for parameter " + std::to_string(i));
    for (T g : params[i].grad())
      if (!std::isfinite(g))
        throw NumericError("adam_step: non-finite gradient in parameter " + std::to_string(i) + " at step " +
                           std::to_string(state.step + 1));
  }
  ++state.step;
  const T b1 = static_cast<T>(state.hyper.beta1);
  const T b2 = static_cast<T>(state.hyper.beta2);
  const T eps = static_cast<T>(state.hyper.eps);
  const T step_size = static_cast<T>(lr);
  const T bc1 = static_cast<T>(1.0 - std::pow(state.hyper.beta1, static_cast<double>(state.step)));
  const T bc2 = static_cast<T>(1.0 - std::pow(state.hyper.beta2, static_cast<double>(state.step)));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].mutable_data();
    auto g = params[i].grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      const T gj = g.empty() ? T{0} : g[j];
      m[j] = b1 * m[j] + (T{1} - b1) * gj;
      v[j] = b2 * v[j] + (T{1} - b2) * gj * gj;
      const T m_hat = m[j] / bc1;
      const T v_hat = v[j] / bc2;
      p[j] -= step_size * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step(std::vector<Tensor<float>>&, AdamState<float>&, double);
template void adam_step(std::vector<Tensor<double>>&, AdamState<double>&, double);

double lr_at_epoch(const TSTConfig& config, std::size_t epoch) {
  return config.initial_lr * std::pow(config.lr_gamma, static_cast<double>(epoch / config.lr_step));
}

namespace {

// Standardized windows packed row-major once, so batches are plain copies.
struct PackedSet {
  std::size_t length = 0;
  std::vector<float> values;
  std::vector<int> labels;

  PackedSet(const std::vector<LabeledWindow>& windows, std::size_t expected_length) : length(expected_length) {
    values.reserve(windows.size() * length);
    std::vector<float> row;
    for (const auto& w : windows) {
      if (w.samples.size() != length)
        throw DataError("window '" + w.source_id + "' has " + std::to_string(w.samples.size()) +
                        " samples, the model expects " + std::to_string(length));
      row = w.samples;
      standardize(row);
      values.insert(values.end(), row.begin(), row.end());
      labels.push_back(w.label);
    }
  }

  std::size_t size() const { return labels.size(); }

  Tensor<float> rows(std::span<const std::size_t> idx, std::vector<int>& batch_labels) const {
    std::vector<float> out(idx.size() * length);
    batch_labels.resize(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) {
      std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(idx[r] * length), length,
                  out.begin() + static_cast<std::ptrdiff_t>(r * length));
      batch_labels[r] = labels[idx[r]];
    }
    return Tensor<float>({idx.size(), length}, std::move(out));
  }
};

void check_labels(const std::vector<int>& labels, std::size_t num_classes) {
  for (int l : labels)
    if (l < 0 || static_cast<std::size_t>(l) >= num_classes)
      throw DataError("label " + std::to_string(l) + " outside [0, " + std::to_string(num_classes) + ")");
}

EvalResult evaluate_packed(const TSTModel<float>& model, const PackedSet& set, std::size_t batch_size) {
  EvalResult r;
  if (set.size() == 0) return r;
  NoGradGuard no_grad;
  std::vector<std::size_t> idx;
  std::vector<int> labels;
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t begin = 0; begin < set.size(); begin += batch_size) {
    const std::size_t end = std::min(set.size(), begin + batch_size);
    idx.resize(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    auto x = set.rows(idx, labels);
    auto out = model.forward(x);
    loss_sum += static_cast<double>(classification_loss(out.logits, labels).item()) * static_cast<double>(idx.size());
    auto pred = argmax_rows(out.probs);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      correct += pred[i] == labels[i];
      r.predictions.push_back(pred[i]);
    }
  }
  r.loss = loss_sum / static_cast<double>(set.size());
  r.accuracy = static_cast<double>(correct) / static_cast<double>(set.size());
  return r;
}

}  // namespace

EvalResult evaluate(const TSTModel<float>& model, const std::vector<LabeledWindow>& windows, std::size_t batch_size) {
  PackedSet set(windows, model.config().series_length);
  check_labels(set.labels, model.config().num_classes);
  return evaluate_packed(model, set, std::max<std::size_t>(1, batch_size));
}

TrialReport train(TSTModel<float>& model, const DatasetSplit& split, const TSTConfig& config, std::uint64_t seed,
                  const TrainOptions& options) {
  config.validate();
  if (!model.config().same_architecture(config))
    throw ConfigError("training config does not match the model architecture");
  if (split.train.empty()) throw DataError("training set is empty");
  PackedSet train_set(split.train, config.series_length);
  PackedSet test_set(split.test, config.series_length);
  check_labels(train_set.labels, config.num_classes);
  check_labels(test_set.labels, config.num_classes);

  Rng shuffle_rng(derive_seed(seed, SeedStream::Shuffle));
  Rng dropout_rng(derive_seed(seed, SeedStream::Dropout));
  auto params = model.parameters();
  auto adam = AdamState<float>::zeros_like(params);

  TrialReport report;
  report.seed = seed;
  std::vector<std::size_t> order(train_set.size());
  std::vector<int> labels;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = lr_at_epoch(config, epoch);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::size_t batch_index = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      std::span<const std::size_t> idx(order.data() + begin, end - begin);
      auto x = train_set.rows(idx, labels);
      auto out = model.forward(x, ForwardContext{true, &dropout_rng});
      auto loss = classification_loss(out.logits, labels);
      const double value = loss.item();
      if (!std::isfinite(value))
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_index));
      model.zero_grad();
      loss.backward();
      adam_step(params, adam, lr);
      loss_sum += value * static_cast<double>(idx.size());
      auto pred = argmax_rows(out.logits);
      for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == labels[i];
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.train_acc = static_cast<double>(correct) / static_cast<double>(order.size());
    auto eval = evaluate_packed(model, test_set, std::max<std::size_t>(config.batch_size, 256));
    rec.test_loss = eval.loss;
    rec.test_acc = eval.accuracy;
    report.epochs.push_back(rec);
    if (epoch + 1 == config.epochs) report.test_predictions = std::move(eval.predictions);
    if (options.on_epoch) options.on_epoch(rec);
  }
  model.zero_grad();
  report.final_test_acc = report.epochs.back().test_acc;
  return report;
}

StudyReport summarize(std::vector<TrialReport> trials) {
  std::stable_sort(trials.begin(), trials.end(), [](const auto& a, const auto& b) { return a.seed < b.seed; });
  StudyReport s;
  std::vector<double> acc;
  for (const auto& t : trials)
    if (!t.failed) acc.push_back(t.final_test_acc);
  s.trials = std::move(trials);
  s.succeeded = acc.size();
  if (!acc.empty()) {
    s.top_acc = *std::max_element(acc.begin(), acc.end());
    s.min_acc = *std::min_element(acc.begin(), acc.end());
    s.avg_acc = std::accumulate(acc.begin(), acc.end(), 0.0) / static_cast<double>(acc.size());
    double var = 0.0;
    for (double a : acc) var += (a - s.avg_acc) * (a - s.avg_acc);
    s.std_acc = std::sqrt(var / static_cast<double>(acc.size()));
    // Mean of identical values can land one ulp outside [min, max].
    s.avg_acc = std::clamp(s.avg_acc, s.min_acc, s.top_acc);
  }
  return s;
}

StudyReport repeat_trials(const TSTConfig& config, const DatasetSplit& split, std::span<const std::uint64_t> seeds,
                          std::size_t jobs) {
  if (seeds.empty()) throw ConfigError("a study needs at least one trial");
  config.validate();
  std::vector<TrialReport> results(seeds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      try {
        TSTModel<float> model(config, seeds[i]);
        results[i] = train(model, split, config, seeds[i]);
      } catch (const std::exception& e) {
        results[i] = TrialReport{};
        results[i].seed = seeds[i];
        results[i].failed = true;
        results[i].error = e.what();
      }
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(jobs, 1, seeds.size());
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  return summarize(std::move(results));
}

void write_trial_report(std::ostream& out, const TrialReport& r) {
  out << "epoch\tlr\ttrain_loss\ttest_loss\ttrain_acc\ttest_acc\n";
  out << std::setprecision(9);
  for (const auto& e : r.epochs)
    out << e.epoch << '\t' << e.lr << '\t' << e.train_loss << '\t' << e.test_loss << '\t' << e.train_acc << '\t'
        << e.test_acc << '\n';
  out << "# seed=" << r.seed << "\tfinal_test_acc=" << r.final_test_acc;
  if (r.failed) out << "\tfailed=" << r.error;
  out << '\n';
}

void write_study_report(std::ostream& out, const StudyReport& s) {
  out << "trial\tseed\tstatus\tfinal_test_acc\n";
  out << std::setprecision(9);
  for (std::size_t i = 0; i < s.trials.size(); ++i) {
    const auto& t = s.trials[i];
    out << i << '\t' << t.seed << '\t' << (t.failed ? "failed" : "ok") << '\t' << t.final_test_acc << '\n';
  }
  out << "# TopAcc=" << s.top_acc << "\tMinAcc=" << s.min_acc << "\tAvgAcc=" << s.avg_acc << "\tStd=" << s.std_acc
      << "\tsucceeded=" << s.succeeded << '/' << s.trials.size() << '\n';
}

}  // namespace tst
