#include "cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <optional>
#include <ostream>
#include <sstream>

#include "tst/analysis/confusion.hpp"
#include "tst/analysis/cost.hpp"
#include "tst/analysis/embedding.hpp"
#include "tst/checkpoint.hpp"
#include "tst/config.hpp"
#include "tst/data.hpp"
#include "tst/errors.hpp"
#include "tst/training.hpp"

namespace tst::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

struct Overrides {
  std::optional<std::size_t> series_length, ns, dim, dim_mlp, dk, heads, depth, classes, epochs, batch_size, lr_step;
  std::optional<double> pdrop, lr, lr_gamma;
  std::optional<std::string> pos;
};

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--series-length", o.series_length, "Window length L");
  cmd->add_option("--ns", o.ns, "Number of subsequences");
  cmd->add_option("--dim", o.dim, "Token dimension");
  cmd->add_option("--dim-mlp", o.dim_mlp, "MLP hidden width");
  cmd->add_option("--dk", o.dk, "Key/value dimension per head");
  cmd->add_option("--heads", o.heads, "Number of attention heads");
  cmd->add_option("--depth", o.depth, "Number of Transformer blocks");
  cmd->add_option("--classes", o.classes, "Number of output classes");
  cmd->add_option("--pdrop", o.pdrop, "Dropout probability");
  cmd->add_option("--pos-encoding", o.pos, "Position encoding: 1d or none");
  cmd->add_option("--epochs", o.epochs, "Training epochs");
  cmd->add_option("--batch-size", o.batch_size, "Mini-batch size");
  cmd->add_option("--lr", o.lr, "Initial learning rate");
  cmd->add_option("--lr-step", o.lr_step, "Epochs between learning-rate decays");
  cmd->add_option("--lr-gamma", o.lr_gamma, "Learning-rate decay factor");
}

TSTConfig resolve_config(const std::string& path, const Overrides& o) {
  TSTConfig c = path.empty() ? TSTConfig{} : load_config_file(path);
  auto set = [](auto& field, const auto& value) {
    if (value) field = *value;
  };
  set(c.series_length, o.series_length);
  set(c.num_subsequences, o.ns);
  set(c.dim, o.dim);
  set(c.dim_mlp, o.dim_mlp);
  set(c.key_dim, o.dk);
  set(c.num_heads, o.heads);
  set(c.depth, o.depth);
  set(c.num_classes, o.classes);
  set(c.p_drop, o.pdrop);
  set(c.epochs, o.epochs);
  set(c.batch_size, o.batch_size);
  set(c.initial_lr, o.lr);
  set(c.lr_step, o.lr_step);
  set(c.lr_gamma, o.lr_gamma);
  if (o.pos) c.position_encoding = parse_position_encoding(*o.pos);
  c.validate();
  return c;
}

struct DataOptions {
  std::string path;
  std::optional<std::size_t> stride;
  std::optional<std::size_t> n_train, n_test;
  std::optional<std::uint64_t> split_seed;
};

void add_data_options(CLI::App* cmd, DataOptions& d) {
  cmd->add_option("--data", d.path, "Dataset CSV (label followed by samples)")->required();
  cmd->add_option("--stride", d.stride, "Window stride for rows longer than the series length");
  cmd->add_option("--n-train", d.n_train, "Training windows (default: 7/9 of the data)");
  cmd->add_option("--n-test", d.n_test, "Test windows (default: the rest)");
  cmd->add_option("--split-seed", d.split_seed, "Seed of the train/test draw (default: the run seed)");
}

// Rows of exactly L samples are windows; longer rows are cut with the stride.
std::vector<LabeledWindow> load_windows(const std::string& path, std::size_t series_length, std::size_t num_classes,
                                        std::optional<std::size_t> stride, std::ostream& err) {
  CsvPolicy policy;
  policy.num_classes = num_classes;
  const CsvContents csv = load_csv(path, policy);
  for (const auto& w : csv.warnings) err << "warning: " << w << '\n';
  if (csv.records.empty()) throw DataError(path + " contains no records");
  const std::size_t len = csv.records.front().samples.size();
  if (len < series_length)
    throw DataError(path + ": rows carry " + std::to_string(len) + " samples but the series length is " +
                    std::to_string(series_length));
  ResampleConfig rc{series_length, stride.value_or(series_length)};
  rc.validate();
  std::vector<LabeledWindow> windows;
  for (const auto& r : csv.records) {
    const std::string id = path + ":" + std::to_string(r.line);
    if (len == series_length) {
      windows.push_back({r.samples, r.label, id});
    } else {
      auto cut = resample_windows(r.samples, r.label, rc, id);
      windows.insert(windows.end(), std::make_move_iterator(cut.begin()), std::make_move_iterator(cut.end()));
    }
  }
  return windows;
}

DatasetSplit make_split(const std::vector<LabeledWindow>& windows, const DataOptions& d, std::uint64_t seed) {
  const std::size_t n = windows.size();
  const std::size_t n_train = d.n_train.value_or(n * 7 / 9);
  const std::size_t n_test = d.n_test.value_or(n_train <= n ? n - n_train : 0);
  if (n_train == 0 || n_test == 0)
    throw DataError("split needs at least one training and one test window (have " + std::to_string(n) + ")");
  return split_train_test(windows, n_train, n_test, d.split_seed.value_or(seed));
}

std::string timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json manifest(const std::string& command, const std::vector<std::string>& args) {
  json m;
  m["tool"] = "tst";
  m["version"] = kToolVersion;
  m["command"] = command;
  m["args"] = args;
  m["timestamp"] = timestamp();
  return m;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out.flush()) throw IoError("failed writing " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

void write_confusions(const fs::path& dir, const std::vector<int>& truth, const std::vector<int>& pred,
                      std::size_t num_classes, json& outputs, std::ostream& out) {
  const auto cm = analysis::confusion(truth, pred, num_classes);
  std::ostringstream s;
  analysis::write_confusion_csv(s, cm);
  write_text(dir / "confusion.csv", s.str());
  outputs.push_back("confusion.csv");
  if (num_classes == analysis::kFaultClasses) {
    const auto cm4 = analysis::collapse_to_4class(cm);
    std::ostringstream s4;
    analysis::write_confusion_csv(s4, cm4);
    write_text(dir / "confusion_4class.csv", s4.str());
    outputs.push_back("confusion_4class.csv");
    out << "4-class accuracy " << fixed(cm4.accuracy(), 4) << '\n';
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Time Series Transformer for bearing fault diagnosis", "tst"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a labelled synthetic vibration dataset");
  std::size_t synth_classes = 10, per_class = 200, synth_length = 2048;
  double sample_rate = 12000.0;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  synth->add_option("--classes", synth_classes, "Number of classes (1-10)")->capture_default_str();
  synth->add_option("--per-class", per_class, "Windows per class")->capture_default_str();
  synth->add_option("--length", synth_length, "Samples per window")->capture_default_str();
  synth->add_option("--sample-rate", sample_rate, "Sampling rate in Hz")->capture_default_str();
  synth->add_option("--seed", synth_seed, "Random seed")->capture_default_str();
  synth->add_option("--out", synth_out, "Output CSV path")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "Train one model and evaluate it on the held-out split");
  Overrides train_ov;
  DataOptions train_data;
  std::string train_config, train_dir;
  std::uint64_t train_seed = 0;
  bool train_quiet = false;
  train_cmd->add_option("--config", train_config, "JSON config file");
  train_cmd->add_option("--seed", train_seed, "Random seed")->capture_default_str();
  train_cmd->add_option("--out-dir", train_dir, "Output directory")->required();
  train_cmd->add_flag("--quiet", train_quiet, "Suppress per-epoch progress");
  add_data_options(train_cmd, train_data);
  add_overrides(train_cmd, train_ov);

  // study
  auto* study_cmd = app.add_subcommand("study", "Repeat training over several seeds and aggregate accuracy");
  Overrides study_ov;
  DataOptions study_data;
  std::string study_config, study_dir;
  std::size_t trials = 5, jobs = 1;
  std::uint64_t base_seed = 0;
  study_cmd->add_option("--config", study_config, "JSON config file");
  study_cmd->add_option("--trials", trials, "Number of trials")->capture_default_str()->check(CLI::PositiveNumber);
  study_cmd->add_option("--base-seed", base_seed, "Seed of the first trial")->capture_default_str();
  study_cmd->add_option("--jobs", jobs, "Trials run concurrently")->capture_default_str()->check(CLI::PositiveNumber);
  study_cmd->add_option("--out-dir", study_dir, "Output directory")->required();
  add_data_options(study_cmd, study_data);
  add_overrides(study_cmd, study_ov);

  // cost
  auto* cost_cmd = app.add_subcommand("cost", "Analytic MACs and parameter counts");
  Overrides cost_ov;
  std::string cost_config, sweep, format = "text";
  cost_cmd->add_option("--config", cost_config, "JSON config file");
  cost_cmd->add_option("--sweep", sweep, "Built-in sweep to reconcile")->check(CLI::IsMember({"table4"}));
  cost_cmd->add_option("--format", format, "Output format")->check(CLI::IsMember({"text", "tsv"}))
      ->capture_default_str();
  add_overrides(cost_cmd, cost_ov);

  // embed
  auto* embed_cmd = app.add_subcommand("embed", "t-SNE of the raw input and every block's class token");
  std::string ckpt_path, embed_data, embed_out;
  double perplexity = 30.0;
  std::size_t iterations = 1000, max_samples = 0, embed_jobs = 1;
  std::uint64_t embed_seed = 0;
  embed_cmd->add_option("--checkpoint", ckpt_path, "Model checkpoint")->required();
  embed_cmd->add_option("--data", embed_data, "Dataset CSV")->required();
  embed_cmd->add_option("--perplexity", perplexity, "t-SNE perplexity")->capture_default_str();
  embed_cmd->add_option("--iterations", iterations, "t-SNE iterations")->capture_default_str();
  embed_cmd->add_option("--seed", embed_seed, "t-SNE seed")->capture_default_str();
  embed_cmd->add_option("--max-samples", max_samples, "Use only the first N windows (0 = all)");
  embed_cmd->add_option("--jobs", embed_jobs, "Blocks embedded concurrently")->capture_default_str();
  embed_cmd->add_option("--out", embed_out, "Output CSV path")->required();

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  const std::vector<std::string> argv_tail(args.begin() + (args.empty() ? 0 : 1), args.end());

  try {
    if (*synth) {
      if (synth_classes == 0 || synth_classes > 10) throw ConfigError("--classes must lie in [1, 10]");
      if (per_class == 0) throw ConfigError("--per-class must be at least 1");
      const auto spec = SyntheticSpec::bearing_default(synth_length, sample_rate).first_classes(synth_classes);
      const auto windows = generate_synthetic(spec, per_class, synth_seed);
      save_csv(synth_out, windows);
      json m = manifest("synth", argv_tail);
      m["seed"] = synth_seed;
      m["classes"] = synth_classes;
      m["per_class"] = per_class;
      m["length"] = synth_length;
      m["sample_rate"] = sample_rate;
      m["outputs"] = {synth_out};
      write_json(synth_out + ".manifest.json", m);
      out << "wrote " << windows.size() << " windows to " << synth_out << '\n';
      return kExitOk;
    }

    if (*train_cmd) {
      const TSTConfig cfg = resolve_config(train_config, train_ov);
      const auto windows = load_windows(train_data.path, cfg.series_length, cfg.num_classes, train_data.stride, err);
      const DatasetSplit split = make_split(windows, train_data, train_seed);
      const fs::path dir(train_dir);
      ensure_dir(dir);
      out << "train " << split.train.size() << " / test " << split.test.size() << " windows\n";

      TSTModel<float> model(cfg, train_seed);
      TrainOptions opts;
      if (!train_quiet)
        opts.on_epoch = [&](const EpochRecord& r) {
          out << "epoch " << r.epoch << " lr=" << r.lr << " train_loss=" << fixed(r.train_loss, 4)
              << " train_acc=" << fixed(r.train_acc, 4) << " test_loss=" << fixed(r.test_loss, 4)
              << " test_acc=" << fixed(r.test_acc, 4) << std::endl;
        };
      const TrialReport report = train(model, split, cfg, train_seed, opts);

      json outputs = json::array();
      std::ostringstream rep;
      write_trial_report(rep, report);
      write_text(dir / "report.tsv", rep.str());
      outputs.push_back("report.tsv");
      save_checkpoint(model, (dir / "model.ckpt").string());
      outputs.push_back("model.ckpt");
      std::vector<int> truth;
      for (const auto& w : split.test) truth.push_back(w.label);
      write_confusions(dir, truth, report.test_predictions, cfg.num_classes, outputs, out);

      json m = manifest("train", argv_tail);
      m["config"] = json::parse(config_to_json(cfg));
      m["seed"] = train_seed;
      m["split_seed"] = split.split_seed;
      m["inputs"] = {{"data", train_data.path}, {"config", train_config}};
      m["n_train"] = split.train.size();
      m["n_test"] = split.test.size();
      m["outputs"] = outputs;
      write_json(dir / "manifest.json", m);
      out << "final_test_acc=" << fixed(report.final_test_acc, 4) << '\n';
      return kExitOk;
    }

    if (*study_cmd) {
      const TSTConfig cfg = resolve_config(study_config, study_ov);
      const auto windows = load_windows(study_data.path, cfg.series_length, cfg.num_classes, study_data.stride, err);
      const DatasetSplit split = make_split(windows, study_data, base_seed);
      const fs::path dir(study_dir);
      ensure_dir(dir);
      std::vector<std::uint64_t> seeds(trials);
      for (std::size_t i = 0; i < trials; ++i) seeds[i] = base_seed + i;
      const StudyReport report = repeat_trials(cfg, split, seeds, jobs);

      json outputs = json::array();
      for (const auto& t : report.trials) {
        const std::string name = "trial_" + std::to_string(t.seed) + ".tsv";
        std::ostringstream s;
        if (t.failed)
          s << "# seed=" << t.seed << " failed: " << t.error << '\n';
        else
          write_trial_report(s, t);
        write_text(dir / name, s.str());
        outputs.push_back(name);
      }
      std::ostringstream s;
      write_study_report(s, report);
      write_text(dir / "study.tsv", s.str());
      outputs.push_back("study.tsv");

      json m = manifest("study", argv_tail);
      m["config"] = json::parse(config_to_json(cfg));
      m["seeds"] = seeds;
      m["split_seed"] = split.split_seed;
      m["inputs"] = {{"data", study_data.path}, {"config", study_config}};
      m["outputs"] = outputs;
      write_json(dir / "manifest.json", m);
      out << s.str();
      if (report.succeeded == 0) throw NumericError("every trial failed");
      return kExitOk;
    }

    if (*cost_cmd) {
      if (!sweep.empty()) {
        const auto rows = analysis::reconcile_table4();
        if (format == "tsv")
          analysis::write_cost_tsv(out, rows);
        else
          analysis::write_cost_table(out, rows);
        return kExitOk;
      }
      const TSTConfig cfg = resolve_config(cost_config, cost_ov);
      analysis::write_cost_report(out, cfg, analysis::cost_report(cfg));
      return kExitOk;
    }

    if (*embed_cmd) {
      const TSTModel<float> model = load_checkpoint(ckpt_path);
      const TSTConfig& cfg = model.config();
      auto windows = load_windows(embed_data, cfg.series_length, cfg.num_classes, std::nullopt, err);
      if (max_samples > 0 && windows.size() > max_samples) windows.resize(max_samples);
      analysis::EmbeddingOptions opts;
      opts.tsne.perplexity = perplexity;
      opts.tsne.iterations = iterations;
      opts.tsne.seed = embed_seed;
      opts.jobs = embed_jobs;
      const auto points = analysis::export_embeddings(model, windows, embed_out, opts);
      json m = manifest("embed", argv_tail);
      m["config"] = json::parse(config_to_json(cfg));
      m["seed"] = embed_seed;
      m["perplexity"] = perplexity;
      m["iterations"] = iterations;
      m["inputs"] = {{"checkpoint", ckpt_path}, {"data", embed_data}};
      m["outputs"] = {embed_out};
      write_json(embed_out + ".manifest.json", m);
      out << "wrote " << points.size() << " points (" << cfg.depth + 1 << " stages x " << windows.size()
          << " samples) to " << embed_out << '\n';
      return kExitOk;
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace tst::cli
