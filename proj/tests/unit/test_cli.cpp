#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "cli.hpp"

namespace fs = std::filesystem;
using namespace tst::cli;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "tst");
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t count_lines(const std::string& s, bool skip_comments = true) {
  std::size_t n = 0;
  std::istringstream in(s);
  for (std::string line; std::getline(in, line);)
    if (!(skip_comments && !line.empty() && line[0] == '#')) ++n;
  return n;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("tst_cli_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

const std::vector<std::string> kTiny = {"--series-length", "32", "--ns", "4", "--dim", "8", "--dim-mlp", "16",
                                        "--dk", "4", "--heads", "2", "--depth", "2", "--batch-size", "16"};

std::vector<std::string> with_tiny(std::vector<std::string> args) {
  args.insert(args.end(), kTiny.begin(), kTiny.end());
  return args;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("synth writes the requested rows deterministically") {
  TempDir dir;
  auto r = run_cli({"synth", "--per-class", "10", "--length", "64", "--seed", "3", "--out", dir / "a.csv"});
  REQUIRE(r.code == kExitOk);
  CHECK(count_lines(slurp(dir / "a.csv")) == 100);
  CHECK(fs::exists(dir / "a.csv.manifest.json"));
  REQUIRE(run_cli({"synth", "--per-class", "10", "--length", "64", "--seed", "3", "--out", dir / "b.csv"}).code == 0);
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
  REQUIRE(run_cli({"synth", "--classes", "4", "--per-class", "3", "--length", "64", "--out", dir / "c.csv"}).code == 0);
  CHECK(count_lines(slurp(dir / "c.csv")) == 12);
}

TEST_CASE("exit codes separate usage, config, data and io failures") {
  TempDir dir;
  CHECK(run_cli({}).code == kExitUsage);
  CHECK(run_cli({"train", "--bogus"}).code == kExitUsage);
  CHECK(run_cli({"--help"}).code == kExitOk);
  // the config is rejected before the (missing) data file is touched
  CHECK(run_cli({"train", "--data", dir / "missing.csv", "--out-dir", dir / "o", "--ns", "3"}).code == kExitConfig);
  CHECK(run_cli({"train", "--data", dir / "missing.csv", "--out-dir", dir / "o"}).code == kExitIo);
  std::ofstream(dir / "bad.csv") << "1,0.5,x\n";
  CHECK(run_cli({"train", "--data", dir / "bad.csv", "--out-dir", dir / "o"}).code == kExitData);
  std::ofstream(dir / "cfg.json") << R"({"dim": 8, "unknown": 1})";
  CHECK(run_cli({"cost", "--config", dir / "cfg.json"}).code == kExitConfig);
  CHECK(run_cli({"cost", "--pos-encoding", "2d"}).code == kExitConfig);
}

TEST_CASE("cost reports the baseline by default and reconciles the sweep") {
  auto base = run_cli({"cost"});
  REQUIRE(base.code == 0);
  CHECK(base.out.find("Ns=256") != std::string::npos);
  auto macs_m = [](const std::string& text) {
    const auto at = text.find("macs_linear\t");
    REQUIRE(at != std::string::npos);
    return std::stod(text.substr(at + 12)) / 1e6;
  };
  CHECK(macs_m(base.out) == doctest::Approx(405.52).epsilon(0.02));
  auto f = run_cli({"cost", "--pos-encoding", "none"});
  CHECK(macs_m(f.out) == doctest::Approx(404.52).epsilon(0.02));
  auto sweep = run_cli({"cost", "--sweep", "table4"});
  REQUIRE(sweep.code == 0);
  CHECK(sweep.out == run_cli({"cost", "--sweep", "table4"}).out);
  CHECK(sweep.out.find("405.52") != std::string::npos);
  CHECK(sweep.out.find("4.98") != std::string::npos);
  CHECK(sweep.out.find("MISMATCH") == std::string::npos);
  auto tsv = run_cli({"cost", "--sweep", "table4", "--format", "tsv"});
  CHECK(count_lines(tsv.out) == 24);
}

TEST_CASE("train, study and embed produce their artifacts") {
  TempDir dir;
  REQUIRE(run_cli({"synth", "--per-class", "3", "--length", "32", "--seed", "1", "--out", dir / "d.csv"}).code == 0);

  auto t1 = run_cli(with_tiny({"train", "--data", dir / "d.csv", "--out-dir", dir / "t1", "--epochs", "2",
                               "--seed", "4", "--quiet"}));
  REQUIRE_MESSAGE(t1.code == 0, t1.err);
  for (const char* f : {"report.tsv", "model.ckpt", "confusion.csv", "confusion_4class.csv", "manifest.json"})
    CHECK(fs::exists(fs::path(dir / "t1") / f));
  CHECK(count_lines(slurp(fs::path(dir / "t1") / "report.tsv")) == 3);
  auto t2 = run_cli(with_tiny({"train", "--data", dir / "d.csv", "--out-dir", dir / "t2", "--epochs", "2",
                               "--seed", "4", "--quiet"}));
  REQUIRE(t2.code == 0);
  for (const char* f : {"report.tsv", "model.ckpt", "confusion.csv"})
    CHECK(slurp(fs::path(dir / "t1") / f) == slurp(fs::path(dir / "t2") / f));
  const std::string manifest = slurp(fs::path(dir / "t1") / "manifest.json");
  CHECK(manifest.find("\"num_subsequences\": 4") != std::string::npos);
  CHECK(manifest.find("\"timestamp\"") != std::string::npos);

  auto s = run_cli(with_tiny({"study", "--data", dir / "d.csv", "--out-dir", dir / "s", "--epochs", "1",
                              "--trials", "2", "--jobs", "2"}));
  REQUIRE_MESSAGE(s.code == 0, s.err);
  CHECK(s.out.find("succeeded=2/2") != std::string::npos);
  CHECK(fs::exists(fs::path(dir / "s") / "trial_1.tsv"));

  auto e = run_cli({"embed", "--checkpoint", fs::path(dir / "t1") / "model.ckpt", "--data", dir / "d.csv",
                    "--perplexity", "5", "--iterations", "250", "--out", dir / "emb.csv"});
  REQUIRE_MESSAGE(e.code == 0, e.err);
  const std::string csv = slurp(dir / "emb.csv");
  CHECK(count_lines(csv) == 1 + 3 * 30);
  std::set<std::string> blocks;
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) blocks.insert(line.substr(0, line.find(',')));
  CHECK(blocks == std::set<std::string>{"0", "1", "2"});
  CHECK(run_cli({"embed", "--checkpoint", fs::path(dir / "t1") / "model.ckpt", "--data", dir / "d.csv",
                 "--perplexity", "11", "--out", dir / "emb2.csv"})
            .code == kExitConfig);

  REQUIRE(run_cli({"synth", "--per-class", "1", "--length", "16", "--out", dir / "short.csv"}).code == 0);
  CHECK(run_cli({"embed", "--checkpoint", fs::path(dir / "t1") / "model.ckpt", "--data", dir / "short.csv",
                 "--out", dir / "emb3.csv"})
            .code == kExitData);
}

TEST_CASE("long rows are cut into windows with the stride") {
  TempDir dir;
  REQUIRE(run_cli({"synth", "--per-class", "2", "--length", "128", "--out", dir / "long.csv"}).code == 0);
  auto r = run_cli(with_tiny({"train", "--data", dir / "long.csv", "--out-dir", dir / "o", "--epochs", "1",
                              "--stride", "16", "--quiet"}));
  REQUIRE_MESSAGE(r.code == 0, r.err);
  // 20 rows x ((128 - 32) / 16 + 1) windows = 140; 7/9 of them train
  CHECK(r.out.find("train 108 / test 32") != std::string::npos);
}

}
