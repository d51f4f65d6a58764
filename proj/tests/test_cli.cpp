#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "twopoint/cli.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  Result r;
  r.code = twopoint::cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Scratch directory removed on exit.
struct Scratch {
  fs::path dir;
  explicit Scratch(const std::string& name) : dir(fs::temp_directory_path() / ("twopoint_cli_" + name)) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  std::string operator/(const std::string& rel) const { return (dir / rel).string(); }
};

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = slurp(e.path());
  }
  return files;
}

void small_synth(const Scratch& s, const std::string& out = "data") {
  const auto r = cli({"synth", "--subjects", "1", "--reps", "2", "--duration", "2", "--seed", "7", "--out", s / out});
  REQUIRE(r.code == 0);
}

}  // namespace

TEST_CASE("usage errors") {
  auto r = cli({});
  CHECK(r.code == twopoint::cli::kUsage);
  r = cli({"juggle"});
  CHECK(r.code == twopoint::cli::kUsage);
  CHECK(r.err.rfind("error: usage: ", 0) == 0);
  CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
  r = cli({"synth", "--bogus"});
  CHECK(r.code == twopoint::cli::kUsage);
  r = cli({"track", "--ckpt", "x.ckpt"});
  CHECK(r.code != 0);
  CHECK(cli({"--help"}).code == 0);
  CHECK(cli({"train", "--help"}).out.find("--model") != std::string::npos);
}

TEST_CASE("synth is deterministic") {
  Scratch s("synth");
  small_synth(s, "a");
  const auto a = tree(s.dir / "a");
  fs::remove_all(s.dir / "a");
  small_synth(s, "a");
  const auto b = tree(s.dir / "a");
  CHECK(a.size() == 22);  // 20 records, manifest, resolved config
  CHECK(a == b);
  CHECK(a.count("manifest.json") == 1);
  CHECK(a.count("synth.config.toml") == 1);
  const auto c = cli({"synth", "--subjects", "1", "--reps", "1", "--duration", "2", "--seed", "8", "--out", s / "c"});
  REQUIRE(c.code == 0);
  CHECK(slurp(s / "c/s00_g01_r0.f32") != a.at("s00_g01_r0.f32"));
  CHECK(cli({"synth", "--duration", "0", "--out", s / "d"}).code == twopoint::cli::kUsage);
}

TEST_CASE("train writes a checkpoint and a report") {
  Scratch s("train");
  small_synth(s);
  const auto r = cli({"train", "--model", "ln", "--data", s / "data", "--subject", "0", "--seed", "42", "--epochs", "2",
                      "--out", s / "m.ckpt"});
  REQUIRE(r.code == 0);
  CHECK(fs::exists(s / "m.ckpt"));
  CHECK(fs::exists(s / "m.train.json"));
  CHECK(fs::exists(s / "m.ckpt.config.toml"));
  const json rep = json::parse(slurp(s / "m.train.json"));
  CHECK(rep["fold_val_mse"].size() == 10);

  // same seeds, same bytes
  REQUIRE(cli({"train", "--model", "ln", "--data", s / "data", "--subject", "0", "--seed", "42", "--epochs", "2",
               "--out", s / "m2.ckpt"})
              .code == 0);
  CHECK(slurp(s / "m.ckpt") == slurp(s / "m2.ckpt"));

  CHECK(cli({"train", "--model", "ln,dd", "--data", s / "data", "--out", s / "x.ckpt"}).code == twopoint::cli::kUsage);
  CHECK(cli({"train", "--model", "rnn", "--data", s / "data", "--out", s / "m"}).code == twopoint::cli::kUsage);
  CHECK(cli({"train", "--model", "ln", "--data", s / "data", "--subject", "5", "--out", s / "m"}).code ==
        twopoint::cli::kData);
  CHECK(cli({"train", "--model", "ln", "--data", s / "data", "--folds", "20", "--out", s / "m"}).code ==
        twopoint::cli::kData);
  CHECK(cli({"train", "--model", "ln", "--data", s / "nowhere", "--out", s / "m"}).code == twopoint::cli::kIo);
  const auto div = cli({"train", "--model", "dd", "--data", s / "data", "--lr", "1e300", "--epochs", "2", "--out", s / "d"});
  CHECK(div.code == twopoint::cli::kTraining);
  CHECK(div.err.rfind("error: training: ", 0) == 0);
}

TEST_CASE("resolved config reproduces the run") {
  Scratch s("config");
  small_synth(s);
  REQUIRE(cli({"train", "--model", "dd", "--data", s / "data", "--epochs", "1", "--folds", "2", "--out", s / "one"})
              .code == 0);
  const auto cfg = s / "one/train.config.toml";
  REQUIRE(fs::exists(cfg));
  CHECK(slurp(cfg).find("[train]") != std::string::npos);
  // flags override the file
  REQUIRE(cli({"--config", cfg, "train", "--out", s / "two"}).code == 0);
  CHECK(slurp(s / "one/dd_s00.ckpt") == slurp(s / "two/dd_s00.ckpt"));
  CHECK(slurp(s / "one/dd_s00.train.json") == slurp(s / "two/dd_s00.train.json"));
  std::string second = slurp(s / "two/train.config.toml");
  CHECK(second.find("two") != std::string::npos);

  std::ofstream(s / "bad.toml") << "[train]\nepochs = 1\nflavour = \"mint\"\n";
  const auto r = cli({"--config", s / "bad.toml", "train", "--data", s / "data", "--out", s / "three"});
  CHECK(r.code == twopoint::cli::kConfig);
  CHECK(r.err.rfind("error: config: ", 0) == 0);
  CHECK(cli({"--config", s / "absent.toml", "train"}).code != 0);
}

TEST_CASE("pipeline and report") {
  Scratch s("pipeline");
  REQUIRE(cli({"synth", "--subjects", "1", "--reps", "3", "--duration", "2", "--seed", "7", "--out", s / "data"}).code == 0);
  REQUIRE(cli({"train", "--model", "ln,dd", "--data", s / "data", "--epochs", "3", "--folds", "2", "--out", s / "models"})
              .code == 0);
  CHECK(fs::exists(s / "models/ln_s00.ckpt"));
  CHECK(fs::exists(s / "models/dd_s00.ckpt"));
  REQUIRE(cli({"eval", "--models", s / "models", "--data", s / "data", "--out", s / "results"}).code == 0);
  REQUIRE(cli({"sweep", "--models", s / "models", "--data", s / "data", "--out", s / "results"}).code == 0);
  REQUIRE(cli({"track", "--ckpt", s / "models/ln_s00.ckpt", "--scripted", "--duration", "20", "--out", s / "results"})
              .code == 0);
  CHECK(fs::exists(s / "results/direction_ln_s00.json"));
  CHECK(fs::exists(s / "results/sweep_dd_s00.json"));
  CHECK(fs::exists(s / "results/sweep_dd_s00.csv"));
  CHECK(fs::exists(s / "results/track_ln_s00.json"));
  CHECK(cli({"track", "--ckpt", s / "models/ln_s00.ckpt", "--out", s / "results"}).code == twopoint::cli::kUsage);
  CHECK(cli({"track", "--ckpt", s / "missing.ckpt", "--scripted"}).code == twopoint::cli::kIo);

  const auto r = cli({"report", "--in", s / "results", "--out", s / "report.json"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("Correct rate") != std::string::npos);
  CHECK(r.out.find("Error times") != std::string::npos);
  CHECK(r.out.find("Sweeps") != std::string::npos);
  CHECK(r.out.find("DD") != std::string::npos);
  CHECK(r.out.find("Sine tracking") != std::string::npos);
  const json rep = json::parse(slurp(s / "report.json"));
  CHECK(rep["interpolation"]["dd"]["sweeps"] == 5);
  CHECK(rep["direction"]["ln"]["fingers"].size() == 5);
  CHECK(slurp(s / "report.txt") == r.out);
  CHECK(cli({"report", "--in", s / "nothing"}).code == twopoint::cli::kIo);
}

TEST_CASE("dsp dump") {
  const auto r = cli({"dsp", "--dump-coeffs", "--response", "2,50,100"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("0.99375596495") != std::string::npos);
  CHECK(r.out.find("100") != std::string::npos);
  CHECK(cli({"dsp"}).code == twopoint::cli::kUsage);
}
