#include "twopoint/cli.hpp"

#include <algorithm>
#include <atomic>
#include <csignal>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "twopoint/cohort_io.hpp"
#include "twopoint/dsp.hpp"
#include "twopoint/eval.hpp"
#include "twopoint/service.hpp"
#include "twopoint/stream_decoder.hpp"
#include "twopoint/tracking.hpp"
#include "twopoint/training.hpp"

namespace twopoint::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliError : std::runtime_error {
  CliError(ExitCode c, const std::string& msg) : std::runtime_error(msg), code(c) {}
  ExitCode code;
};

std::string_view category_name(ExitCode c) {
  switch (c) {
    case kUsage: return "usage";
    case kConfig: return "config";
    case kIo: return "io";
    case kData: return "data";
    case kTraining: return "training";
    default: return "runtime";
  }
}

void write_text(const fs::path& file, const std::string& text) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  if (!out) throw CliError(kIo, "cannot write " + file.string());
  out << text;
}

void write_json(const fs::path& file, const json& j) { write_text(file, j.dump(1) + "\n"); }

json read_json(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw CliError(kIo, "cannot read " + file.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw CliError(kData, file.string() + ": " + e.what());
  }
}

/// Runs fn(i) for i in [0, n) on up to `jobs` threads; rethrows the first error.
template <class Fn>
void parallel_for(std::size_t n, int jobs, Fn fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!first) first = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

std::vector<models::ModelKind> parse_kinds(const std::string& spec) {
  if (spec == "all") {
    return {models::ModelKind::kDD, models::ModelKind::kLN, models::ModelKind::kMLP, models::ModelKind::kCNN};
  }
  std::vector<models::ModelKind> kinds;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      kinds.push_back(models::parse_kind(item));
    } catch (const std::exception& e) {
      throw CliError(kUsage, e.what());
    }
  }
  if (kinds.empty()) throw CliError(kUsage, "no model kind given");
  return kinds;
}

std::string checkpoint_stem(models::ModelKind kind, int subject) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "_s%02d", subject);
  return std::string(models::kind_name(kind)) + buf;
}

std::vector<fs::path> list_checkpoints(const std::vector<std::string>& files, const std::string& dir) {
  std::vector<fs::path> out(files.begin(), files.end());
  if (out.empty()) {
    if (!fs::is_directory(dir)) throw CliError(kIo, "no such model directory: " + dir);
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.path().extension() == ".ckpt") out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
  }
  if (out.empty()) throw CliError(kIo, "no checkpoints found in " + dir);
  for (const auto& p : out) {
    if (!fs::exists(p)) throw CliError(kIo, "no such checkpoint: " + p.string());
  }
  return out;
}

models::ModelCheckpoint load_ckpt(const fs::path& file) {
  if (!fs::exists(file)) throw CliError(kIo, "no such checkpoint: " + file.string());
  try {
    return models::load_checkpoint(file);
  } catch (const std::exception& e) {
    throw CliError(kData, file.string() + ": " + e.what());
  }
}

std::uint64_t split_seed_of(const models::ModelCheckpoint& ckpt) {
  return ckpt.meta.source.value("split_seed", models::kSplitSeed);
}

std::vector<synth::LabeledRecord> load_subject(const fs::path& data, int subject) {
  if (!fs::exists(data / "manifest.json")) throw CliError(kIo, "no dataset manifest in " + data.string());
  const auto manifest = synth::read_manifest(data);
  if (subject < 0 || subject >= manifest.subjects) {
    throw CliError(kData, "subject " + std::to_string(subject) + " not in dataset " + data.string());
  }
  return synth::read_subject(data, subject);
}

/// Writes the resolved options of the subcommand that ran as TOML;
/// `--config` reads the same format back.
void write_resolved_config(const CLI::App& app, const fs::path& file) {
  for (const CLI::App* sub : app.get_subcommands()) {
    write_text(file, "[" + sub->get_name() + "]\n" + sub->config_to_str(true, false));
  }
}

// ---- synth -----------------------------------------------------------------

struct SynthOpts {
  int subjects = 20;
  int reps = 3;
  double duration = 30.0;
  std::uint64_t seed = 42;
  std::string artifacts = "none";
  double noise_floor = synth::SynthConfig{}.noise_floor;
  double crosstalk = synth::SynthConfig{}.crosstalk;
  double jitter = synth::SynthConfig{}.subject_jitter;
  std::string out = "data";
};

void run_synth(const SynthOpts& o, const CLI::App& app, std::ostream& out) {
  if (o.subjects < 1 || o.reps < 1 || !(o.duration > 0.0)) throw CliError(kUsage, "subjects, reps and duration must be positive");
  synth::CohortManifest m;
  m.subjects = o.subjects;
  m.reps = o.reps;
  m.duration_s = o.duration;
  m.seed = o.seed;
  m.config.noise_floor = o.noise_floor;
  m.config.crosstalk = o.crosstalk;
  m.config.subject_jitter = o.jitter;
  try {
    m.artifacts = synth::parse_artifacts(o.artifacts);
  } catch (const std::exception& e) {
    throw CliError(kUsage, e.what());
  }
  synth::write_cohort(m, o.out);
  write_resolved_config(app, fs::path(o.out) / "synth.config.toml");
  out << "wrote " << m.record_count() << " records to " << o.out << "\n";
}

// ---- train -----------------------------------------------------------------

struct TrainOpts {
  std::string models = "all";
  std::string data = "data";
  std::vector<int> subjects;
  std::uint64_t seed = 42;
  std::uint64_t split_seed = models::kSplitSeed;
  int epochs = 15;
  int folds = 10;
  int batch = 64;
  double lr = 0.002;
  std::string out = "models";
  int jobs = 1;
};

void run_train(const TrainOpts& o, const CLI::App& app, std::ostream& out) {
  const auto kinds = parse_kinds(o.models);
  if (!fs::exists(fs::path(o.data) / "manifest.json")) throw CliError(kIo, "no dataset manifest in " + o.data);
  const auto manifest = synth::read_manifest(o.data);
  std::vector<int> subjects = o.subjects;
  if (subjects.empty()) {
    for (int s = 0; s < manifest.subjects; ++s) subjects.push_back(s);
  }
  const fs::path out_path(o.out);
  const bool single_file = out_path.extension() == ".ckpt";
  if (single_file && (kinds.size() != 1 || subjects.size() != 1)) {
    throw CliError(kUsage, "a .ckpt output needs exactly one model kind and one subject");
  }
  models::TrainConfig cfg;
  cfg.seed = o.seed;
  cfg.epochs = o.epochs;
  cfg.folds = o.folds;
  cfg.batch_size = o.batch;
  cfg.adam.lr = o.lr;
  if (cfg.epochs < 1 || cfg.folds < 2 || cfg.batch_size < 1 || !(cfg.adam.lr > 0.0)) {
    throw CliError(kUsage, "epochs >= 1, folds >= 2, batch >= 1 and lr > 0 required");
  }

  const std::size_t per_subject = static_cast<std::size_t>(manifest.reps) * synth::kGestureCount;
  if (per_subject >= 3 && models::split_dataset(per_subject, o.split_seed).train_val.size() < static_cast<std::size_t>(cfg.folds)) {
    throw CliError(kData, "each subject has " + std::to_string(per_subject) + " records, too few for " +
                              std::to_string(cfg.folds) + " folds after the test split");
  }

  std::mutex log_mu;
  parallel_for(subjects.size(), o.jobs, [&](std::size_t i) {
    const int subject = subjects[i];
    const auto records = load_subject(o.data, subject);
    const auto split = models::split_dataset(records.size(), o.split_seed);
    const auto train_val = models::build_features(records, split.train_val);
    for (const auto kind : kinds) {
      auto result = models::train(train_val, kind, cfg);
      auto& meta = result.checkpoint.meta;
      meta.subject = subject;
      meta.source = {{"seed", manifest.seed},
                     {"synth", synth::to_json(manifest.config)},
                     {"artifacts", synth::format_artifacts(manifest.artifacts)},
                     {"split_seed", o.split_seed}};
      const fs::path ckpt_file = single_file ? out_path : out_path / (checkpoint_stem(kind, subject) + ".ckpt");
      if (ckpt_file.has_parent_path()) fs::create_directories(ckpt_file.parent_path());
      models::save_checkpoint(result.checkpoint, ckpt_file);
      json report = {{"model", models::kind_name(kind)},
                     {"subject", subject},
                     {"train_val_records", split.train_val.size()},
                     {"test_records", split.test.size()},
                     {"train_val_windows", train_val.x.size()},
                     {"fold_val_mse", result.report.fold_val_mse},
                     {"mean_val_mse", result.report.mean_val_mse},
                     {"final_train_mse", result.report.final_train_mse},
                     {"epochs", result.report.epochs}};
      fs::path report_file = ckpt_file;
      report_file.replace_extension(".train.json");
      write_json(report_file, report);
      std::lock_guard lock(log_mu);
      out << "trained " << ckpt_file.filename().string() << " val_mse=" << result.report.mean_val_mse
          << " train_mse=" << result.report.final_train_mse << "\n";
    }
  });
  const fs::path cfg_file = single_file ? fs::path(o.out + ".config.toml") : out_path / "train.config.toml";
  write_resolved_config(app, cfg_file);
}

// ---- eval / sweep ------------------------------------------------------------

struct EvalOpts {
  std::vector<std::string> ckpts;
  std::string models = "models";
  std::string data = "data";
  std::string out = "results";
  std::string grid = "0.1:1.0:0.1";
  double rho_min = 0.99;
  double r2_min = 0.95;
  int jobs = 1;
};

void run_eval(const EvalOpts& o, const CLI::App& app, std::ostream& out) {
  const auto files = list_checkpoints(o.ckpts, o.models);
  std::mutex log_mu;
  parallel_for(files.size(), o.jobs, [&](std::size_t i) {
    const auto ckpt = load_ckpt(files[i]);
    const auto records = load_subject(o.data, ckpt.meta.subject);
    const auto split = models::split_dataset(records.size(), split_seed_of(ckpt));
    const auto test = models::build_features(records, split.test);
    eval::DirectionReport report;
    try {
      report = eval::direction_report(ckpt, test);
    } catch (const std::invalid_argument& e) {
      throw CliError(kData, files[i].filename().string() + ": " + e.what());
    }
    json j = eval::to_json(report);
    j["model"] = models::kind_name(ckpt.kind());
    j["subject"] = ckpt.meta.subject;
    j["test_windows"] = test.x.size();
    write_json(fs::path(o.out) / ("direction_" + files[i].stem().string() + ".json"), j);
    std::lock_guard lock(log_mu);
    out << "evaluated " << files[i].filename().string();
    for (const auto& f : report.fingers) out << ' ' << std::fixed << std::setprecision(3) << f.auc;
    out << std::defaultfloat << "\n";
  });
  write_resolved_config(app, fs::path(o.out) / "eval.config.toml");
}

void run_sweep(const EvalOpts& o, const CLI::App& app, std::ostream& out) {
  const auto files = list_checkpoints(o.ckpts, o.models);
  std::vector<double> grid;
  try {
    grid = eval::parse_grid(o.grid);
  } catch (const std::exception& e) {
    throw CliError(kUsage, std::string("bad --grid: ") + e.what());
  }
  const eval::FitThresholds thresholds{o.rho_min, o.r2_min};
  std::mutex log_mu;
  parallel_for(files.size(), o.jobs, [&](std::size_t i) {
    const auto ckpt = load_ckpt(files[i]);
    const auto records = load_subject(o.data, ckpt.meta.subject);
    const auto split = models::split_dataset(records.size(), split_seed_of(ckpt));
    const auto pre = eval::preprocess_records(records, split.test);
    const auto curves = eval::interpolation_sweep(ckpt, pre, grid);
    json j = {{"model", models::kind_name(ckpt.kind())}, {"subject", ckpt.meta.subject}, {"curves", json::array()}};
    std::ostringstream csv;
    csv << "finger,scale,mean_output,windows\n";
    csv << std::setprecision(17);
    int passed = 0;
    for (const auto& c : curves) {
      const auto verdict = eval::fit_verdict(c, thresholds);
      passed += verdict.pass ? 1 : 0;
      json cj = eval::to_json(c);
      cj["verdict"] = eval::to_json(verdict);
      j["curves"].push_back(cj);
      for (std::size_t k = 0; k < c.grid.size(); ++k) {
        csv << finger_name(c.finger) << ',' << c.grid[k] << ',' << c.mean_output[k] << ',' << c.windows[k] << "\n";
      }
    }
    const std::string stem = files[i].stem().string();
    write_json(fs::path(o.out) / ("sweep_" + stem + ".json"), j);
    write_text(fs::path(o.out) / ("sweep_" + stem + ".csv"), csv.str());
    std::lock_guard lock(log_mu);
    out << "swept " << files[i].filename().string() << " pass=" << passed << "/" << kFingers << "\n";
  });
  write_resolved_config(app, fs::path(o.out) / "sweep.config.toml");
}

// ---- track -------------------------------------------------------------------

struct TrackOpts {
  std::string ckpt;
  double freq = 0.1;
  double duration = 60.0;
  std::string finger = "index";
  bool scripted = false;
  std::uint64_t seed = 7;
  std::string artifacts = "none";
  std::string out = "results";
};

void run_track(const TrackOpts& o, const CLI::App& app, std::ostream& out) {
  if (!o.scripted) {
    throw CliError(kUsage, "interactive tracking runs through `serve`; pass --scripted for a synthetic operator");
  }
  Finger finger;
  try {
    finger = parse_finger(o.finger);
  } catch (const std::exception& e) {
    throw CliError(kUsage, e.what());
  }
  auto ckpt = std::make_shared<const models::ModelCheckpoint>(load_ckpt(o.ckpt));
  const auto subject = runtime::subject_model(*ckpt);
  synth::ArtifactFlags artifacts;
  try {
    artifacts = synth::parse_artifacts(o.artifacts);
  } catch (const std::exception& e) {
    throw CliError(kUsage, e.what());
  }
  runtime::SynthSource source(subject.mixing, subject.config, o.seed, artifacts);
  runtime::StreamDecoder decoder(ckpt);
  runtime::TrackingSession session;
  try {
    session = runtime::run_sine_session(o.freq, o.duration, source, decoder, finger);
  } catch (const std::invalid_argument& e) {
    throw CliError(kUsage, e.what());
  }
  json j = runtime::to_json(session, true);
  j["model"] = models::kind_name(ckpt->kind());
  j["subject"] = ckpt->meta.subject;
  const std::string stem = fs::path(o.ckpt).stem().string();
  write_json(fs::path(o.out) / ("track_" + stem + ".json"), j);
  write_resolved_config(app, fs::path(o.out) / ("track_" + stem + ".config.toml"));
  if (session.aborted) throw CliError(kRuntime, "session aborted after repeated dropped ticks");
  out << "track " << stem << " rmse=" << session.metrics.rmse << " mape=" << session.metrics.mape
      << " r2=" << session.metrics.r2 << "\n";
}

// ---- serve -------------------------------------------------------------------

struct ServeOpts {
  std::string ckpt;
  std::string bind = "127.0.0.1:8765";
  std::string ui;
  bool scripted = false;
  bool accelerated = false;
  std::size_t max_ticks = 0;
  std::uint64_t seed = 7;
  std::string artifacts = "none";
  double k_alpha = 60.0;
  double k_force = 10.0;
  std::string stats;
};

std::atomic<bool> g_interrupted{false};

extern "C" void on_signal(int) { g_interrupted = true; }

void run_serve(const ServeOpts& o, std::ostream& out) {
  runtime::ServiceConfig cfg;
  const auto colon = o.bind.rfind(':');
  if (colon == std::string::npos) throw CliError(kUsage, "--bind expects HOST:PORT");
  cfg.host = o.bind.substr(0, colon);
  try {
    cfg.port = std::stoi(o.bind.substr(colon + 1));
  } catch (const std::exception&) {
    throw CliError(kUsage, "--bind expects HOST:PORT");
  }
  if (!o.ui.empty() && !fs::is_directory(o.ui)) throw CliError(kIo, "no such UI directory: " + o.ui);
  if (!(o.k_force > 0.0) || o.k_alpha < 0.0) throw CliError(kUsage, "k_F must be > 0 and k_alpha >= 0");
  cfg.ui_dir = o.ui;
  cfg.scripted = o.scripted;
  cfg.realtime = !o.accelerated;
  cfg.max_ticks = o.max_ticks;
  cfg.seed = o.seed;
  cfg.k_alpha = o.k_alpha;
  cfg.k_force = o.k_force;
  try {
    cfg.artifacts = synth::parse_artifacts(o.artifacts);
  } catch (const std::exception& e) {
    throw CliError(kUsage, e.what());
  }
  auto ckpt = std::make_shared<const models::ModelCheckpoint>(load_ckpt(o.ckpt));
  runtime::Service service(cfg, ckpt);
  service.start();
  out << "listening on " << cfg.host << ":" << service.port() << std::endl;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_interrupted && !service.done()) std::this_thread::sleep_for(std::chrono::milliseconds(50));
  service.stop();
  const json stats = runtime::to_json(service.stats());
  out << stats.dump() << "\n";
  if (!o.stats.empty()) write_json(o.stats, stats);
}

// ---- report ------------------------------------------------------------------

struct ReportOpts {
  std::string in = "results";
  std::string out;
};

std::string fmt(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

json build_report(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw CliError(kIo, "no such results directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());

  struct DirAgg {
    std::array<double, kFingers> auc{}, se{}, acc{};
    int n = 0;
  };
  struct SweepAgg {
    int sweeps = 0, errors = 0;
  };
  std::map<std::string, DirAgg> dir_agg;
  std::map<std::string, SweepAgg> sweep_agg;
  json tracks = json::array();
  for (const auto& f : files) {
    const std::string name = f.filename().string();
    if (name.rfind("direction_", 0) == 0) {
      const json j = read_json(f);
      auto& a = dir_agg[j.at("model").get<std::string>()];
      for (std::size_t k = 0; k < kFingers; ++k) {
        const auto& fj = j.at("fingers").at(k);
        a.auc[k] += fj.at("auc").get<double>();
        a.se[k] += fj.at("se").get<double>();
        a.acc[k] += fj.at("accuracy").get<double>();
      }
      ++a.n;
    } else if (name.rfind("sweep_", 0) == 0) {
      const json j = read_json(f);
      auto& a = sweep_agg[j.at("model").get<std::string>()];
      for (const auto& c : j.at("curves")) {
        ++a.sweeps;
        if (!c.at("verdict").at("pass").get<bool>()) ++a.errors;
      }
    } else if (name.rfind("track_", 0) == 0) {
      json j = read_json(f);
      tracks.push_back({{"model", j.value("model", "")},
                        {"subject", j.value("subject", -1)},
                        {"finger", j.at("finger")},
                        {"freq_hz", j.at("freq_hz")},
                        {"metrics", j.at("metrics")}});
    }
  }
  json report = {{"direction", json::object()}, {"interpolation", json::object()}, {"tracking", tracks}};
  for (const auto& [model, a] : dir_agg) {
    json fingers = json::array();
    for (std::size_t k = 0; k < kFingers; ++k) {
      fingers.push_back({{"finger", finger_name(static_cast<Finger>(k))},
                         {"auc", a.auc[k] / a.n},
                         {"se", a.se[k] / a.n},
                         {"accuracy", a.acc[k] / a.n}});
    }
    report["direction"][model] = {{"subjects", a.n}, {"fingers", fingers}};
  }
  for (const auto& [model, a] : sweep_agg) {
    report["interpolation"][model] = {{"sweeps", a.sweeps},
                                      {"error_times", a.errors},
                                      {"correct_rate", a.sweeps ? 1.0 - static_cast<double>(a.errors) / a.sweeps : 0.0}};
  }
  return report;
}

std::string render_report(const json& r) {
  std::ostringstream o;
  const std::vector<std::string> order = {"dd", "ln", "mlp", "cnn"};
  auto models_in = [&](const json& section) {
    std::vector<std::string> names;
    for (const auto& m : order) {
      if (section.contains(m)) names.push_back(m);
    }
    for (const auto& [m, _] : section.items()) {
      if (std::find(names.begin(), names.end(), m) == names.end()) names.push_back(m);
    }
    return names;
  };
  auto upper = [](std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
    return s;
  };

  o << "Direction classification (mean over subjects; AUC +- SE / accuracy)\n";
  o << std::left << std::setw(6) << "Model";
  for (std::size_t k = 0; k < kFingers; ++k) o << std::setw(24) << finger_name(static_cast<Finger>(k));
  o << "\n";
  for (const auto& m : models_in(r["direction"])) {
    o << std::setw(6) << upper(m);
    for (const auto& f : r["direction"][m]["fingers"]) {
      o << std::setw(24)
        << (fmt(f["auc"].get<double>(), 4) + "+-" + fmt(f["se"].get<double>(), 4) + " / " +
            fmt(100.0 * f["accuracy"].get<double>(), 1) + "%");
    }
    o << "\n";
  }
  o << "\nInterpolation fit (monotone and linear)\n";
  o << std::setw(8) << "Model" << std::setw(10) << "Sweeps" << std::setw(14) << "Error times" << "Correct rate\n";
  for (const auto& m : models_in(r["interpolation"])) {
    const auto& a = r["interpolation"][m];
    o << std::setw(8) << upper(m) << std::setw(10) << a["sweeps"].get<int>() << std::setw(14)
      << a["error_times"].get<int>() << fmt(100.0 * a["correct_rate"].get<double>(), 0) << "%\n";
  }
  if (!r["tracking"].empty()) {
    o << "\nSine tracking\n";
    o << std::setw(8) << "Model" << std::setw(9) << "Subject" << std::setw(8) << "Finger" << std::setw(10) << "RMSE"
      << std::setw(10) << "MAPE" << "R2\n";
    for (const auto& t : r["tracking"]) {
      o << std::setw(8) << upper(t["model"].get<std::string>()) << std::setw(9) << t["subject"].get<int>()
        << std::setw(8) << t["finger"].get<std::string>() << std::setw(10) << fmt(t["metrics"]["rmse"].get<double>(), 4)
        << std::setw(10) << fmt(t["metrics"]["mape"].get<double>(), 4) << fmt(t["metrics"]["r2"].get<double>(), 4)
        << "\n";
    }
  }
  return o.str();
}

void run_report(const ReportOpts& o, std::ostream& out) {
  const json r = build_report(o.in);
  const std::string text = render_report(r);
  out << text;
  if (!o.out.empty()) {
    write_json(o.out, r);
    fs::path txt = o.out;
    txt.replace_extension(".txt");
    write_text(txt, text);
  }
}

// ---- dsp ---------------------------------------------------------------------

json biquad_json(const dsp::Biquad& q) {
  return {{"b", {q.b0, q.b1, q.b2}}, {"a", {1.0, q.a1, q.a2}}};
}

void run_dsp(bool dump, const std::vector<double>& freqs, std::ostream& out) {
  if (!dump && freqs.empty()) throw CliError(kUsage, "dsp needs --dump-coeffs and/or --response");
  json j;
  if (dump) {
    json bp = json::array();
    for (const auto& q : dsp::bandpass_sections()) bp.push_back(biquad_json(q));
    j["sample_rate"] = kSampleRate;
    j["bandpass"] = {{"low_hz", dsp::kBandLowHz}, {"high_hz", dsp::kBandHighHz}, {"sections", bp}};
    j["notch"] = {{"center_hz", dsp::kNotchHz}, {"bandwidth_hz", dsp::kNotchBandwidthHz},
                  {"section", biquad_json(dsp::notch_section())}};
    j["dc_highpass"] = {{"cutoff_hz", dsp::kDcHighpassHz}, {"section", biquad_json(dsp::dc_highpass_section())}};
  }
  if (!freqs.empty()) {
    json resp = json::array();
    const auto& bp = dsp::bandpass_sections();
    const dsp::Biquad notch = dsp::notch_section();
    for (double f : freqs) {
      const double gb = dsp::magnitude_response(bp, f, kSampleRate);
      const double gn = dsp::magnitude_response(std::span<const dsp::Biquad>(&notch, 1), f, kSampleRate);
      auto db = [](double g) { return 20.0 * std::log10(g); };
      resp.push_back({{"freq_hz", f}, {"bandpass_db", db(gb)}, {"notch_db", db(gn)}, {"chain_db", db(gb * gn)}});
    }
    j["response"] = resp;
  }
  out << std::setprecision(17) << j.dump(1) << "\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Two-point force decoding pipeline: synthetic sEMG, training, evaluation and real-time decoding.",
               "twopoint"};
  app.set_config("--config", "", "Read options from a TOML file; flags override it");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  SynthOpts so;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic cohort");
  synth_cmd->add_option("--subjects", so.subjects, "Number of subjects")->capture_default_str();
  synth_cmd->add_option("--reps", so.reps, "Repetitions per gesture")->capture_default_str();
  synth_cmd->add_option("--duration", so.duration, "Seconds per record")->capture_default_str();
  synth_cmd->add_option("--seed", so.seed, "Cohort seed")->capture_default_str();
  synth_cmd->add_option("--artifacts", so.artifacts, "none or a comma list of dc,mains,drift")->capture_default_str();
  synth_cmd->add_option("--noise-floor", so.noise_floor, "Resting amplitude relative to the largest gain")->capture_default_str();
  synth_cmd->add_option("--crosstalk", so.crosstalk, "Neighbour channel coupling")->capture_default_str();
  synth_cmd->add_option("--jitter", so.jitter, "Per-subject mixing jitter")->capture_default_str();
  synth_cmd->add_option("--out", so.out, "Output directory")->capture_default_str();

  TrainOpts to;
  auto* train_cmd = app.add_subcommand("train", "Train per-subject models");
  train_cmd->add_option("--model", to.models, "dd, ln, mlp, cnn, a comma list, or all")->capture_default_str();
  train_cmd->add_option("--data", to.data, "Dataset directory")->capture_default_str();
  train_cmd->add_option("--subject", to.subjects, "Subject index (repeatable; default all)");
  train_cmd->add_option("--seed", to.seed, "Training seed")->capture_default_str();
  train_cmd->add_option("--split-seed", to.split_seed, "Train/test split seed")->capture_default_str();
  train_cmd->add_option("--epochs", to.epochs)->capture_default_str();
  train_cmd->add_option("--folds", to.folds)->capture_default_str();
  train_cmd->add_option("--batch", to.batch)->capture_default_str();
  train_cmd->add_option("--lr", to.lr)->capture_default_str();
  train_cmd->add_option("--out", to.out, "Output directory, or a .ckpt file for a single model")->capture_default_str();
  train_cmd->add_option("--jobs", to.jobs, "Subjects trained in parallel")->capture_default_str();

  EvalOpts eo;
  auto* eval_cmd = app.add_subcommand("eval", "Direction classification on the held-out records");
  auto* sweep_cmd = app.add_subcommand("sweep", "Interpolation sweep and fit verdicts");
  for (auto* cmd : {eval_cmd, sweep_cmd}) {
    cmd->add_option("--ckpt", eo.ckpts, "Checkpoint file (repeatable)");
    cmd->add_option("--models", eo.models, "Directory of checkpoints, used when --ckpt is absent")->capture_default_str();
    cmd->add_option("--data", eo.data, "Dataset directory")->capture_default_str();
    cmd->add_option("--out", eo.out, "Results directory")->capture_default_str();
    cmd->add_option("--jobs", eo.jobs, "Checkpoints processed in parallel")->capture_default_str();
  }
  sweep_cmd->add_option("--grid", eo.grid, "lo:hi:step, mirrored to negative scales")->capture_default_str();
  sweep_cmd->add_option("--rho-min", eo.rho_min)->capture_default_str();
  sweep_cmd->add_option("--r2-min", eo.r2_min)->capture_default_str();

  TrackOpts tro;
  auto* track_cmd = app.add_subcommand("track", "Sine tracking session");
  track_cmd->add_option("--ckpt", tro.ckpt, "Checkpoint file")->required();
  track_cmd->add_option("--freq", tro.freq, "Target frequency in Hz")->capture_default_str();
  track_cmd->add_option("--duration", tro.duration, "Seconds")->capture_default_str();
  track_cmd->add_option("--finger", tro.finger, "little, ring, middle, index or thumb")->capture_default_str();
  track_cmd->add_flag("--scripted", tro.scripted, "Drive the synthetic subject with the target");
  track_cmd->add_option("--seed", tro.seed, "Source noise seed")->capture_default_str();
  track_cmd->add_option("--artifacts", tro.artifacts)->capture_default_str();
  track_cmd->add_option("--out", tro.out, "Results directory")->capture_default_str();

  ServeOpts svo;
  auto* serve_cmd = app.add_subcommand("serve", "Real-time decode service");
  serve_cmd->add_option("--ckpt", svo.ckpt, "Checkpoint file")->required();
  serve_cmd->add_option("--bind", svo.bind, "HOST:PORT")->capture_default_str();
  serve_cmd->add_option("--ui", svo.ui, "Directory of static UI assets");
  serve_cmd->add_flag("--scripted", svo.scripted, "Sessions drive the synthetic subject with the target");
  serve_cmd->add_flag("--accelerated", svo.accelerated, "Run the source as fast as the decoder consumes it");
  serve_cmd->add_option("--max-ticks", svo.max_ticks, "Stop after this many ticks (0 = until interrupted)")->capture_default_str();
  serve_cmd->add_option("--seed", svo.seed, "Source noise seed")->capture_default_str();
  serve_cmd->add_option("--artifacts", svo.artifacts)->capture_default_str();
  serve_cmd->add_option("--k-alpha", svo.k_alpha, "deg/s^2 per unit label")->capture_default_str();
  serve_cmd->add_option("--k-F", svo.k_force, "N per unit label")->capture_default_str();
  serve_cmd->add_option("--stats", svo.stats, "Write tick timing statistics here on exit");

  ReportOpts ro;
  auto* report_cmd = app.add_subcommand("report", "Aggregate eval, sweep and track results");
  report_cmd->add_option("--in", ro.in, "Results directory")->capture_default_str();
  report_cmd->add_option("--out", ro.out, "Also write JSON (and a .txt rendering) here");

  bool dump = false;
  std::vector<double> freqs;
  auto* dsp_cmd = app.add_subcommand("dsp", "Filter coefficients and responses");
  dsp_cmd->add_flag("--dump-coeffs", dump, "Print the second-order sections");
  dsp_cmd->add_option("--response", freqs, "Frequencies (Hz) to evaluate the chain at")->delimiter(',');

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ConfigError& e) {
    err << "error: config: " << e.what() << "\n";
    return kConfig;
  } catch (const CLI::FileError& e) {
    err << "error: io: " << e.what() << "\n";
    return kIo;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kOk;
    }
    err << "error: usage: " << e.what() << "\n";
    return kUsage;
  }
  try {
    if (*synth_cmd) run_synth(so, app, out);
    else if (*train_cmd) run_train(to, app, out);
    else if (*eval_cmd) run_eval(eo, app, out);
    else if (*sweep_cmd) run_sweep(eo, app, out);
    else if (*track_cmd) run_track(tro, app, out);
    else if (*serve_cmd) run_serve(svo, out);
    else if (*report_cmd) run_report(ro, out);
    else if (*dsp_cmd) run_dsp(dump, freqs, out);
    return kOk;
  } catch (const CliError& e) {
    err << "error: " << category_name(e.code) << ": " << e.what() << "\n";
    return e.code;
  } catch (const models::TrainingDiverged& e) {
    err << "error: training: " << e.what() << "\n";
    return kTraining;
  } catch (const fs::filesystem_error& e) {
    err << "error: io: " << e.what() << "\n";
    return kIo;
  } catch (const json::exception& e) {
    err << "error: data: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    err << "error: runtime: " << e.what() << "\n";
    return kRuntime;
  }
}

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace twopoint::cli
