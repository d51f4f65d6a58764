#include "twopoint/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace twopoint {

std::string_view finger_name(Finger f) {
  switch (f) {
    case Finger::kLittle: return "little";
    case Finger::kRing: return "ring";
    case Finger::kMiddle: return "middle";
    case Finger::kIndex: return "index";
    case Finger::kThumb: return "thumb";
  }
  return "?";
}

Finger parse_finger(std::string_view name) {
  for (std::size_t i = 0; i < kFingers; ++i) {
    const auto f = static_cast<Finger>(i);
    if (finger_name(f) == name) return f;
  }
  if (name.size() == 1 && name[0] >= '0' && name[0] < '0' + static_cast<char>(kFingers)) {
    return static_cast<Finger>(name[0] - '0');
  }
  throw std::invalid_argument("unknown finger: " + std::string(name));
}

}  // namespace twopoint

namespace twopoint::synth {

namespace {

constexpr double F = 1.0;   // flexed
constexpr double E = -1.0;  // extended

// Preroll discards the carrier filter's start-up transient.
constexpr int kCarrierPreroll = 2000;

constexpr double kDcOffset = 0.5;
constexpr double kMainsAmplitude = 0.2;
constexpr double kDriftAmplitude = 0.3;
constexpr double kDriftHz = 0.3;

}  // namespace

const std::vector<GestureSpec>& gesture_table() {
  // Label order: little, ring, middle, index, thumb.
  static const std::vector<GestureSpec> table = {
      {1, {{E, E, E, E, E}}, "extend all fingers"},
      {2, {{F, F, E, E, F}}, "extend index and middle"},
      {3, {{E, E, F, F, E}}, "flex index and middle"},
      {4, {{F, F, F, E, F}}, "extend index"},
      {5, {{F, F, F, E, E}}, "extend thumb and index"},
      {6, {{E, E, E, F, F}}, "flex thumb and index"},
      {7, {{F, E, E, E, F}}, "flex thumb and little"},
      {8, {{F, F, F, F, F}}, "flex all fingers"},
      {9, {{E, F, E, F, F}}, "extend little and middle"},
      {10, {{E, F, F, F, E}}, "extend thumb and little"},
  };
  return table;
}

const GestureSpec& gesture(int id) {
  if (id < 1 || id > kGestureCount) throw std::out_of_range("gesture id must be 1..10");
  return gesture_table()[static_cast<std::size_t>(id - 1)];
}

ActivationVector labels_to_activation(const FingerLabels& labels) {
  ActivationVector a;
  for (std::size_t j = 0; j < kFingers; ++j) {
    a.values[j] = std::max(labels[j], 0.0);
    a.values[kFingers + j] = std::max(-labels[j], 0.0);
  }
  return a;
}

ArtifactFlags parse_artifacts(const std::string& csv) {
  ArtifactFlags flags;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty() || item == "none") continue;
    if (item == "dc") {
      flags.dc = true;
    } else if (item == "mains") {
      flags.mains = true;
    } else if (item == "drift") {
      flags.drift = true;
    } else {
      throw std::invalid_argument("unknown artifact: " + item);
    }
  }
  return flags;
}

std::string format_artifacts(const ArtifactFlags& flags) {
  std::string out;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += ',';
    out += name;
  };
  add(flags.dc, "dc");
  add(flags.mains, "mains");
  add(flags.drift, "drift");
  return out.empty() ? "none" : out;
}

// Each group block is 6 channels x 5 fingers: electrode c (c < 5) sits over
// finger c with `crosstalk` pickup from its neighbours; electrode 5 is a
// second, weaker pickup over the middle of the group.
MixingMatrix base_mixing(const SynthConfig& config) {
  std::array<std::array<double, kFingers>, 6> block{};
  for (std::size_t c = 0; c < 5; ++c) {
    block[c][c] = 1.0;
    if (c > 0) block[c][c - 1] = config.crosstalk;
    if (c + 1 < kFingers) block[c][c + 1] = config.crosstalk;
  }
  block[5] = {config.crosstalk, config.crosstalk, 0.8, config.crosstalk, config.crosstalk};

  MixingMatrix m{};
  for (std::size_t c = 0; c < 6; ++c) {
    for (std::size_t j = 0; j < kFingers; ++j) {
      m[c][j] = block[c][j];                                   // flexors over flexor sites
      m[c][kFingers + j] = config.group_leakage * block[c][j];  // extensor leakage
      m[6 + c][kFingers + j] = block[c][j];
      m[6 + c][j] = config.group_leakage * block[c][j];
    }
  }
  return m;
}

MixingMatrix subject_mixing(const SynthConfig& config, std::uint64_t cohort_seed, int subject) {
  MixingMatrix m = base_mixing(config);
  std::mt19937_64 rng(derive_seed(cohort_seed, 0x5ab1ec7ULL, static_cast<std::uint64_t>(subject)));
  std::uniform_real_distribution<double> jitter(1.0 - config.subject_jitter,
                                                1.0 + config.subject_jitter);
  for (auto& row : m) {
    for (double& v : row) v *= jitter(rng);
  }
  return m;
}

double max_gain(const MixingMatrix& m) {
  double g = 0.0;
  for (const auto& row : m) {
    for (double v : row) g = std::max(g, v);
  }
  return g;
}

CarrierNoise::CarrierNoise(std::uint64_t seed, const SynthConfig& config)
    : rng_(seed),
      filter_(dsp::design_butterworth_bandpass(2, config.carrier_low_hz, config.carrier_high_hz,
                                               kSampleRate)) {
  // Output variance for unit white input is the impulse-response energy.
  dsp::SosFilter probe(filter_.sections());
  double energy = probe.step(1.0);
  energy *= energy;
  for (int i = 1; i < 20000; ++i) {
    const double h = probe.step(0.0);
    energy += h * h;
  }
  scale_ = 1.0 / std::sqrt(energy);
  for (int i = 0; i < kCarrierPreroll; ++i) filter_.step(normal_(rng_));
}

double CarrierNoise::next() { return scale_ * filter_.step(normal_(rng_)); }

SignalSource::SignalSource(const MixingMatrix& mixing, const SynthConfig& config,
                           std::uint64_t seed, ArtifactFlags artifacts)
    : mixing_(mixing), artifacts_(artifacts), floor_(config.noise_floor * max_gain(mixing)) {
  carriers_.reserve(kChannels);
  for (std::size_t c = 0; c < kChannels; ++c) carriers_.emplace_back(derive_seed(seed, c), config);
  set_activation({});
}

void SignalSource::set_activation(const ActivationVector& a) {
  activation_ = a;
  for (std::size_t c = 0; c < kChannels; ++c) {
    double e = 0.0;
    for (std::size_t k = 0; k < kMuscleGroups; ++k) e += mixing_[c][k] * a.values[k];
    envelope_[c] = floor_ + e;
  }
}

void SignalSource::next(std::span<double, kChannels> out) {
  const double t = static_cast<double>(n_) / kSampleRate;
  for (std::size_t c = 0; c < kChannels; ++c) {
    double v = envelope_[c] * carriers_[c].next();
    if (artifacts_.any()) {
      const double phase = 0.37 * static_cast<double>(c);
      if (artifacts_.dc) v += kDcOffset * (1.0 + 0.1 * static_cast<double>(c));
      if (artifacts_.mains) v += kMainsAmplitude * std::sin(2.0 * std::numbers::pi * 50.0 * t + phase);
      if (artifacts_.drift) v += kDriftAmplitude * std::sin(2.0 * std::numbers::pi * kDriftHz * t + phase);
    }
    out[c] = v;
  }
  ++n_;
}

MultiChannelSignal generate_signal(const ActivationVector& a, double duration_s,
                                   std::uint64_t seed, ArtifactFlags artifacts,
                                   const MixingMatrix& mixing, const SynthConfig& config) {
  if (!(duration_s > 0.0)) throw std::invalid_argument("duration must be positive");
  const auto n = static_cast<std::size_t>(std::llround(duration_s * kSampleRate));
  MultiChannelSignal sig(n);
  sig.meta.seed = seed;
  SignalSource source(mixing, config, seed, artifacts);
  source.set_activation(a);
  std::array<double, kChannels> frame{};
  for (std::size_t i = 0; i < n; ++i) {
    source.next(frame);
    for (std::size_t c = 0; c < kChannels; ++c) sig.at(c, i) = frame[c];
  }
  return sig;
}

std::uint64_t record_seed(std::uint64_t cohort_seed, int subject, int gesture, int rep) {
  return derive_seed(cohort_seed, static_cast<std::uint64_t>(subject),
                     static_cast<std::uint64_t>(gesture), static_cast<std::uint64_t>(rep));
}

std::vector<LabeledRecord> generate_subject(const CohortManifest& manifest, int subject) {
  const MixingMatrix mixing = subject_mixing(manifest.config, manifest.seed, subject);
  std::vector<LabeledRecord> out;
  out.reserve(static_cast<std::size_t>(manifest.reps) * kGestureCount);
  for (int rep = 0; rep < manifest.reps; ++rep) {
    for (const GestureSpec& g : gesture_table()) {
      const std::uint64_t seed = record_seed(manifest.seed, subject, g.id, rep);
      LabeledRecord rec{generate_signal(labels_to_activation(g.labels), manifest.duration_s, seed,
                                        manifest.artifacts, mixing, manifest.config),
                        g.labels};
      rec.signal.meta = {subject, g.id, rep, seed};
      out.push_back(std::move(rec));
    }
  }
  return out;
}

CohortDataset generate_cohort(int n_subjects, int reps, double duration_s, std::uint64_t seed,
                              ArtifactFlags artifacts, const SynthConfig& config) {
  if (n_subjects < 1) throw std::invalid_argument("need at least one subject");
  if (reps < 1) throw std::invalid_argument("need at least one repetition");
  CohortDataset ds;
  ds.manifest = {n_subjects, reps, duration_s, seed, kSampleRate, config, artifacts};
  for (int s = 0; s < n_subjects; ++s) {
    auto recs = generate_subject(ds.manifest, s);
    for (auto& r : recs) ds.records.push_back(std::move(r));
  }
  return ds;
}

}  // namespace twopoint::synth
