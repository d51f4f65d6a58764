#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "twopoint/filters.hpp"
#include "twopoint/types.hpp"

namespace twopoint::synth {

inline constexpr std::size_t kMuscleGroups = 2 * kFingers;
inline constexpr int kGestureCount = 10;

struct GestureSpec {
  int id = 0;
  FingerLabels labels;
  std::string name;
};

/// The ten held gestures, ids 1..10.
const std::vector<GestureSpec>& gesture_table();
const GestureSpec& gesture(int id);

/// Flexor activations for fingers 0..4 followed by extensor activations.
struct ActivationVector {
  std::array<double, kMuscleGroups> values{};

  double flexor(std::size_t finger) const { return values[finger]; }
  double extensor(std::size_t finger) const { return values[kFingers + finger]; }
  ActivationVector scaled(double k) const {
    ActivationVector out = *this;
    for (double& v : out.values) v *= k;
    return out;
  }
  bool operator==(const ActivationVector&) const = default;
};

ActivationVector labels_to_activation(const FingerLabels& labels);

/// Channel x muscle-group gains. Channels 0-5 sit over the flexor group,
/// 6-11 over the extensor group.
using MixingMatrix = std::array<std::array<double, kMuscleGroups>, kChannels>;

struct SynthConfig {
  double crosstalk = 0.3;       // neighbouring-finger pickup within a group
  double group_leakage = 0.1;   // pickup from the opposite muscle group
  double noise_floor = 0.01;    // fraction of the largest gain
  double subject_jitter = 0.2;  // multiplicative, per entry, per subject
  double carrier_low_hz = 20.0;
  double carrier_high_hz = 400.0;

  bool operator==(const SynthConfig&) const = default;
};

struct ArtifactFlags {
  bool dc = false;
  bool mains = false;
  bool drift = false;

  bool any() const { return dc || mains || drift; }
  bool operator==(const ArtifactFlags&) const = default;
};

ArtifactFlags parse_artifacts(const std::string& csv);
std::string format_artifacts(const ArtifactFlags& flags);

MixingMatrix base_mixing(const SynthConfig& config = {});
MixingMatrix subject_mixing(const SynthConfig& config, std::uint64_t cohort_seed, int subject);
double max_gain(const MixingMatrix& m);

/// Unit-RMS Gaussian noise band-limited to the carrier band.
class CarrierNoise {
 public:
  CarrierNoise(std::uint64_t seed, const SynthConfig& config);
  double next();

 private:
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  dsp::SosFilter filter_;
  double scale_ = 1.0;
};

/// Streaming 12-channel generator whose activation may change per sample.
class SignalSource {
 public:
  SignalSource(const MixingMatrix& mixing, const SynthConfig& config, std::uint64_t seed,
               ArtifactFlags artifacts = {});

  void set_activation(const ActivationVector& a);
  const ActivationVector& activation() const { return activation_; }

  void next(std::span<double, kChannels> out);
  std::size_t samples_emitted() const { return n_; }

 private:
  MixingMatrix mixing_;
  ArtifactFlags artifacts_;
  double floor_ = 0.0;
  std::vector<CarrierNoise> carriers_;
  ActivationVector activation_;
  std::array<double, kChannels> envelope_{};
  std::size_t n_ = 0;
};

MultiChannelSignal generate_signal(const ActivationVector& a, double duration_s,
                                   std::uint64_t seed, ArtifactFlags artifacts = {},
                                   const MixingMatrix& mixing = base_mixing(),
                                   const SynthConfig& config = {});

struct LabeledRecord {
  MultiChannelSignal signal;
  FingerLabels labels;
};

struct CohortManifest {
  int subjects = 20;
  int reps = 3;
  double duration_s = 30.0;
  std::uint64_t seed = 42;
  double sample_rate = kSampleRate;
  SynthConfig config;
  ArtifactFlags artifacts;

  std::size_t record_count() const {
    return static_cast<std::size_t>(subjects) * kGestureCount * static_cast<std::size_t>(reps);
  }
  bool operator==(const CohortManifest&) const = default;
};

struct CohortDataset {
  CohortManifest manifest;
  std::vector<LabeledRecord> records;
};

std::uint64_t record_seed(std::uint64_t cohort_seed, int subject, int gesture, int rep);

/// All records of one subject, ordered by repetition then gesture.
std::vector<LabeledRecord> generate_subject(const CohortManifest& manifest, int subject);

CohortDataset generate_cohort(int n_subjects, int reps, double duration_s, std::uint64_t seed,
                              ArtifactFlags artifacts = {}, const SynthConfig& config = {});

}  // namespace twopoint::synth
