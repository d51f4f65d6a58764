#pragma once

#include <array>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "twopoint/checkpoint.hpp"
#include "twopoint/dsp.hpp"
#include "twopoint/synth.hpp"

namespace twopoint::runtime {

inline constexpr double kHopSeconds = static_cast<double>(kWindowStep) / kSampleRate;
inline constexpr double kDisplayClamp = 1.5;

struct DecodeTick {
  std::size_t index = 0;         // tick number
  double t = 0.0;                // time of the newest sample in the window, seconds
  std::size_t window_start = 0;  // sample index of the window's first sample
  FingerLabels labels;           // clamped to +-kDisplayClamp
  FingerLabels raw;              // unclamped model output
};

/// Produces 12-channel frames at 1 kHz.
class SampleSource {
 public:
  virtual ~SampleSource() = default;
  /// false when no frame is available (end of playback or underrun).
  virtual bool next(std::span<double, kChannels> frame) = 0;
};

/// Plays a stored record; ends after the last sample.
class PlaybackSource : public SampleSource {
 public:
  explicit PlaybackSource(MultiChannelSignal signal) : signal_(std::move(signal)) {}
  bool next(std::span<double, kChannels> frame) override;

 private:
  MultiChannelSignal signal_;
  std::size_t pos_ = 0;
};

/// Synthetic subject driven by per-finger labels. In scripted-sine mode the
/// selected finger follows sin(2 pi f t) and the others rest at 0.
class SynthSource : public SampleSource {
 public:
  SynthSource(const synth::MixingMatrix& mixing, const synth::SynthConfig& config,
              std::uint64_t seed, synth::ArtifactFlags artifacts = {});

  bool next(std::span<double, kChannels> frame) override;

  void set_labels(const FingerLabels& labels);
  /// Phase zero sits at `start_sample` (default: the next emitted frame).
  void start_sine(Finger finger, double freq_hz, std::optional<std::size_t> start_sample = std::nullopt);
  std::size_t samples_emitted() const { return source_.samples_emitted(); }
  void stop_sine();

  /// Labels in effect for the most recently emitted frame.
  const FingerLabels& labels() const { return labels_; }
  double time() const;

 private:
  synth::SignalSource source_;
  FingerLabels labels_;
  FingerLabels held_;
  std::optional<std::pair<Finger, double>> sine_;
  std::size_t sine_start_ = 0;
};

/// Mixing model of the subject a checkpoint was trained on, read from its
/// training metadata; falls back to the base mixing matrix.
struct SubjectModel {
  synth::MixingMatrix mixing;
  synth::SynthConfig config;
};
SubjectModel subject_model(const models::ModelCheckpoint& ckpt);

/// Anything that maps 12-channel frames to ticks.
class Decoder {
 public:
  virtual ~Decoder() = default;
  virtual std::optional<DecodeTick> push(std::span<const double, kChannels> frame) = 0;
};

/// Streaming filter chain + 200-sample ring buffer; emits a tick every 50
/// samples once the buffer is full.
class StreamDecoder : public Decoder {
 public:
  explicit StreamDecoder(std::shared_ptr<const models::ModelCheckpoint> ckpt);

  std::optional<DecodeTick> push(std::span<const double, kChannels> frame) override;

  void set_model(std::shared_ptr<const models::ModelCheckpoint> ckpt) { ckpt_ = std::move(ckpt); }
  const models::ModelCheckpoint& model() const { return *ckpt_; }
  std::size_t samples_seen() const { return n_; }
  std::size_t dropped_ticks() const { return dropped_; }

 private:
  std::shared_ptr<const models::ModelCheckpoint> ckpt_;
  dsp::FilterChain chain_;
  std::array<std::array<double, kWindowLength>, kChannels> ring_{};
  std::size_t n_ = 0;
  std::size_t ticks_ = 0;
  std::size_t dropped_ = 0;
};

/// Runs `n_frames` frames of `source` through a decoder.
std::vector<DecodeTick> stream_decode(SampleSource& source, Decoder& decoder, std::size_t n_frames);

}  // namespace twopoint::runtime
