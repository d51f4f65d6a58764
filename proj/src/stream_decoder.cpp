#include "twopoint/stream_decoder.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "twopoint/cohort_io.hpp"
#include "twopoint/features.hpp"

namespace twopoint::runtime {

bool PlaybackSource::next(std::span<double, kChannels> frame) {
  if (pos_ >= signal_.length()) return false;
  for (std::size_t c = 0; c < kChannels; ++c) frame[c] = signal_.at(c, pos_);
  ++pos_;
  return true;
}

SynthSource::SynthSource(const synth::MixingMatrix& mixing, const synth::SynthConfig& config,
                         std::uint64_t seed, synth::ArtifactFlags artifacts)
    : source_(mixing, config, seed, artifacts) {}

bool SynthSource::next(std::span<double, kChannels> frame) {
  if (sine_) {
    const double t = (static_cast<double>(source_.samples_emitted()) - static_cast<double>(sine_start_)) / kSampleRate;
    FingerLabels l{};
    l[sine_->first] = std::sin(2.0 * std::numbers::pi * sine_->second * t);
    labels_ = l;
    source_.set_activation(synth::labels_to_activation(l));
  }
  source_.next(frame);
  return true;
}

void SynthSource::set_labels(const FingerLabels& labels) {
  held_ = labels;
  if (!sine_) {
    labels_ = labels;
    source_.set_activation(synth::labels_to_activation(labels));
  }
}

void SynthSource::start_sine(Finger finger, double freq_hz, std::optional<std::size_t> start_sample) {
  sine_ = {finger, freq_hz};
  sine_start_ = start_sample.value_or(source_.samples_emitted());
}

void SynthSource::stop_sine() {
  sine_.reset();
  set_labels(held_);
}

double SynthSource::time() const {
  return static_cast<double>(source_.samples_emitted()) / kSampleRate;
}

SubjectModel subject_model(const models::ModelCheckpoint& ckpt) {
  const auto& src = ckpt.meta.source;
  SubjectModel m;
  m.config = synth::synth_config_from_json(src.value("synth", nlohmann::json::object()));
  if (src.contains("seed") && ckpt.meta.subject >= 0) {
    m.mixing = synth::subject_mixing(m.config, src.at("seed").get<std::uint64_t>(), ckpt.meta.subject);
  } else {
    m.mixing = synth::base_mixing(m.config);
  }
  return m;
}

StreamDecoder::StreamDecoder(std::shared_ptr<const models::ModelCheckpoint> ckpt)
    : ckpt_(std::move(ckpt)) {}

std::optional<DecodeTick> StreamDecoder::push(std::span<const double, kChannels> frame) {
  std::array<double, kChannels> filtered{};
  chain_.process(frame, filtered);
  const std::size_t slot = n_ % kWindowLength;
  for (std::size_t c = 0; c < kChannels; ++c) ring_[c][slot] = filtered[c];
  ++n_;
  if (n_ < kWindowLength || (n_ - kWindowLength) % kWindowStep != 0) return std::nullopt;

  // Unroll the ring so the window is in time order.
  features::FeatureMatrix fm;
  std::array<double, kWindowLength> w{};
  const std::size_t oldest = n_ % kWindowLength;
  for (std::size_t c = 0; c < kChannels; ++c) {
    std::copy(ring_[c].begin() + static_cast<std::ptrdiff_t>(oldest), ring_[c].end(), w.begin());
    std::copy(ring_[c].begin(), ring_[c].begin() + static_cast<std::ptrdiff_t>(oldest),
              w.begin() + static_cast<std::ptrdiff_t>(kWindowLength - oldest));
    const auto f = features::extract(w);
    std::copy(f.begin(), f.end(), fm.values.begin() + static_cast<std::ptrdiff_t>(c * kFeatures));
  }

  DecodeTick tick;
  tick.index = ticks_++;
  tick.window_start = n_ - kWindowLength;
  tick.t = static_cast<double>(n_ - 1) / kSampleRate;
  tick.raw = ckpt_->predict(fm);
  for (std::size_t j = 0; j < kFingers; ++j) {
    if (!std::isfinite(tick.raw[j])) {
      ++dropped_;
      return std::nullopt;
    }
    tick.labels[j] = std::clamp(tick.raw[j], -kDisplayClamp, kDisplayClamp);
  }
  return tick;
}

std::vector<DecodeTick> stream_decode(SampleSource& source, Decoder& decoder, std::size_t n_frames) {
  std::vector<DecodeTick> ticks;
  std::array<double, kChannels> frame{};
  for (std::size_t i = 0; i < n_frames; ++i) {
    if (!source.next(frame)) break;
    if (auto t = decoder.push(frame)) ticks.push_back(*t);
  }
  return ticks;
}

}  // namespace twopoint::runtime
