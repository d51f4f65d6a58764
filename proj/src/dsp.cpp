#include "twopoint/dsp.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace twopoint::dsp {

namespace {

void require_supported_rate(double fs) {
  if (fs != kSampleRate) throw std::invalid_argument("only fs = 1000 Hz is supported");
}

std::vector<double> run(std::span<const Biquad> sections, std::span<const double> x) {
  std::vector<BiquadState> state(sections.size());
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double v = x[i];
    for (std::size_t s = 0; s < sections.size(); ++s) v = state[s].step(sections[s], v);
    y[i] = v;
  }
  return y;
}

}  // namespace

const std::vector<Biquad>& bandpass_sections() {
  static const std::vector<Biquad> s =
      design_butterworth_bandpass(kBandPrototypeOrder, kBandLowHz, kBandHighHz, kSampleRate);
  return s;
}

const Biquad& notch_section() {
  static const Biquad s = design_notch(kNotchHz, kNotchBandwidthHz, kSampleRate);
  return s;
}

const Biquad& dc_highpass_section() {
  static const Biquad s = design_highpass1(kDcHighpassHz, kSampleRate);
  return s;
}

std::vector<double> remove_dc(std::span<const double> x) {
  if (x.empty()) throw std::invalid_argument("remove_dc: empty input");
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] - mean;
  return y;
}

std::vector<double> bandpass(std::span<const double> x, double fs) {
  require_supported_rate(fs);
  return run(bandpass_sections(), x);
}

std::vector<double> notch50(std::span<const double> x, double fs) {
  require_supported_rate(fs);
  const Biquad s = notch_section();
  return run(std::span<const Biquad>(&s, 1), x);
}

std::vector<double> rectify(std::span<const double> x) {
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::abs(x[i]);
  return y;
}

ChannelChain::ChannelChain(bool with_dc_highpass) : dc_(with_dc_highpass) {
  static_assert(kBandPrototypeOrder == 3);
}

double ChannelChain::step(double x) {
  if (dc_) x = dc_state_.step(dc_highpass_section(), x);
  const auto& band = bandpass_sections();
  for (std::size_t s = 0; s < band_state_.size(); ++s) x = band_state_[s].step(band[s], x);
  x = notch_state_.step(notch_section(), x);
  return std::abs(x);
}

void ChannelChain::reset() {
  dc_state_ = {};
  band_state_ = {};
  notch_state_ = {};
}

FilterChain::FilterChain() : channels_(kChannels, ChannelChain(true)) {}

void FilterChain::process(std::span<const double, kChannels> in,
                          std::span<double, kChannels> out) {
  for (std::size_t c = 0; c < kChannels; ++c) out[c] = channels_[c].step(in[c]);
}

void FilterChain::reset() {
  for (auto& ch : channels_) ch.reset();
}

MultiChannelSignal preprocess(const MultiChannelSignal& raw, DcMode mode) {
  require_supported_rate(raw.sample_rate());
  MultiChannelSignal out(raw.length(), raw.sample_rate());
  out.meta = raw.meta;
  for (std::size_t c = 0; c < kChannels; ++c) {
    const auto in = raw.channel(c);
    auto dst = out.channel(c);
    if (mode == DcMode::kRecordMean) {
      const std::vector<double> centered = remove_dc(in);
      ChannelChain chain(false);
      for (std::size_t i = 0; i < in.size(); ++i) dst[i] = chain.step(centered[i]);
    } else {
      ChannelChain chain(true);
      for (std::size_t i = 0; i < in.size(); ++i) dst[i] = chain.step(in[i]);
    }
  }
  return out;
}

std::vector<double> linear_stages(std::span<const double> x, DcMode mode) {
  std::vector<double> y;
  if (mode == DcMode::kRecordMean) {
    y = remove_dc(x);
  } else {
    const Biquad s = dc_highpass_section();
    y = run(std::span<const Biquad>(&s, 1), x);
  }
  return notch50(bandpass(y));
}

std::size_t window_count(std::size_t n) {
  if (n < kWindowLength) throw std::invalid_argument("record shorter than one window");
  return (n - kWindowLength) / kWindowStep + 1;
}

std::vector<WindowedSegment> window(const MultiChannelSignal& x,
                                    std::optional<FingerLabels> label) {
  const std::size_t m = window_count(x.length());
  std::vector<WindowedSegment> out(m);
  for (std::size_t w = 0; w < m; ++w) {
    WindowedSegment& seg = out[w];
    seg.start_index = w * kWindowStep;
    seg.label = label;
    seg.data.resize(kChannels * kWindowLength);
    for (std::size_t c = 0; c < kChannels; ++c) {
      const auto ch = x.channel(c);
      std::copy_n(ch.begin() + static_cast<std::ptrdiff_t>(seg.start_index), kWindowLength,
                  seg.data.begin() + static_cast<std::ptrdiff_t>(c * kWindowLength));
    }
  }
  return out;
}

}  // namespace twopoint::dsp
