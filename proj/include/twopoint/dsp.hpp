#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "twopoint/filters.hpp"
#include "twopoint/types.hpp"

namespace twopoint::dsp {

inline constexpr double kBandLowHz = 10.0;
inline constexpr double kBandHighHz = 450.0;
inline constexpr int kBandPrototypeOrder = 3;  // 6 poles overall
inline constexpr double kNotchHz = 50.0;
inline constexpr double kNotchBandwidthHz = 2.0;
inline constexpr double kDcHighpassHz = 0.5;

const std::vector<Biquad>& bandpass_sections();
const Biquad& notch_section();
const Biquad& dc_highpass_section();

// Single-channel, whole-signal stages.
std::vector<double> remove_dc(std::span<const double> x);
std::vector<double> bandpass(std::span<const double> x, double fs = kSampleRate);
std::vector<double> notch50(std::span<const double> x, double fs = kSampleRate);
std::vector<double> rectify(std::span<const double> x);

/// How the DC stage is realized. Record-mean needs the whole record, so
/// only the high-pass form can stream.
enum class DcMode { kRecordMean, kHighPass };

/// Causal per-channel chain: dc -> band-pass -> notch -> rectify.
class ChannelChain {
 public:
  explicit ChannelChain(bool with_dc_highpass);
  double step(double x);
  void reset();

 private:
  bool dc_;
  BiquadState dc_state_;
  std::array<BiquadState, kBandPrototypeOrder> band_state_;
  BiquadState notch_state_;
};

/// Streaming 12-channel chain (high-pass DC form). Single owner.
class FilterChain {
 public:
  FilterChain();
  void process(std::span<const double, kChannels> in, std::span<double, kChannels> out);
  void reset();

 private:
  std::vector<ChannelChain> channels_;
};

/// Full chain on a stored record.
MultiChannelSignal preprocess(const MultiChannelSignal& raw, DcMode mode = DcMode::kRecordMean);

/// Linear part of the chain without rectification (for property tests).
std::vector<double> linear_stages(std::span<const double> x, DcMode mode = DcMode::kRecordMean);

struct WindowedSegment {
  std::vector<double> data;  // kChannels x kWindowLength, channel-major
  std::size_t start_index = 0;
  std::optional<FingerLabels> label;

  std::span<const double> channel(std::size_t c) const {
    return {data.data() + c * kWindowLength, kWindowLength};
  }
};

/// floor((n - 200) / 50) + 1; throws when n < 200.
std::size_t window_count(std::size_t n);

std::vector<WindowedSegment> window(const MultiChannelSignal& x,
                                    std::optional<FingerLabels> label = std::nullopt);

}  // namespace twopoint::dsp
