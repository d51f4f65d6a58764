#pragma once

#include <span>
#include <vector>

namespace twopoint::dsp {

/// Normalized second-order section, a0 == 1.
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;
};

/// Transposed direct form II state.
struct BiquadState {
  double z1 = 0.0;
  double z2 = 0.0;

  double step(const Biquad& s, double x) {
    const double y = s.b0 * x + z1;
    z1 = s.b1 * x - s.a1 * y + z2;
    z2 = s.b2 * x - s.a2 * y;
    return y;
  }
};

/// Digital Butterworth band-pass from an analog prototype of order
/// `prototype_order`: low-pass to band-pass transform, then the bilinear
/// transform with pre-warped edges. The result has 2 * prototype_order poles.
std::vector<Biquad> design_butterworth_bandpass(int prototype_order, double low_hz,
                                                double high_hz, double fs);

/// Second-order notch with the given -3 dB bandwidth.
Biquad design_notch(double center_hz, double bandwidth_hz, double fs);

/// First-order high-pass (bilinear), stored as a biquad with b2 = a2 = 0.
Biquad design_highpass1(double cutoff_hz, double fs);

double magnitude_response(std::span<const Biquad> sections, double freq_hz, double fs);

/// Cascade of sections with owned state.
class SosFilter {
 public:
  SosFilter() = default;
  explicit SosFilter(std::vector<Biquad> sections)
      : sections_(std::move(sections)), state_(sections_.size()) {}

  double step(double x) {
    for (std::size_t i = 0; i < sections_.size(); ++i) x = state_[i].step(sections_[i], x);
    return x;
  }
  void reset() { state_.assign(sections_.size(), BiquadState{}); }
  const std::vector<Biquad>& sections() const { return sections_; }

 private:
  std::vector<Biquad> sections_;
  std::vector<BiquadState> state_;
};

}  // namespace twopoint::dsp
