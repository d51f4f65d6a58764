#include "twopoint/filters.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

namespace twopoint::dsp {

namespace {

using cplx = std::complex<double>;

Biquad section_from_poles(cplx p1, cplx p2, double gain) {
  // Zeros at z = +1 and z = -1 give the numerator 1 - z^-2.
  Biquad s;
  s.b0 = gain;
  s.b1 = 0.0;
  s.b2 = -gain;
  s.a1 = -(p1 + p2).real();
  s.a2 = (p1 * p2).real();
  return s;
}

}  // namespace

std::vector<Biquad> design_butterworth_bandpass(int prototype_order, double low_hz,
                                                double high_hz, double fs) {
  if (prototype_order < 1) throw std::invalid_argument("filter order must be >= 1");
  if (!(low_hz > 0.0 && low_hz < high_hz && high_hz < fs / 2.0)) {
    throw std::invalid_argument("band edges must satisfy 0 < low < high < fs/2");
  }
  const double pi = std::numbers::pi;
  const double fs2 = 2.0 * fs;
  const double w_low = fs2 * std::tan(pi * low_hz / fs);
  const double w_high = fs2 * std::tan(pi * high_hz / fs);
  const double bw = w_high - w_low;
  const double w0_sq = w_low * w_high;

  // Analog prototype poles on the left half of the unit circle.
  const int n = prototype_order;
  std::vector<cplx> analog;
  analog.reserve(2 * n);
  for (int k = 0; k < n; ++k) {
    const double theta = pi * (2.0 * k + n + 1) / (2.0 * n);
    const cplx p = std::polar(1.0, theta);
    const cplx half = p * bw / 2.0;
    const cplx disc = std::sqrt(half * half - w0_sq);
    analog.push_back(half + disc);
    analog.push_back(half - disc);
  }

  // Bilinear map. n zeros at s = 0 go to z = 1, n zeros at infinity to z = -1.
  std::vector<cplx> poles;
  cplx denom = 1.0;
  for (const cplx& p : analog) {
    poles.push_back((fs2 + p) / (fs2 - p));
    denom *= (fs2 - p);
  }
  const double gain = (std::pow(bw, n) * std::pow(fs2, n) / denom).real();

  // Pair conjugates (Im > 0 with its mirror), then pair remaining real poles.
  std::vector<cplx> upper, real;
  for (const cplx& p : poles) {
    if (std::abs(p.imag()) <= 1e-12 * std::abs(p)) {
      real.push_back({p.real(), 0.0});
    } else if (p.imag() > 0.0) {
      upper.push_back(p);
    }
  }
  std::sort(real.begin(), real.end(), [](cplx a, cplx b) { return a.real() < b.real(); });
  if (real.size() % 2 != 0 || upper.size() * 2 + real.size() != poles.size()) {
    throw std::logic_error("unexpected pole layout in band-pass design");
  }

  std::vector<Biquad> sections;
  for (std::size_t i = 0; i < real.size(); i += 2) {
    sections.push_back(section_from_poles(real[i], real[i + 1], 1.0));
  }
  for (const cplx& p : upper) sections.push_back(section_from_poles(p, std::conj(p), 1.0));
  sections.front().b0 *= gain;
  sections.front().b2 *= gain;
  return sections;
}

Biquad design_notch(double center_hz, double bandwidth_hz, double fs) {
  if (!(center_hz > 0.0 && center_hz < fs / 2.0 && bandwidth_hz > 0.0)) {
    throw std::invalid_argument("invalid notch parameters");
  }
  const double w0 = 2.0 * std::numbers::pi * center_hz / fs;
  const double bw = 2.0 * std::numbers::pi * bandwidth_hz / fs;
  const double beta = std::tan(bw / 2.0);
  const double g = 1.0 / (1.0 + beta);
  Biquad s;
  s.b0 = g;
  s.b1 = -2.0 * g * std::cos(w0);
  s.b2 = g;
  s.a1 = -2.0 * g * std::cos(w0);
  s.a2 = 2.0 * g - 1.0;
  return s;
}

Biquad design_highpass1(double cutoff_hz, double fs) {
  const double k = std::tan(std::numbers::pi * cutoff_hz / fs);
  const double norm = 1.0 / (1.0 + k);
  Biquad s;
  s.b0 = norm;
  s.b1 = -norm;
  s.a1 = (k - 1.0) * norm;
  return s;
}

double magnitude_response(std::span<const Biquad> sections, double freq_hz, double fs) {
  const cplx z1 = std::polar(1.0, -2.0 * std::numbers::pi * freq_hz / fs);
  const cplx z2 = z1 * z1;
  cplx h = 1.0;
  for (const Biquad& s : sections) {
    h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
  }
  return std::abs(h);
}

}  // namespace twopoint::dsp
