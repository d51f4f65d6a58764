#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "twopoint/eval.hpp"
#include "twopoint/stream_decoder.hpp"

namespace twopoint::runtime {

inline constexpr int kMaxConsecutiveDrops = 10;

/// True when the frame count `n` completes a window on the 50-sample hop.
constexpr bool tick_due(std::size_t n) {
  return n >= kWindowLength && (n - kWindowLength) % kWindowStep == 0;
}

struct TrackingSession {
  std::string mode = "sine";
  double freq_hz = 0.1;
  double amplitude = 1.0;
  Finger finger = Finger::kIndex;
  std::vector<double> t;
  std::vector<double> target;
  std::vector<double> decoded;
  std::size_t dropped_ticks = 0;
  bool aborted = false;
  eval::TrackingMetrics metrics;
};

double sine_target(double freq_hz, double t);

/// Scripted sine tracking: the source drives `finger` with sin(2 pi f t),
/// every tick records that finger's decoded label against the target at the
/// tick time. Throws if the duration covers fewer than two periods.
TrackingSession run_sine_session(double freq_hz, double duration_s, SynthSource& source,
                                 Decoder& decoder, Finger finger);

nlohmann::json to_json(const TrackingSession& s, bool with_series = true);

}  // namespace twopoint::runtime
