#include "twopoint/tracking.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace twopoint::runtime {

double sine_target(double freq_hz, double t) {
  return std::sin(2.0 * std::numbers::pi * freq_hz * t);
}

TrackingSession run_sine_session(double freq_hz, double duration_s, SynthSource& source,
                                 Decoder& decoder, Finger finger) {
  if (!(freq_hz > 0.0) || duration_s * freq_hz < 2.0) {
    throw std::invalid_argument("sine session must cover at least two periods");
  }
  TrackingSession session;
  session.freq_hz = freq_hz;
  session.finger = finger;

  const auto frames = static_cast<std::size_t>(std::llround(duration_s * kSampleRate));
  source.start_sine(finger, freq_hz);
  std::array<double, kChannels> frame{};
  int consecutive_drops = 0;
  for (std::size_t n = 1; n <= frames; ++n) {
    std::optional<DecodeTick> tick;
    if (source.next(frame)) tick = decoder.push(frame);
    if (!tick_due(n)) continue;
    if (!tick) {
      ++session.dropped_ticks;
      if (++consecutive_drops > kMaxConsecutiveDrops) {
        session.aborted = true;
        break;
      }
      continue;
    }
    consecutive_drops = 0;
    const double t = static_cast<double>(n - 1) / kSampleRate;
    session.t.push_back(t);
    session.target.push_back(sine_target(freq_hz, t));
    session.decoded.push_back(tick->labels[finger]);
  }
  source.stop_sine();
  if (session.t.size() >= 2) session.metrics = eval::tracking_metrics(session.target, session.decoded);
  return session;
}

nlohmann::json to_json(const TrackingSession& s, bool with_series) {
  nlohmann::json j = {{"mode", s.mode},
                      {"freq_hz", s.freq_hz},
                      {"amplitude", s.amplitude},
                      {"finger", finger_name(s.finger)},
                      {"ticks", s.t.size()},
                      {"dropped_ticks", s.dropped_ticks},
                      {"aborted", s.aborted},
                      {"metrics", eval::to_json(s.metrics)}};
  if (with_series) {
    j["t"] = s.t;
    j["target"] = s.target;
    j["decoded"] = s.decoded;
  }
  return j;
}

}  // namespace twopoint::runtime
