#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace twopoint {

inline constexpr std::size_t kChannels = 12;
inline constexpr std::size_t kFingers = 5;
inline constexpr std::size_t kFeatures = 8;
inline constexpr std::size_t kInputDim = kChannels * kFeatures;
inline constexpr double kSampleRate = 1000.0;
inline constexpr std::size_t kWindowLength = 200;
inline constexpr std::size_t kWindowStep = 50;

/// Label order is fixed: little finger first, thumb last.
enum class Finger : std::size_t { kLittle = 0, kRing, kMiddle, kIndex, kThumb };

std::string_view finger_name(Finger f);
Finger parse_finger(std::string_view name);

/// Per-finger force labels; +1 is maximal flexion, -1 maximal extension.
struct FingerLabels {
  std::array<double, kFingers> values{};

  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](Finger f) { return values[static_cast<std::size_t>(f)]; }
  double operator[](Finger f) const { return values[static_cast<std::size_t>(f)]; }

  bool in_range() const {
    for (double v : values) {
      if (!(v >= -1.0 && v <= 1.0)) return false;
    }
    return true;
  }
  bool operator==(const FingerLabels&) const = default;
};

/// 12 x N record, channel-major storage.
struct SignalMeta {
  int subject = 0;
  int gesture = 0;
  int repetition = 0;
  std::uint64_t seed = 0;
};

class MultiChannelSignal {
 public:
  MultiChannelSignal() = default;
  explicit MultiChannelSignal(std::size_t length, double sample_rate = kSampleRate)
      : samples_(kChannels * length, 0.0), length_(length), sample_rate_(sample_rate) {}

  std::size_t length() const { return length_; }
  double sample_rate() const { return sample_rate_; }

  std::span<double> channel(std::size_t c) { return {samples_.data() + c * length_, length_}; }
  std::span<const double> channel(std::size_t c) const {
    return {samples_.data() + c * length_, length_};
  }
  double& at(std::size_t c, std::size_t i) { return samples_[c * length_ + i]; }
  double at(std::size_t c, std::size_t i) const { return samples_[c * length_ + i]; }

  std::vector<double>& data() { return samples_; }
  const std::vector<double>& data() const { return samples_; }

  SignalMeta meta;

 private:
  std::vector<double> samples_;
  std::size_t length_ = 0;
  double sample_rate_ = kSampleRate;
};

/// splitmix64 finalizer; used to derive independent sub-seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0,
                                    std::uint64_t c = 0) {
  return mix_seed(mix_seed(mix_seed(mix_seed(base) ^ a) ^ b) ^ c);
}

}  // namespace twopoint
