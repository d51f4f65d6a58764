#pragma once

#include <array>

#include "twopoint/types.hpp"

namespace twopoint::runtime {

inline constexpr double kAngleMinDeg = 0.0;
inline constexpr double kAngleMaxDeg = 90.0;

struct FingerJoint {
  double angle_deg = 0.0;
  double velocity_dps = 0.0;
};

struct HandState {
  std::array<FingerJoint, kFingers> fingers{};
  double k_alpha = 60.0;  // deg/s^2 per unit label
  double k_force = 10.0;  // N per unit label
};

/// Force = k_force * label; the sign carries the direction.
std::array<double, kFingers> force_map(const FingerLabels& labels, double k_force);

/// Semi-implicit Euler: alpha = k_alpha * label, w += alpha dt, theta += w dt,
/// then clamp theta to [0, 90] and zero w on a clamp.
HandState kinematics_step(HandState state, const FingerLabels& labels, double dt);

}  // namespace twopoint::runtime
