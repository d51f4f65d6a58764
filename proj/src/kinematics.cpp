#include "twopoint/kinematics.hpp"

#include <stdexcept>

namespace twopoint::runtime {

std::array<double, kFingers> force_map(const FingerLabels& labels, double k_force) {
  if (!(k_force > 0.0)) throw std::invalid_argument("k_force must be positive");
  std::array<double, kFingers> f{};
  for (std::size_t j = 0; j < kFingers; ++j) f[j] = k_force * labels[j];
  return f;
}

HandState kinematics_step(HandState state, const FingerLabels& labels, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  for (std::size_t j = 0; j < kFingers; ++j) {
    FingerJoint& f = state.fingers[j];
    f.velocity_dps += state.k_alpha * labels[j] * dt;
    f.angle_deg += f.velocity_dps * dt;
    if (f.angle_deg <= kAngleMinDeg) {
      f.angle_deg = kAngleMinDeg;
      f.velocity_dps = 0.0;
    } else if (f.angle_deg >= kAngleMaxDeg) {
      f.angle_deg = kAngleMaxDeg;
      f.velocity_dps = 0.0;
    }
  }
  return state;
}

}  // namespace twopoint::runtime
