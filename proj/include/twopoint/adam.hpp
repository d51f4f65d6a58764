#pragma once

#include <vector>

#include "twopoint/model.hpp"

namespace twopoint::models {

struct AdamConfig {
  double lr = 0.002;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam moments for a parameter list.
class Adam {
 public:
  Adam(const std::vector<Matrix>& params, AdamConfig config = {});

  /// Throws std::domain_error on a non-finite gradient; parameters are left
  /// untouched in that case.
  void step(std::vector<Matrix>& params, const std::vector<Matrix>& grads);

  long steps() const { return t_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  long t_ = 0;
};

}  // namespace twopoint::models
