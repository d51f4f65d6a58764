#include "twopoint/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace twopoint::models {

Adam::Adam(const std::vector<Matrix>& params, AdamConfig config) : config_(config) {
  for (const Matrix& p : params) {
    m_.push_back(Matrix::Zero(p.rows(), p.cols()));
    v_.push_back(Matrix::Zero(p.rows(), p.cols()));
  }
}

void Adam::step(std::vector<Matrix>& params, const std::vector<Matrix>& grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw std::invalid_argument("adam: parameter list mismatch");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].rows() != m_[i].rows() || grads[i].cols() != m_[i].cols() ||
        params[i].rows() != m_[i].rows() || params[i].cols() != m_[i].cols()) {
      throw std::invalid_argument("adam: shape mismatch");
    }
    if (!grads[i].allFinite()) throw std::domain_error("adam: non-finite gradient");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * grads[i];
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * grads[i].cwiseProduct(grads[i]);
    const auto m_hat = m_[i].array() / c1;
    const auto v_hat = v_[i].array() / c2;
    params[i].array() -= config_.lr * m_hat / (v_hat.sqrt() + config_.eps);
  }
}

}  // namespace twopoint::models
