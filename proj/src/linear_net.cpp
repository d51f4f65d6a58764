// Bias-free, activation-free stack: y = W3 W2 W1 x.

#include "twopoint/model.hpp"

namespace twopoint::models::detail {

Matrix ln_forward(const std::vector<Matrix>& p, const Matrix& x) {
  return p[2] * (p[1] * (p[0] * x));
}

double ln_loss_grad(const std::vector<Matrix>& p, const Matrix& x, const Matrix& target,
                    std::vector<Matrix>& grads) {
  const Matrix h1 = p[0] * x;
  const Matrix h2 = p[1] * h1;
  const Matrix y = p[2] * h2;
  Matrix dy;
  const double loss = mse_grad(y, target, dy);

  grads[2].noalias() = dy * h2.transpose();
  const Matrix dh2 = p[2].transpose() * dy;
  grads[1].noalias() = dh2 * h1.transpose();
  const Matrix dh1 = p[1].transpose() * dh2;
  grads[0].noalias() = dh1 * x.transpose();
  return loss;
}

}  // namespace twopoint::models::detail
