#include "twopoint/model.hpp"

namespace twopoint::models::detail {

namespace {

Matrix relu(const Matrix& z) { return z.cwiseMax(0.0); }

Matrix relu_mask(const Matrix& z) { return (z.array() > 0.0).cast<double>().matrix(); }

}  // namespace

Matrix mlp_forward(const std::vector<Matrix>& p, const Matrix& x) {
  Matrix a1 = relu((p[0] * x).colwise() + p[1].col(0));
  Matrix a2 = relu((p[2] * a1).colwise() + p[3].col(0));
  return (p[4] * a2).colwise() + p[5].col(0);
}

double mlp_loss_grad(const std::vector<Matrix>& p, const Matrix& x, const Matrix& target,
                     std::vector<Matrix>& grads) {
  const Matrix z1 = (p[0] * x).colwise() + p[1].col(0);
  const Matrix a1 = relu(z1);
  const Matrix z2 = (p[2] * a1).colwise() + p[3].col(0);
  const Matrix a2 = relu(z2);
  const Matrix y = (p[4] * a2).colwise() + p[5].col(0);
  Matrix dy;
  const double loss = mse_grad(y, target, dy);

  grads[4].noalias() = dy * a2.transpose();
  grads[5] = dy.rowwise().sum();
  const Matrix dz2 = (p[4].transpose() * dy).cwiseProduct(relu_mask(z2));
  grads[2].noalias() = dz2 * a1.transpose();
  grads[3] = dz2.rowwise().sum();
  const Matrix dz1 = (p[2].transpose() * dz2).cwiseProduct(relu_mask(z1));
  grads[0].noalias() = dz1 * x.transpose();
  grads[1] = dz1.rowwise().sum();
  return loss;
}

}  // namespace twopoint::models::detail
