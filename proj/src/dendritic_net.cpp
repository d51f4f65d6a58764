// One-layer dendritic module with gate and residual:
//   C = W_in x,  G = W_gate C,  H = G o C + G,  y = W_out H.
// Without biases the map is exactly quadratic in x.

#include "twopoint/model.hpp"

namespace twopoint::models::detail {

Matrix dd_forward(const std::vector<Matrix>& p, const Matrix& x) {
  const Matrix c = p[0] * x;
  const Matrix g = p[1] * c;
  const Matrix h = g.cwiseProduct(c) + g;
  return p[2] * h;
}

double dd_loss_grad(const std::vector<Matrix>& p, const Matrix& x, const Matrix& target,
                    std::vector<Matrix>& grads) {
  const Matrix c = p[0] * x;
  const Matrix g = p[1] * c;
  const Matrix h = g.cwiseProduct(c) + g;
  const Matrix y = p[2] * h;
  Matrix dy;
  const double loss = mse_grad(y, target, dy);

  grads[2].noalias() = dy * h.transpose();
  const Matrix dh = p[2].transpose() * dy;
  const Matrix dg = dh.cwiseProduct((c.array() + 1.0).matrix());
  grads[1].noalias() = dg * c.transpose();
  const Matrix dc = dh.cwiseProduct(g) + p[1].transpose() * dg;
  grads[0].noalias() = dc * x.transpose();
  return loss;
}

}  // namespace twopoint::models::detail
