#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "twopoint/features.hpp"
#include "twopoint/types.hpp"

namespace twopoint::models {

using Matrix = Eigen::MatrixXd;

enum class ModelKind { kDD, kLN, kMLP, kCNN };

std::string_view kind_name(ModelKind k);
ModelKind parse_kind(std::string_view name);

struct ModelShape {
  int input = static_cast<int>(kInputDim);
  int hidden = 64;
  int conv1 = 8;
  int conv2 = 16;
  int output = static_cast<int>(kFingers);

  bool operator==(const ModelShape&) const = default;
};

/// Per-dimension max-abs scaling; fixes the origin.
struct NormStats {
  static constexpr double kFloor = 1e-12;

  std::array<double, kInputDim> scale{};

  static NormStats identity();
  static NormStats fit(const std::vector<features::FeatureMatrix>& x,
                       const std::vector<std::size_t>& rows);

  /// Column-per-sample normalized batch.
  Matrix apply(const std::vector<features::FeatureMatrix>& x,
               const std::vector<std::size_t>& rows) const;
  Eigen::VectorXd apply(const features::FeatureMatrix& x) const;
};

/// One of the four regressors. Inputs are normalized 96 x B batches (one
/// column per window, channel-major 12 x 8 within a column); outputs 5 x B.
/// Parameters are plain matrices; biases are column vectors.
class Model {
 public:
  Model() = default;
  Model(ModelKind kind, ModelShape shape, std::vector<Matrix> params);

  /// Uniform(+-sqrt(1/fan_in)) initialization.
  static Model initialize(ModelKind kind, std::uint64_t seed, const ModelShape& shape = {});

  ModelKind kind() const { return kind_; }
  const ModelShape& shape() const { return shape_; }

  std::vector<Matrix>& parameters() { return params_; }
  const std::vector<Matrix>& parameters() const { return params_; }
  std::vector<std::string> parameter_names() const;

  Matrix forward(const Matrix& x) const;

  /// Mean squared error over every output entry, and its gradient with
  /// respect to each parameter (same order as parameters()).
  double loss_and_gradient(const Matrix& x, const Matrix& target, std::vector<Matrix>& grads) const;

  double loss(const Matrix& x, const Matrix& target) const;

 private:
  ModelKind kind_ = ModelKind::kLN;
  ModelShape shape_;
  std::vector<Matrix> params_;
};

/// Expected parameter shapes (rows, cols) for a kind.
std::vector<std::pair<int, int>> parameter_shapes(ModelKind kind, const ModelShape& shape);
std::vector<std::string> parameter_names(ModelKind kind);

// Per-kind kernels. The *_loss_grad functions run their own forward pass
// and return the mean squared error.
namespace detail {
Matrix ln_forward(const std::vector<Matrix>& p, const Matrix& x);
double ln_loss_grad(const std::vector<Matrix>& p, const Matrix& x, const Matrix& target,
                    std::vector<Matrix>& grads);
Matrix dd_forward(const std::vector<Matrix>& p, const Matrix& x);
double dd_loss_grad(const std::vector<Matrix>& p, const Matrix& x, const Matrix& target,
                    std::vector<Matrix>& grads);
Matrix mlp_forward(const std::vector<Matrix>& p, const Matrix& x);
double mlp_loss_grad(const std::vector<Matrix>& p, const Matrix& x, const Matrix& target,
                     std::vector<Matrix>& grads);
Matrix cnn_forward(const ModelShape& s, const std::vector<Matrix>& p, const Matrix& x);
double cnn_loss_grad(const ModelShape& s, const std::vector<Matrix>& p, const Matrix& x,
                     const Matrix& target, std::vector<Matrix>& grads);

/// d(mean squared error)/dy, and the loss itself.
double mse_grad(const Matrix& y, const Matrix& target, Matrix& dy);
}  // namespace detail

}  // namespace twopoint::models
