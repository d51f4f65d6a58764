#include <cmath>
#include <random>
#include <stdexcept>

#include "twopoint/model.hpp"

namespace twopoint::models {

std::string_view kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::kDD: return "dd";
    case ModelKind::kLN: return "ln";
    case ModelKind::kMLP: return "mlp";
    case ModelKind::kCNN: return "cnn";
  }
  return "?";
}

ModelKind parse_kind(std::string_view name) {
  for (ModelKind k : {ModelKind::kDD, ModelKind::kLN, ModelKind::kMLP, ModelKind::kCNN}) {
    if (kind_name(k) == name) return k;
  }
  throw std::invalid_argument("unknown model kind: " + std::string(name));
}

NormStats NormStats::identity() {
  NormStats n;
  n.scale.fill(1.0);
  return n;
}

NormStats NormStats::fit(const std::vector<features::FeatureMatrix>& x,
                         const std::vector<std::size_t>& rows) {
  NormStats n;
  n.scale.fill(0.0);
  for (std::size_t r : rows) {
    for (std::size_t d = 0; d < kInputDim; ++d) {
      n.scale[d] = std::max(n.scale[d], std::abs(x[r].values[d]));
    }
  }
  for (double& s : n.scale) s = std::max(s, kFloor);
  return n;
}

Matrix NormStats::apply(const std::vector<features::FeatureMatrix>& x,
                        const std::vector<std::size_t>& rows) const {
  Matrix out(static_cast<Eigen::Index>(kInputDim), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& v = x[rows[i]].values;
    for (std::size_t d = 0; d < kInputDim; ++d) {
      out(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(i)) = v[d] / scale[d];
    }
  }
  return out;
}

Eigen::VectorXd NormStats::apply(const features::FeatureMatrix& x) const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(kInputDim));
  for (std::size_t d = 0; d < kInputDim; ++d) {
    out(static_cast<Eigen::Index>(d)) = x.values[d] / scale[d];
  }
  return out;
}

std::vector<std::pair<int, int>> parameter_shapes(ModelKind kind, const ModelShape& s) {
  switch (kind) {
    case ModelKind::kLN:
      return {{s.hidden, s.input}, {s.hidden, s.hidden}, {s.output, s.hidden}};
    case ModelKind::kDD:
      return {{s.hidden, s.input}, {s.hidden, s.hidden}, {s.output, s.hidden}};
    case ModelKind::kMLP:
      return {{s.hidden, s.input}, {s.hidden, 1},      {s.hidden, s.hidden},
              {s.hidden, 1},       {s.output, s.hidden}, {s.output, 1}};
    case ModelKind::kCNN: {
      if (s.input != static_cast<int>(kInputDim)) {
        throw std::invalid_argument("CNN expects a 12 x 8 input");
      }
      const int pooled = s.conv2 * static_cast<int>((kChannels / 2) * (kFeatures / 2));
      return {{s.conv1, 9},       {s.conv1, 1}, {s.conv2, 9 * s.conv1}, {s.conv2, 1},
              {s.hidden, pooled}, {s.hidden, 1}, {s.output, s.hidden},  {s.output, 1}};
    }
  }
  throw std::logic_error("unhandled model kind");
}

std::vector<std::string> parameter_names(ModelKind kind) {
  switch (kind) {
    case ModelKind::kLN: return {"w1", "w2", "w3"};
    case ModelKind::kDD: return {"w_in", "w_gate", "w_out"};
    case ModelKind::kMLP: return {"w1", "b1", "w2", "b2", "w3", "b3"};
    case ModelKind::kCNN:
      return {"conv1_w", "conv1_b", "conv2_w", "conv2_b", "fc1_w", "fc1_b", "fc2_w", "fc2_b"};
  }
  throw std::logic_error("unhandled model kind");
}

Model::Model(ModelKind kind, ModelShape shape, std::vector<Matrix> params)
    : kind_(kind), shape_(shape), params_(std::move(params)) {
  const auto shapes = parameter_shapes(kind_, shape_);
  if (shapes.size() != params_.size()) throw std::invalid_argument("wrong parameter count");
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (params_[i].rows() != shapes[i].first || params_[i].cols() != shapes[i].second) {
      throw std::invalid_argument("parameter " + std::to_string(i) + " has the wrong shape");
    }
  }
}

Model Model::initialize(ModelKind kind, std::uint64_t seed, const ModelShape& shape) {
  const auto shapes = parameter_shapes(kind, shape);
  std::mt19937_64 rng(seed);
  const auto names = models::parameter_names(kind);
  std::vector<Matrix> params;
  int fan_in = 1;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const auto [rows, cols] = shapes[i];
    // A bias shares the fan-in of the weight that precedes it.
    const bool is_bias = names[i].front() == 'b' || names[i].ends_with("_b");
    if (!is_bias) fan_in = cols;
    const double bound = std::sqrt(1.0 / fan_in);
    std::uniform_real_distribution<double> u(-bound, bound);
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = u(rng);
    }
    params.push_back(std::move(m));
  }
  return Model(kind, shape, std::move(params));
}

std::vector<std::string> Model::parameter_names() const { return models::parameter_names(kind_); }

Matrix Model::forward(const Matrix& x) const {
  if (x.rows() != shape_.input) throw std::invalid_argument("input dimension mismatch");
  switch (kind_) {
    case ModelKind::kLN: return detail::ln_forward(params_, x);
    case ModelKind::kDD: return detail::dd_forward(params_, x);
    case ModelKind::kMLP: return detail::mlp_forward(params_, x);
    case ModelKind::kCNN: return detail::cnn_forward(shape_, params_, x);
  }
  throw std::logic_error("unhandled model kind");
}

double Model::loss_and_gradient(const Matrix& x, const Matrix& target,
                                std::vector<Matrix>& grads) const {
  if (x.rows() != shape_.input) throw std::invalid_argument("input dimension mismatch");
  if (target.rows() != shape_.output || target.cols() != x.cols()) {
    throw std::invalid_argument("target dimension mismatch");
  }
  grads.resize(params_.size());
  switch (kind_) {
    case ModelKind::kLN: return detail::ln_loss_grad(params_, x, target, grads);
    case ModelKind::kDD: return detail::dd_loss_grad(params_, x, target, grads);
    case ModelKind::kMLP: return detail::mlp_loss_grad(params_, x, target, grads);
    case ModelKind::kCNN: return detail::cnn_loss_grad(shape_, params_, x, target, grads);
  }
  throw std::logic_error("unhandled model kind");
}

double Model::loss(const Matrix& x, const Matrix& target) const {
  const Matrix y = forward(x);
  return (y - target).squaredNorm() / static_cast<double>(y.size());
}

namespace detail {

double mse_grad(const Matrix& y, const Matrix& target, Matrix& dy) {
  const double n = static_cast<double>(y.size());
  dy = (y - target) * (2.0 / n);
  return (y - target).squaredNorm() / n;
}

}  // namespace detail

}  // namespace twopoint::models
