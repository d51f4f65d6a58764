#include "twopoint/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

namespace twopoint::models {

using nlohmann::json;

FingerLabels ModelCheckpoint::predict(const features::FeatureMatrix& x) const {
  const Matrix y = model.forward(norm.apply(x));
  FingerLabels out;
  for (std::size_t j = 0; j < kFingers; ++j) out[j] = y(static_cast<Eigen::Index>(j), 0);
  return out;
}

Matrix ModelCheckpoint::predict(const std::vector<features::FeatureMatrix>& x,
                                const std::vector<std::size_t>& rows) const {
  return model.forward(norm.apply(x, rows));
}

namespace {

json matrix_json(const Matrix& m) {
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) flat.push_back(m(i, j));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", flat}};
}

Matrix matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw std::runtime_error("checkpoint matrix has the wrong element count");
  }
  Matrix m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = data[k++].get<double>();
  }
  return m;
}

}  // namespace

json to_json(const ModelCheckpoint& ckpt) {
  const ModelShape& s = ckpt.model.shape();
  json params = json::array();
  const auto names = ckpt.model.parameter_names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    json p = matrix_json(ckpt.model.parameters()[i]);
    p["name"] = names[i];
    params.push_back(std::move(p));
  }
  const TrainingMeta& m = ckpt.meta;
  return {{"format", "twopoint-checkpoint/1"},
          {"kind", kind_name(ckpt.kind())},
          {"dims",
           {{"input", s.input},
            {"hidden", s.hidden},
            {"conv1", s.conv1},
            {"conv2", s.conv2},
            {"output", s.output}}},
          {"parameters", params},
          {"norm_scale", ckpt.norm.scale},
          {"training",
           {{"seed", m.seed},
            {"epochs", m.epochs},
            {"lr", m.lr},
            {"batch_size", m.batch_size},
            {"folds", m.folds},
            {"fold_losses", m.fold_losses},
            {"final_train_mse", m.final_train_mse},
            {"subject", m.subject},
            {"source", m.source}}}};
}

ModelCheckpoint checkpoint_from_json(const json& j) {
  if (j.value("format", "") != "twopoint-checkpoint/1") {
    throw std::runtime_error("not a twopoint checkpoint");
  }
  const ModelKind kind = parse_kind(j.at("kind").get<std::string>());
  const json& d = j.at("dims");
  ModelShape shape{d.at("input").get<int>(), d.at("hidden").get<int>(), d.at("conv1").get<int>(),
                   d.at("conv2").get<int>(), d.at("output").get<int>()};
  if (shape.output != static_cast<int>(kFingers)) {
    throw std::runtime_error("checkpoint output dimension must be 5");
  }
  std::vector<Matrix> params;
  const auto names = parameter_names(kind);
  const json& pj = j.at("parameters");
  if (pj.size() != names.size()) throw std::runtime_error("checkpoint parameter count mismatch");
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (pj[i].at("name").get<std::string>() != names[i]) {
      throw std::runtime_error("unexpected parameter " + pj[i].at("name").get<std::string>());
    }
    params.push_back(matrix_from_json(pj[i]));
  }
  ModelCheckpoint ckpt;
  ckpt.model = Model(kind, shape, std::move(params));
  const auto scale = j.at("norm_scale").get<std::vector<double>>();
  if (scale.size() != kInputDim) throw std::runtime_error("norm scale must have 96 entries");
  for (std::size_t i = 0; i < kInputDim; ++i) {
    if (!(scale[i] > 0.0)) throw std::runtime_error("norm scale entries must be positive");
    ckpt.norm.scale[i] = scale[i];
  }
  const json& t = j.at("training");
  ckpt.meta.seed = t.at("seed").get<std::uint64_t>();
  ckpt.meta.epochs = t.at("epochs").get<int>();
  ckpt.meta.lr = t.at("lr").get<double>();
  ckpt.meta.batch_size = t.at("batch_size").get<int>();
  ckpt.meta.folds = t.at("folds").get<int>();
  ckpt.meta.fold_losses = t.at("fold_losses").get<std::vector<double>>();
  ckpt.meta.final_train_mse = t.at("final_train_mse").get<double>();
  ckpt.meta.subject = t.at("subject").get<int>();
  ckpt.meta.source = t.value("source", json::object());
  return ckpt;
}

void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << to_json(ckpt).dump(1) << "\n";
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot read " + file.string());
  return checkpoint_from_json(json::parse(in));
}

}  // namespace twopoint::models
