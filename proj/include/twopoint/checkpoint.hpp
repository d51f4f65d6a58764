#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "twopoint/model.hpp"

namespace twopoint::models {

struct TrainingMeta {
  std::uint64_t seed = 42;
  int epochs = 15;
  double lr = 0.002;
  int batch_size = 64;
  int folds = 10;
  std::vector<double> fold_losses;
  double final_train_mse = 0.0;
  int subject = -1;
  /// Where the training data came from (dataset manifest fields), so a
  /// scripted source can reproduce the subject's signal model.
  nlohmann::json source = nlohmann::json::object();
};

struct ModelCheckpoint {
  Model model;
  NormStats norm = NormStats::identity();
  TrainingMeta meta;

  ModelKind kind() const { return model.kind(); }

  /// Normalize and forward one window.
  FingerLabels predict(const features::FeatureMatrix& x) const;
  /// Normalize and forward many windows; 5 x rows.size().
  Matrix predict(const std::vector<features::FeatureMatrix>& x,
                 const std::vector<std::size_t>& rows) const;
};

nlohmann::json to_json(const ModelCheckpoint& ckpt);
ModelCheckpoint checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& file);
ModelCheckpoint load_checkpoint(const std::filesystem::path& file);

}  // namespace twopoint::models
