#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "twopoint/adam.hpp"
#include "twopoint/checkpoint.hpp"
#include "twopoint/dsp.hpp"
#include "twopoint/features.hpp"
#include "twopoint/synth.hpp"

namespace twopoint::models {

/// Raised when the training loss stops being finite.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  AdamConfig adam;
  int epochs = 15;
  int folds = 10;
  int batch_size = 64;
  std::uint64_t seed = 42;
  ModelShape shape;
};

struct TrainReport {
  std::vector<double> fold_val_mse;
  double mean_val_mse = 0.0;
  double final_train_mse = 0.0;
  int epochs = 0;
};

struct TrainResult {
  ModelCheckpoint checkpoint;
  TrainReport report;
};

/// Record-level split: a third of the records (rounded down, at least one)
/// go to the test set.
struct DatasetSplit {
  std::vector<std::size_t> train_val;
  std::vector<std::size_t> test;
};

inline constexpr std::uint64_t kSplitSeed = 42;

DatasetSplit split_dataset(std::size_t n_records, std::uint64_t seed = kSplitSeed);

/// Preprocessed, windowed features of a list of records; row i of the
/// result remembers the index of its record in `records`.
features::FeatureDataset build_features(const std::vector<synth::LabeledRecord>& records,
                                        const std::vector<std::size_t>& which,
                                        dsp::DcMode mode = dsp::DcMode::kRecordMean);

/// Cross-validates over record-level folds, then retrains on everything in
/// `train_val` for the released checkpoint.
TrainResult train(const features::FeatureDataset& train_val, ModelKind kind,
                  const TrainConfig& config = {});

/// One training run over `rows` (no cross-validation). Exposed for tests.
ModelCheckpoint fit(const features::FeatureDataset& data, const std::vector<std::size_t>& rows,
                    ModelKind kind, const TrainConfig& config, std::uint64_t run_seed);

double evaluate_mse(const ModelCheckpoint& ckpt, const features::FeatureDataset& data,
                    const std::vector<std::size_t>& rows);

}  // namespace twopoint::models
