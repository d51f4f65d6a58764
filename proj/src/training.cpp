#include "twopoint/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

namespace twopoint::models {

DatasetSplit split_dataset(std::size_t n_records, std::uint64_t seed) {
  if (n_records < 3) throw std::invalid_argument("split needs at least 3 records");
  std::vector<std::size_t> order(n_records);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n_test = std::max<std::size_t>(1, n_records / 3);
  DatasetSplit split;
  split.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  split.train_val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  std::sort(split.test.begin(), split.test.end());
  std::sort(split.train_val.begin(), split.train_val.end());
  return split;
}

features::FeatureDataset build_features(const std::vector<synth::LabeledRecord>& records,
                                        const std::vector<std::size_t>& which, dsp::DcMode mode) {
  features::FeatureDataset ds;
  for (std::size_t r : which) {
    const MultiChannelSignal pre = dsp::preprocess(records.at(r).signal, mode);
    ds.append(features::record_features(pre, records[r].labels, r));
  }
  return ds;
}

namespace {

Matrix label_matrix(const features::FeatureDataset& data, const std::vector<std::size_t>& rows) {
  Matrix t(static_cast<Eigen::Index>(kFingers), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < kFingers; ++j) {
      t(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = data.y[rows[i]][j];
    }
  }
  return t;
}

}  // namespace

ModelCheckpoint fit(const features::FeatureDataset& data, const std::vector<std::size_t>& rows,
                    ModelKind kind, const TrainConfig& config, std::uint64_t run_seed) {
  if (rows.empty()) throw std::invalid_argument("training set is empty");
  ModelCheckpoint ckpt;
  ckpt.norm = NormStats::fit(data.x, rows);
  ckpt.model = Model::initialize(kind, derive_seed(run_seed, 1), config.shape);
  ckpt.meta.seed = config.seed;
  ckpt.meta.epochs = config.epochs;
  ckpt.meta.lr = config.adam.lr;
  ckpt.meta.batch_size = config.batch_size;
  ckpt.meta.folds = config.folds;

  const Matrix x = ckpt.norm.apply(data.x, rows);
  const Matrix t = label_matrix(data, rows);
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto batch = static_cast<Eigen::Index>(config.batch_size);

  Adam adam(ckpt.model.parameters(), config.adam);
  std::mt19937_64 rng(derive_seed(run_seed, 2));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::vector<Matrix> grads;
  Matrix xb, tb;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (Eigen::Index start = 0; start < n; start += batch) {
      const Eigen::Index len = std::min(batch, n - start);
      xb.resize(x.rows(), len);
      tb.resize(t.rows(), len);
      for (Eigen::Index k = 0; k < len; ++k) {
        const Eigen::Index src = order[static_cast<std::size_t>(start + k)];
        xb.col(k) = x.col(src);
        tb.col(k) = t.col(src);
      }
      const double loss = ckpt.model.loss_and_gradient(xb, tb, grads);
      if (!std::isfinite(loss)) {
        throw TrainingDiverged("training diverged (non-finite loss) in epoch " +
                               std::to_string(epoch + 1));
      }
      try {
        adam.step(ckpt.model.parameters(), grads);
      } catch (const std::domain_error& e) {
        throw TrainingDiverged(e.what());
      }
    }
  }
  return ckpt;
}

double evaluate_mse(const ModelCheckpoint& ckpt, const features::FeatureDataset& data,
                    const std::vector<std::size_t>& rows) {
  return ckpt.model.loss(ckpt.norm.apply(data.x, rows), label_matrix(data, rows));
}

TrainResult train(const features::FeatureDataset& train_val, ModelKind kind,
                  const TrainConfig& config) {
  if (train_val.size() == 0) throw std::invalid_argument("training set is empty");
  if (config.folds < 2) throw std::invalid_argument("need at least two folds");

  const std::set<std::size_t> unique(train_val.record.begin(), train_val.record.end());
  std::vector<std::size_t> records(unique.begin(), unique.end());
  if (records.size() < static_cast<std::size_t>(config.folds)) {
    throw std::invalid_argument("fewer records than folds");
  }
  std::mt19937_64 rng(derive_seed(config.seed, 0xf01d));
  std::shuffle(records.begin(), records.end(), rng);
  std::vector<int> fold_of_record(*unique.rbegin() + 1, -1);
  for (std::size_t i = 0; i < records.size(); ++i) {
    fold_of_record[records[i]] = static_cast<int>(i % static_cast<std::size_t>(config.folds));
  }

  TrainResult result;
  for (int fold = 0; fold < config.folds; ++fold) {
    std::vector<std::size_t> train_rows, val_rows;
    for (std::size_t i = 0; i < train_val.size(); ++i) {
      (fold_of_record[train_val.record[i]] == fold ? val_rows : train_rows).push_back(i);
    }
    const ModelCheckpoint ckpt =
        fit(train_val, train_rows, kind, config, derive_seed(config.seed, 0xc0de, fold));
    result.report.fold_val_mse.push_back(evaluate_mse(ckpt, train_val, val_rows));
  }

  std::vector<std::size_t> all(train_val.size());
  std::iota(all.begin(), all.end(), 0);
  result.checkpoint = fit(train_val, all, kind, config, derive_seed(config.seed, 0xf1a1));
  result.report.final_train_mse = evaluate_mse(result.checkpoint, train_val, all);
  result.report.mean_val_mse =
      std::accumulate(result.report.fold_val_mse.begin(), result.report.fold_val_mse.end(), 0.0) /
      static_cast<double>(config.folds);
  result.report.epochs = config.epochs;
  result.checkpoint.meta.fold_losses = result.report.fold_val_mse;
  result.checkpoint.meta.final_train_mse = result.report.final_train_mse;
  return result;
}

}  // namespace twopoint::models
