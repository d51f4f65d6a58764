#pragma once

#include <array>
#include <span>
#include <vector>

#include "json.hpp"
#include "twopoint/checkpoint.hpp"
#include "twopoint/features.hpp"
#include "twopoint/synth.hpp"

namespace twopoint::eval {

struct AucResult {
  double auc = 0.0;
  double se = 0.0;
};

/// Mann-Whitney AUC (ties count one half) with the Hanley-McNeil standard
/// error. `truth` is 1 for the positive class.
AucResult auc_with_se(std::span<const double> scores, std::span<const int> truth);

struct FingerDirection {
  double auc = 0.0;
  double se = 0.0;
  double accuracy = 0.0;
  std::size_t n = 0;
};

struct DirectionReport {
  std::array<FingerDirection, kFingers> fingers{};
};

/// outputs: 5 x N model outputs; labels: per-window true labels.
DirectionReport direction_report(const Eigen::MatrixXd& outputs,
                                 const std::vector<FingerLabels>& labels);
DirectionReport direction_report(const models::ModelCheckpoint& ckpt,
                                 const features::FeatureDataset& test);

nlohmann::json to_json(const DirectionReport& r);

/// Scale grid -1.0..-0.1, 0.1..1.0 in steps of 0.1 (strictly increasing).
std::vector<double> default_grid();
std::vector<double> parse_grid(const std::string& spec);  // "lo:hi:step", mirrored to +-

struct SweepCurve {
  Finger finger = Finger::kLittle;
  std::vector<double> grid;
  std::vector<double> mean_output;
  std::vector<std::size_t> windows;  // windows averaged at each grid point
};

/// Extreme records after preprocessing, with their labels.
struct PreprocessedRecord {
  MultiChannelSignal signal;
  FingerLabels labels;
};

std::vector<PreprocessedRecord> preprocess_records(const std::vector<synth::LabeledRecord>& records,
                                                   const std::vector<std::size_t>& which);

/// For each finger, scales the rectified windows of records whose label for
/// that finger is +1 (s > 0) or -1 (s < 0) by |s| and averages the model
/// output for that finger. Zero in the grid means "scale everything by 0".
std::array<SweepCurve, kFingers> interpolation_sweep(const models::ModelCheckpoint& ckpt,
                                                    const std::vector<PreprocessedRecord>& records,
                                                    const std::vector<double>& grid);

struct FitThresholds {
  double rho_min = 0.99;
  double r2_min = 0.95;
};

struct FitVerdict {
  double spearman = 0.0;
  double r2 = 0.0;
  bool monotone = false;
  bool linear = false;
  bool pass = false;
  FitThresholds thresholds;
};

double spearman_rho(std::span<const double> x, std::span<const double> y);
FitVerdict fit_verdict(std::span<const double> grid, std::span<const double> values,
                       FitThresholds thresholds = {});
FitVerdict fit_verdict(const SweepCurve& curve, FitThresholds thresholds = {});

inline constexpr double kMapeTargetFloor = 0.1;

struct TrackingMetrics {
  double rmse = 0.0;
  double mape = 0.0;
  double r2 = 0.0;
  std::size_t mape_samples = 0;
};

TrackingMetrics tracking_metrics(std::span<const double> target, std::span<const double> decoded);

nlohmann::json to_json(const SweepCurve& c);
nlohmann::json to_json(const FitVerdict& v);
nlohmann::json to_json(const TrackingMetrics& m);

}  // namespace twopoint::eval
