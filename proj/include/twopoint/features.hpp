#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "twopoint/dsp.hpp"
#include "twopoint/types.hpp"

namespace twopoint::features {

/// Fixed column order of a feature vector.
enum class Feature : std::size_t { kRms = 0, kMav, kVar, kSd, kInt, kWl, kDasdv, kDamv };

inline constexpr std::array<Feature, kFeatures> kAllFeatures = {
    Feature::kRms, Feature::kMav, Feature::kVar,   Feature::kSd,
    Feature::kInt, Feature::kWl,  Feature::kDasdv, Feature::kDamv};

std::string_view feature_name(Feature f);

using FeatureVector = std::array<double, kFeatures>;

/// 12 x 8, row c holds the features of channel c.
struct FeatureMatrix {
  std::array<double, kInputDim> values{};

  double& at(std::size_t channel, Feature f) {
    return values[channel * kFeatures + static_cast<std::size_t>(f)];
  }
  double at(std::size_t channel, Feature f) const {
    return values[channel * kFeatures + static_cast<std::size_t>(f)];
  }
  std::span<const double, kFeatures> row(std::size_t channel) const {
    return std::span<const double, kFeatures>(values.data() + channel * kFeatures, kFeatures);
  }
  bool operator==(const FeatureMatrix&) const = default;
};

/// Table of the eight amplitude features; throws for fewer than 2 samples.
FeatureVector extract(std::span<const double> w);

FeatureMatrix feature_matrix(const dsp::WindowedSegment& seg);

/// Features for the window starting at `start` of a preprocessed record,
/// with every sample multiplied by `scale` first.
FeatureMatrix window_features(const MultiChannelSignal& preprocessed, std::size_t start,
                              double scale = 1.0);

/// Degree d such that extract(k w) = k^d extract(w) for k > 0.
int homogeneity_degree(Feature f);
double scaling_law(Feature f, double k);

/// Windowed features of labelled records, with the source record of each row.
struct FeatureDataset {
  std::vector<FeatureMatrix> x;
  std::vector<FingerLabels> y;
  std::vector<std::size_t> record;

  std::size_t size() const { return x.size(); }
  void append(const FeatureDataset& other);
};

FeatureDataset record_features(const MultiChannelSignal& preprocessed, const FingerLabels& label,
                               std::size_t record_id);

/// CSV dump: one row per window, 96 feature columns then 5 label columns.
void write_feature_table(const FeatureDataset& ds, const std::filesystem::path& file);

}  // namespace twopoint::features
