#include "twopoint/features.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <stdexcept>

namespace twopoint::features {

std::string_view feature_name(Feature f) {
  static constexpr std::array<std::string_view, kFeatures> names = {
      "RMS", "MAV", "VAR", "SD", "INT", "WL", "DASDV", "DAMV"};
  return names[static_cast<std::size_t>(f)];
}

FeatureVector extract(std::span<const double> w) {
  const std::size_t n = w.size();
  if (n < 2) throw std::invalid_argument("feature window needs at least 2 samples");
  const double nd = static_cast<double>(n);

  double sum = 0.0, sum_abs = 0.0, sum_sq = 0.0;
  for (double v : w) {
    sum += v;
    sum_abs += std::abs(v);
    sum_sq += v * v;
  }
  const double mean = sum / nd;
  double dev_sq = 0.0;
  for (double v : w) dev_sq += (v - mean) * (v - mean);

  double diff_abs = 0.0, diff_sq = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double d = w[i + 1] - w[i];
    diff_abs += std::abs(d);
    diff_sq += d * d;
  }

  FeatureVector f{};
  const double var = dev_sq / (nd - 1.0);
  f[static_cast<std::size_t>(Feature::kRms)] = std::sqrt(sum_sq / nd);
  f[static_cast<std::size_t>(Feature::kMav)] = sum_abs / nd;
  f[static_cast<std::size_t>(Feature::kVar)] = var;
  f[static_cast<std::size_t>(Feature::kSd)] = std::sqrt(var);
  f[static_cast<std::size_t>(Feature::kInt)] = sum_abs;
  f[static_cast<std::size_t>(Feature::kWl)] = diff_abs;
  f[static_cast<std::size_t>(Feature::kDasdv)] = std::sqrt(diff_sq / (nd - 1.0));
  f[static_cast<std::size_t>(Feature::kDamv)] = diff_abs / (nd - 1.0);
  return f;
}

FeatureMatrix feature_matrix(const dsp::WindowedSegment& seg) {
  FeatureMatrix m;
  for (std::size_t c = 0; c < kChannels; ++c) {
    const FeatureVector f = extract(seg.channel(c));
    std::copy(f.begin(), f.end(), m.values.begin() + static_cast<std::ptrdiff_t>(c * kFeatures));
  }
  return m;
}

FeatureMatrix window_features(const MultiChannelSignal& preprocessed, std::size_t start,
                              double scale) {
  if (start + kWindowLength > preprocessed.length()) {
    throw std::out_of_range("window extends past the end of the record");
  }
  FeatureMatrix m;
  std::array<double, kWindowLength> buf{};
  for (std::size_t c = 0; c < kChannels; ++c) {
    const auto ch = preprocessed.channel(c).subspan(start, kWindowLength);
    for (std::size_t i = 0; i < kWindowLength; ++i) buf[i] = scale * ch[i];
    const FeatureVector f = extract(buf);
    std::copy(f.begin(), f.end(), m.values.begin() + static_cast<std::ptrdiff_t>(c * kFeatures));
  }
  return m;
}

int homogeneity_degree(Feature f) { return f == Feature::kVar ? 2 : 1; }

double scaling_law(Feature f, double k) {
  if (!(k > 0.0)) throw std::invalid_argument("scale must be positive");
  return std::pow(k, homogeneity_degree(f));
}

void FeatureDataset::append(const FeatureDataset& other) {
  x.insert(x.end(), other.x.begin(), other.x.end());
  y.insert(y.end(), other.y.begin(), other.y.end());
  record.insert(record.end(), other.record.begin(), other.record.end());
}

FeatureDataset record_features(const MultiChannelSignal& preprocessed, const FingerLabels& label,
                               std::size_t record_id) {
  const std::size_t m = dsp::window_count(preprocessed.length());
  FeatureDataset ds;
  ds.x.reserve(m);
  for (std::size_t w = 0; w < m; ++w) {
    ds.x.push_back(window_features(preprocessed, w * kWindowStep));
    ds.y.push_back(label);
    ds.record.push_back(record_id);
  }
  return ds;
}

void write_feature_table(const FeatureDataset& ds, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << "record";
  for (std::size_t c = 0; c < kChannels; ++c) {
    for (Feature f : kAllFeatures) out << ",ch" << c << "_" << feature_name(f);
  }
  for (std::size_t j = 0; j < kFingers; ++j) {
    out << ",label_" << finger_name(static_cast<Finger>(j));
  }
  out << "\n" << std::setprecision(17);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << ds.record[i];
    for (double v : ds.x[i].values) out << "," << v;
    for (double v : ds.y[i].values) out << "," << v;
    out << "\n";
  }
}

}  // namespace twopoint::features
