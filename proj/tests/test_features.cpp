#include <cmath>
#include <random>

#include "doctest.h"
#include "twopoint/features.hpp"
#include "twopoint/synth.hpp"

using namespace twopoint;
using namespace twopoint::features;

namespace {

std::vector<double> random_window(std::mt19937_64& rng, std::size_t n = kWindowLength) {
  std::exponential_distribution<double> d(2.0);
  std::vector<double> w(n);
  for (auto& v : w) v = d(rng);
  return w;
}

bool close_rel(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({std::abs(a), std::abs(b), 1e-300});
}

}  // namespace

TEST_CASE("extract examples") {
  const auto a = extract(std::vector<double>{1, 1, 1, 1});
  const FeatureVector ea = {1, 1, 0, 0, 4, 0, 0, 0};
  for (std::size_t i = 0; i < kFeatures; ++i) CHECK(a[i] == doctest::Approx(ea[i]));

  const auto b = extract(std::vector<double>{1, 3});
  const FeatureVector eb = {std::sqrt(5.0), 2, 2, std::sqrt(2.0), 4, 2, 2, 2};
  for (std::size_t i = 0; i < kFeatures; ++i) CHECK(b[i] == doctest::Approx(eb[i]));

  const auto z = extract(std::vector<double>(200, 0.0));
  for (double v : z) CHECK(v == 0.0);

  CHECK_THROWS(extract(std::vector<double>{1.0}));
  CHECK_THROWS(extract(std::vector<double>{}));
}

TEST_CASE("feature names follow column order") {
  CHECK(feature_name(Feature::kRms) == "RMS");
  CHECK(feature_name(Feature::kVar) == "VAR");
  CHECK(feature_name(Feature::kDamv) == "DAMV");
}

TEST_CASE("scaling law examples") {
  CHECK(scaling_law(Feature::kVar, 0.7) == doctest::Approx(0.49));
  CHECK(scaling_law(Feature::kRms, 0.5) == doctest::Approx(0.5));
  for (Feature f : kAllFeatures) {
    CHECK(scaling_law(f, 1.0) == 1.0);
    CHECK(homogeneity_degree(f) == (f == Feature::kVar ? 2 : 1));
  }
}

TEST_CASE("homogeneity on random windows") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const auto w = random_window(rng);
    const auto base = extract(w);
    for (int step = 1; step <= 10; ++step) {
      const double k = 0.1 * step;
      std::vector<double> kw(w);
      for (auto& v : kw) v *= k;
      const auto scaled = extract(kw);
      for (Feature f : kAllFeatures) {
        const auto i = static_cast<std::size_t>(f);
        CHECK(close_rel(scaled[i], scaling_law(f, k) * base[i], 1e-9));
      }
    }
  }
}

TEST_CASE("monotone scaling") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const auto w = random_window(rng);
    FeatureVector prev{};
    for (int step = 1; step <= 10; ++step) {
      std::vector<double> kw(w);
      for (auto& v : kw) v *= 0.1 * step;
      const auto cur = extract(kw);
      for (std::size_t i = 0; i < kFeatures; ++i) CHECK(cur[i] >= prev[i]);
      prev = cur;
    }
  }
}

TEST_CASE("internal consistency") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const auto w = random_window(rng, 2 + trial * 7);
    const auto v = extract(w);
    const double n = static_cast<double>(w.size());
    CHECK(close_rel(v[3] * v[3], v[2], 1e-9));
    CHECK(close_rel(v[5], (n - 1.0) * v[7], 1e-9));
    for (double x : v) CHECK(x >= 0.0);
  }
}

TEST_CASE("feature matrix keeps channels independent") {
  dsp::WindowedSegment seg;
  seg.data.assign(kChannels * kWindowLength, 0.0);
  CHECK(feature_matrix(seg) == FeatureMatrix{});

  std::mt19937_64 rng(14);
  const auto w = random_window(rng);
  std::copy(w.begin(), w.end(), seg.data.begin() + 3 * kWindowLength);
  const auto m = feature_matrix(seg);
  for (std::size_t c = 0; c < kChannels; ++c) {
    for (Feature f : kAllFeatures) {
      if (c == 3) {
        CHECK(m.at(c, f) == extract(w)[static_cast<std::size_t>(f)]);
      } else {
        CHECK(m.at(c, f) == 0.0);
      }
    }
  }

  for (std::size_t c = 0; c < kChannels; ++c) std::copy(w.begin(), w.end(), seg.data.begin() + c * kWindowLength);
  const auto d = feature_matrix(seg);
  for (std::size_t c = 1; c < kChannels; ++c) {
    CHECK(std::equal(d.row(c).begin(), d.row(c).end(), d.row(0).begin()));
  }
}

TEST_CASE("record features and window_features agree") {
  const FingerLabels lab{{1, -1, 1, -1, 1}};
  const auto raw = synth::generate_signal(synth::labels_to_activation(lab), 1.0, 5);
  const auto pre = dsp::preprocess(raw);
  const auto ds = record_features(pre, lab, 4);
  REQUIRE(ds.size() == dsp::window_count(pre.length()));
  for (std::size_t m = 0; m < ds.size(); ++m) {
    CHECK(ds.y[m] == lab);
    CHECK(ds.record[m] == 4);
    CHECK(ds.x[m] == window_features(pre, m * kWindowStep));
  }
  const auto half = window_features(pre, 100, 0.5);
  const auto full = window_features(pre, 100);
  for (std::size_t c = 0; c < kChannels; ++c) {
    for (Feature f : kAllFeatures) CHECK(close_rel(half.at(c, f), scaling_law(f, 0.5) * full.at(c, f), 1e-9));
  }
}
