#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "doctest.h"
#include "twopoint/eval.hpp"
#include "twopoint/training.hpp"

using namespace twopoint;
using namespace twopoint::eval;

namespace {

double brute_auc(const std::vector<double>& s, const std::vector<int>& t) {
  double num = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (t[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (t[j] != 0) continue;
      pairs += 1.0;
      if (s[i] > s[j]) num += 1.0;
      else if (s[i] == s[j]) num += 0.5;
    }
  }
  return num / pairs;
}

double hanley_mcneil(double a, double n1, double n2) {
  const double q1 = a / (2.0 - a);
  const double q2 = 2.0 * a * a / (1.0 + a);
  return std::sqrt((a * (1.0 - a) + (n1 - 1.0) * (q1 - a * a) + (n2 - 1.0) * (q2 - a * a)) / (n1 * n2));
}

struct Trained {
  models::ModelCheckpoint ckpt;
  std::vector<PreprocessedRecord> test;
};

// LN on a small noise-floor-free cohort, tested on a held-out third.
const Trained& trained_ln() {
  static const Trained t = [] {
    synth::SynthConfig cfg;
    cfg.noise_floor = 0.0;
    const auto cohort = synth::generate_cohort(1, 3, 10.0, 42, {}, cfg);
    const auto split = models::split_dataset(cohort.records.size());
    const auto ds = models::build_features(cohort.records, split.train_val);
    models::TrainConfig tc;
    tc.folds = 2;
    Trained out{models::train(ds, models::ModelKind::kLN, tc).checkpoint, {}};
    out.test = preprocess_records(cohort.records, split.test);
    return out;
  }();
  return t;
}

}  // namespace

TEST_CASE("auc examples") {
  const std::vector<double> s = {0.1, 0.4, 0.35, 0.8};
  const std::vector<int> t = {0, 0, 1, 1};
  CHECK(auc_with_se(s, t).auc == doctest::Approx(0.75));
  CHECK(auc_with_se(std::vector<double>{0, 1, 2, 3}, t).auc == 1.0);
  CHECK(auc_with_se(std::vector<double>{3, 2, 1, 0}, t).auc == 0.0);
  CHECK(auc_with_se(std::vector<double>(4, 0.2), t).auc == 0.5);
  CHECK_THROWS(auc_with_se(s, std::vector<int>{1, 1, 1, 1}));
  CHECK_THROWS(auc_with_se(s, std::vector<int>{1, 0}));
}

TEST_CASE("auc agrees with brute force and Hanley-McNeil") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng() % 199;
    std::vector<double> s(n);
    std::vector<int> t(n);
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = static_cast<int>(rng() % 2);
      s[i] = static_cast<double>(rng() % 20 + 3 * static_cast<unsigned>(t[i]));  // ties on purpose
    }
    t[0] = 0;
    t[1] = 1;
    const auto r = auc_with_se(s, t);
    CHECK(r.auc == brute_auc(s, t));
    const double n1 = std::count(t.begin(), t.end(), 1);
    const double n2 = static_cast<double>(n) - n1;
    CHECK(r.se == doctest::Approx(hanley_mcneil(r.auc, n1, n2)).epsilon(1e-12));
    CHECK(r.se >= 0.0);

    std::vector<double> warped(s);
    for (auto& v : warped) v = std::exp(0.3 * v) - 7.0;
    CHECK(auc_with_se(warped, t).auc == r.auc);
  }
}

TEST_CASE("direction report oracle and negated oracle") {
  std::vector<FingerLabels> labels;
  for (int i = 0; i < 10; ++i) {
    FingerLabels l;
    for (std::size_t f = 0; f < kFingers; ++f) l[f] = (i + static_cast<int>(f)) % 2 ? 1.0 : -1.0;
    labels.push_back(l);
  }
  Eigen::MatrixXd out(5, 10);
  for (int i = 0; i < 10; ++i)
    for (int f = 0; f < 5; ++f) out(f, i) = labels[static_cast<std::size_t>(i)][static_cast<std::size_t>(f)];
  const auto good = direction_report(out, labels);
  const auto bad = direction_report(-out, labels);
  for (std::size_t f = 0; f < kFingers; ++f) {
    CHECK(good.fingers[f].auc == 1.0);
    CHECK(good.fingers[f].accuracy == 1.0);
    CHECK(good.fingers[f].n == 10);
    CHECK(bad.fingers[f].auc == 0.0);
    CHECK(bad.fingers[f].accuracy == 0.0);
  }
  // zero output counts as wrong
  const auto zero = direction_report(Eigen::MatrixXd::Zero(5, 10), labels);
  CHECK(zero.fingers[0].accuracy == 0.0);
  CHECK(zero.fingers[0].auc == 0.5);

  std::vector<FingerLabels> one_class(10, FingerLabels{{1, 1, 1, 1, 1}});
  CHECK_THROWS(direction_report(out, one_class));

  const auto j = to_json(good);
  CHECK(j["fingers"].size() == 5);
  CHECK(j["fingers"][0]["output"] == "L1");
}

TEST_CASE("grid") {
  const auto g = default_grid();
  CHECK(g.size() == 20);
  CHECK(g.front() == doctest::Approx(-1.0));
  CHECK(g.back() == doctest::Approx(1.0));
  for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i] > g[i - 1]);
  const auto p = parse_grid("0.1:1.0:0.1");
  CHECK(p.size() == g.size());
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(p[i] == doctest::Approx(g[i]));
  CHECK(parse_grid("0.5:1.0:0.25").size() == 6);
  CHECK_THROWS(parse_grid("1.0:0.1:0.1"));
  CHECK_THROWS(parse_grid("nonsense"));
}

TEST_CASE("fit verdict cases") {
  const auto g = default_grid();
  std::vector<double> lin(g.size()), flat(g.size(), 0.3), bent(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    lin[i] = 0.9 * g[i];
    bent[i] = g[i] > 0.0 ? std::sin(3.0 * std::numbers::pi * g[i]) : g[i];
  }
  const auto a = fit_verdict(g, lin);
  CHECK(a.pass);
  CHECK(a.spearman == doctest::Approx(1.0));
  CHECK(a.r2 == doctest::Approx(1.0));
  const auto c = fit_verdict(g, flat);
  CHECK_FALSE(c.monotone);
  CHECK_FALSE(c.pass);
  CHECK_FALSE(fit_verdict(g, bent).pass);

  // order of grid points does not matter
  std::vector<double> rg(g.rbegin(), g.rend()), rl(lin.rbegin(), lin.rend());
  const auto r = fit_verdict(rg, rl);
  CHECK(r.pass);
  CHECK(r.r2 == doctest::Approx(a.r2));

  CHECK_THROWS(fit_verdict(std::vector<double>{0.1, 0.2}, std::vector<double>{0.1, 0.2}));
  CHECK(spearman_rho(std::vector<double>{1, 2, 3, 4}, std::vector<double>{10, 20, 15, 40}) == doctest::Approx(0.8));
}

TEST_CASE("tracking metrics") {
  std::vector<double> t(1000), zero(1000, 0.0);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = std::sin(2.0 * std::numbers::pi * static_cast<double>(i) / 1000.0);
  const auto same = tracking_metrics(t, t);
  CHECK(same.rmse == 0.0);
  CHECK(same.mape == 0.0);
  CHECK(same.r2 == 1.0);
  CHECK(tracking_metrics(t, zero).rmse == doctest::Approx(std::sqrt(0.5)).epsilon(1e-9));
  std::vector<double> half(t);
  for (auto& v : half) v *= 0.5;
  const auto h = tracking_metrics(t, half);
  CHECK(h.mape == doctest::Approx(0.5));
  CHECK(h.mape_samples < t.size());
  CHECK_THROWS(tracking_metrics(t, std::vector<double>(3, 0.0)));
  CHECK_THROWS(tracking_metrics(std::vector<double>{1.0}, std::vector<double>{1.0}));
}

TEST_CASE("sweep identity and origin") {
  const auto& tr = trained_ln();
  const auto curves = interpolation_sweep(tr.ckpt, tr.test, {-1.0, 0.0, 1.0});
  for (std::size_t f = 0; f < kFingers; ++f) {
    const auto& c = curves[f];
    REQUIRE(c.mean_output.size() == 3);
    CHECK(c.mean_output[1] == 0.0);
    // s = 1 equals the unscaled mean over flexion windows
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& r : tr.test) {
      if (r.labels[f] != 1.0) continue;
      for (std::size_t start = 0; start + kWindowLength <= r.signal.length(); start += kWindowStep) {
        sum += tr.ckpt.predict(features::window_features(r.signal, start))[f];
        ++n;
      }
    }
    CHECK(c.windows[2] == n);
    CHECK(c.mean_output[2] == doctest::Approx(sum / static_cast<double>(n)).epsilon(1e-12));
  }
}

TEST_CASE("LN sweep at half scale lands near one half") {
  const auto& tr = trained_ln();
  const auto curves = interpolation_sweep(tr.ckpt, tr.test, {-0.5, 0.5});
  for (std::size_t f = 0; f < kFingers; ++f) {
    CAPTURE(f);
    CHECK(std::abs(curves[f].mean_output[1] - 0.5) <= 0.1);
  }
}

TEST_CASE("LN sweep is exactly linear without the VAR columns") {
  auto ckpt = trained_ln().ckpt;
  auto& w1 = ckpt.model.parameters()[0];
  for (std::size_t c = 0; c < kChannels; ++c) {
    w1.col(static_cast<Eigen::Index>(c * kFeatures + static_cast<std::size_t>(features::Feature::kVar))).setZero();
  }
  const auto g = default_grid();
  const auto curves = interpolation_sweep(ckpt, trained_ln().test, g);
  for (const auto& c : curves) {
    const double pos = c.mean_output.back();
    const double neg = c.mean_output.front();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double ref = g[i] > 0 ? pos * g[i] : neg * -g[i];
      CHECK(std::abs(c.mean_output[i] - ref) <= 1e-9 * std::abs(ref) + 1e-15);
    }
  }
}
