#include "twopoint/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "twopoint/dsp.hpp"

namespace twopoint::eval {

using nlohmann::json;

namespace {

// Average (1-based) ranks with ties sharing the mean rank.
std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && v[order[j]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j + 1);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r;
    i = j;
  }
  return ranks;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nan("");
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

AucResult auc_with_se(std::span<const double> scores, std::span<const int> truth) {
  if (scores.size() != truth.size()) throw std::invalid_argument("auc: length mismatch");
  std::size_t n_pos = 0;
  for (int t : truth) n_pos += t != 0 ? 1 : 0;
  const std::size_t n_neg = truth.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw std::invalid_argument("auc: both classes are required");

  const std::vector<double> ranks = average_ranks(scores);
  double pos_rank_sum = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] != 0) pos_rank_sum += ranks[i];
  }
  const double n1 = static_cast<double>(n_pos);
  const double n2 = static_cast<double>(n_neg);
  const double u = pos_rank_sum - n1 * (n1 + 1.0) / 2.0;
  const double a = u / (n1 * n2);

  const double q1 = a / (2.0 - a);
  const double q2 = 2.0 * a * a / (1.0 + a);
  const double var = (a * (1.0 - a) + (n1 - 1.0) * (q1 - a * a) + (n2 - 1.0) * (q2 - a * a)) / (n1 * n2);
  return {a, std::sqrt(std::max(var, 0.0))};
}

DirectionReport direction_report(const Eigen::MatrixXd& outputs,
                                 const std::vector<FingerLabels>& labels) {
  if (outputs.rows() != static_cast<Eigen::Index>(kFingers) ||
      outputs.cols() != static_cast<Eigen::Index>(labels.size())) {
    throw std::invalid_argument("direction_report: output/label mismatch");
  }
  DirectionReport report;
  std::vector<double> scores(labels.size());
  std::vector<int> truth(labels.size());
  for (std::size_t j = 0; j < kFingers; ++j) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const double out = outputs(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
      const double lab = labels[i][j];
      scores[i] = out;
      truth[i] = lab > 0.0 ? 1 : 0;
      if ((out > 0.0 && lab > 0.0) || (out < 0.0 && lab < 0.0)) ++correct;
    }
    FingerDirection& f = report.fingers[j];
    try {
      const AucResult auc = auc_with_se(scores, truth);
      f.auc = auc.auc;
      f.se = auc.se;
    } catch (const std::invalid_argument&) {
      throw std::invalid_argument("direction_report: finger " +
                                  std::string(finger_name(static_cast<Finger>(j))) +
                                  " has only one direction in the test set");
    }
    f.n = labels.size();
    f.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
  }
  return report;
}

DirectionReport direction_report(const models::ModelCheckpoint& ckpt,
                                 const features::FeatureDataset& test) {
  std::vector<std::size_t> rows(test.size());
  std::iota(rows.begin(), rows.end(), 0);
  return direction_report(ckpt.predict(test.x, rows), test.y);
}

json to_json(const DirectionReport& r) {
  json fingers = json::array();
  for (std::size_t j = 0; j < kFingers; ++j) {
    const FingerDirection& f = r.fingers[j];
    fingers.push_back({{"finger", finger_name(static_cast<Finger>(j))},
                       {"output", "L" + std::to_string(j + 1)},
                       {"auc", f.auc},
                       {"se", f.se},
                       {"accuracy", f.accuracy},
                       {"windows", f.n}});
  }
  return {{"fingers", fingers}};
}

std::vector<double> default_grid() { return parse_grid("0.1:1.0:0.1"); }

std::vector<double> parse_grid(const std::string& spec) {
  std::stringstream ss(spec);
  std::string a, b, c;
  if (!std::getline(ss, a, ':') || !std::getline(ss, b, ':') || !std::getline(ss, c)) {
    throw std::invalid_argument("grid must be lo:hi:step");
  }
  const double lo = std::stod(a), hi = std::stod(b), step = std::stod(c);
  if (!(lo > 0.0 && hi >= lo && step > 0.0)) throw std::invalid_argument("grid needs 0 < lo <= hi, step > 0");
  const auto n = static_cast<int>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> pos;
  for (int i = 0; i < n; ++i) {
    // Round to the step's decimal grid so 0.1 * 3 prints as 0.3.
    pos.push_back(std::round((lo + i * step) * 1e9) / 1e9);
  }
  std::vector<double> grid;
  for (auto it = pos.rbegin(); it != pos.rend(); ++it) grid.push_back(-*it);
  grid.insert(grid.end(), pos.begin(), pos.end());
  return grid;
}

std::vector<PreprocessedRecord> preprocess_records(const std::vector<synth::LabeledRecord>& records,
                                                   const std::vector<std::size_t>& which) {
  std::vector<PreprocessedRecord> out;
  out.reserve(which.size());
  for (std::size_t r : which) {
    out.push_back({dsp::preprocess(records.at(r).signal), records[r].labels});
  }
  return out;
}

std::array<SweepCurve, kFingers> interpolation_sweep(const models::ModelCheckpoint& ckpt,
                                                    const std::vector<PreprocessedRecord>& records,
                                                    const std::vector<double>& grid) {
  std::array<SweepCurve, kFingers> curves;
  for (std::size_t j = 0; j < kFingers; ++j) {
    curves[j].finger = static_cast<Finger>(j);
    curves[j].grid = grid;
    curves[j].mean_output.assign(grid.size(), 0.0);
    curves[j].windows.assign(grid.size(), 0);
  }
  std::vector<features::FeatureMatrix> batch;
  std::vector<std::size_t> rows;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double s = grid[g];
    for (const PreprocessedRecord& rec : records) {
      // Which fingers does this record feed at this grid point?
      std::array<bool, kFingers> use{};
      bool any = false;
      for (std::size_t j = 0; j < kFingers; ++j) {
        use[j] = s == 0.0 || (s > 0.0 && rec.labels[j] > 0.0) || (s < 0.0 && rec.labels[j] < 0.0);
        any = any || use[j];
      }
      if (!any) continue;
      const std::size_t m = dsp::window_count(rec.signal.length());
      batch.clear();
      for (std::size_t w = 0; w < m; ++w) {
        batch.push_back(features::window_features(rec.signal, w * kWindowStep, std::abs(s)));
      }
      rows.resize(m);
      std::iota(rows.begin(), rows.end(), 0);
      const Eigen::MatrixXd out = ckpt.predict(batch, rows);
      for (std::size_t j = 0; j < kFingers; ++j) {
        if (!use[j]) continue;
        curves[j].mean_output[g] += out.row(static_cast<Eigen::Index>(j)).sum();
        curves[j].windows[g] += m;
      }
    }
  }
  for (SweepCurve& c : curves) {
    for (std::size_t g = 0; g < c.grid.size(); ++g) {
      if (c.windows[g] > 0) c.mean_output[g] /= static_cast<double>(c.windows[g]);
    }
  }
  return curves;
}

double spearman_rho(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("spearman: bad input");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson(rx, ry);
}

FitVerdict fit_verdict(std::span<const double> grid, std::span<const double> values,
                       FitThresholds thresholds) {
  if (grid.size() != values.size()) throw std::invalid_argument("fit_verdict: length mismatch");
  if (grid.size() < 5) throw std::invalid_argument("fit_verdict: need at least 5 grid points");
  std::vector<std::size_t> order(grid.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return grid[a] < grid[b]; });
  std::vector<double> x, y;
  for (std::size_t i : order) {
    x.push_back(grid[i]);
    y.push_back(values[i]);
  }

  FitVerdict v;
  v.thresholds = thresholds;
  v.spearman = spearman_rho(x, y);
  v.monotone = std::isfinite(v.spearman) && v.spearman >= thresholds.rho_min;
  const double r = pearson(x, y);
  v.r2 = std::isfinite(r) ? r * r : 0.0;  // R^2 of the least-squares line
  v.linear = v.r2 >= thresholds.r2_min;
  v.pass = v.monotone && v.linear;
  return v;
}

FitVerdict fit_verdict(const SweepCurve& curve, FitThresholds thresholds) {
  return fit_verdict(curve.grid, curve.mean_output, thresholds);
}

TrackingMetrics tracking_metrics(std::span<const double> target, std::span<const double> decoded) {
  if (target.size() != decoded.size()) throw std::invalid_argument("tracking_metrics: length mismatch");
  if (target.size() < 2) throw std::invalid_argument("tracking_metrics: need at least 2 samples");
  const double n = static_cast<double>(target.size());
  const double mean_t = std::accumulate(target.begin(), target.end(), 0.0) / n;
  double ss_res = 0.0, ss_tot = 0.0, ape = 0.0;
  std::size_t ape_n = 0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double e = decoded[i] - target[i];
    ss_res += e * e;
    ss_tot += (target[i] - mean_t) * (target[i] - mean_t);
    if (std::abs(target[i]) >= kMapeTargetFloor) {
      ape += std::abs(e / target[i]);
      ++ape_n;
    }
  }
  TrackingMetrics m;
  m.rmse = std::sqrt(ss_res / n);
  m.mape = ape_n > 0 ? ape / static_cast<double>(ape_n) : 0.0;
  m.mape_samples = ape_n;
  m.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : 0.0);
  return m;
}

json to_json(const SweepCurve& c) {
  return {{"finger", finger_name(c.finger)},
          {"grid", c.grid},
          {"mean_output", c.mean_output},
          {"windows", c.windows}};
}

json to_json(const FitVerdict& v) {
  return {{"spearman", std::isfinite(v.spearman) ? json(v.spearman) : json(nullptr)},
          {"r2", v.r2},
          {"monotone", v.monotone},
          {"linear", v.linear},
          {"pass", v.pass},
          {"rho_min", v.thresholds.rho_min},
          {"r2_min", v.thresholds.r2_min}};
}

json to_json(const TrackingMetrics& m) {
  return {{"rmse", m.rmse},
          {"mape", m.mape},
          {"r2", m.r2},
          {"mape_samples", m.mape_samples},
          {"mape_target_floor", kMapeTargetFloor}};
}

}  // namespace twopoint::eval
