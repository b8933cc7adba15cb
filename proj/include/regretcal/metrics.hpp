#pragma once

// Standard scoring and calibration metrics used as baselines next to the
// regret estimates.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <nlohmann/json.hpp>

#include "regretcal/binning.hpp"
#include "regretcal/dataset.hpp"
#include "regretcal/decision.hpp"
#include "regretcal/error.hpp"

namespace regretcal {

inline double brier(const ScoredDataset& ds) {
  if (ds.empty()) throw Error(ErrorCode::EmptyDataset, "");
  double s = 0.0;
  for (const auto& x : ds.samples()) s += (x.score - x.label) * (x.score - x.label);
  return s / static_cast<double>(ds.size());
}

struct CalibrationMetrics {
  double ece = 0.0;
  double mce = 0.0;
  double cl = 0.0;
  double rmsce = 0.0;
};

/// Gaps |ĉ − p̄| between the mean label and the mean score of each bin.
inline CalibrationMetrics binned_calibration_metrics(const ScoredDataset& ds, const EqualMassBinning& b) {
  const auto curve = estimate_calibration_curve(ds, b);
  CalibrationMetrics m;
  for (const auto& bin : curve.bins) {
    if (bin.mass == 0) continue;
    const double gap = std::abs(bin.mean_label - bin.mean_score);
    const double w = static_cast<double>(bin.mass) / static_cast<double>(curve.n);
    m.ece += w * gap;
    m.cl += w * gap * gap;
    m.mce = std::max(m.mce, gap);
  }
  m.rmsce = std::sqrt(m.cl);
  return m;
}

/// Mann-Whitney statistic; tied positive/negative pairs count one half.
inline double auc(const ScoredDataset& ds) {
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ds[a].score < ds[b].score; });
  double n_pos = 0.0, rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && ds[order[j]].score == ds[order[i]].score) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // average of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) {
      if (ds[order[k]].label == 1) {
        rank_sum += mid_rank;
        n_pos += 1.0;
      }
    }
    i = j;
  }
  const double n_neg = static_cast<double>(ds.size()) - n_pos;
  if (n_pos == 0.0 || n_neg == 0.0) throw Error(ErrorCode::SingleClass, "AUC needs both classes");
  return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

inline double accuracy(const ScoredDataset& ds, double t) {
  if (ds.empty()) throw Error(ErrorCode::EmptyDataset, "");
  const ThresholdRule rule{t};
  std::size_t hits = 0;
  for (const auto& s : ds.samples()) hits += rule.decide(s.score) == s.label ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(ds.size());
}

struct MetricsReport {
  double brier = 0.0;
  CalibrationMetrics calibration;
  double auc = std::numeric_limits<double>::quiet_NaN();  // NaN with a single class
  double accuracy = 0.0;
  double threshold = 0.5;
};

inline MetricsReport baseline_metrics(const ScoredDataset& ds, const EqualMassBinning& b, double t = 0.5) {
  MetricsReport m;
  m.brier = brier(ds);
  m.calibration = binned_calibration_metrics(ds, b);
  const auto pos = std::count_if(ds.samples().begin(), ds.samples().end(), [](const auto& s) { return s.label == 1; });
  if (pos > 0 && static_cast<std::size_t>(pos) < ds.size()) m.auc = auc(ds);
  m.accuracy = accuracy(ds, t);
  m.threshold = t;
  return m;
}

inline void to_json(nlohmann::json& j, const MetricsReport& m) {
  j = {{"brier", m.brier},
       {"ece", m.calibration.ece},
       {"mce", m.calibration.mce},
       {"cl", m.calibration.cl},
       {"rmsce", m.calibration.rmsce},
       {"auc", std::isnan(m.auc) ? nlohmann::json(nullptr) : nlohmann::json(m.auc)},
       {"accuracy", m.accuracy},
       {"accuracy_threshold", m.threshold}};
}

}  // namespace regretcal
