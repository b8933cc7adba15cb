#pragma once

// Equal-mass score binning and histogram estimates of the calibration curve.

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "regretcal/dataset.hpp"
#include "regretcal/detail/text.hpp"
#include "regretcal/error.hpp"

namespace regretcal {

/// Partition of [0, 1] into half-open bins [lo, hi), the last one closed.
/// Only the interior cut points are stored; bin i spans
/// [edge(i), edge(i + 1)) with edge(0) = 0 and edge(n_bins) = 1.
class EqualMassBinning {
 public:
  EqualMassBinning() = default;
  explicit EqualMassBinning(std::vector<double> interior_edges) : cuts_(std::move(interior_edges)) {
    for (std::size_t i = 0; i < cuts_.size(); ++i) {
      if (!(cuts_[i] > 0.0 && cuts_[i] <= 1.0) || (i > 0 && !(cuts_[i] > cuts_[i - 1]))) {
        throw Error(ErrorCode::InvalidSplit, "bin edges must be strictly increasing inside (0, 1]");
      }
    }
  }

  std::size_t n_bins() const noexcept { return cuts_.size() + 1; }
  std::span<const double> interior_edges() const noexcept { return cuts_; }

  double lo(std::size_t bin) const { return bin == 0 ? 0.0 : cuts_[bin - 1]; }
  double hi(std::size_t bin) const { return bin + 1 == n_bins() ? 1.0 : cuts_[bin]; }

  /// Scores outside [0, 1] land in the nearest end bin.
  std::size_t bin_of(double score) const {
    return static_cast<std::size_t>(std::upper_bound(cuts_.begin(), cuts_.end(), score) - cuts_.begin());
  }

  std::vector<double> edges() const {
    std::vector<double> out;
    out.reserve(n_bins() + 1);
    out.push_back(0.0);
    out.insert(out.end(), cuts_.begin(), cuts_.end());
    out.push_back(1.0);
    return out;
  }

  bool operator==(const EqualMassBinning& other) const = default;

 private:
  std::vector<double> cuts_;
};

inline void to_json(nlohmann::json& j, const EqualMassBinning& b) {
  j = nlohmann::json{{"interior_edges", std::vector<double>(b.interior_edges().begin(), b.interior_edges().end())}};
}

inline void from_json(const nlohmann::json& j, EqualMassBinning& b) {
  b = EqualMassBinning(j.at("interior_edges").get<std::vector<double>>());
}

/// Quantile bins. Cut ranks are floor(k·n/n_bins); a cut that would fall inside
/// a block of tied scores is moved to the nearer edge of that block, and cuts
/// that collapse onto each other (or onto the ends) are dropped.
inline EqualMassBinning fit_equal_mass_bins(std::span<const double> scores, std::size_t n_bins) {
  if (scores.empty()) throw Error(ErrorCode::EmptyInput, "no scores to bin");
  if (n_bins == 0) throw Error(ErrorCode::NonPositiveBins, "");
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();

  std::vector<std::size_t> ranks;
  for (std::size_t k = 1; k < n_bins; ++k) {
    std::size_t r = (k * n) / n_bins;
    if (r == 0 || r >= n) continue;
    if (sorted[r - 1] == sorted[r]) {
      const auto block_lo = static_cast<std::size_t>(
          std::lower_bound(sorted.begin(), sorted.end(), sorted[r]) - sorted.begin());
      const auto block_hi = static_cast<std::size_t>(
          std::upper_bound(sorted.begin(), sorted.end(), sorted[r]) - sorted.begin());
      r = (r - block_lo <= block_hi - r) ? block_lo : block_hi;
      if (r == 0 || r >= n) continue;
    }
    if (ranks.empty() || ranks.back() != r) ranks.push_back(r);
  }
  std::vector<double> cuts;
  cuts.reserve(ranks.size());
  for (auto r : ranks) {
    if (cuts.empty() || sorted[r] > cuts.back()) cuts.push_back(sorted[r]);
  }
  return EqualMassBinning(std::move(cuts));
}

struct BinStat {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t mass = 0;
  double mean_score = std::numeric_limits<double>::quiet_NaN();  // NaN for empty bins
  double mean_label = std::numeric_limits<double>::quiet_NaN();
};

struct CalibrationCurveEstimate {
  EqualMassBinning binning;
  std::vector<BinStat> bins;
  std::size_t n = 0;

  /// Estimated c at a score; empty bins return NaN.
  double at(double score) const { return bins[binning.bin_of(score)].mean_label; }
};

inline CalibrationCurveEstimate estimate_calibration_curve(const ScoredDataset& ds, const EqualMassBinning& b) {
  if (ds.empty()) throw Error(ErrorCode::EmptyDataset, "");
  CalibrationCurveEstimate out;
  out.binning = b;
  out.n = ds.size();
  out.bins.resize(b.n_bins());
  std::vector<double> score_sum(b.n_bins(), 0.0);
  std::vector<std::size_t> pos(b.n_bins(), 0);
  for (const auto& s : ds.samples()) {
    const auto k = b.bin_of(s.score);
    out.bins[k].mass += 1;
    score_sum[k] += s.score;
    pos[k] += static_cast<std::size_t>(s.label);
  }
  for (std::size_t k = 0; k < b.n_bins(); ++k) {
    auto& bin = out.bins[k];
    bin.lo = b.lo(k);
    bin.hi = b.hi(k);
    if (bin.mass > 0) {
      bin.mean_score = score_sum[k] / static_cast<double>(bin.mass);
      bin.mean_label = static_cast<double>(pos[k]) / static_cast<double>(bin.mass);
    }
  }
  return out;
}

/// `bin,lo,hi,mass,mean_score,mean_label`; empty bins leave the means blank.
inline void write_curve_csv(std::ostream& out, const CalibrationCurveEstimate& curve) {
  out << "bin,lo,hi,mass,mean_score,mean_label\n";
  for (std::size_t k = 0; k < curve.bins.size(); ++k) {
    const auto& b = curve.bins[k];
    out << k << ',' << detail::format_double(b.lo) << ',' << detail::format_double(b.hi) << ',' << b.mass << ',';
    if (b.mass > 0) out << detail::format_double(b.mean_score) << ',' << detail::format_double(b.mean_label);
    else out << ',';
    out << '\n';
  }
}

}  // namespace regretcal
