#pragma once

// Plug-in estimates of the calibration and grouping regrets per score bin,
// their aggregates, and the evaluation verdict built on them.

#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "regretcal/binning.hpp"
#include "regretcal/bounds.hpp"
#include "regretcal/dataset.hpp"
#include "regretcal/decision.hpp"
#include "regretcal/detail/text.hpp"
#include "regretcal/error.hpp"
#include "regretcal/grouping.hpp"

namespace regretcal {

struct BinRegret {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t mass = 0;
  double mass_fraction = 0.0;
  double c_hat = std::numeric_limits<double>::quiet_NaN();
  double gl_hat = 0.0;
  double v_min = 0.0;
  double v_max = 0.0;
  double rcl_hat = 0.0;
  double lgl_hat = 0.0;
  double ugl_hat = 0.0;
  double rgl_hat = 0.0;
  double r_hat = 0.0;
};

struct RegretReport {
  double t_star = 0.5;
  double threshold = 0.5;
  double u_delta = 1.0;
  UtilityMatrix utility;
  std::size_t n = 0;
  std::vector<BinRegret> bins;
  double rcl_hat = 0.0;
  double lgl_hat = 0.0;
  double ugl_hat = 0.0;
  double rgl_hat = 0.0;
  double r_hat = 0.0;
};

/// Per-bin plug-in regrets. The calibration part averages the disagreement
/// between each sample's own decision 1{score ≥ t} and the calibrated
/// decision 1{ĉ ≥ t*}, so bins straddling t are handled sample by sample.
/// The grouping loss is capped at ĉ(1 − ĉ) before the bounds are evaluated,
/// since no distribution with mean ĉ has a larger variance.
inline RegretReport regret_report(const ScoredDataset& ds_eval, const GroupingLossEstimate& gl,
                                  const CalibrationCurveEstimate& curve, const UtilityMatrix& u, double t) {
  if (!(gl.binning == curve.binning)) {
    throw Error(ErrorCode::BinningMismatch, "grouping-loss estimate and calibration curve use different bins");
  }
  if (ds_eval.empty()) throw Error(ErrorCode::EmptyDataset, "");
  RegretReport rep;
  rep.t_star = optimal_threshold(u);
  rep.threshold = t;
  rep.u_delta = u.u_delta();
  rep.utility = u;
  rep.n = ds_eval.size();

  const auto& b = curve.binning;
  std::vector<std::size_t> mass(b.n_bins(), 0);
  std::vector<double> rcl_sum(b.n_bins(), 0.0);
  for (const auto& s : ds_eval.samples()) {
    const auto k = b.bin_of(s.score);
    mass[k] += 1;
    const double c = curve.bins[k].mean_label;
    if (!std::isnan(c)) rcl_sum[k] += rcl_bin(c, s.score >= t ? 1 : 0, rep.t_star, rep.u_delta);
  }

  rep.bins.resize(b.n_bins());
  for (std::size_t k = 0; k < b.n_bins(); ++k) {
    auto& br = rep.bins[k];
    br.lo = b.lo(k);
    br.hi = b.hi(k);
    br.mass = mass[k];
    br.mass_fraction = static_cast<double>(mass[k]) / static_cast<double>(rep.n);
    br.c_hat = curve.bins[k].mean_label;
    if (mass[k] == 0 || std::isnan(br.c_hat)) continue;
    br.gl_hat = std::min(gl.bins[k].gl_hat, v_max(br.c_hat));
    br.v_min = v_min(br.c_hat, rep.t_star);
    br.v_max = v_max(br.c_hat);
    br.rcl_hat = rcl_sum[k] / static_cast<double>(mass[k]);
    br.lgl_hat = lgl_bin(br.c_hat, br.gl_hat, rep.t_star, rep.u_delta);
    br.ugl_hat = ugl_bin(br.c_hat, br.gl_hat, rep.t_star, rep.u_delta);
    br.rgl_hat = 0.5 * (br.lgl_hat + br.ugl_hat);
    br.r_hat = br.rcl_hat + br.rgl_hat;

    rep.rcl_hat += br.mass_fraction * br.rcl_hat;
    rep.lgl_hat += br.mass_fraction * br.lgl_hat;
    rep.ugl_hat += br.mass_fraction * br.ugl_hat;
    rep.rgl_hat += br.mass_fraction * br.rgl_hat;
  }
  rep.r_hat = rep.rcl_hat + rep.rgl_hat;
  return rep;
}

/// Calibration regret without any grouping term (zero grouping loss).
inline RegretReport regret_report(const ScoredDataset& ds_eval, const CalibrationCurveEstimate& curve,
                                  const UtilityMatrix& u, double t) {
  GroupingLossEstimate gl;
  gl.binning = curve.binning;
  gl.n = ds_eval.size();
  gl.bins.resize(curve.binning.n_bins());
  return regret_report(ds_eval, gl, curve, u, t);
}

/// Per bin: does ĉ match the bin's mean score within `tol`? A bin passes
/// exactly when its calibration regret vanishes for every threshold. Empty
/// bins pass.
inline std::vector<bool> zero_rcl_all_t_check(const CalibrationCurveEstimate& curve, double tol = 1e-9) {
  std::vector<bool> out;
  out.reserve(curve.bins.size());
  for (const auto& b : curve.bins) out.push_back(b.mass == 0 || std::abs(b.mean_label - b.mean_score) <= tol);
  return out;
}

enum class Verdict { NotSuboptimal, Recalibrate, AdvancedPostTraining };

inline std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::NotSuboptimal: return "not_suboptimal";
    case Verdict::Recalibrate: return "recalibrate";
    case Verdict::AdvancedPostTraining: return "advanced_post_training";
  }
  return "unknown";
}

struct Advice {
  Verdict verdict = Verdict::NotSuboptimal;
  double gate = 0.02;
  double r_hat = 0.0;
  double rcl_hat = 0.0;
  double rgl_hat = 0.0;
  std::string rationale;
};

inline Advice advise(const RegretReport& rep, double gate = 0.02) {
  Advice a;
  a.gate = gate;
  a.r_hat = rep.r_hat;
  a.rcl_hat = rep.rcl_hat;
  a.rgl_hat = rep.rgl_hat;
  const auto g = detail::format_double(gate);
  if (rep.r_hat <= gate) {
    a.verdict = Verdict::NotSuboptimal;
    a.rationale = "estimated regret " + detail::format_double(rep.r_hat) + " <= " + g;
  } else if (rep.rgl_hat <= gate) {
    a.verdict = Verdict::Recalibrate;
    a.rationale = "grouping regret " + detail::format_double(rep.rgl_hat) + " <= " + g + " < regret " +
                  detail::format_double(rep.r_hat);
  } else {
    a.verdict = Verdict::AdvancedPostTraining;
    a.rationale = "grouping regret " + detail::format_double(rep.rgl_hat) + " > " + g;
  }
  return a;
}

namespace detail {
inline nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }
}  // namespace detail

inline void to_json(nlohmann::json& j, const BinRegret& b) {
  j = {{"lo", b.lo},           {"hi", b.hi},           {"mass", b.mass},
       {"c_hat", detail::finite_or_null(b.c_hat)},    {"gl_hat", b.gl_hat},
       {"v_min", b.v_min},     {"v_max", b.v_max},     {"rcl_hat", b.rcl_hat},
       {"lgl_hat", b.lgl_hat}, {"ugl_hat", b.ugl_hat}, {"rgl_hat", b.rgl_hat},
       {"r_hat", b.r_hat}};
}

inline void to_json(nlohmann::json& j, const RegretReport& r) {
  j = {{"t_star", r.t_star},
       {"threshold", r.threshold},
       {"u_delta", r.u_delta},
       {"utility", {r.utility.u00, r.utility.u01, r.utility.u10, r.utility.u11}},
       {"n", r.n},
       {"rcl_hat", r.rcl_hat},
       {"lgl_hat", r.lgl_hat},
       {"ugl_hat", r.ugl_hat},
       {"rgl_hat", r.rgl_hat},
       {"r_hat", r.r_hat},
       {"bins", r.bins}};
}

inline void to_json(nlohmann::json& j, const Advice& a) {
  j = {{"verdict", to_string(a.verdict)}, {"gate", a.gate},       {"r_hat", a.r_hat},
       {"rcl_hat", a.rcl_hat},            {"rgl_hat", a.rgl_hat}, {"rationale", a.rationale}};
}

inline void write_bins_csv(std::ostream& out, const std::vector<RegretReport>& reports) {
  out << "t_star,bin,lo,hi,mass,c_hat,gl_hat,v_min,v_max,rcl_hat,lgl_hat,ugl_hat,rgl_hat,r_hat\n";
  using detail::format_double;
  for (const auto& r : reports) {
    for (std::size_t k = 0; k < r.bins.size(); ++k) {
      const auto& b = r.bins[k];
      out << format_double(r.t_star) << ',' << k << ',' << format_double(b.lo) << ',' << format_double(b.hi) << ','
          << b.mass << ',' << (std::isnan(b.c_hat) ? std::string{} : format_double(b.c_hat)) << ','
          << format_double(b.gl_hat) << ',' << format_double(b.v_min) << ',' << format_double(b.v_max) << ','
          << format_double(b.rcl_hat) << ',' << format_double(b.lgl_hat) << ',' << format_double(b.ugl_hat) << ','
          << format_double(b.rgl_hat) << ',' << format_double(b.r_hat) << '\n';
    }
  }
}

}  // namespace regretcal
