#pragma once

// End-to-end procedures built from the modules: diagnosing a scored dataset,
// running a post-training method and measuring its utility gain, and sweeping
// synthetic suites to correlate the estimators with observed gains.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "regretcal/binning.hpp"
#include "regretcal/dataset.hpp"
#include "regretcal/decision.hpp"
#include "regretcal/detail/parallel.hpp"
#include "regretcal/error.hpp"
#include "regretcal/grouping.hpp"
#include "regretcal/metrics.hpp"
#include "regretcal/recalibration.hpp"
#include "regretcal/regret.hpp"
#include "regretcal/synthetic.hpp"

namespace regretcal {

inline std::vector<double> default_tstar_grid() {
  return {0.01, 0.025, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.975, 0.99};
}

struct RunConfig {
  std::string input;
  std::string out = ".";
  std::size_t bins = 15;
  std::size_t max_leaves = 5;
  std::size_t min_leaf = 10;
  double glar_gate = 0.02;
  double advise_gate = 0.02;
  std::vector<double> tstars = default_tstar_grid();
  std::optional<UtilityMatrix> utility;  // replaces the t* grid when set
  double fit_fraction = 0.5;
  std::uint64_t seed = 0;

  std::vector<UtilityMatrix> utilities() const {
    if (utility) return {*utility};
    std::vector<UtilityMatrix> out;
    for (double t : tstars) out.push_back(utility_matrix_from_tstar(t));
    return out;
  }

  void validate() const {
    if (bins == 0) throw Error(ErrorCode::NonPositiveBins, "--bins must be positive");
    if (max_leaves == 0) throw Error(ErrorCode::NonPositiveBins, "--max-leaves must be positive");
    if (min_leaf == 0) throw Error(ErrorCode::NonPositiveBins, "minimum leaf size must be positive");
    if (!(fit_fraction > 0.0 && fit_fraction < 1.0)) throw Error(ErrorCode::InvalidSplit, "fit fraction must lie in (0, 1)");
    if (!utility && tstars.empty()) throw Error(ErrorCode::ThresholdOutOfRange, "empty t* list");
    for (const auto& u : utilities()) optimal_threshold(u);
  }
};

inline void to_json(nlohmann::json& j, const RunConfig& c) {
  j = {{"input", c.input},
       {"out", c.out},
       {"bins", c.bins},
       {"max_leaves", c.max_leaves},
       {"min_leaf", c.min_leaf},
       {"glar_gate", c.glar_gate},
       {"advise_gate", c.advise_gate},
       {"tstar", c.tstars},
       {"utility", c.utility ? nlohmann::json{c.utility->u00, c.utility->u01, c.utility->u10, c.utility->u11}
                             : nlohmann::json(nullptr)},
       {"fit_fraction", c.fit_fraction},
       {"seed", c.seed}};
}

/// Everything estimated on one evaluation set.
struct Diagnosis {
  EqualMassBinning binning;
  CalibrationCurveEstimate curve;
  std::optional<GroupingLossEstimate> gl;  // absent without features
  std::vector<RegretReport> reports;       // one per utility, decisions at the utility's t*
  MetricsReport metrics;
};

/// Bins are fitted on the evaluation scores. When `tree_fit` is given and has
/// features, the partition is grown on it and the grouping loss is estimated
/// on `eval`; otherwise the grouping terms are zero. Each report uses decision
/// threshold `thresholds[i]` when provided, else the utility's t*.
inline Diagnosis diagnose(const ScoredDataset& eval, const ScoredDataset* tree_fit, const RunConfig& cfg,
                          const std::vector<UtilityMatrix>& us, const std::vector<double>& thresholds = {}) {
  Diagnosis d;
  const auto scores = eval.scores();
  d.binning = fit_equal_mass_bins(scores, cfg.bins);
  d.curve = estimate_calibration_curve(eval, d.binning);
  if (tree_fit != nullptr && tree_fit->feature_dim() > 0 && !tree_fit->empty()) {
    const auto part = fit_partition(*tree_fit, d.binning, PartitionOptions{cfg.max_leaves, cfg.min_leaf});
    d.gl = estimate_gl(eval, d.binning, part);
  }
  for (std::size_t i = 0; i < us.size(); ++i) {
    const double t = i < thresholds.size() ? thresholds[i] : optimal_threshold(us[i]);
    d.reports.push_back(d.gl ? regret_report(eval, *d.gl, d.curve, us[i], t) : regret_report(eval, d.curve, us[i], t));
  }
  d.metrics = baseline_metrics(eval, d.binning, us.size() == 1 ? optimal_threshold(us.front()) : 0.5);
  return d;
}

/// Diagnosis of a whole dataset. With features, a `fit_fraction` share grows
/// the partition and the remainder is evaluated; without features all rows
/// are evaluated.
struct ReportRun {
  std::size_t n_total = 0;
  std::size_t n_eval = 0;
  std::size_t n_tree_fit = 0;
  Diagnosis diagnosis;
};

inline ReportRun run_report(const ScoredDataset& ds, const RunConfig& cfg) {
  validate(ds);
  ReportRun run;
  run.n_total = ds.size();
  const auto us = cfg.utilities();
  if (ds.feature_dim() > 0) {
    const auto s = split(ds, SplitSpec{cfg.fit_fraction, 1.0 - cfg.fit_fraction, cfg.seed, false});
    run.n_eval = s.eval.size();
    run.n_tree_fit = s.fit.size();
    run.diagnosis = diagnose(s.eval, &s.fit, cfg, us);
  } else {
    run.n_eval = ds.size();
    run.diagnosis = diagnose(ds, nullptr, cfg, us);
  }
  return run;
}

inline void to_json(nlohmann::json& j, const Diagnosis& d) {
  j = {{"binning", d.binning},
       {"grouping_loss", d.gl ? nlohmann::json(d.gl->total()) : nlohmann::json(nullptr)},
       {"baseline_metrics", d.metrics},
       {"reports", d.reports}};
}

enum class Method { Isotonic, Platt, Histogram, Threshold, Glar, Logistic };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::Isotonic: return "isotonic";
    case Method::Platt: return "platt";
    case Method::Histogram: return "histogram";
    case Method::Threshold: return "threshold";
    case Method::Glar: return "glar";
    case Method::Logistic: return "logistic";
  }
  return "unknown";
}

inline Method parse_method(const std::string& s) {
  for (auto m : {Method::Isotonic, Method::Platt, Method::Histogram, Method::Threshold, Method::Glar, Method::Logistic})
    if (to_string(m) == s) return m;
  throw Error(ErrorCode::InvalidConfig, "unknown method '" + s + "'");
}

inline bool needs_features(Method m) { return m == Method::Glar || m == Method::Logistic; }

/// Fit/eval split used by the post-training protocol. The fit part is split
/// again into two halves for methods that need an honest second fold.
struct PosttrainFolds {
  ScoredDataset fit, fit1, fit2, eval;
};

inline PosttrainFolds make_folds(const ScoredDataset& ds, const RunConfig& cfg) {
  const auto s = split(ds, SplitSpec{cfg.fit_fraction, 1.0 - cfg.fit_fraction, cfg.seed, true});
  return {s.fit, s.fit1, s.fit2, s.eval};
}

struct MethodOutcome {
  Method method = Method::Isotonic;
  std::vector<double> t_star;
  std::vector<double> eu_before;
  std::vector<double> eu_after;
  std::vector<double> gain;
  // Corrected evaluation scores. Methods that do not depend on t* have one
  // column; GLAR has one per utility. The threshold method keeps the scores
  // and records per-utility thresholds instead.
  std::vector<std::vector<double>> corrected;
  std::vector<std::vector<double>> corrected_fit;  // same layout, on the fit fold
  std::vector<double> thresholds;
  std::vector<bool> glar_gate_open;
};

/// Fits `method` on the fit folds and measures the empirical utility gain on
/// the evaluation fold for every utility.
inline MethodOutcome run_method(Method method, const PosttrainFolds& folds, const RunConfig& cfg,
                                const std::vector<UtilityMatrix>& us) {
  if (needs_features(method) && folds.fit.feature_dim() == 0) {
    throw Error(ErrorCode::NoFeatures, to_string(method) + " needs feature columns");
  }
  MethodOutcome out;
  out.method = method;
  const auto fit_scores = folds.fit.scores();
  const auto fit_labels = folds.fit.labels();

  auto record = [&](std::size_t i, double eu_after) {
    const double ts = optimal_threshold(us[i]);
    const double before = empirical_eu(folds.eval, us[i], ThresholdRule{ts});
    out.t_star.push_back(ts);
    out.eu_before.push_back(before);
    out.eu_after.push_back(eu_after);
    out.gain.push_back(eu_after - before);
  };

  auto global = [&](const RecalibrationMap& map) {
    const auto corrected = apply(map, folds.eval);
    out.corrected.push_back(corrected.scores());
    out.corrected_fit.push_back(apply(map, folds.fit).scores());
    for (std::size_t i = 0; i < us.size(); ++i) record(i, empirical_eu(corrected, us[i], ThresholdRule{optimal_threshold(us[i])}));
  };

  switch (method) {
    case Method::Isotonic: global(isotonic_fit(fit_scores, fit_labels)); break;
    case Method::Platt: global(platt_fit(fit_scores, fit_labels).map); break;
    case Method::Histogram: global(histogram_binning_fit(fit_scores, fit_labels, cfg.bins)); break;
    case Method::Logistic: global(logistic_refit(folds.fit)); break;
    case Method::Threshold: {
      const auto curve = isotonic_fit(fit_scores, fit_labels);
      out.corrected.push_back(folds.eval.scores());
      out.corrected_fit.push_back(folds.fit.scores());
      for (std::size_t i = 0; i < us.size(); ++i) {
        const auto adj = adjust_threshold(curve, optimal_threshold(us[i]));
        out.thresholds.push_back(adj.threshold);
        record(i, empirical_eu(folds.eval, us[i], ThresholdRule{adj.threshold}));
      }
      break;
    }
    case Method::Glar: {
      const auto b = fit_equal_mass_bins(fit_scores, cfg.bins);
      GlarOptions opt;
      opt.partition = PartitionOptions{cfg.max_leaves, cfg.min_leaf};
      opt.gate = cfg.glar_gate;
      for (std::size_t i = 0; i < us.size(); ++i) {
        const auto map = glar_fit(folds.fit1, folds.fit2, b, us[i], opt);
        const auto corrected = glar_apply(map, folds.eval);
        out.corrected.push_back(corrected.scores());
        out.corrected_fit.push_back(glar_apply(map, folds.fit).scores());
        out.glar_gate_open.push_back(map.gate_open);
        record(i, empirical_eu(corrected, us[i], ThresholdRule{optimal_threshold(us[i])}));
      }
      break;
    }
  }
  return out;
}

inline void to_json(nlohmann::json& j, const MethodOutcome& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < m.t_star.size(); ++i) {
    nlohmann::json row = {{"t_star", m.t_star[i]}, {"eu_before", m.eu_before[i]}, {"eu_after", m.eu_after[i]}, {"gain", m.gain[i]}};
    if (i < m.thresholds.size()) row["threshold"] = m.thresholds[i];
    if (i < m.glar_gate_open.size()) row["gate_open"] = static_cast<bool>(m.glar_gate_open[i]);
    rows.push_back(row);
  }
  j = {{"method", to_string(m.method)}, {"per_tstar", rows}};
}

inline double pearson_r2(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw Error(ErrorCode::LengthMismatch, "correlation inputs differ in length");
  const auto n = static_cast<double>(x.size());
  if (x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sxy * sxy / (sxx * syy);
}

// ---------------------------------------------------------------------------
// Synthetic suites

struct SuiteRun {
  std::string label;
  OracleDistribution oracle;
  double t_star = 0.5;
  std::size_t n = 20000;
  std::uint64_t seed = 0;
};

struct Suite {
  std::string name;
  std::vector<Method> methods{Method::Isotonic};
  std::vector<SuiteRun> runs;
};

/// Calibrated random oracle whose scores are pushed through a random
/// logit-affine distortion σ(a·logit(c) + b): the injected miscalibration.
inline OracleDistribution distorted_oracle(std::uint64_t seed, std::size_t levels, std::size_t atoms_per_level,
                                           double max_spread, double slope_lo, double slope_hi, double bias_abs) {
  RandomOracleOptions opt;
  opt.calibrated = true;
  opt.max_spread = max_spread;
  auto base = random_oracle(seed, levels, atoms_per_level, opt);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> slope(slope_lo, slope_hi), bias(-bias_abs, bias_abs);
  const double a = slope(rng), b = bias(rng);
  return base.with_scores([&](const Atom& at) {
    const double c = std::clamp(at.f, 1e-6, 1.0 - 1e-6);
    return detail::sigmoid(a * std::log(c / (1.0 - c)) + b);
  });
}

/// Suite JSON:
///   {"name": ..., "methods": ["isotonic", ...], "generators": [{
///      "kind": "distorted" | "oracle", "count": k, "seed": s0, "n": n,
///      "tstars": [...], "levels": L, "atoms_per_level": A, "max_spread": m,
///      "slope": [lo, hi], "bias": b, "oracle": {...}}]}
/// Run i of a generator uses seed s0 + i and t* = tstars[i mod |tstars|].
inline Suite load_suite(const nlohmann::json& j) {
  Suite s;
  s.name = j.value("name", "suite");
  if (j.contains("methods")) {
    s.methods.clear();
    for (const auto& m : j.at("methods")) s.methods.push_back(parse_method(m.get<std::string>()));
  }
  for (const auto& g : j.at("generators")) {
    const auto kind = g.value("kind", "distorted");
    const auto count = g.value("count", std::size_t{1});
    const auto seed0 = g.value("seed", std::uint64_t{0});
    const auto n = g.value("n", std::size_t{20000});
    const auto tstars = g.value("tstars", default_tstar_grid());
    if (tstars.empty()) throw Error(ErrorCode::ThresholdOutOfRange, "generator with empty t* list");
    for (std::size_t i = 0; i < count; ++i) {
      SuiteRun run;
      run.seed = seed0 + i;
      run.n = n;
      run.t_star = tstars[i % tstars.size()];
      if (kind == "distorted") {
        const auto slope = g.value("slope", std::vector<double>{0.4, 2.5});
        run.oracle = distorted_oracle(run.seed, g.value("levels", std::size_t{200}), g.value("atoms_per_level", std::size_t{1}),
                                      g.value("max_spread", 0.0), slope.at(0), slope.at(1), g.value("bias", 1.0));
      } else if (kind == "oracle") {
        run.oracle = g.at("oracle").get<OracleDistribution>();
      } else {
        throw Error(ErrorCode::InvalidConfig, "unknown generator kind '" + kind + "'");
      }
      run.label = kind + "-" + std::to_string(run.seed) + "-t" + detail::format_double(run.t_star);
      s.runs.push_back(std::move(run));
    }
  }
  if (s.runs.empty()) throw Error(ErrorCode::InvalidConfig, "suite has no runs");
  if (s.methods.empty()) throw Error(ErrorCode::InvalidConfig, "suite has no methods");
  return s;
}

struct SweepRow {
  std::string label;
  std::uint64_t seed = 0;
  double t_star = 0.5;
  std::map<std::string, double> estimators;  // plug-in estimates, baselines and exact values
  std::map<std::string, double> gains;       // per method
};

struct SweepResult {
  std::vector<SweepRow> rows;
  struct Cell {
    std::string estimator, method;
    double r2 = 0.0;
  };
  std::vector<Cell> table;
};

inline SweepRow sweep_one(const SuiteRun& run, const std::vector<Method>& methods, const RunConfig& cfg) {
  const auto u = utility_matrix_from_tstar(run.t_star);
  const auto ds = sample(run.oracle, run.n, run.seed);
  RunConfig local = cfg;
  local.seed = run.seed;
  const auto folds = make_folds(ds, local);
  const auto diag = diagnose(folds.eval, &folds.fit, local, {u});
  const auto& rep = diag.reports.front();
  const auto exact = exact_regrets(run.oracle, u, run.t_star);

  SweepRow row;
  row.label = run.label;
  row.seed = run.seed;
  row.t_star = run.t_star;
  row.estimators = {{"rcl_hat", rep.rcl_hat},
                    {"rgl_hat", rep.rgl_hat},
                    {"r_hat", rep.r_hat},
                    {"ece", diag.metrics.calibration.ece},
                    {"mce", diag.metrics.calibration.mce},
                    {"rmsce", diag.metrics.calibration.rmsce},
                    {"brier", diag.metrics.brier},
                    {"exact_rcl", exact.rcl},
                    {"exact_rgl", exact.rgl},
                    {"exact_r", exact.r}};
  for (auto m : methods) row.gains[to_string(m)] = run_method(m, folds, local, {u}).gain.front();
  return row;
}

inline SweepResult run_sweep(const Suite& suite, const RunConfig& cfg) {
  SweepResult res;
  res.rows.resize(suite.runs.size());
  detail::parallel_for(suite.runs.size(), [&](std::size_t i) { res.rows[i] = sweep_one(suite.runs[i], suite.methods, cfg); });
  if (!res.rows.empty()) {
    for (const auto& [est, _] : res.rows.front().estimators) {
      for (auto m : suite.methods) {
        std::vector<double> x, y;
        for (const auto& r : res.rows) {
          x.push_back(r.estimators.at(est));
          y.push_back(r.gains.at(to_string(m)));
        }
        res.table.push_back({est, to_string(m), pearson_r2(x, y)});
      }
    }
  }
  return res;
}

inline double sweep_r2(const SweepResult& res, const std::string& estimator, const std::string& method) {
  for (const auto& c : res.table)
    if (c.estimator == estimator && c.method == method) return c.r2;
  throw Error(ErrorCode::EmptyInput, "no correlation for " + estimator + " / " + method);
}

}  // namespace regretcal
