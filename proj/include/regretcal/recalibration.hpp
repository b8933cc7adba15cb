#pragma once

// Post-training score maps: isotonic regression, Platt scaling, histogram
// binning, threshold adjustment and an L2-regularized logistic refit on
// features.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "regretcal/binning.hpp"
#include "regretcal/dataset.hpp"
#include "regretcal/error.hpp"

namespace regretcal {

namespace detail {

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
inline double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

inline void check_pair(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw Error(ErrorCode::LengthMismatch, "scores and labels differ in length");
  if (scores.empty()) throw Error(ErrorCode::EmptyInput, "");
}

inline void require_both_classes(std::span<const int> labels) {
  const auto pos = std::count(labels.begin(), labels.end(), 1);
  if (pos == 0 || pos == static_cast<std::ptrdiff_t>(labels.size())) {
    throw Error(ErrorCode::SingleClass, "both labels must be present");
  }
}

}  // namespace detail

/// Right-continuous step function: value(s) = values[i] for the last
/// breakpoint i with breakpoints[i] <= s, and values[0] below the first knot.
struct MonotoneStepMap {
  std::vector<double> breakpoints;
  std::vector<double> values;

  double operator()(double score) const {
    auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), score);
    if (it == breakpoints.begin()) return values.front();
    return values[static_cast<std::size_t>(it - breakpoints.begin()) - 1];
  }

  bool is_monotone() const {
    for (std::size_t i = 1; i < values.size(); ++i)
      if (values[i] < values[i - 1]) return false;
    return true;
  }

  static MonotoneStepMap identity_on(std::span<const double> knots) {
    MonotoneStepMap m;
    m.breakpoints.assign(knots.begin(), knots.end());
    m.values.assign(knots.begin(), knots.end());
    return m;
  }

  static MonotoneStepMap constant(double value) { return MonotoneStepMap{{0.0}, {value}}; }
};

struct SigmoidMap {
  double slope = 1.0;
  double intercept = 0.0;

  double operator()(double score) const { return detail::sigmoid(slope * score + intercept); }
};

/// Per-bin mean labels; need not be monotone.
struct HistogramMap {
  EqualMassBinning binning;
  std::vector<double> values;

  double operator()(double score) const { return values[binning.bin_of(score)]; }
};

struct LinearLogitModel {
  std::vector<double> weights;
  double bias = 0.0;

  double operator()(std::span<const double> x) const {
    double z = bias;
    for (std::size_t j = 0; j < weights.size(); ++j) z += weights[j] * x[j];
    return detail::sigmoid(z);
  }
};

using RecalibrationMap = std::variant<MonotoneStepMap, SigmoidMap, HistogramMap, LinearLogitModel>;

/// Isotonic regression by pool-adjacent-violators. Tied scores are first
/// pooled into one weighted point so the fit is a function of the score.
inline MonotoneStepMap isotonic_fit(std::span<const double> scores, std::span<const int> labels) {
  detail::check_pair(scores, labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] < scores[b];
    return labels[a] < labels[b];
  });

  struct Block {
    double start;  // smallest score in the block
    double sum;
    double weight;
  };
  std::vector<Block> blocks;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    Block b{s, 0.0, 0.0};
    for (; i < order.size() && scores[order[i]] == s; ++i) {
      b.sum += labels[order[i]];
      b.weight += 1.0;
    }
    blocks.push_back(b);
    // pool while the previous block's mean exceeds the new one
    while (blocks.size() > 1) {
      auto& last = blocks[blocks.size() - 1];
      auto& prev = blocks[blocks.size() - 2];
      if (prev.sum * last.weight <= last.sum * prev.weight) break;
      prev.sum += last.sum;
      prev.weight += last.weight;
      blocks.pop_back();
    }
  }
  MonotoneStepMap out;
  for (const auto& b : blocks) {
    out.breakpoints.push_back(b.start);
    out.values.push_back(b.sum / b.weight);
  }
  return out;
}

struct PlattFit {
  SigmoidMap map;
  bool converged = false;
  int iterations = 0;
  double gradient_norm = 0.0;
};

/// Maximum-likelihood sigmoid on the raw score with {0,1} targets. Newton
/// steps with halving; stops when the gradient norm drops below 1e-8 or after
/// 100 iterations. When the classes are (quasi-)separable along the score the
/// likelihood has no maximizer and the fit runs to the cap, reporting
/// `converged = false`.
inline PlattFit platt_fit(std::span<const double> scores, std::span<const int> labels) {
  detail::check_pair(scores, labels);
  detail::require_both_classes(labels);
  constexpr int max_iter = 100;
  constexpr double grad_tol = 1e-8;

  double max_neg = -std::numeric_limits<double>::infinity();
  double min_pos = std::numeric_limits<double>::infinity();
  double max_pos = -std::numeric_limits<double>::infinity();
  double min_neg = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] == 1) {
      min_pos = std::min(min_pos, scores[i]);
      max_pos = std::max(max_pos, scores[i]);
    } else {
      max_neg = std::max(max_neg, scores[i]);
      min_neg = std::min(min_neg, scores[i]);
    }
  }
  const bool separable = max_neg <= min_pos || max_pos <= min_neg;

  auto neg_loglik = [&](double a, double b) {
    double nll = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const double z = a * scores[i] + b;
      nll += detail::softplus(z) - labels[i] * z;
    }
    return nll;
  };

  double a = 0.0;
  const double rate = static_cast<double>(std::count(labels.begin(), labels.end(), 1)) /
                      static_cast<double>(labels.size());
  double b = std::log(rate / (1.0 - rate));
  double nll = neg_loglik(a, b);

  PlattFit out;
  for (int it = 0; it < max_iter; ++it) {
    double ga = 0.0, gb = 0.0, haa = 0.0, hab = 0.0, hbb = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const double s = scores[i];
      const double p = detail::sigmoid(a * s + b);
      const double r = p - labels[i];
      const double w = p * (1.0 - p);
      ga += r * s;
      gb += r;
      haa += w * s * s;
      hab += w * s;
      hbb += w;
    }
    out.gradient_norm = std::hypot(ga, gb);
    out.iterations = it;
    if (out.gradient_norm < grad_tol && !separable) {
      out.converged = true;
      break;
    }
    double da, db;
    const double det = haa * hbb - hab * hab;
    if (det > 1e-300 && std::isfinite(det)) {
      da = (hbb * ga - hab * gb) / det;
      db = (haa * gb - hab * ga) / det;
    } else {
      da = ga;
      db = gb;
    }
    double step = 1.0;
    bool improved = false;
    for (int h = 0; h < 60; ++h) {
      const double na = a - step * da;
      const double nb = b - step * db;
      const double cand = neg_loglik(na, nb);
      if (std::isfinite(cand) && cand <= nll) {
        improved = cand < nll || (na == a && nb == b);
        a = na;
        b = nb;
        nll = cand;
        break;
      }
      step *= 0.5;
    }
    out.iterations = it + 1;
    if (!improved) break;
  }
  out.map = SigmoidMap{a, b};
  return out;
}

inline HistogramMap histogram_binning_fit(std::span<const double> scores, std::span<const int> labels,
                                          std::size_t n_bins) {
  detail::check_pair(scores, labels);
  HistogramMap out;
  out.binning = fit_equal_mass_bins(scores, n_bins);
  std::vector<double> pos(out.binning.n_bins(), 0.0), cnt(out.binning.n_bins(), 0.0);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto k = out.binning.bin_of(scores[i]);
    pos[k] += labels[i];
    cnt[k] += 1.0;
  }
  out.values.resize(out.binning.n_bins());
  for (std::size_t k = 0; k < out.values.size(); ++k) out.values[k] = pos[k] / cnt[k];
  return out;
}

struct ThresholdAdjustment {
  double threshold = 0.0;
  bool reaches = true;  // false: the curve never reaches t*, decisions are constant 0
};

/// Smallest score t with curve(t) >= t*. When the curve stays below t* the
/// returned threshold is the double just above 1, so no score in [0, 1]
/// decides 1.
inline ThresholdAdjustment adjust_threshold(const MonotoneStepMap& curve, double t_star) {
  if (!curve.is_monotone()) throw Error(ErrorCode::IncompatibleMap, "calibration curve is not monotone");
  if (curve.values.front() >= t_star) return {0.0, true};
  for (std::size_t i = 1; i < curve.values.size(); ++i) {
    if (curve.values[i] >= t_star) return {curve.breakpoints[i], true};
  }
  return {std::nextafter(1.0, 2.0), false};
}

struct LogisticOptions {
  double l2 = 1.0;
  int max_iter = 100;
  double tol = 1e-10;
};

/// Minimizes Σ logloss + (l2/2)·‖w‖² by Newton's method; the bias is not
/// penalized.
inline LinearLogitModel logistic_refit(const ScoredDataset& ds, const LogisticOptions& opt = {}) {
  const std::size_t d = ds.feature_dim();
  if (d == 0) throw Error(ErrorCode::NoFeatures, "logistic refit needs features");
  if (ds.empty()) throw Error(ErrorCode::EmptyInput, "");
  const auto labels = ds.labels();
  detail::require_both_classes(labels);

  const auto n = static_cast<Eigen::Index>(ds.size());
  const auto dim = static_cast<Eigen::Index>(d + 1);
  Eigen::MatrixXd x(n, dim);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = ds[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(d); ++j) x(i, j) = s.features[static_cast<std::size_t>(j)];
    x(i, dim - 1) = 1.0;
    y(i) = s.label;
  }
  Eigen::VectorXd penalty = Eigen::VectorXd::Constant(dim, opt.l2);
  penalty(dim - 1) = 0.0;

  auto objective = [&](const Eigen::VectorXd& beta) {
    const Eigen::VectorXd z = x * beta;
    double f = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) f += detail::softplus(z(i)) - y(i) * z(i);
    return f + 0.5 * beta.cwiseProduct(penalty).dot(beta);
  };

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(dim);
  const double rate = y.mean();
  beta(dim - 1) = std::log(rate / (1.0 - rate));
  double f = objective(beta);
  for (int it = 0; it < opt.max_iter; ++it) {
    const Eigen::VectorXd z = x * beta;
    Eigen::VectorXd p(n), w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      p(i) = detail::sigmoid(z(i));
      w(i) = std::max(p(i) * (1.0 - p(i)), 1e-12);
    }
    const Eigen::VectorXd grad = x.transpose() * (p - y) + penalty.cwiseProduct(beta);
    if (grad.norm() < opt.tol * static_cast<double>(n)) break;
    Eigen::MatrixXd hess = x.transpose() * w.asDiagonal() * x;
    hess.diagonal() += penalty;
    hess.diagonal().array() += 1e-12;
    const Eigen::VectorXd delta = hess.ldlt().solve(grad);
    double step = 1.0;
    bool moved = false;
    for (int h = 0; h < 40; ++h) {
      const Eigen::VectorXd cand = beta - step * delta;
      const double fc = objective(cand);
      if (std::isfinite(fc) && fc <= f) {
        moved = fc < f;
        beta = cand;
        f = fc;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
  }
  LinearLogitModel out;
  out.weights.assign(beta.data(), beta.data() + d);
  out.bias = beta(dim - 1);
  return out;
}

/// Replaces scores with the map's output; labels, features and provenance
/// are preserved.
inline ScoredDataset apply(const RecalibrationMap& map, const ScoredDataset& ds) {
  std::vector<double> out(ds.size());
  std::visit(
      [&](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, LinearLogitModel>) {
          if (ds.feature_dim() != m.weights.size()) {
            throw Error(ErrorCode::IncompatibleMap, "linear model expects " + std::to_string(m.weights.size()) +
                                                        " features, dataset has " + std::to_string(ds.feature_dim()));
          }
          for (std::size_t i = 0; i < ds.size(); ++i) out[i] = m(ds[i].features);
        } else {
          for (std::size_t i = 0; i < ds.size(); ++i) out[i] = m(ds[i].score);
        }
      },
      map);
  for (double& v : out) v = std::clamp(v, 0.0, 1.0);
  return ds.with_scores(out);
}

inline void to_json(nlohmann::json& j, const RecalibrationMap& map) {
  std::visit(
      [&](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, MonotoneStepMap>) {
          j = {{"kind", "isotonic"}, {"breakpoints", m.breakpoints}, {"values", m.values}};
        } else if constexpr (std::is_same_v<M, SigmoidMap>) {
          j = {{"kind", "platt"}, {"slope", m.slope}, {"intercept", m.intercept}};
        } else if constexpr (std::is_same_v<M, HistogramMap>) {
          j = {{"kind", "histogram"}, {"binning", m.binning}, {"values", m.values}};
        } else {
          j = {{"kind", "linear"}, {"weights", m.weights}, {"bias", m.bias}};
        }
      },
      map);
}

inline void from_json(const nlohmann::json& j, RecalibrationMap& map) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "isotonic") {
    map = MonotoneStepMap{j.at("breakpoints").get<std::vector<double>>(), j.at("values").get<std::vector<double>>()};
  } else if (kind == "platt") {
    map = SigmoidMap{j.at("slope").get<double>(), j.at("intercept").get<double>()};
  } else if (kind == "histogram") {
    map = HistogramMap{j.at("binning").get<EqualMassBinning>(), j.at("values").get<std::vector<double>>()};
  } else if (kind == "linear") {
    map = LinearLogitModel{j.at("weights").get<std::vector<double>>(), j.at("bias").get<double>()};
  } else {
    throw Error(ErrorCode::IncompatibleMap, "unknown map kind '" + kind + "'");
  }
}

}  // namespace regretcal
