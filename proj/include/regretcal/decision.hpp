#pragma once

#include <array>
#include <string>

#include "regretcal/dataset.hpp"
#include "regretcal/detail/text.hpp"
#include "regretcal/error.hpp"

namespace regretcal {

/// Payoff table indexed as U[decision][outcome].
struct UtilityMatrix {
  double u00 = 1.0;
  double u01 = 0.0;
  double u10 = 0.0;
  double u11 = 1.0;

  double operator()(int decision, int outcome) const {
    if (decision == 0) return outcome == 0 ? u00 : u01;
    return outcome == 0 ? u10 : u11;
  }

  double u_delta() const { return u00 - u10 + u11 - u01; }
};

inline double optimal_threshold(const UtilityMatrix& u) {
  const double delta = u.u_delta();
  if (!(delta > 0.0)) {
    throw Error(ErrorCode::DegenerateUtility, "u00 - u10 + u11 - u01 = " + detail::format_double(delta));
  }
  const double t = (u.u00 - u.u10) / delta;
  if (!(t >= 0.0 && t <= 1.0)) throw Error(ErrorCode::ThresholdOutOfRange, detail::format_double(t));
  return t;
}

/// [[1, 0], [0, 1/t - 1]], whose optimal threshold is t.
inline UtilityMatrix utility_matrix_from_tstar(double t_star) {
  if (!(t_star > 0.0 && t_star < 1.0)) throw Error(ErrorCode::ThresholdAtBoundary, detail::format_double(t_star));
  return UtilityMatrix{1.0, 0.0, 0.0, 1.0 / t_star - 1.0};
}

/// Diagonal matrix with prescribed optimal threshold and scale u_delta.
inline UtilityMatrix utility_matrix_from_tstar(double t_star, double u_delta) {
  if (!(t_star >= 0.0 && t_star <= 1.0)) throw Error(ErrorCode::ThresholdOutOfRange, detail::format_double(t_star));
  if (!(u_delta > 0.0)) throw Error(ErrorCode::DegenerateUtility, detail::format_double(u_delta));
  return UtilityMatrix{t_star * u_delta, 0.0, 0.0, (1.0 - t_star) * u_delta};
}

struct ThresholdRule {
  double threshold = 0.5;

  // Ties decide 1.
  int decide(double score) const { return score >= threshold ? 1 : 0; }
};

inline double empirical_eu(const ScoredDataset& ds, const UtilityMatrix& u, const ThresholdRule& rule) {
  if (ds.empty()) throw Error(ErrorCode::EmptyDataset, "");
  double total = 0.0;
  for (const auto& s : ds.samples()) total += u(rule.decide(s.score), s.label);
  return total / static_cast<double>(ds.size());
}

/// Expected utility of a fixed decision at a point whose positive-class
/// probability is `true_prob`, written as UΔ·δ·(f* − t*) + f*·u01 + (1 − f*)·u00.
inline double pointwise_eu_exact(double true_prob, const UtilityMatrix& u, int decision) {
  const double t = optimal_threshold(u);
  return u.u_delta() * decision * (true_prob - t) + true_prob * u.u01 + (1.0 - true_prob) * u.u00;
}

/// Direct expectation form: f*·U[δ,1] + (1 − f*)·U[δ,0].
inline double pointwise_eu_direct(double true_prob, const UtilityMatrix& u, int decision) {
  return true_prob * u(decision, 1) + (1.0 - true_prob) * u(decision, 0);
}

}  // namespace regretcal
