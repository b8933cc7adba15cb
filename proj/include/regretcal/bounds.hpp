#pragma once

// Per-bin regret formulas shared by the estimators and the exact oracles.
// All functions take the calibrated probability c of a bin, its grouping loss
// (variance of the true probabilities inside the bin), the optimal threshold
// t* and the utility scale UΔ.

#include <algorithm>
#include <cmath>

namespace regretcal {

/// Largest grouping loss compatible with zero grouping regret.
inline double v_min(double c, double t_star) {
  return c >= t_star ? (1.0 - c) * (c - t_star) : c * (t_star - c);
}

/// Bhatia-Davis cap on the variance of a [0, 1] variable with mean c.
inline double v_max(double c) { return c * (1.0 - c); }

/// Calibration regret of a bin whose samples are decided `score_decision`.
inline double rcl_bin(double c, int score_decision, double t_star, double u_delta) {
  const int calibrated_decision = c >= t_star ? 1 : 0;
  return calibrated_decision != score_decision ? u_delta * std::abs(c - t_star) : 0.0;
}

inline double lgl_bin(double c, double gl, double t_star, double u_delta) {
  return u_delta * std::max(gl - v_min(c, t_star), 0.0);
}

/// (UΔ/2)(√(GL + a²) − |a|) with a = c − t*, evaluated as
/// (UΔ/2)·GL / (√(GL + a²) + |a|) to avoid cancellation when GL ≪ a².
inline double ugl_bin(double c, double gl, double t_star, double u_delta) {
  if (!(gl > 0.0)) return 0.0;
  const double a = std::abs(c - t_star);
  return 0.5 * u_delta * gl / (std::sqrt(gl + a * a) + a);
}

/// Midpoint of the two bounds.
inline double rgl_mid(double c, double gl, double t_star, double u_delta) {
  return 0.5 * (lgl_bin(c, gl, t_star, u_delta) + ugl_bin(c, gl, t_star, u_delta));
}

}  // namespace regretcal
