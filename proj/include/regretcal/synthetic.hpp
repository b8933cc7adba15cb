#pragma once

// Discrete oracle distributions over (X, Y) with known true probabilities,
// closed-form regrets on them, bound-attaining constructions, exhaustive rule
// search, and seeded samplers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <vector>

#include <nlohmann/json.hpp>

#include "regretcal/bounds.hpp"
#include "regretcal/dataset.hpp"
#include "regretcal/decision.hpp"
#include "regretcal/detail/text.hpp"
#include "regretcal/error.hpp"

namespace regretcal {

struct Atom {
  double z = 1.0;      // probability mass
  double fstar = 0.5;  // P(Y = 1 | X = x)
  double f = 0.5;      // classifier score
  int x = 0;           // feature tag
};

class OracleDistribution {
 public:
  OracleDistribution() = default;
  explicit OracleDistribution(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {
    if (atoms_.empty()) throw Error(ErrorCode::InvalidOracle, "no atoms");
    double total = 0.0;
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
      const auto& a = atoms_[i];
      if (!(a.z >= 0.0 && a.z <= 1.0) || !(a.fstar >= 0.0 && a.fstar <= 1.0) || !(a.f >= 0.0 && a.f <= 1.0)) {
        throw Error(ErrorCode::InvalidOracle, "atom " + std::to_string(i) + " has a value outside [0, 1]");
      }
      total += a.z;
    }
    if (std::abs(total - 1.0) > 1e-12) {
      throw Error(ErrorCode::InvalidOracle, "masses sum to " + detail::format_double(total));
    }
  }

  const std::vector<Atom>& atoms() const noexcept { return atoms_; }
  std::size_t size() const noexcept { return atoms_.size(); }

  /// Distinct score values in increasing order.
  std::vector<double> levels() const {
    std::vector<double> out;
    for (const auto& a : atoms_) out.push_back(a.f);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  std::size_t level_of(double f) const {
    const auto lv = levels();
    return static_cast<std::size_t>(std::lower_bound(lv.begin(), lv.end(), f) - lv.begin());
  }

  /// Same atoms with scores mapped through `g`.
  OracleDistribution with_scores(const std::function<double(const Atom&)>& g) const {
    auto copy = atoms_;
    for (auto& a : copy) a.f = g(a);
    return OracleDistribution(std::move(copy));
  }

 private:
  std::vector<Atom> atoms_;
};

struct OracleLevelStats {
  double f = 0.0;
  double mass = 0.0;
  double c = 0.0;   // E[f* | f]
  double gl = 0.0;  // Var(f* | f)
  double w = 0.0;   // P(f* ≥ t* | f)
  double c_plus = std::numeric_limits<double>::quiet_NaN();   // E[f* | f, f* ≥ t*]
  double c_minus = std::numeric_limits<double>::quiet_NaN();  // E[f* | f, f* < t*]
};

inline std::vector<OracleLevelStats> exact_stats(const OracleDistribution& o, double t_star) {
  const auto lv = o.levels();
  std::vector<OracleLevelStats> out(lv.size());
  std::vector<double> mass_plus(lv.size(), 0.0), sum_plus(lv.size(), 0.0), sum_minus(lv.size(), 0.0);
  for (std::size_t k = 0; k < lv.size(); ++k) out[k].f = lv[k];
  for (const auto& a : o.atoms()) {
    const auto k = static_cast<std::size_t>(std::lower_bound(lv.begin(), lv.end(), a.f) - lv.begin());
    out[k].mass += a.z;
    out[k].c += a.z * a.fstar;
    if (a.fstar >= t_star) {
      mass_plus[k] += a.z;
      sum_plus[k] += a.z * a.fstar;
    } else {
      sum_minus[k] += a.z * a.fstar;
    }
  }
  for (std::size_t k = 0; k < lv.size(); ++k) {
    auto& s = out[k];
    if (s.mass > 0.0) {
      s.c /= s.mass;
      s.w = mass_plus[k] / s.mass;
      if (mass_plus[k] > 0.0) s.c_plus = sum_plus[k] / mass_plus[k];
      if (s.mass - mass_plus[k] > 0.0) s.c_minus = sum_minus[k] / (s.mass - mass_plus[k]);
    }
  }
  // second pass for the variance about the level mean
  for (const auto& a : o.atoms()) {
    const auto k = static_cast<std::size_t>(std::lower_bound(lv.begin(), lv.end(), a.f) - lv.begin());
    if (out[k].mass > 0.0) out[k].gl += a.z * (a.fstar - out[k].c) * (a.fstar - out[k].c) / out[k].mass;
  }
  return out;
}

/// Marginal grouping loss E[Var(f* | f)].
inline double exact_grouping_loss(const OracleDistribution& o) {
  double total = 0.0;
  for (const auto& s : exact_stats(o, 0.5)) total += s.mass * s.gl;
  return total;
}

struct OracleLevelRegret {
  OracleLevelStats stats;
  double rcl = 0.0;
  double rgl = 0.0;         // reformulated closed form
  double rgl_direct = 0.0;  // UΔ·E[(1{f* ≥ t*} − 1{c ≥ t*})(f* − t*) | f]
  double r = 0.0;           // EU(oracle | f) − EU(naive | f)
  double lgl = 0.0;
  double ugl = 0.0;
};

struct ExactRegrets {
  double t_star = 0.5;
  double threshold = 0.5;
  double u_delta = 1.0;
  std::vector<OracleLevelRegret> levels;
  double rcl = 0.0;
  double rgl = 0.0;
  double r = 0.0;
  double eu_naive = 0.0;         // 1{f ≥ t}
  double eu_recalibrated = 0.0;  // 1{c(f) ≥ t*}
  double eu_oracle = 0.0;        // 1{f* ≥ t*}
};

/// Exact regrets of the rule 1{f ≥ t} under utility `u`.
inline ExactRegrets exact_regrets(const OracleDistribution& o, const UtilityMatrix& u, double t) {
  ExactRegrets out;
  out.t_star = optimal_threshold(u);
  out.threshold = t;
  out.u_delta = u.u_delta();
  const double ts = out.t_star;
  const double ud = out.u_delta;
  const auto stats = exact_stats(o, ts);
  const auto lv = o.levels();
  out.levels.resize(stats.size());
  std::vector<double> eu_naive(stats.size(), 0.0), eu_oracle(stats.size(), 0.0), direct(stats.size(), 0.0);
  for (const auto& a : o.atoms()) {
    const auto k = static_cast<std::size_t>(std::lower_bound(lv.begin(), lv.end(), a.f) - lv.begin());
    const int d_naive = a.f >= t ? 1 : 0;
    const int d_oracle = a.fstar >= ts ? 1 : 0;
    const int d_cal = stats[k].c >= ts ? 1 : 0;
    const double eu_n = a.z * pointwise_eu_direct(a.fstar, u, d_naive);
    const double eu_c = a.z * pointwise_eu_direct(a.fstar, u, d_cal);
    const double eu_o = a.z * pointwise_eu_direct(a.fstar, u, d_oracle);
    eu_naive[k] += eu_n;
    eu_oracle[k] += eu_o;
    direct[k] += a.z * static_cast<double>(d_oracle - d_cal) * (a.fstar - ts);
    out.eu_naive += eu_n;
    out.eu_recalibrated += eu_c;
    out.eu_oracle += eu_o;
  }
  for (std::size_t k = 0; k < stats.size(); ++k) {
    auto& lr = out.levels[k];
    const auto& s = stats[k];
    lr.stats = s;
    if (s.mass <= 0.0) continue;
    lr.rcl = rcl_bin(s.c, s.f >= t ? 1 : 0, ts, ud);
    const double plus_term = s.w > 0.0 ? s.w * (s.c_plus - ts) : 0.0;
    lr.rgl = ud * (plus_term - (s.c >= ts ? s.c - ts : 0.0));
    lr.rgl_direct = ud * direct[k] / s.mass;
    lr.r = (eu_oracle[k] - eu_naive[k]) / s.mass;
    lr.lgl = lgl_bin(s.c, s.gl, ts, ud);
    lr.ugl = ugl_bin(s.c, s.gl, ts, ud);
    out.rcl += s.mass * lr.rcl;
    out.rgl += s.mass * lr.rgl;
  }
  out.r = out.eu_oracle - out.eu_naive;
  return out;
}

/// Expected utility of an arbitrary per-atom decision vector.
inline double exact_eu(const OracleDistribution& o, const UtilityMatrix& u, const std::vector<int>& decisions) {
  if (decisions.size() != o.size()) throw Error(ErrorCode::LengthMismatch, "one decision per atom");
  double eu = 0.0;
  for (std::size_t i = 0; i < o.size(); ++i) eu += o.atoms()[i].z * pointwise_eu_direct(o.atoms()[i].fstar, u, decisions[i]);
  return eu;
}

inline double exact_eu_threshold(const OracleDistribution& o, const UtilityMatrix& u, double t) {
  double eu = 0.0;
  for (const auto& a : o.atoms()) eu += a.z * pointwise_eu_direct(a.fstar, u, a.f >= t ? 1 : 0);
  return eu;
}

enum class BoundKind { Lower, Upper };

struct TightnessSpec {
  double c = 0.5;
  double v = 0.0;
  double t = 0.5;
  BoundKind bound = BoundKind::Lower;
};

namespace detail {

inline void check_admissible(const TightnessSpec& s) {
  if (!(s.c >= 0.0 && s.c <= 1.0)) throw Error(ErrorCode::InadmissibleSpec, "c outside [0, 1]");
  if (!(s.t > 0.0 && s.t < 1.0)) throw Error(ErrorCode::InadmissibleSpec, "t must lie in (0, 1)");
  if (!(s.v >= 0.0) || s.v > v_max(s.c) + 1e-15) {
    throw Error(ErrorCode::InadmissibleSpec,
                "variance " + format_double(s.v) + " exceeds c(1 - c) = " + format_double(v_max(s.c)));
  }
}

// Single-level oracle at score c from (value, mass) pairs. Masses that are
// zero up to rounding are dropped.
inline OracleDistribution level_oracle(double c, std::vector<std::pair<double, double>> atoms) {
  std::vector<Atom> out;
  for (const auto& [value, mass] : atoms) {
    if (mass < -1e-12) throw Error(ErrorCode::InadmissibleSpec, "negative mass " + format_double(mass));
    if (mass > 1e-15) out.push_back(Atom{mass, std::clamp(value, 0.0, 1.0), c, static_cast<int>(out.size())});
  }
  // absorb rounding in the last mass so the total is exactly representable as 1
  double head = 0.0;
  for (std::size_t i = 0; i + 1 < out.size(); ++i) head += out[i].z;
  out.back().z = 1.0 - head;
  return OracleDistribution(std::move(out));
}

}  // namespace detail

/// One-level oracle (score c) with mean c and variance v whose grouping regret
/// equals the lower bound UΔ[v − V_min]+. Supports are {c, t, 0} or {c, t, 1}
/// below V_min and {0, t, 1} above it.
inline OracleDistribution build_lb_tight(const TightnessSpec& s) {
  detail::check_admissible(s);
  const double c = s.c, v = s.v, t = s.t;
  if (v == 0.0) return detail::level_oracle(c, {{c, 1.0}});
  const double vmin = v_min(c, t);
  if (v < vmin) {
    const double ratio = v / vmin;
    const double wc = 1.0 - ratio;
    if (c < t) {
      const double wt = (c / t) * ratio;
      return detail::level_oracle(c, {{c, wc}, {t, wt}, {0.0, 1.0 - wc - wt}});
    }
    const double w1 = ((c - t) / (1.0 - t)) * ratio;
    return detail::level_oracle(c, {{c, wc}, {1.0, w1}, {t, 1.0 - wc - w1}});
  }
  if (c < t) {
    const double w1 = (v - vmin) / (1.0 - t);
    const double wt = (c - w1) / t;
    return detail::level_oracle(c, {{1.0, w1}, {t, wt}, {0.0, 1.0 - wt - w1}});
  }
  const double w0 = (v - vmin) / t;
  const double wt = (1.0 - c - w0) / (1.0 - t);
  return detail::level_oracle(c, {{0.0, w0}, {t, wt}, {1.0, 1.0 - wt - w0}});
}

/// Two-point oracle (score c) with mean c and variance v attaining the upper
/// bound (UΔ/2)(√(v + a²) − |a|), a = c − t. Only t = 1/2 is supported.
inline OracleDistribution build_ub_tight(const TightnessSpec& s) {
  detail::check_admissible(s);
  if (s.t != 0.5) throw Error(ErrorCode::UnsupportedThreshold, "upper-bound construction needs t = 0.5");
  const double c = s.c, v = s.v, t = s.t;
  if (v == 0.0) return detail::level_oracle(c, {{c, 1.0}});
  const double a = c - t;
  const double w = 0.5 * (1.0 - std::abs(a) / std::sqrt(v + a * a));
  const double far = std::sqrt(v * (1.0 - w) / w);
  const double near = std::sqrt(v * w / (1.0 - w));
  // the minority mass w sits across the threshold from c
  if (c < t) return detail::level_oracle(c, {{c + far, w}, {c - near, 1.0 - w}});
  return detail::level_oracle(c, {{c - far, w}, {c + near, 1.0 - w}});
}

struct BestRule {
  double eu = 0.0;
  std::vector<int> decisions;  // per score level, increasing order
};

/// Exhaustive search over all 2^k rules that are constant on score levels.
inline BestRule brute_force_best_rule(const OracleDistribution& o, const UtilityMatrix& u) {
  const auto lv = o.levels();
  const std::size_t k = lv.size();
  if (k > 20) throw Error(ErrorCode::TooManyLevels, std::to_string(k) + " score levels (max 20)");
  std::vector<double> eu0(k, 0.0), eu1(k, 0.0);
  for (const auto& a : o.atoms()) {
    const auto i = static_cast<std::size_t>(std::lower_bound(lv.begin(), lv.end(), a.f) - lv.begin());
    eu0[i] += a.z * pointwise_eu_direct(a.fstar, u, 0);
    eu1[i] += a.z * pointwise_eu_direct(a.fstar, u, 1);
  }
  BestRule best;
  best.eu = -std::numeric_limits<double>::infinity();
  std::uint32_t best_mask = 0;
  for (std::uint32_t mask = 0; mask < (1u << k); ++mask) {
    double eu = 0.0;
    for (std::size_t i = 0; i < k; ++i) eu += (mask >> i) & 1u ? eu1[i] : eu0[i];
    if (eu > best.eu) {
      best.eu = eu;
      best_mask = mask;
    }
  }
  best.decisions.resize(k);
  for (std::size_t i = 0; i < k; ++i) best.decisions[i] = static_cast<int>((best_mask >> i) & 1u);
  return best;
}

/// n i.i.d. draws: atom by mass, label ~ Bernoulli(f*), score f, and the
/// atom's tag as the single feature.
inline ScoredDataset sample(const OracleDistribution& o, std::size_t n, std::uint64_t seed) {
  std::vector<double> masses;
  for (const auto& a : o.atoms()) masses.push_back(a.z);
  std::mt19937_64 rng(seed);
  std::discrete_distribution<std::size_t> pick(masses.begin(), masses.end());
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<ScoredSample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = o.atoms()[pick(rng)];
    out.push_back(ScoredSample{a.f, unif(rng) < a.fstar ? 1 : 0, {static_cast<double>(a.x)}});
  }
  return ScoredDataset(std::move(out));
}

struct RandomOracleOptions {
  // Score levels are assigned in the order of their calibrated values, so the
  // calibration curve is increasing.
  bool monotone = false;
  // Each level's score equals its calibrated value.
  bool calibrated = false;
  // Upper limit of the half-width of true probabilities around a level centre.
  double max_spread = 0.5;
};

inline OracleDistribution random_oracle(std::uint64_t seed, std::size_t n_levels, std::size_t atoms_per_level,
                                        const RandomOracleOptions& opt = {}) {
  if (n_levels == 0 || atoms_per_level == 0) throw Error(ErrorCode::InvalidOracle, "counts must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::exponential_distribution<double> expo(1.0);

  struct Level {
    std::vector<double> fstar, mass;
    double c = 0.0, total = 0.0;
  };
  std::vector<Level> groups(n_levels);
  for (auto& g : groups) {
    const double centre = unif(rng);
    const double spread = opt.max_spread * unif(rng);
    const double lo = std::max(0.0, centre - spread), hi = std::min(1.0, centre + spread);
    for (std::size_t j = 0; j < atoms_per_level; ++j) {
      g.fstar.push_back(lo + (hi - lo) * unif(rng));
      g.mass.push_back(expo(rng) + 1e-3);
      g.total += g.mass.back();
      g.c += g.mass.back() * g.fstar.back();
    }
    g.c /= g.total;
  }
  std::vector<double> scores(n_levels);
  for (auto& s : scores) s = 0.01 + 0.98 * unif(rng);
  std::sort(scores.begin(), scores.end());
  if (opt.monotone) std::sort(groups.begin(), groups.end(), [](const Level& a, const Level& b) { return a.c < b.c; });
  else std::shuffle(groups.begin(), groups.end(), rng);

  double grand = 0.0;
  for (const auto& g : groups) grand += g.total;
  std::vector<Atom> atoms;
  int tag = 0;
  for (std::size_t k = 0; k < n_levels; ++k) {
    const double f = opt.calibrated ? groups[k].c : scores[k];
    for (std::size_t j = 0; j < atoms_per_level; ++j) {
      atoms.push_back(Atom{groups[k].mass[j] / grand, groups[k].fstar[j], std::clamp(f, 0.0, 1.0), tag++});
    }
  }
  double head = 0.0;
  for (std::size_t i = 0; i + 1 < atoms.size(); ++i) head += atoms[i].z;
  atoms.back().z = 1.0 - head;
  return OracleDistribution(std::move(atoms));
}

/// Exact GLAR output: each atom's score becomes E[f* | f, region], where
/// `region_of_atom[i]` labels the feature-space cell of atom i inside its
/// score level.
inline OracleDistribution glar_exact(const OracleDistribution& o, const std::vector<int>& region_of_atom) {
  if (region_of_atom.size() != o.size()) throw Error(ErrorCode::LengthMismatch, "one region per atom");
  std::map<std::pair<double, int>, std::pair<double, double>> cells;  // (f, region) -> (mass, Σ z f*)
  for (std::size_t i = 0; i < o.size(); ++i) {
    const auto& a = o.atoms()[i];
    auto& cell = cells[{a.f, region_of_atom[i]}];
    cell.first += a.z;
    cell.second += a.z * a.fstar;
  }
  auto atoms = o.atoms();
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    const auto& cell = cells.at({atoms[i].f, region_of_atom[i]});
    atoms[i].f = cell.first > 0.0 ? std::clamp(cell.second / cell.first, 0.0, 1.0) : atoms[i].f;
  }
  return OracleDistribution(std::move(atoms));
}

/// Same atoms with each score replaced by its level's calibrated value c(f).
inline OracleDistribution recalibrate_exact(const OracleDistribution& o) {
  const auto stats = exact_stats(o, 0.5);
  const auto lv = o.levels();
  return o.with_scores([&](const Atom& a) {
    return stats[static_cast<std::size_t>(std::lower_bound(lv.begin(), lv.end(), a.f) - lv.begin())].c;
  });
}

inline void to_json(nlohmann::json& j, const OracleDistribution& o) {
  nlohmann::json atoms = nlohmann::json::array();
  for (const auto& a : o.atoms()) atoms.push_back({{"z", a.z}, {"fstar", a.fstar}, {"f", a.f}, {"x", a.x}});
  j = {{"atoms", atoms}};
}

inline void from_json(const nlohmann::json& j, OracleDistribution& o) {
  std::vector<Atom> atoms;
  for (const auto& a : j.at("atoms")) {
    atoms.push_back(Atom{a.at("z").get<double>(), a.at("fstar").get<double>(), a.at("f").get<double>(), a.at("x").get<int>()});
  }
  o = OracleDistribution(std::move(atoms));
}

inline void to_json(nlohmann::json& j, const ExactRegrets& e) {
  nlohmann::json levels = nlohmann::json::array();
  auto opt = [](double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); };
  for (const auto& l : e.levels) {
    levels.push_back({{"f", l.stats.f},
                      {"mass", l.stats.mass},
                      {"c", l.stats.c},
                      {"gl", l.stats.gl},
                      {"w", l.stats.w},
                      {"c_plus", opt(l.stats.c_plus)},
                      {"c_minus", opt(l.stats.c_minus)},
                      {"rcl", l.rcl},
                      {"rgl", l.rgl},
                      {"lgl", l.lgl},
                      {"ugl", l.ugl},
                      {"r", l.r}});
  }
  j = {{"t_star", e.t_star},       {"threshold", e.threshold},
       {"u_delta", e.u_delta},     {"rcl", e.rcl},
       {"rgl", e.rgl},             {"r", e.r},
       {"eu_naive", e.eu_naive},   {"eu_recalibrated", e.eu_recalibrated},
       {"eu_oracle", e.eu_oracle}, {"levels", levels}};
}

}  // namespace regretcal
