#pragma once

// Feature-space partitions nested in score bins, the debiased grouping-loss
// estimator, and the grouping-loss adaptive recalibration (GLAR) with its
// threshold-side dual (GLAT).

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "regretcal/binning.hpp"
#include "regretcal/bounds.hpp"
#include "regretcal/dataset.hpp"
#include "regretcal/decision.hpp"
#include "regretcal/detail/parallel.hpp"
#include "regretcal/error.hpp"
#include "regretcal/recalibration.hpp"

namespace regretcal {

/// Binary tree with axis-aligned splits `x[feature] <= threshold` going left.
struct RegionTree {
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int leaf = -1;  // region id for leaves
  };

  std::vector<Node> nodes{Node{-1, 0.0, -1, -1, 0}};

  std::size_t n_leaves() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const Node& n) { return n.feature < 0; }));
  }

  int region_of(std::span<const double> x) const {
    int i = 0;
    while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
      const auto& n = nodes[static_cast<std::size_t>(i)];
      i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(i)].leaf;
  }
};

struct RegionStat {
  std::size_t mass = 0;
  double mean_label = std::numeric_limits<double>::quiet_NaN();
};

struct PartitionOptions {
  std::size_t max_leaves = 5;
  std::size_t min_leaf = 10;
};

struct RegionPartition {
  EqualMassBinning binning;
  PartitionOptions options;
  std::size_t feature_dim = 0;
  std::vector<RegionTree> trees;                 // one per bin
  std::vector<std::vector<RegionStat>> regions;  // fit-fold statistics per bin
  std::uint64_t fit_source = 0;
  std::vector<std::size_t> fit_rows;  // sorted

  std::pair<std::size_t, int> locate(const ScoredSample& s) const {
    const auto bin = binning.bin_of(s.score);
    return {bin, trees[bin].region_of(s.features)};
  }
};

namespace detail {

struct SplitCandidate {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

// count-weighted Gini impurity n·2p(1−p)
inline double weighted_gini(double positives, double n) {
  return n > 0.0 ? 2.0 * positives * (n - positives) / n : 0.0;
}

inline SplitCandidate best_gini_split(const ScoredDataset& ds, const std::vector<std::size_t>& members,
                                      std::size_t min_leaf) {
  SplitCandidate best;
  const std::size_t n = members.size();
  if (n < 2 * min_leaf) return best;
  double pos_total = 0.0;
  for (auto i : members) pos_total += ds[i].label;
  const double parent = weighted_gini(pos_total, static_cast<double>(n));
  if (parent <= 0.0) return best;

  std::vector<std::size_t> order(members);
  for (std::size_t j = 0; j < ds.feature_dim(); ++j) {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return ds[a].features[j] < ds[b].features[j]; });
    double pos_left = 0.0;
    for (std::size_t k = 1; k < n; ++k) {
      pos_left += ds[order[k - 1]].label;
      if (k < min_leaf || n - k < min_leaf) continue;
      const double lo = ds[order[k - 1]].features[j];
      const double hi = ds[order[k]].features[j];
      if (!(lo < hi)) continue;
      const double gain = parent - weighted_gini(pos_left, static_cast<double>(k)) -
                          weighted_gini(pos_total - pos_left, static_cast<double>(n - k));
      if (gain > best.gain + 1e-12) {
        double mid = lo + 0.5 * (hi - lo);
        if (!(mid < hi)) mid = lo;
        best = SplitCandidate{gain, static_cast<int>(j), mid};
      }
    }
  }
  return best;
}

// Best-first growth: repeatedly split the leaf with the largest impurity
// decrease until max_leaves is reached or no leaf has a positive decrease.
inline RegionTree grow_tree(const ScoredDataset& ds, const std::vector<std::size_t>& members,
                            const PartitionOptions& opt) {
  RegionTree tree;
  struct Leaf {
    int node;
    std::vector<std::size_t> members;
    SplitCandidate split;
  };
  std::vector<Leaf> leaves;
  leaves.push_back({0, members, best_gini_split(ds, members, opt.min_leaf)});
  while (leaves.size() < opt.max_leaves) {
    std::size_t pick = leaves.size();
    for (std::size_t l = 0; l < leaves.size(); ++l) {
      if (leaves[l].split.feature < 0) continue;
      if (pick == leaves.size() || leaves[l].split.gain > leaves[pick].split.gain) pick = l;
    }
    if (pick == leaves.size()) break;
    Leaf leaf = std::move(leaves[pick]);
    leaves.erase(leaves.begin() + static_cast<std::ptrdiff_t>(pick));

    std::vector<std::size_t> left, right;
    const auto f = static_cast<std::size_t>(leaf.split.feature);
    for (auto i : leaf.members) (ds[i].features[f] <= leaf.split.threshold ? left : right).push_back(i);

    const int li = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({});
    tree.nodes.push_back({});
    auto& node = tree.nodes[static_cast<std::size_t>(leaf.node)];
    node.feature = leaf.split.feature;
    node.threshold = leaf.split.threshold;
    node.left = li;
    node.right = li + 1;
    node.leaf = -1;
    auto left_split = best_gini_split(ds, left, opt.min_leaf);
    auto right_split = best_gini_split(ds, right, opt.min_leaf);
    leaves.push_back({li, std::move(left), left_split});
    leaves.push_back({li + 1, std::move(right), right_split});
  }
  // number leaves in depth-first, left-to-right order
  int next_leaf = 0;
  std::vector<int> stack{0};
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    auto& node = tree.nodes[static_cast<std::size_t>(i)];
    if (node.feature < 0) {
      node.leaf = next_leaf++;
    } else {
      stack.push_back(node.right);
      stack.push_back(node.left);
    }
  }
  return tree;
}

inline std::vector<std::vector<std::size_t>> members_by_bin(const ScoredDataset& ds, const EqualMassBinning& b) {
  std::vector<std::vector<std::size_t>> out(b.n_bins());
  for (std::size_t i = 0; i < ds.size(); ++i) out[b.bin_of(ds[i].score)].push_back(i);
  return out;
}

}  // namespace detail

/// Fits one Gini tree per score bin on (features, labels). Bins with fewer
/// than 2·min_leaf samples keep a single region.
inline RegionPartition fit_partition(const ScoredDataset& ds_fit, const EqualMassBinning& b,
                                     const PartitionOptions& opt = {}) {
  if (ds_fit.feature_dim() == 0) throw Error(ErrorCode::NoFeatures, "partition fitting needs features");
  if (opt.max_leaves == 0) throw Error(ErrorCode::NonPositiveBins, "max_leaves must be positive");
  RegionPartition part;
  part.binning = b;
  part.options = opt;
  part.feature_dim = ds_fit.feature_dim();
  part.fit_source = ds_fit.source_id();
  part.fit_rows.assign(ds_fit.row_ids().begin(), ds_fit.row_ids().end());
  std::sort(part.fit_rows.begin(), part.fit_rows.end());

  const auto members = detail::members_by_bin(ds_fit, b);
  part.trees.resize(b.n_bins());
  part.regions.resize(b.n_bins());
  detail::parallel_for(b.n_bins(), [&](std::size_t k) {
    part.trees[k] = detail::grow_tree(ds_fit, members[k], opt);
    std::vector<RegionStat> stats(part.trees[k].n_leaves());
    std::vector<double> pos(stats.size(), 0.0);
    for (auto i : members[k]) {
      const auto r = static_cast<std::size_t>(part.trees[k].region_of(ds_fit[i].features));
      stats[r].mass += 1;
      pos[r] += ds_fit[i].label;
    }
    for (std::size_t r = 0; r < stats.size(); ++r)
      if (stats[r].mass > 0) stats[r].mean_label = pos[r] / static_cast<double>(stats[r].mass);
    part.regions[k] = std::move(stats);
  });
  return part;
}

struct BinGroupingLoss {
  std::size_t mass = 0;
  double c_hat = std::numeric_limits<double>::quiet_NaN();
  double explained = 0.0;  // Σ_r (n_r/n)(m_r − c)²
  double debias = 0.0;     // Σ_r (n_r/n)·m_r(1 − m_r)/n_r
  double gl_hat = 0.0;     // clipped to [0, 0.25]
  std::size_t regions_used = 0;
  std::size_t empty_regions = 0;
  std::vector<RegionStat> regions;
};

struct GroupingLossEstimate {
  EqualMassBinning binning;
  bool debiased = true;
  std::vector<BinGroupingLoss> bins;
  std::size_t n = 0;

  /// Mass-weighted average over bins.
  double total() const {
    double s = 0.0;
    for (const auto& b : bins) s += static_cast<double>(b.mass) * b.gl_hat;
    return n > 0 ? s / static_cast<double>(n) : 0.0;
  }
};

struct GroupingLossOptions {
  bool debias = true;
  // When true, a partition region receiving no estimation samples inside a
  // populated bin raises EmptyRegion; otherwise it is left out of the sum.
  bool strict_regions = false;
};

inline void check_honest(const ScoredDataset& ds_estimate, const RegionPartition& part) {
  if (ds_estimate.source_id() != part.fit_source) return;
  std::vector<std::size_t> rows(ds_estimate.row_ids().begin(), ds_estimate.row_ids().end());
  std::sort(rows.begin(), rows.end());
  std::vector<std::size_t> common;
  std::set_intersection(rows.begin(), rows.end(), part.fit_rows.begin(), part.fit_rows.end(),
                        std::back_inserter(common));
  if (!common.empty()) {
    throw Error(ErrorCode::FoldOverlap, std::to_string(common.size()) + " rows used for both fitting and estimation");
  }
}

/// Debiased plug-in grouping loss per bin, with region means taken on the
/// estimation fold:
///   gl = Σ_r (n_r/n)(m_r − c)² − Σ_r (n_r/n)·m_r(1 − m_r)/n_r, clipped to [0, 1/4].
inline GroupingLossEstimate estimate_gl(const ScoredDataset& ds_estimate, const EqualMassBinning& b,
                                        const RegionPartition& part, const GroupingLossOptions& opt = {}) {
  if (!(b == part.binning)) throw Error(ErrorCode::BinningMismatch, "partition was fitted on another binning");
  if (ds_estimate.empty()) throw Error(ErrorCode::EmptyDataset, "");
  if (ds_estimate.feature_dim() != part.feature_dim) {
    throw Error(ErrorCode::NoFeatures, "estimation fold feature dimension differs from the partition's");
  }
  check_honest(ds_estimate, part);

  GroupingLossEstimate out;
  out.binning = b;
  out.debiased = opt.debias;
  out.n = ds_estimate.size();
  out.bins.resize(b.n_bins());
  std::vector<std::vector<double>> pos(b.n_bins());
  for (std::size_t k = 0; k < b.n_bins(); ++k) {
    out.bins[k].regions.assign(part.trees[k].n_leaves(), RegionStat{});
    pos[k].assign(part.trees[k].n_leaves(), 0.0);
  }
  for (const auto& s : ds_estimate.samples()) {
    const auto [k, r] = part.locate(s);
    out.bins[k].mass += 1;
    out.bins[k].regions[static_cast<std::size_t>(r)].mass += 1;
    pos[k][static_cast<std::size_t>(r)] += s.label;
  }
  for (std::size_t k = 0; k < b.n_bins(); ++k) {
    auto& bin = out.bins[k];
    if (bin.mass == 0) continue;
    const double n = static_cast<double>(bin.mass);
    double total_pos = 0.0;
    for (double p : pos[k]) total_pos += p;
    bin.c_hat = total_pos / n;
    for (std::size_t r = 0; r < bin.regions.size(); ++r) {
      auto& reg = bin.regions[r];
      if (reg.mass == 0) {
        if (opt.strict_regions) {
          throw Error(ErrorCode::EmptyRegion, "bin " + std::to_string(k) + " region " + std::to_string(r));
        }
        ++bin.empty_regions;
        continue;
      }
      ++bin.regions_used;
      const double nr = static_cast<double>(reg.mass);
      reg.mean_label = pos[k][r] / nr;
      const double share = nr / n;
      bin.explained += share * (reg.mean_label - bin.c_hat) * (reg.mean_label - bin.c_hat);
      bin.debias += share * reg.mean_label * (1.0 - reg.mean_label) / nr;
    }
    const double raw = opt.debias ? bin.explained - bin.debias : bin.explained;
    bin.gl_hat = bin.regions_used <= 1 ? 0.0 : std::clamp(raw, 0.0, 0.25);
  }
  return out;
}

struct GlarOptions {
  PartitionOptions partition;
  double gate = 0.02;
  GroupingLossOptions gl;
};

struct GlarMap {
  RegionPartition partition;
  std::vector<bool> active;                      // per bin
  std::vector<std::vector<double>> corrections;  // per bin and region; NaN defers to the fallback
  std::vector<double> bin_rgl;                   // estimated conditional grouping regret per bin
  MonotoneStepMap fallback;
  double gate = 0.02;
  double total_rgl = 0.0;
  bool gate_open = false;
  double t_star = 0.5;
  double u_delta = 1.0;
};

/// Honest GLAR fit: trees on fit1, region means and grouping regret on fit2,
/// isotonic fallback on fit1 ∪ fit2. Corrections are used only when the total
/// estimated grouping regret exceeds the gate, and then only in bins whose own
/// estimated grouping regret exceeds it.
inline GlarMap glar_fit(const ScoredDataset& fit1, const ScoredDataset& fit2, const EqualMassBinning& b,
                        const UtilityMatrix& u, const GlarOptions& opt = {}) {
  if (ScoredDataset::overlaps(fit1, fit2)) throw Error(ErrorCode::FoldOverlap, "GLAR folds share rows");
  GlarMap map;
  map.t_star = optimal_threshold(u);
  map.u_delta = u.u_delta();
  map.gate = opt.gate;
  const auto merged = fit1.source_id() == fit2.source_id() ? ScoredDataset::concat(fit1, fit2) : [&] {
    std::vector<ScoredSample> all(fit1.samples().begin(), fit1.samples().end());
    all.insert(all.end(), fit2.samples().begin(), fit2.samples().end());
    return ScoredDataset(std::move(all));
  }();
  const auto scores = merged.scores();
  const auto labels = merged.labels();
  map.fallback = isotonic_fit(scores, labels);

  map.partition = fit_partition(fit1, b, opt.partition);
  const auto gl = estimate_gl(fit2, b, map.partition, opt.gl);

  map.active.assign(b.n_bins(), false);
  map.bin_rgl.assign(b.n_bins(), 0.0);
  map.corrections.resize(b.n_bins());
  double total = 0.0;
  for (std::size_t k = 0; k < b.n_bins(); ++k) {
    const auto& bin = gl.bins[k];
    map.corrections[k].assign(bin.regions.size(), std::numeric_limits<double>::quiet_NaN());
    if (bin.mass == 0) continue;
    const double gl_capped = std::min(bin.gl_hat, v_max(bin.c_hat));
    map.bin_rgl[k] = rgl_mid(bin.c_hat, gl_capped, map.t_star, map.u_delta);
    total += static_cast<double>(bin.mass) * map.bin_rgl[k];
    for (std::size_t r = 0; r < bin.regions.size(); ++r) map.corrections[k][r] = bin.regions[r].mean_label;
  }
  map.total_rgl = total / static_cast<double>(gl.n);
  map.gate_open = map.total_rgl > opt.gate;
  if (map.gate_open) {
    for (std::size_t k = 0; k < b.n_bins(); ++k) map.active[k] = map.bin_rgl[k] > opt.gate;
  }
  return map;
}

inline double glar_apply(const GlarMap& map, const ScoredSample& sample) {
  const auto bin = map.partition.binning.bin_of(sample.score);
  if (!map.active[bin]) return map.fallback(sample.score);
  if (sample.features.size() != map.partition.feature_dim) {
    throw Error(ErrorCode::NoFeatures, "GLAR correction needs " + std::to_string(map.partition.feature_dim) + " features");
  }
  const auto region = static_cast<std::size_t>(map.partition.trees[bin].region_of(sample.features));
  const double v = map.corrections[bin][region];
  return std::isnan(v) ? map.fallback(sample.score) : v;
}

inline ScoredDataset glar_apply(const GlarMap& map, const ScoredDataset& ds) {
  std::vector<double> out(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) out[i] = glar_apply(map, ds[i]);
  return ds.with_scores(out);
}

/// Per-sample threshold t* − (f_P(x) − f(x)) on the original score. The value
/// is nudged by at most a few ulps when rounding would otherwise make
/// 1{f ≥ t_P} differ from 1{f_P ≥ t*}.
inline double glat_threshold(const GlarMap& map, const ScoredSample& sample, double t_star) {
  const double corrected = glar_apply(map, sample);
  double t = t_star - (corrected - sample.score);
  const bool want = corrected >= t_star;
  while ((sample.score >= t) != want) {
    t = std::nextafter(t, want ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity());
  }
  return t;
}

inline void to_json(nlohmann::json& j, const RegionTree& tree) {
  j = nlohmann::json::array();
  for (const auto& n : tree.nodes) {
    if (n.feature < 0) j.push_back({{"leaf", n.leaf}});
    else j.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right}});
  }
}

inline void from_json(const nlohmann::json& j, RegionTree& tree) {
  tree.nodes.clear();
  for (const auto& n : j) {
    RegionTree::Node node;
    if (n.contains("leaf")) {
      node.leaf = n.at("leaf").get<int>();
    } else {
      node.feature = n.at("feature").get<int>();
      node.threshold = n.at("threshold").get<double>();
      node.left = n.at("left").get<int>();
      node.right = n.at("right").get<int>();
    }
    tree.nodes.push_back(node);
  }
}

namespace detail {

// NaN is not representable in JSON; empty regions serialize as null.
inline nlohmann::json nullable(double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); }
inline double from_nullable(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

}  // namespace detail

inline void to_json(nlohmann::json& j, const GlarMap& map) {
  nlohmann::json bins = nlohmann::json::array();
  for (std::size_t k = 0; k < map.active.size(); ++k) {
    nlohmann::json corr = nlohmann::json::array();
    for (double v : map.corrections[k]) corr.push_back(detail::nullable(v));
    bins.push_back({{"active", static_cast<bool>(map.active[k])},
                    {"rgl_hat", map.bin_rgl[k]},
                    {"tree", map.partition.trees[k]},
                    {"corrections", corr}});
  }
  j = {{"kind", "glar"},
       {"binning", map.partition.binning},
       {"feature_dim", map.partition.feature_dim},
       {"max_leaves", map.partition.options.max_leaves},
       {"min_leaf", map.partition.options.min_leaf},
       {"gate", map.gate},
       {"gate_open", map.gate_open},
       {"total_rgl_hat", map.total_rgl},
       {"t_star", map.t_star},
       {"u_delta", map.u_delta},
       {"fallback", RecalibrationMap(map.fallback)},
       {"bins", bins}};
}

inline void from_json(const nlohmann::json& j, GlarMap& map) {
  map = GlarMap{};
  map.partition.binning = j.at("binning").get<EqualMassBinning>();
  map.partition.feature_dim = j.at("feature_dim").get<std::size_t>();
  map.partition.options.max_leaves = j.at("max_leaves").get<std::size_t>();
  map.partition.options.min_leaf = j.at("min_leaf").get<std::size_t>();
  map.gate = j.at("gate").get<double>();
  map.gate_open = j.at("gate_open").get<bool>();
  map.total_rgl = j.at("total_rgl_hat").get<double>();
  map.t_star = j.at("t_star").get<double>();
  map.u_delta = j.at("u_delta").get<double>();
  const auto fallback = j.at("fallback").get<RecalibrationMap>();
  if (!std::holds_alternative<MonotoneStepMap>(fallback)) throw Error(ErrorCode::IncompatibleMap, "GLAR fallback must be isotonic");
  map.fallback = std::get<MonotoneStepMap>(fallback);
  for (const auto& bin : j.at("bins")) {
    map.active.push_back(bin.at("active").get<bool>());
    map.bin_rgl.push_back(bin.at("rgl_hat").get<double>());
    map.partition.trees.push_back(bin.at("tree").get<RegionTree>());
    std::vector<double> corr;
    for (const auto& v : bin.at("corrections")) corr.push_back(detail::from_nullable(v));
    map.corrections.push_back(std::move(corr));
  }
  if (map.active.size() != map.partition.binning.n_bins()) {
    throw Error(ErrorCode::BinningMismatch, "GLAR bin count does not match its binning");
  }
}

}  // namespace regretcal
