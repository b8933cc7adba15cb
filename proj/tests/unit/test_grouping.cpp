#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "helpers.hpp"
#include "regretcal/grouping.hpp"
#include "regretcal/synthetic.hpp"

using namespace regretcal;

namespace {

// One score level (0.5) holding two equal-mass feature regions with true
// probabilities 0.2 and 0.8.
OracleDistribution two_region() {
  return OracleDistribution({Atom{0.5, 0.2, 0.5, 0}, Atom{0.5, 0.8, 0.5, 1}});
}

}  // namespace

TEST(Partition, SplitsPureMixture) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<ScoredSample> s;
  for (int i = 0; i < 400; ++i) {
    const double x = u(rng);
    s.push_back({0.5, x >= 0.0 ? 1 : 0, {x}});
  }
  const ScoredDataset ds(std::move(s));
  const EqualMassBinning b;
  const auto part = fit_partition(ds, b, PartitionOptions{2, 10});
  ASSERT_EQ(part.trees[0].n_leaves(), 2u);
  EXPECT_NEAR(part.trees[0].nodes[0].threshold, 0.0, 0.05);
  double lo = part.regions[0][0].mean_label, hi = part.regions[0][1].mean_label;
  EXPECT_NEAR(std::min(lo, hi), 0.0, 1e-12);
  EXPECT_NEAR(std::max(lo, hi), 1.0, 1e-12);

  const auto single = fit_partition(ds, b, PartitionOptions{1, 10});
  EXPECT_EQ(single.trees[0].n_leaves(), 1u);
}

TEST(Partition, RespectsLeafLimitsAndCoversSamples) {
  const auto o = random_oracle(4, 20, 6);
  const auto ds = sample(o, 5000, 4);
  const auto b = fit_equal_mass_bins(ds.scores(), 15);
  const auto part = fit_partition(ds, b, PartitionOptions{5, 10});
  for (std::size_t k = 0; k < b.n_bins(); ++k) {
    EXPECT_LE(part.trees[k].n_leaves(), 5u);
    std::size_t total = 0;
    for (const auto& r : part.regions[k]) {
      total += r.mass;
      if (r.mass > 0) EXPECT_GE(r.mass, 10u);
    }
    std::size_t in_bin = 0;
    for (const auto& s : ds.samples()) in_bin += b.bin_of(s.score) == k ? 1 : 0;
    EXPECT_EQ(total, in_bin);
  }
  EXPECT_THROW(fit_partition(regretcal::testing::random_ds(1, 50), b), Error);
}

TEST(GroupingLoss, TwoRegionEstimate) {
  const auto o = two_region();
  const auto s = split(sample(o, 20000, 7), SplitSpec{0.5, 0.5, 7, false});
  const EqualMassBinning b;
  const auto part = fit_partition(s.fit, b);
  const auto gl = estimate_gl(s.eval, b, part);
  EXPECT_NEAR(gl.bins[0].gl_hat, 0.09, 0.02);
  EXPECT_NEAR(exact_grouping_loss(o), 0.09, 1e-12);
}

TEST(GroupingLoss, ConstantWithinBinsIsNearZero) {
  const auto calibrated = OracleDistribution({Atom{0.5, 0.3, 0.3, 0}, Atom{0.5, 0.3, 0.3, 1}});
  const auto t = split(sample(calibrated, 10000, 1), SplitSpec{0.5, 0.5, 1, false});
  const EqualMassBinning one;
  EXPECT_NEAR(estimate_gl(t.eval, one, fit_partition(t.fit, one)).bins[0].gl_hat, 0.0, 0.005);
}

TEST(GroupingLoss, SingleRegionIsZero) {
  const auto s = split(sample(two_region(), 4000, 2), SplitSpec{0.5, 0.5, 2, false});
  const EqualMassBinning b;
  const auto gl = estimate_gl(s.eval, b, fit_partition(s.fit, b, PartitionOptions{1, 10}));
  EXPECT_EQ(gl.bins[0].gl_hat, 0.0);
}

TEST(GroupingLoss, HonestSplitEnforced) {
  const auto s = split(sample(two_region(), 1000, 3), SplitSpec{0.5, 0.5, 3, false});
  const EqualMassBinning b;
  const auto part = fit_partition(s.fit, b);
  try {
    estimate_gl(s.fit, b, part);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::FoldOverlap);
  }
  try {
    estimate_gl(s.eval, EqualMassBinning({0.5}), part);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BinningMismatch);
  }
}

TEST(GroupingLoss, StrictModeRejectsEmptyRegions) {
  std::vector<ScoredSample> fit, est;
  for (int i = 0; i < 40; ++i) fit.push_back({0.5, i % 2, {static_cast<double>(i % 2)}});
  for (int i = 0; i < 20; ++i) est.push_back({0.5, 0, {0.0}});
  const ScoredDataset f(std::move(fit)), e(std::move(est));
  const EqualMassBinning b;
  const auto part = fit_partition(f, b);
  ASSERT_EQ(part.trees[0].n_leaves(), 2u);
  const auto lenient = estimate_gl(e, b, part);
  EXPECT_EQ(lenient.bins[0].empty_regions, 1u);
  EXPECT_THROW(estimate_gl(e, b, part, GroupingLossOptions{true, true}), Error);
}

TEST(Glar, CorrectsTwoRegionBin) {
  const auto s = split(sample(two_region(), 20000, 5), SplitSpec{0.5, 0.5, 5, true});
  const EqualMassBinning b;
  const auto u = utility_matrix_from_tstar(0.5);
  const auto map = glar_fit(s.fit1, s.fit2, b, u);
  EXPECT_TRUE(map.gate_open);
  EXPECT_TRUE(map.active[0]);
  EXPECT_NEAR(glar_apply(map, ScoredSample{0.5, 0, {0.0}}), 0.2, 0.03);
  EXPECT_NEAR(glar_apply(map, ScoredSample{0.5, 0, {1.0}}), 0.8, 0.03);
  EXPECT_THROW(glar_apply(map, ScoredSample{0.5, 0, {}}), Error);

  GlarOptions closed;
  closed.gate = std::numeric_limits<double>::infinity();
  const auto off = glar_fit(s.fit1, s.fit2, b, u, closed);
  EXPECT_FALSE(off.gate_open);
  for (double x : {0.0, 1.0}) EXPECT_EQ(glar_apply(off, ScoredSample{0.5, 0, {x}}), off.fallback(0.5));
}

TEST(Glar, ZeroGroupingLossKeepsFallback) {
  const auto o = OracleDistribution({Atom{0.5, 0.3, 0.3, 0}, Atom{0.5, 0.7, 0.7, 1}});
  const auto s = split(sample(o, 10000, 6), SplitSpec{0.5, 0.5, 6, true});
  const auto b = fit_equal_mass_bins(s.fit.scores(), 15);
  const auto map = glar_fit(s.fit1, s.fit2, b, utility_matrix_from_tstar(0.5));
  EXPECT_FALSE(map.gate_open);
  for (const auto& x : s.eval.samples()) EXPECT_EQ(glar_apply(map, x), map.fallback(x.score));
  EXPECT_THROW(glar_fit(s.fit, s.fit1, b, utility_matrix_from_tstar(0.5)), Error);
}

TEST(Glat, ThresholdExample) {
  GlarMap map;
  map.partition.trees.resize(1);
  map.partition.feature_dim = 1;
  map.active = {true};
  map.corrections = {{0.7}};
  map.bin_rgl = {1.0};
  map.fallback = MonotoneStepMap::constant(0.5);
  EXPECT_NEAR(glat_threshold(map, ScoredSample{0.5, 0, {0.0}}, 0.5), 0.3, 1e-12);
  map.corrections = {{0.5}};
  EXPECT_EQ(glat_threshold(map, ScoredSample{0.5, 0, {0.0}}, 0.5), 0.5);
}

TEST(Glat, DecisionsMatchGlar) {
  const auto o = random_oracle(31, 20, 5);
  const auto s = split(sample(o, 20000, 31), SplitSpec{0.5, 0.5, 31, true});
  const auto b = fit_equal_mass_bins(s.fit.scores(), 15);
  GlarOptions opt;
  opt.gate = 0.0;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  for (int k = 0; k < 5; ++k) {
    const double t = u(rng);
    const auto map = glar_fit(s.fit1, s.fit2, b, utility_matrix_from_tstar(t), opt);
    for (std::size_t i = 0; i < 1000; ++i) {
      const auto& x = s.eval[i];
      EXPECT_EQ(x.score >= glat_threshold(map, x, t), glar_apply(map, x) >= t);
    }
  }
}

TEST(Glar, JsonRoundTrip) {
  const auto o = random_oracle(8, 10, 4);
  const auto s = split(sample(o, 8000, 8), SplitSpec{0.5, 0.5, 8, true});
  const auto b = fit_equal_mass_bins(s.fit.scores(), 15);
  GlarOptions opt;
  opt.gate = 0.0;
  const auto map = glar_fit(s.fit1, s.fit2, b, utility_matrix_from_tstar(0.5), opt);
  const nlohmann::json j = map;
  const auto back = nlohmann::json::parse(j.dump()).get<GlarMap>();
  for (const auto& x : s.eval.samples()) EXPECT_EQ(glar_apply(map, x), glar_apply(back, x));
}
