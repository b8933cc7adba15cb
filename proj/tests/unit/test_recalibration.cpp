#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>

#include "helpers.hpp"
#include "regretcal/recalibration.hpp"

using namespace regretcal;
using regretcal::testing::make_ds;

namespace {

// Least-squares monotone fit by exhaustive search: the optimum is constant on
// contiguous blocks of distinct scores and takes the block mean there, so
// enumerating every block partition and keeping the monotone ones finds it.
std::vector<double> brute_force_isotonic(const std::vector<double>& scores, const std::vector<int>& labels) {
  std::map<double, std::pair<double, double>> groups;  // score -> (count, positives)
  for (std::size_t i = 0; i < scores.size(); ++i) {
    groups[scores[i]].first += 1.0;
    groups[scores[i]].second += labels[i];
  }
  std::vector<double> cnt, pos, keys;
  for (const auto& [k, v] : groups) {
    keys.push_back(k);
    cnt.push_back(v.first);
    pos.push_back(v.second);
  }
  const std::size_t m = keys.size();
  double best_sse = std::numeric_limits<double>::infinity();
  std::vector<double> best;
  for (std::uint32_t mask = 0; mask < (1u << (m - 1)); ++mask) {
    std::vector<double> fit(m);
    std::size_t start = 0;
    double prev = -1.0;
    bool ok = true;
    for (std::size_t g = 0; g < m; ++g) {
      const bool cut = g + 1 == m || ((mask >> g) & 1u);
      if (!cut) continue;
      double c = 0.0, p = 0.0;
      for (std::size_t h = start; h <= g; ++h) {
        c += cnt[h];
        p += pos[h];
      }
      const double mean = p / c;
      if (mean < prev) ok = false;
      prev = mean;
      for (std::size_t h = start; h <= g; ++h) fit[h] = mean;
      start = g + 1;
    }
    if (!ok) continue;
    double sse = 0.0;
    for (std::size_t g = 0; g < m; ++g) sse += pos[g] * (1 - fit[g]) * (1 - fit[g]) + (cnt[g] - pos[g]) * fit[g] * fit[g];
    if (sse < best_sse - 1e-12) {
      best_sse = sse;
      best = fit;
    }
  }
  std::vector<double> out;
  for (double s : scores) out.push_back(best[static_cast<std::size_t>(std::lower_bound(keys.begin(), keys.end(), s) - keys.begin())]);
  return out;
}

}  // namespace

TEST(Isotonic, MatchesExhaustiveSearch) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> len(1, 8), bit(0, 1), level(0, 4);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = len(rng);
    std::vector<double> s;
    std::vector<int> y;
    for (int i = 0; i < n; ++i) {
      s.push_back(level(rng) / 4.0);  // few levels so ties occur
      y.push_back(bit(rng));
    }
    const auto map = isotonic_fit(s, y);
    const auto expect = brute_force_isotonic(s, y);
    for (int i = 0; i < n; ++i) EXPECT_NEAR(map(s[static_cast<std::size_t>(i)]), expect[static_cast<std::size_t>(i)], 1e-9);
  }
}

TEST(Isotonic, MonotoneAndMeanPreserving) {
  const auto ds = regretcal::testing::random_ds(4, 2000);
  const auto s = ds.scores();
  const auto y = ds.labels();
  const auto map = isotonic_fit(s, y);
  EXPECT_TRUE(map.is_monotone());
  double fitted = 0.0, labels = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    fitted += map(s[i]);
    labels += y[i];
  }
  EXPECT_NEAR(fitted, labels, 1e-9);
  EXPECT_THROW(isotonic_fit(std::vector<double>{}, std::vector<int>{}), Error);
}

TEST(Platt, RecoversLogisticModel) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> s;
  std::vector<int> y;
  for (int i = 0; i < 50000; ++i) {
    const double x = u(rng);
    s.push_back(x);
    y.push_back(u(rng) < 1.0 / (1.0 + std::exp(-(4.0 * x - 2.5))) ? 1 : 0);
  }
  const auto fit = platt_fit(s, y);
  EXPECT_TRUE(fit.converged);
  EXPECT_NEAR(fit.map.slope, 4.0, 0.2);
  EXPECT_NEAR(fit.map.intercept, -2.5, 0.15);
}

TEST(Platt, SeparableDataDoesNotConverge) {
  const auto fit = platt_fit(std::vector<double>{0.1, 0.2, 0.8, 0.9}, std::vector<int>{0, 0, 1, 1});
  EXPECT_FALSE(fit.converged);
  EXPECT_GT(fit.map(0.9), fit.map(0.1));
  EXPECT_THROW(platt_fit(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), Error);
}

TEST(Histogram, BinMeans) {
  const std::vector<double> s{0.1, 0.2, 0.3, 0.6, 0.7, 0.8};
  const std::vector<int> y{0, 0, 1, 1, 1, 0};
  const auto map = histogram_binning_fit(s, y, 2);
  EXPECT_NEAR(map(0.15), 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(map(0.75), 2.0 / 3.0, 1e-12);
}

TEST(ThresholdAdjustment, DecisionsMatchCurve) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const auto ds = regretcal::testing::random_ds(100 + static_cast<std::uint64_t>(trial), 300, 20);
    const auto curve = isotonic_fit(ds.scores(), ds.labels());
    const double t_star = u(rng);
    const auto adj = adjust_threshold(curve, t_star);
    for (int k = 0; k < 200; ++k) {
      const double s = u(rng);
      EXPECT_EQ(s >= adj.threshold, curve(s) >= t_star);
    }
    for (double s : ds.scores()) EXPECT_EQ(s >= adj.threshold, curve(s) >= t_star);
  }
  const auto low = MonotoneStepMap{{0.0, 0.5}, {0.1, 0.2}};
  const auto adj = adjust_threshold(low, 0.9);
  EXPECT_FALSE(adj.reaches);
  EXPECT_FALSE(1.0 >= adj.threshold);
  EXPECT_THROW(adjust_threshold(MonotoneStepMap{{0.0, 0.5}, {0.6, 0.2}}, 0.5), Error);
}

TEST(Logistic, RecoversWeights) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ScoredSample> s;
  for (int i = 0; i < 20000; ++i) {
    const double a = g(rng), b = g(rng);
    const double p = 1.0 / (1.0 + std::exp(-(1.5 * a - 1.0 * b + 0.3)));
    s.push_back({0.5, u(rng) < p ? 1 : 0, {a, b}});
  }
  const ScoredDataset ds(std::move(s));
  const auto m = logistic_refit(ds, LogisticOptions{1e-6, 100, 1e-10});
  EXPECT_NEAR(m.weights[0], 1.5, 0.08);
  EXPECT_NEAR(m.weights[1], -1.0, 0.08);
  EXPECT_NEAR(m.bias, 0.3, 0.08);
  EXPECT_THROW(logistic_refit(make_ds({0.5, 0.5}, {0, 1})), Error);
  EXPECT_THROW(logistic_refit(make_ds({0.5, 0.5}, {1, 1}, {{1.0}, {2.0}})), Error);
}

TEST(Maps, JsonRoundTripPreservesOutputs) {
  const auto ds = regretcal::testing::random_ds(9, 500);
  const auto s = ds.scores();
  const auto y = ds.labels();
  const std::vector<RecalibrationMap> maps{isotonic_fit(s, y), platt_fit(s, y).map, histogram_binning_fit(s, y, 15)};
  for (const auto& m : maps) {
    const nlohmann::json j = m;
    const auto back = nlohmann::json::parse(j.dump()).get<RecalibrationMap>();
    const auto a = apply(m, ds), b = apply(back, ds);
    for (std::size_t i = 0; i < ds.size(); ++i) EXPECT_EQ(a[i].score, b[i].score);
  }
  EXPECT_THROW(apply(LinearLogitModel{{1.0}, 0.0}, ds), Error);
}
