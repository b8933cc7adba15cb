#include <gtest/gtest.h>

#include <random>

#include "helpers.hpp"
#include "regretcal/decision.hpp"
#include "regretcal/pipeline.hpp"

using namespace regretcal;

TEST(Utility, OptimalThreshold) {
  EXPECT_DOUBLE_EQ(optimal_threshold(UtilityMatrix{}), 0.5);
  // u00 - u10 = 3, UΔ = 3 + 1 = 4
  EXPECT_DOUBLE_EQ(optimal_threshold(UtilityMatrix{2.0, -1.0, -1.0, 0.0}), 0.75);
  EXPECT_THROW(optimal_threshold(UtilityMatrix{0.0, 1.0, 1.0, 0.0}), Error);
}

TEST(Utility, FromThresholdRoundTrips) {
  for (double t : default_tstar_grid()) {
    const auto u = utility_matrix_from_tstar(t);
    EXPECT_NEAR(optimal_threshold(u), t, 1e-12);
    EXPECT_NEAR(u.u_delta(), 1.0 / t, 1e-9);
    const auto v = utility_matrix_from_tstar(t, 2.5);
    EXPECT_NEAR(optimal_threshold(v), t, 1e-12);
    EXPECT_NEAR(v.u_delta(), 2.5, 1e-12);
  }
  EXPECT_THROW(utility_matrix_from_tstar(0.0), Error);
  EXPECT_THROW(utility_matrix_from_tstar(1.0), Error);
}

TEST(Rule, TiesDecideOne) {
  EXPECT_EQ(ThresholdRule{0.5}.decide(0.5), 1);
  EXPECT_EQ(ThresholdRule{0.5}.decide(std::nextafter(0.5, 0.0)), 0);
}

TEST(PointwiseEu, LemmaFormMatchesDirect) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3.0, 3.0), p(0.0, 1.0);
  for (int k = 0; k < 1000; ++k) {
    UtilityMatrix m{u(rng), u(rng), u(rng), u(rng)};
    if (!(m.u_delta() > 0.0)) continue;
    const double t = (m.u00 - m.u10) / m.u_delta();
    if (!(t >= 0.0 && t <= 1.0)) continue;
    const double f = p(rng);
    for (int d : {0, 1}) EXPECT_NEAR(pointwise_eu_exact(f, m, d), pointwise_eu_direct(f, m, d), 1e-12);
  }
}

TEST(EmpiricalEu, CountsUtilities) {
  const auto ds = regretcal::testing::make_ds({0.2, 0.7, 0.9}, {1, 0, 1});
  // decisions 0, 1, 1 -> U01 + U10 + U11
  const UtilityMatrix u{1.0, -2.0, -3.0, 4.0};
  EXPECT_DOUBLE_EQ(empirical_eu(ds, u, ThresholdRule{0.5}), (-2.0 - 3.0 + 4.0) / 3.0);
}
