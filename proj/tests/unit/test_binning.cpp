#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "helpers.hpp"
#include "regretcal/binning.hpp"

using namespace regretcal;

TEST(EqualMass, DistinctScoresGiveBalancedBins) {
  for (std::size_t n : {15u, 100u, 1001u}) {
    for (std::size_t k : {1u, 2u, 7u, 15u}) {
      const auto ds = regretcal::testing::random_ds(n + k, n);
      const auto b = fit_equal_mass_bins(ds.scores(), k);
      const auto curve = estimate_calibration_curve(ds, b);
      std::size_t lo = n, hi = 0;
      for (const auto& bin : curve.bins) {
        lo = std::min(lo, bin.mass);
        hi = std::max(hi, bin.mass);
      }
      EXPECT_EQ(b.n_bins(), std::min(n, k));
      EXPECT_LE(hi - lo, 1u) << "n=" << n << " k=" << k;
    }
  }
}

TEST(EqualMass, TiedScoresStayTogether) {
  std::vector<double> s(50, 0.5);
  EXPECT_EQ(fit_equal_mass_bins(s, 15).n_bins(), 1u);

  // 0.1 x2, 0.2 x5, 0.3 x1: the median cut (rank 4) sits inside the 0.2 block
  // at distance 2 from its lower edge and 3 from its upper edge
  const std::vector<double> t{0.1, 0.1, 0.2, 0.2, 0.2, 0.2, 0.2, 0.3};
  const auto b = fit_equal_mass_bins(t, 2);
  ASSERT_EQ(b.n_bins(), 2u);
  EXPECT_DOUBLE_EQ(b.interior_edges()[0], 0.2);
}

TEST(EqualMass, Errors) {
  EXPECT_THROW(fit_equal_mass_bins(std::vector<double>{}, 3), Error);
  EXPECT_THROW(fit_equal_mass_bins(std::vector<double>{0.5}, 0), Error);
}

TEST(Binning, BinBoundaries) {
  const EqualMassBinning b({0.25, 0.5});
  EXPECT_EQ(b.bin_of(0.0), 0u);
  EXPECT_EQ(b.bin_of(std::nextafter(0.25, 0.0)), 0u);
  EXPECT_EQ(b.bin_of(0.25), 1u);
  EXPECT_EQ(b.bin_of(1.0), 2u);
  EXPECT_EQ(b.bin_of(-0.5), 0u);
  EXPECT_EQ(b.bin_of(1.5), 2u);
  EXPECT_DOUBLE_EQ(b.lo(1), 0.25);
  EXPECT_DOUBLE_EQ(b.hi(2), 1.0);
  EXPECT_THROW(EqualMassBinning({0.5, 0.5}), Error);
}

TEST(Binning, JsonRoundTrip) {
  const EqualMassBinning b({0.1, 0.30000000000000004, 0.9});
  const nlohmann::json j = b;
  EXPECT_EQ(j.get<EqualMassBinning>(), b);
}

TEST(Curve, MeansPerBin) {
  const auto ds = regretcal::testing::make_ds({0.1, 0.2, 0.6, 0.8}, {0, 1, 1, 1});
  const EqualMassBinning b({0.5});
  const auto c = estimate_calibration_curve(ds, b);
  EXPECT_EQ(c.n, 4u);
  EXPECT_DOUBLE_EQ(c.bins[0].mean_label, 0.5);
  EXPECT_DOUBLE_EQ(c.bins[0].mean_score, 0.15000000000000002);
  EXPECT_DOUBLE_EQ(c.at(0.9), 1.0);

  const auto empty = estimate_calibration_curve(regretcal::testing::make_ds({0.1}, {0}), b);
  EXPECT_TRUE(std::isnan(empty.bins[1].mean_label));
  std::ostringstream os;
  write_curve_csv(os, empty);
  EXPECT_EQ(os.str(), "bin,lo,hi,mass,mean_score,mean_label\n0,0,0.5,1,0.1,0\n1,0.5,1,0,,\n");
}
