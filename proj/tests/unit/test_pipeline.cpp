#include <gtest/gtest.h>

#include <cmath>

#include "regretcal/pipeline.hpp"

using namespace regretcal;

TEST(Pearson, KnownValues) {
  EXPECT_NEAR(pearson_r2({1, 2, 3, 4}, {2, 4, 6, 8}), 1.0, 1e-15);
  EXPECT_NEAR(pearson_r2({1, 2, 3, 4}, {8, 6, 4, 2}), 1.0, 1e-15);
  // r = 0.8 for this pair
  EXPECT_NEAR(pearson_r2({1, 2, 3, 4, 5}, {2, 1, 4, 3, 5}), 0.64, 1e-12);
  EXPECT_TRUE(std::isnan(pearson_r2({1, 1, 1}, {1, 2, 3})));
  EXPECT_THROW(pearson_r2({1, 2}, {1}), Error);
}

TEST(Config, Validation) {
  RunConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.utilities().size(), default_tstar_grid().size());
  c.bins = 0;
  EXPECT_THROW(c.validate(), Error);
  c = RunConfig{};
  c.tstars = {0.5, 1.0};
  EXPECT_THROW(c.validate(), Error);
  c = RunConfig{};
  c.fit_fraction = 1.0;
  EXPECT_THROW(c.validate(), Error);
  EXPECT_EQ(parse_method("glar"), Method::Glar);
  EXPECT_THROW(parse_method("boosting"), Error);
}

TEST(Report, Deterministic) {
  const auto ds = sample(random_oracle(12, 15, 3), 4000, 12);
  RunConfig cfg;
  cfg.tstars = {0.3, 0.5};
  const nlohmann::json a = run_report(ds, cfg).diagnosis;
  const nlohmann::json b = run_report(ds, cfg).diagnosis;
  EXPECT_EQ(a.dump(), b.dump());
  EXPECT_EQ(a["reports"].size(), 2u);
}

TEST(Posttrain, ThresholdAndIsotonicAgree) {
  const auto o = distorted_oracle(3, 100, 1, 0.0, 0.4, 2.5, 1.0);
  const auto ds = sample(o, 10000, 3);
  RunConfig cfg;
  cfg.tstars = {0.2, 0.5, 0.7};
  const auto folds = make_folds(ds, cfg);
  const auto us = cfg.utilities();
  const auto iso = run_method(Method::Isotonic, folds, cfg, us);
  const auto thr = run_method(Method::Threshold, folds, cfg, us);
  for (std::size_t i = 0; i < us.size(); ++i) EXPECT_NEAR(iso.eu_after[i], thr.eu_after[i], 1e-12);
  const auto plain = ScoredDataset(std::vector<ScoredSample>{{0.2, 0, {}}, {0.7, 1, {}}, {0.4, 1, {}}, {0.9, 1, {}}});
  EXPECT_THROW(run_method(Method::Glar, PosttrainFolds{plain, plain, plain, plain}, cfg, us), Error);
}

TEST(Posttrain, RecalibrationHelpsDistortedScores) {
  const auto o = distorted_oracle(5, 100, 1, 0.0, 0.3, 0.3, 1.0);
  const auto ds = sample(o, 20000, 5);
  RunConfig cfg;
  cfg.tstars = {0.5};
  const auto exact = exact_regrets(o, utility_matrix_from_tstar(0.5), 0.5);
  ASSERT_GT(exact.rcl, 0.01);
  const auto out = run_method(Method::Isotonic, make_folds(ds, cfg), cfg, cfg.utilities());
  EXPECT_NEAR(out.gain[0], exact.rcl, 0.03);
}

TEST(Suite, LoadsGenerators) {
  const auto j = nlohmann::json::parse(R"({"name":"s","methods":["isotonic","threshold"],
    "generators":[{"kind":"distorted","count":4,"seed":10,"n":500,"tstars":[0.2,0.6],"levels":20}]})");
  const auto s = load_suite(j);
  ASSERT_EQ(s.runs.size(), 4u);
  EXPECT_EQ(s.runs[1].seed, 11u);
  EXPECT_EQ(s.runs[1].t_star, 0.6);
  EXPECT_EQ(s.runs[2].t_star, 0.2);
  EXPECT_THROW(load_suite(nlohmann::json::parse(R"({"generators":[]})")), Error);
  EXPECT_THROW(load_suite(nlohmann::json::parse(R"({"methods":[],"generators":[{"count":1}]})")), Error);
}

TEST(Suite, SweepIsDeterministic) {
  const auto s = load_suite(nlohmann::json::parse(
      R"({"generators":[{"kind":"distorted","count":6,"seed":1,"n":2000,"levels":30}]})"));
  RunConfig cfg;
  const auto a = run_sweep(s, cfg);
  const auto b = run_sweep(s, cfg);
  ASSERT_EQ(a.rows.size(), 6u);
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].estimators, b.rows[i].estimators);
    EXPECT_EQ(a.rows[i].gains, b.rows[i].gains);
  }
  EXPECT_EQ(sweep_r2(a, "rcl_hat", "isotonic"), sweep_r2(b, "rcl_hat", "isotonic"));
}
