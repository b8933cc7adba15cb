#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "helpers.hpp"
#include "regretcal/dataset.hpp"

using namespace regretcal;
using regretcal::testing::make_ds;
using regretcal::testing::random_ds;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::NonFinite;
}

}  // namespace

TEST(Csv, ReadsFeaturesInIndexOrder) {
  std::istringstream in("\xEF\xBB\xBF" "f1,score,y,f0\n0.5,0.25,1,7\n\n-1,0.75,0,8\n");
  const auto ds = read_csv(in);
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds.feature_dim(), 2u);
  EXPECT_DOUBLE_EQ(ds[0].features[0], 7.0);
  EXPECT_DOUBLE_EQ(ds[0].features[1], 0.5);
  EXPECT_EQ(ds[1].label, 0);
  EXPECT_DOUBLE_EQ(ds[1].score, 0.75);
}

TEST(Csv, MissingScoreColumnIsNamed) {
  std::istringstream in("y,prob\n1,0.5\n");
  try {
    read_csv(in);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingColumn);
    EXPECT_NE(std::string(e.what()).find("score"), std::string::npos);
  }
}

TEST(Csv, ErrorsCarryFileLine) {
  std::istringstream in("y,score\n1,0.5\n1,oops\n");
  try {
    read_csv(in);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedRow);
    ASSERT_TRUE(e.line());
    EXPECT_EQ(*e.line(), 3u);
  }
}

TEST(Csv, RejectsBadValues) {
  EXPECT_EQ(code_of([] { std::istringstream in("y,score\n2,0.5\n"); read_csv(in); }), ErrorCode::LabelNotBinary);
  EXPECT_EQ(code_of([] { std::istringstream in("y,score\n1,1.5\n"); read_csv(in); }), ErrorCode::ScoreOutOfRange);
  EXPECT_EQ(code_of([] { std::istringstream in("y,score\n1\n"); read_csv(in); }), ErrorCode::MalformedRow);
  EXPECT_EQ(code_of([] { load_csv("/nonexistent/file.csv"); }), ErrorCode::FileNotFound);
}

TEST(Csv, RoundTripIsExact) {
  const auto ds = make_ds({0.1, 1.0 / 3.0, 0.9999999999999999}, {0, 1, 1}, {{1.5}, {-2.0}, {1e-300}});
  std::stringstream buf;
  write_csv(buf, ds);
  const auto back = read_csv(buf);
  ASSERT_EQ(back.size(), ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_EQ(back[i].score, ds[i].score);
    EXPECT_EQ(back[i].label, ds[i].label);
    EXPECT_EQ(back[i].features, ds[i].features);
  }
}

TEST(Jsonl, RoundTripAndDimensionCheck) {
  const auto ds = make_ds({0.2, 0.8}, {0, 1}, {{1.0, 2.0}, {3.0, 4.0}});
  std::stringstream buf;
  write_jsonl(buf, ds);
  const auto back = read_jsonl(buf);
  EXPECT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].features, (std::vector<double>{3.0, 4.0}));

  std::istringstream bad("{\"y\":1,\"score\":0.5,\"features\":[1]}\n{\"y\":0,\"score\":0.5,\"features\":[1,2]}\n");
  EXPECT_EQ(code_of([&] { read_jsonl(bad); }), ErrorCode::InconsistentFeatureDim);
}

TEST(Dataset, ValidatesSamples) {
  EXPECT_EQ(code_of([] { make_ds({0.5, 0.5}, {0, 1}, {{1.0}, {}}); }), ErrorCode::InconsistentFeatureDim);
  EXPECT_EQ(code_of([] { make_ds({-0.1}, {0}); }), ErrorCode::ScoreOutOfRange);
  EXPECT_EQ(code_of([] { validate(ScoredDataset{}); }), ErrorCode::EmptyDataset);
}

TEST(Split, PartitionsRowsDeterministically) {
  const auto ds = random_ds(1, 101);
  const auto a = split(ds, SplitSpec{0.5, 0.5, 42, true});
  const auto b = split(ds, SplitSpec{0.5, 0.5, 42, true});
  EXPECT_EQ(a.fit.size() + a.eval.size(), ds.size());
  EXPECT_EQ(a.fit1.size() + a.fit2.size(), a.fit.size());
  EXPECT_FALSE(ScoredDataset::overlaps(a.fit, a.eval));
  EXPECT_FALSE(ScoredDataset::overlaps(a.fit1, a.fit2));
  EXPECT_TRUE(ScoredDataset::overlaps(a.fit, a.fit1));
  std::set<std::size_t> all;
  for (auto r : a.fit.row_ids()) all.insert(r);
  for (auto r : a.eval.row_ids()) all.insert(r);
  EXPECT_EQ(all.size(), ds.size());
  EXPECT_TRUE(std::equal(a.eval.row_ids().begin(), a.eval.row_ids().end(), b.eval.row_ids().begin()));
  EXPECT_TRUE(std::is_sorted(a.eval.row_ids().begin(), a.eval.row_ids().end()));

  const auto c = split(ds, SplitSpec{0.5, 0.5, 43, true});
  EXPECT_FALSE(std::equal(a.eval.row_ids().begin(), a.eval.row_ids().end(), c.eval.row_ids().begin()));
}

TEST(Split, RejectsBadSpecs) {
  const auto ds = random_ds(2, 10);
  EXPECT_EQ(code_of([&] { split(ds, SplitSpec{0.6, 0.6, 0, false}); }), ErrorCode::InvalidSplit);
  EXPECT_EQ(code_of([&] { split(ds, SplitSpec{0.0, 1.0, 0, false}); }), ErrorCode::InvalidSplit);
  EXPECT_EQ(code_of([] { split(make_ds({0.5, 0.5, 0.5}, {0, 1, 0}), SplitSpec{0.5, 0.5, 0, true}); }),
            ErrorCode::TooFewSamples);
}

TEST(Dataset, DifferentSourcesNeverOverlap) {
  const auto a = random_ds(3, 5);
  const auto b = random_ds(3, 5);
  EXPECT_FALSE(ScoredDataset::overlaps(a, b));
  EXPECT_TRUE(ScoredDataset::overlaps(a, a));
}
