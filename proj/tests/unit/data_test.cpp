#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "sfnn/data.hpp"
#include "sfnn/error.hpp"
#include "test_util.hpp"

using namespace sfnn;

namespace {

RawSeriesTable parse(const std::string& text) {
  std::istringstream in(text);
  return parse_csv(in, "test.csv");
}

std::string message_of(const std::string& text) {
  try {
    parse(text);
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

NormalizedDataset ramp_dataset(std::size_t t, std::size_t n, const SplitSpec& split) {
  Matrix v(t, n);
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t s = 0; s < n; ++s) v(i, s) = static_cast<double>(100 * s + i);
  return dataset_from_normalized(std::move(v), split);
}

}  // namespace

TEST(Csv, ShapeWithoutDateColumn) {
  const auto t = parse("a,b\n1,2\n3,4\n5,6\n");
  EXPECT_EQ(t.length(), 3u);
  EXPECT_EQ(t.n_series(), 2u);
  EXPECT_TRUE(t.timestamps.empty());
  EXPECT_EQ(t.values(2, 1), 6.0);
}

TEST(Csv, DateColumnBecomesTimestamps) {
  const auto t = parse("\xEF\xBB\xBF" "Date,x,y,z\n2020-01-01 00:00,1,2,3\n2020-01-01 01:00,4,5,6\n");
  EXPECT_EQ(t.n_series(), 3u);
  ASSERT_EQ(t.timestamps.size(), 2u);
  EXPECT_EQ(t.timestamps[1], "2020-01-01 01:00");
  EXPECT_EQ(t.names, (std::vector<std::string>{"x", "y", "z"}));
}

TEST(Csv, NumericTimestampsOrderByValue) {
  const auto t = parse("date,a\n9,1\n10,2\n100,3\n");
  EXPECT_EQ(t.timestamps.back(), "100");
}

TEST(Csv, NonNumericCellCitesFileRow) {
  // Line 1 is the header, so the fourth data row is row 5.
  const std::string text = "a,b\n1,2\n3,4\n5,6\n7,abc\n";
  EXPECT_THROW(parse(text), ParseError);
  EXPECT_NE(message_of(text).find("row 5"), std::string::npos) << message_of(text);
}

TEST(Csv, StructuralErrors) {
  EXPECT_THROW(parse(""), EmptyFile);
  EXPECT_THROW(parse("a,b\n"), EmptyFile);
  EXPECT_THROW(parse("a,b\n1,2\n3\n"), RaggedRows);
  EXPECT_THROW(parse("a\n1\n"), TooShort);
  EXPECT_THROW(parse("a\n1\nnan\n"), ParseError);
  EXPECT_THROW(parse("date,a\n2,1\n1,2\n"), ParseError);
  EXPECT_THROW(parse("date,a\n2020-01-02,1\n2020-01-01,2\n"), ParseError);
  EXPECT_THROW(load_csv("/nonexistent/file.csv"), IoError);
}

TEST(Csv, WriteThenReadRoundTrips) {
  const auto dir = sfnn::testing::scratch_dir();
  RawSeriesTable t;
  t.names = {"u", "v"};
  t.timestamps = {"t1", "t2", "t3"};
  t.values = sfnn::testing::random_matrix(3, 2, 5);
  write_csv(dir / "x.csv", t);
  const auto back = load_csv(dir / "x.csv");
  EXPECT_EQ(back.names, t.names);
  EXPECT_EQ(back.timestamps, t.timestamps);
  EXPECT_EQ(back.values, t.values);
}

TEST(Split, ParseNormalizes) {
  const auto s = SplitSpec::parse("6:2:2");
  EXPECT_DOUBLE_EQ(s.train, 0.6);
  EXPECT_DOUBLE_EQ(s.val, 0.2);
  EXPECT_THROW(SplitSpec::parse("1:2"), InvalidSplit);
  EXPECT_THROW(SplitSpec::parse("1:0:2"), InvalidSplit);
  EXPECT_THROW(SplitSpec::parse("a:b:c"), InvalidSplit);
}

TEST(Split, PublishedRatiosOnTenRows) {
  const auto ett = compute_boundaries(10, SplitSpec{0.6, 0.2, 0.2});
  EXPECT_EQ(ett.train_end, 6u);
  EXPECT_EQ(ett.val_end - ett.train_end, 2u);
  EXPECT_EQ(ett.total - ett.val_end, 2u);
  const auto other = compute_boundaries(10, SplitSpec{0.7, 0.1, 0.2});
  EXPECT_EQ(other.train_end, 7u);
  EXPECT_EQ(other.val_end, 8u);
  EXPECT_THROW(compute_boundaries(3, SplitSpec{0.7, 0.1, 0.2}), InvalidSplit);
}

TEST(Split, SegmentsPartitionTheSeries) {
  const auto ds = ramp_dataset(57, 2, SplitSpec{0.7, 0.1, 0.2});
  const auto sp = split_chronological(ds);
  EXPECT_EQ(sp.train.range.begin, 0u);
  EXPECT_EQ(sp.train.range.end, sp.val.range.begin);
  EXPECT_EQ(sp.val.range.end, sp.test.range.begin);
  EXPECT_EQ(sp.test.range.end, 57u);
}

TEST(ZScore, HandComputedPopulationStd) {
  RawSeriesTable t;
  t.names = {"x"};
  t.values = Matrix(5, 1, std::vector<double>{1, 2, 3, 10, 20});
  const auto ds = zscore_fit_transform(t, SplitSpec{0.6, 0.2, 0.2});
  EXPECT_DOUBLE_EQ(ds.train_means[0], 2.0);
  EXPECT_NEAR(ds.train_stds[0], std::sqrt(2.0 / 3.0), 1e-15);
  EXPECT_NEAR((*ds.values)(0, 0), -1.2247448713915890, 1e-12);
  EXPECT_NEAR((*ds.values)(1, 0), 0.0, 1e-12);
  EXPECT_NEAR((*ds.values)(2, 0), 1.2247448713915890, 1e-12);
  // Later rows use the training statistics only.
  EXPECT_NEAR((*ds.values)(3, 0), 8.0 / std::sqrt(2.0 / 3.0), 1e-12);
  EXPECT_NEAR(ds.denormalize(*ds.values)(4, 0), 20.0, 1e-12);
}

TEST(ZScore, TrainSegmentStandardizedAndIdempotent) {
  RawSeriesTable t;
  t.names = {"a", "b", "c"};
  t.values = sfnn::testing::random_matrix(200, 3, 9, 4.0);
  for (std::size_t i = 0; i < 200; ++i) t.values(i, 1) += 50.0;
  const auto ds = zscore_fit_transform(t, SplitSpec{0.7, 0.1, 0.2});
  for (std::size_t s = 0; s < 3; ++s) {
    double m = 0.0, v = 0.0;
    for (std::size_t i = 0; i < 140; ++i) m += (*ds.values)(i, s);
    m /= 140.0;
    for (std::size_t i = 0; i < 140; ++i) v += ((*ds.values)(i, s) - m) * ((*ds.values)(i, s) - m);
    EXPECT_NEAR(m, 0.0, 1e-9);
    EXPECT_NEAR(v / 140.0, 1.0, 1e-9);
  }
  RawSeriesTable again{t.names, {}, *ds.values};
  const auto ds2 = zscore_fit_transform(again, SplitSpec{0.7, 0.1, 0.2});
  for (std::size_t i = 0; i < ds.values->size(); ++i) {
    EXPECT_NEAR(ds2.values->data()[i], ds.values->data()[i], 1e-9);
  }
}

TEST(ZScore, ConstantSeriesRejected) {
  RawSeriesTable t;
  t.names = {"flat"};
  t.values = Matrix(10, 1, 3.0);
  EXPECT_THROW(zscore_fit_transform(t, SplitSpec{}), DegenerateSeries);
}

TEST(KFold, BlocksOfTwenty) {
  const auto folds = kfold_oos_splits({0, 100}, 4);
  ASSERT_EQ(folds.size(), 4u);
  EXPECT_EQ(folds[0].train, (IndexRange{0, 20}));
  EXPECT_EQ(folds[0].val, (IndexRange{20, 40}));
  EXPECT_EQ(folds[3].train, (IndexRange{0, 80}));
  EXPECT_EQ(folds[3].val, (IndexRange{80, 100}));
  for (const auto& f : folds) EXPECT_LE(f.train.end, f.val.begin);
}

TEST(KFold, SingleHoldoutAndRemainder) {
  const auto one = kfold_oos_splits({0, 10}, 1);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].train, (IndexRange{0, 5}));
  EXPECT_EQ(one[0].val, (IndexRange{5, 10}));
  const auto rem = kfold_oos_splits({3, 26}, 2);  // 23 rows, blocks of 7, remainder to the last
  EXPECT_EQ(rem[1].val, (IndexRange{17, 26}));
  EXPECT_THROW(kfold_oos_splits({0, 2}, 4), TooShort);
}

TEST(Windows, CountAndPlacementWithoutContext) {
  auto values = std::make_shared<const Matrix>(Matrix(5, 1, std::vector<double>{0, 1, 2, 3, 4}));
  const auto w = make_windows(SegmentView{values, {0, 5}}, 2, 1, false);
  EXPECT_EQ(w.origins, (std::vector<std::size_t>{2, 3, 4}));
  EXPECT_EQ(w.input(0), Matrix(2, 1, std::vector<double>{0, 1}));
  EXPECT_EQ(w.target(2), Matrix(1, 1, std::vector<double>{4}));
  EXPECT_THROW(make_windows(SegmentView{std::make_shared<const Matrix>(9, 1), {0, 9}}, 5, 5, false), TooShort);
}

TEST(Windows, ContextReachesBackButTargetsStayInside) {
  const auto ds = ramp_dataset(100, 2, SplitSpec{0.7, 0.1, 0.2});
  const auto sp = split_chronological(ds);
  const auto w = make_windows(sp.val, 12, 3, true);
  ASSERT_GT(w.count(), 0u);
  EXPECT_EQ(w.origins.front(), sp.val.range.begin);
  for (auto o : w.origins) {
    EXPECT_GE(o, sp.val.range.begin);
    EXPECT_LE(o + 3, sp.val.range.end);
  }
  EXPECT_EQ(w.count(), sp.val.length() - 3 + 1);
  // The first input is the 12 rows before the segment.
  EXPECT_EQ(w.input(0)(0, 0), static_cast<double>(sp.val.range.begin - 12));
}

TEST(Windows, GatherMatchesPerWindowSlices) {
  const auto ds = ramp_dataset(40, 3, SplitSpec{0.7, 0.1, 0.2});
  const auto w = make_windows(split_chronological(ds).train, 5, 2, false);
  const std::vector<std::size_t> picks{4, 0, 7};
  const Matrix in = w.gather_inputs(picks), out = w.gather_targets(picks);
  for (std::size_t k = 0; k < picks.size(); ++k) {
    const Matrix a = w.input(picks[k]), b = w.target(picks[k]);
    for (std::size_t s = 0; s < 3; ++s) {
      for (std::size_t r = 0; r < 5; ++r) EXPECT_EQ(in(r, k * 3 + s), a(r, s));
      for (std::size_t r = 0; r < 2; ++r) EXPECT_EQ(out(r, k * 3 + s), b(r, s));
    }
  }
}
