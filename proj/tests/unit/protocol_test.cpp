#include <cmath>
#include <fstream>
#include <numbers>

#include <gtest/gtest.h>

#include "sfnn/error.hpp"
#include "sfnn/protocol.hpp"
#include "test_util.hpp"

using namespace sfnn;

namespace {

TrialResult trial(std::size_t l, std::size_t h, std::uint64_t seed, double val, double test) {
  TrialResult t;
  t.lookback = l;
  t.horizon = h;
  t.seed = seed;
  t.val_mse = val;
  t.test_mse = test;
  return t;
}

NormalizedDataset noisy_sine(std::size_t t, std::uint64_t seed) {
  SeededRng rng(seed);
  Matrix v(t, 2);
  for (std::size_t i = 0; i < t; ++i) {
    v(i, 0) = std::sin(0.3 * static_cast<double>(i)) + 0.1 * rng.standard_normal();
    v(i, 1) = std::cos(0.2 * static_cast<double>(i)) + 0.1 * rng.standard_normal();
  }
  return dataset_from_normalized(std::move(v), SplitSpec{0.7, 0.1, 0.2});
}

GridSpec tiny_grid() {
  GridSpec g;
  g.dataset_name = "tiny";
  g.period = 8;
  g.lookbacks = {8, 16};
  g.horizons = {4};
  g.n_seeds = 3;
  return g;
}

SFNNConfig tiny_model() {
  SFNNConfig c;
  c.hidden_width = 16;
  c.num_blocks = 1;
  return c;
}

TrainConfig tiny_training() {
  TrainConfig tc;
  tc.max_epochs = 4;
  tc.patience = 2;
  return tc;
}

std::vector<std::string> lines_without_timing(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto pos = line.find(",\"wall_time\"");
    out.push_back(line.substr(0, pos));
  }
  return out;
}

}  // namespace

TEST(Grids, PublishedLookbackGrids) {
  const auto m1 = builtin_grid("ETTm1");
  EXPECT_EQ(m1.period, 96u);
  EXPECT_EQ(m1.lookbacks, (std::vector<std::size_t>{96, 192, 384, 672, 1344}));
  EXPECT_DOUBLE_EQ(m1.split.train, 0.6);
  const auto ili = builtin_grid("ili");
  EXPECT_EQ(ili.period, 52u);
  EXPECT_EQ(ili.lookbacks, (std::vector<std::size_t>{52, 104, 208}));
  EXPECT_EQ(ili.horizons, (std::vector<std::size_t>{24, 36, 48, 60}));
  const auto ex = builtin_grid("Exchange rate");
  EXPECT_EQ(ex.lookbacks, (std::vector<std::size_t>{5, 10, 20, 40, 80, 160, 320}));
  EXPECT_DOUBLE_EQ(builtin_grid("Traffic").split.train, 0.7);
  EXPECT_EQ(builtin_grid("Solar Energy").lookbacks, (std::vector<std::size_t>{144, 288, 576, 1008}));
  for (const auto& name : builtin_dataset_names()) EXPECT_NO_THROW(builtin_grid(name).validate());
}

TEST(Grids, UnknownNameListsKnownOnes) {
  try {
    builtin_grid("M4");
    FAIL();
  } catch (const UnknownDataset& e) {
    EXPECT_NE(std::string(e.what()).find("ETTh1"), std::string::npos);
  }
}

TEST(Ledger, JsonLineRoundTrip) {
  TrialResult t = trial(96, 192, 4, 0.25, 0.375);
  t.epochs_run = 17;
  t.config.hidden_width = 128;
  t.config.set_modules("center,ln");
  t.train_config.learning_rate = 5e-4;
  const auto back = trial_from_json_line(to_json_line(t));
  EXPECT_EQ(back.lookback, 96u);
  EXPECT_EQ(back.seed, 4u);
  EXPECT_EQ(back.val_mse, 0.25);
  EXPECT_EQ(back.epochs_run, 17u);
  EXPECT_EQ(back.config, t.config);
  EXPECT_EQ(back.train_config, t.train_config);
  EXPECT_TRUE(back.ok());

  t.error = "TooShort: nope";
  const auto failed = trial_from_json_line(to_json_line(t));
  ASSERT_FALSE(failed.ok());
  EXPECT_EQ(*failed.error, "TooShort: nope");
  EXPECT_THROW(trial_from_json_line("{not json"), ParseError);
}

TEST(Ledger, ReloadsAndDropsTruncatedTail) {
  const auto dir = sfnn::testing::scratch_dir();
  {
    TrialLedger l(dir / "l.jsonl");
    l.append(trial(8, 4, 0, 1, 2));
    l.append(trial(8, 4, 1, 1, 2));
  }
  {
    std::ofstream out(dir / "l.jsonl", std::ios::app);
    out << "{\"model\":\"sfnn\",\"lookb";
  }
  TrialLedger again(dir / "l.jsonl");
  EXPECT_EQ(again.trials().size(), 2u);
  EXPECT_TRUE(again.contains("sfnn", 8, 4, 1));
  EXPECT_FALSE(again.contains("sfnn", 8, 4, 2));
  again.append(trial(8, 4, 2, 1, 2));
  EXPECT_EQ(TrialLedger(dir / "l.jsonl").trials().size(), 3u);
}

TEST(RunTrials, CardinalityOrderAndWorkerIndependence) {
  const auto dir = sfnn::testing::scratch_dir();
  const auto ds = noisy_sine(300, 1);
  GridSpec g = tiny_grid();
  TrialLedger serial(dir / "serial.jsonl"), parallel(dir / "parallel.jsonl");
  const auto made = run_trials(ds, g, tiny_model(), tiny_training(), serial);
  ASSERT_EQ(made.size(), 6u);
  EXPECT_EQ(made[0].lookback, 8u);
  EXPECT_EQ(made[2].seed, 2u);
  EXPECT_EQ(made[3].lookback, 16u);
  RunOptions opts;
  opts.workers = 4;
  run_trials(ds, g, tiny_model(), tiny_training(), parallel, opts);
  EXPECT_EQ(lines_without_timing(dir / "serial.jsonl"), lines_without_timing(dir / "parallel.jsonl"));
  for (const auto& t : made) {
    EXPECT_EQ(t.config.n_series, 2u);
    EXPECT_EQ(t.train_config.seed, t.seed);
  }
}

TEST(RunTrials, InterruptedSweepResumesToIdenticalLedger) {
  const auto dir = sfnn::testing::scratch_dir();
  const auto ds = noisy_sine(300, 2);
  const GridSpec g = tiny_grid();
  {
    TrialLedger full(dir / "full.jsonl");
    run_trials(ds, g, tiny_model(), tiny_training(), full);
  }
  RunOptions stop;
  stop.max_new_trials = 4;
  stop.workers = 3;
  {
    TrialLedger part(dir / "part.jsonl");
    EXPECT_EQ(run_trials(ds, g, tiny_model(), tiny_training(), part, stop).size(), 4u);
  }
  TrialLedger resumed(dir / "part.jsonl");
  EXPECT_EQ(run_trials(ds, g, tiny_model(), tiny_training(), resumed).size(), 2u);
  EXPECT_EQ(run_trials(ds, g, tiny_model(), tiny_training(), resumed).size(), 0u);
  EXPECT_EQ(lines_without_timing(dir / "full.jsonl"), lines_without_timing(dir / "part.jsonl"));
}

TEST(RunTrials, FailuresAreRecordedAndSweepContinues) {
  const auto dir = sfnn::testing::scratch_dir();
  const auto ds = noisy_sine(120, 3);
  GridSpec g = tiny_grid();
  g.lookbacks = {8, 200};  // the long look-back cannot fit the training segment
  g.n_seeds = 1;
  TrialLedger l(dir / "l.jsonl");
  const auto made = run_trials(ds, g, tiny_model(), tiny_training(), l);
  ASSERT_EQ(made.size(), 2u);
  EXPECT_TRUE(made[0].ok());
  ASSERT_FALSE(made[1].ok());
  EXPECT_NE(made[1].error->find("TooShort"), std::string::npos);
  EXPECT_EQ(select_lookback(l.trials(), SelectionMode::Fair).at(4).lookback, 8u);
}

TEST(Selection, ModesDisagreeOnConstructedTrials) {
  std::vector<TrialResult> ts;
  for (std::uint64_t s = 0; s < 3; ++s) {
    ts.push_back(trial(96, 96, s, 0.30, 0.50));  // best validation
    ts.push_back(trial(192, 96, s, 0.35, 0.40));  // best test
  }
  EXPECT_EQ(select_lookback(ts, SelectionMode::Fair).at(96).lookback, 96u);
  EXPECT_EQ(select_lookback(ts, SelectionMode::Peek).at(96).lookback, 192u);

  // Fair selection never reads test values.
  for (auto& t : ts) t.test_mse = t.lookback == 96 ? 9.0 : 0.0;
  EXPECT_EQ(select_lookback(ts, SelectionMode::Fair).at(96).lookback, 96u);
}

TEST(Selection, TiesGoToSmallerLookbackAndStatsAreSeedMoments) {
  std::vector<TrialResult> ts{trial(336, 24, 0, 0.2, 0.3), trial(168, 24, 0, 0.2, 0.3), trial(168, 24, 1, 0.2, 0.5),
                              trial(336, 24, 1, 0.2, 0.5)};
  const auto s = select_lookback(ts, SelectionMode::Fair).at(24);
  EXPECT_EQ(s.lookback, 168u);
  EXPECT_EQ(s.n, 2u);
  EXPECT_NEAR(s.mean_test, 0.4, 1e-15);
  EXPECT_NEAR(s.std_test, std::sqrt(0.02), 1e-15);
  EXPECT_THROW(select_lookback({}, SelectionMode::Peek), NoTrials);
  EXPECT_EQ(selection_mode_from_string("FAIR"), SelectionMode::Fair);
  EXPECT_THROW(selection_mode_from_string("best"), InvalidConfig);
}

TEST(Aggregate, TiesFirstCountsAndRelativeLoss) {
  const std::vector<CellSummary> cells{
      {"A", "d", 1, 1.0, 0.1, 10, 0, ""}, {"B", "d", 1, 1.0, 0.1, 10, 0, ""},   // tie -> A
      {"A", "d", 2, 2.0, 0.01, 10, 0, ""}, {"B", "d", 2, 1.0, 0.01, 10, 0, ""},  // B, significant
      {"A", "e", 1, 1.0, 0.5, 1, 0, ""},  {"B", "e", 1, 0.5, 0.5, 1, 0, ""},   // B, n = 1 -> no test
  };
  const auto s = aggregate_table(cells, "A");
  EXPECT_EQ(s.row("A").first_count, 1u);
  EXPECT_EQ(s.row("B").first_count, 2u);
  EXPECT_EQ(s.row("A").first_count + s.row("B").first_count, s.verdicts.size());
  EXPECT_EQ(s.row("B").significant_first_count, 1u);
  EXPECT_NEAR(s.row("A").avg_relative_loss, 1.0, 1e-15);
  EXPECT_NEAR(s.row("B").avg_relative_loss, (1.0 + 0.5 + 0.5) / 3.0, 1e-15);
  EXPECT_EQ(s.verdicts[0].winner, "A");
  EXPECT_FALSE(s.verdicts[2].significant);

  const auto md = render_markdown(s);
  EXPECT_NE(md.find("**1.0000 ± 0.0100** †"), std::string::npos) << md;
  EXPECT_NE(md.find("1st Count"), std::string::npos);
}

TEST(Aggregate, SingleModelAndMissingCells) {
  const std::vector<CellSummary> one{{"A", "d", 1, 1.0, 0.1, 10, 0, ""}, {"A", "d", 2, 3.0, 0.1, 10, 0, ""}};
  const auto s = aggregate_table(one, "A");
  EXPECT_EQ(s.row("A").first_count, 2u);
  EXPECT_DOUBLE_EQ(s.row("A").avg_relative_loss, 1.0);
  const std::vector<CellSummary> gap{{"A", "d", 1, 1.0, 0.1, 10, 0, ""}, {"B", "d", 2, 1.0, 0.1, 10, 0, ""}};
  EXPECT_THROW(aggregate_table(gap, "A"), MissingCell);
  EXPECT_THROW(aggregate_table(one, "Z"), MissingCell);
}

TEST(Aggregate, PublishedPeekTableCounts) {
  const auto s = aggregate_table(load_cell_table(std::filesystem::path(SFNN_DATA_DIR) / "table1_peek.csv"), "SFNN");
  ASSERT_EQ(s.models, (std::vector<std::string>{"SFNN", "DUET", "iTransformer"}));
  EXPECT_EQ(s.verdicts.size(), 28u);
  EXPECT_EQ(s.row("SFNN").first_count, 19u);
  EXPECT_EQ(s.row("DUET").first_count, 6u);
  EXPECT_EQ(s.row("iTransformer").first_count, 3u);
  const std::size_t sig_gap = std::abs(static_cast<int>(s.row("SFNN").significant_first_count) - 14) +
                              std::abs(static_cast<int>(s.row("DUET").significant_first_count) - 4) +
                              std::abs(static_cast<int>(s.row("iTransformer").significant_first_count) - 3);
  EXPECT_LE(sig_gap, 2u);
  EXPECT_NEAR(s.row("DUET").avg_relative_loss, 1.011, 0.0015);
  EXPECT_NEAR(s.row("iTransformer").avg_relative_loss, 1.101, 0.0015);
}

TEST(Aggregate, PublishedFairTableCounts) {
  const auto s = aggregate_table(load_cell_table(std::filesystem::path(SFNN_DATA_DIR) / "table3_fair.csv"), "SFNN");
  EXPECT_EQ(s.row("SFNN").first_count, 24u);
  EXPECT_EQ(s.row("DUET").first_count, 3u);
  EXPECT_EQ(s.row("iTransformer").first_count, 1u);
  EXPECT_NEAR(s.row("DUET").avg_relative_loss, 1.028, 0.0015);
}

TEST(CellTable, WriteLoadRoundTripAndErrors) {
  const auto dir = sfnn::testing::scratch_dir();
  const std::vector<CellSummary> cells{{"A", "Solar Energy", 96, 0.123456789, 0.001, 10, 0, ""}};
  write_cell_table(dir / "t.csv", cells);
  const auto back = load_cell_table(dir / "t.csv");
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].dataset, "Solar Energy");
  EXPECT_EQ(back[0].mean, 0.123456789);
  {
    std::ofstream(dir / "bad.csv") << "model,dataset,horizon,mean,std,n\nA,d,96,x,0.1,10\n";
  }
  EXPECT_THROW(load_cell_table(dir / "bad.csv"), ParseError);
  EXPECT_THROW(load_cell_table(dir / "none.csv"), IoError);
}

TEST(NLinears, SinusoidAtPeriodIsExact) {
  const std::size_t p = 24;
  Matrix v(1500, 2);
  for (std::size_t i = 0; i < 1500; ++i)
    for (std::size_t s = 0; s < 2; ++s) v(i, s) = std::sin(2 * std::numbers::pi * static_cast<double>(i) / p + s);
  const auto ds = dataset_from_normalized(std::move(v), SplitSpec{0.7, 0.1, 0.2});
  NLinearsOptions o;
  o.per_series_lookbacks = {p, p};
  EXPECT_LT(fit_n_linears(ds, 48, o).test_mse, 1e-6);
  o.ridge = 0.0;  // the windows of a pure sinusoid span only two directions
  EXPECT_THROW(fit_n_linears(ds, 48, o), RankDeficient);
}

TEST(NLinears, WhiteNoiseIsUnpredictableAndSeriesIndependent) {
  SeededRng rng(8);
  Matrix v(4000, 2);
  for (double& x : v.data()) x = rng.standard_normal();
  const auto both = dataset_from_normalized(v, SplitSpec{0.7, 0.1, 0.2});
  NLinearsOptions o;
  o.candidate_lookbacks = {4, 8};
  const auto r = fit_n_linears(both, 4, o);
  EXPECT_NEAR(r.test_mse, 1.0, 0.1);

  for (std::size_t s = 0; s < 2; ++s) {
    Matrix col(4000, 1);
    for (std::size_t i = 0; i < 4000; ++i) col(i, 0) = v(i, s);
    const auto alone = fit_n_linears(dataset_from_normalized(std::move(col), SplitSpec{0.7, 0.1, 0.2}), 4, o);
    EXPECT_EQ(alone.series[0].lookback, r.series[s].lookback);
    EXPECT_NEAR(alone.series[0].test_mse, r.series[s].test_mse, 1e-12);
  }
}
