#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "sfnn/error.hpp"
#include "sfnn/training.hpp"
#include "test_util.hpp"

using namespace sfnn;
using sfnn::testing::random_matrix;

namespace {

NormalizedDataset sinusoid(std::size_t t, std::size_t period, std::size_t n) {
  Matrix v(t, n);
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t s = 0; s < n; ++s)
      v(i, s) = std::sin(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(period) + s);
  return dataset_from_normalized(std::move(v), SplitSpec{0.7, 0.1, 0.2});
}

SFNNConfig linear_config(std::size_t l, std::size_t h, std::size_t n) {
  SFNNConfig c;
  c.lookback = l;
  c.horizon = h;
  c.hidden_width = std::max(l, h);
  c.num_blocks = 0;
  c.n_series = n;
  return c;
}

}  // namespace

TEST(Mse, ValuesAndGradient) {
  const Matrix a = random_matrix(3, 4, 1), b = random_matrix(3, 4, 2);
  EXPECT_EQ(mse_loss(a, a).loss, 0.0);
  Matrix shifted = a;
  for (double& v : shifted.data()) v += 1.0;
  EXPECT_NEAR(mse_loss(shifted, a).loss, 1.0, 1e-15);

  double brute = 0.0;
  for (std::size_t i = 0; i < 12; ++i) brute += (a.data()[i] - b.data()[i]) * (a.data()[i] - b.data()[i]);
  const auto r = mse_loss(a, b);
  EXPECT_NEAR(r.loss, brute / 12.0, 1e-15);
  for (std::size_t i = 0; i < 12; ++i) EXPECT_NEAR(r.grad.data()[i], 2.0 * (a.data()[i] - b.data()[i]) / 12.0, 1e-15);
  EXPECT_THROW(mse_loss(a, Matrix(4, 3)), ShapeMismatch);
}

TEST(Adam, FirstStepIsSignOfGradient) {
  const SFNNConfig c = linear_config(3, 2, 1);
  SFNNParams p = zero_params(c), g = zero_params(c);
  SeededRng rng(4);
  for (auto t : g.tensors())
    for (double& v : t) v = rng.standard_normal();
  auto state = OptimizerState::for_params(p);
  TrainConfig tc;
  adam_step(p, g, state, tc);
  EXPECT_EQ(state.step, 1u);
  const auto pt = p.tensors();
  const auto gt = g.tensors();
  for (std::size_t k = 0; k < pt.size(); ++k) {
    for (std::size_t i = 0; i < pt[k].size(); ++i) {
      const double gi = gt[k][i];
      EXPECT_NEAR(pt[k][i], -tc.learning_rate * gi / (std::abs(gi) + tc.adam_eps), 1e-15);
    }
  }
}

TEST(Adam, ZeroGradientLeavesParamsAndDecaysMoments) {
  const SFNNConfig c = linear_config(3, 2, 1);
  SeededRng rng(5);
  const SFNNParams before = init_params(c, rng);
  SFNNParams p = before;
  auto fresh = OptimizerState::for_params(p);
  adam_step(p, zero_params(c), fresh, TrainConfig{});
  EXPECT_TRUE(p == before);

  auto state = OptimizerState::for_params(p);
  for (auto& m : state.first_moment) std::fill(m.begin(), m.end(), 1.0);
  for (auto& v : state.second_moment) std::fill(v.begin(), v.end(), 4.0);
  adam_step(p, zero_params(c), state, TrainConfig{});
  EXPECT_NEAR(state.first_moment[0][0], 0.9, 1e-15);
  EXPECT_NEAR(state.second_moment[0][0], 4.0 * 0.999, 1e-15);
}

TEST(Train, SinusoidLinearModelReachesLowError) {
  const auto ds = sinusoid(1200, 24, 2);
  TrainConfig tc;
  tc.learning_rate = 3e-3;
  tc.max_epochs = 200;
  tc.patience = 20;
  const auto r = train(ds, linear_config(24, 1, 2), tc);
  EXPECT_LT(r.report.test_mse, 1e-3);
  EXPECT_LE(r.report.epochs_run, 200u);
}

TEST(Train, ZeroLearningRateStopsAfterPatiencePlusOne) {
  const auto ds = sinusoid(400, 12, 1);
  TrainConfig tc;
  tc.learning_rate = 0.0;
  tc.patience = 1;
  tc.seed = 7;
  const SFNNConfig c = linear_config(12, 3, 1);
  const auto r = train(ds, c, tc);
  EXPECT_EQ(r.report.epochs_run, 2u);
  SeededRng rng(7);
  EXPECT_TRUE(r.params == init_params(c, rng));
}

TEST(Train, SameSeedSameReportAndBestCheckpointReevaluates) {
  const auto ds = sinusoid(500, 16, 2);
  SFNNConfig c = linear_config(16, 4, 2);
  c.num_blocks = 1;
  c.set_modules("center,mix,ln");
  TrainConfig tc;
  tc.max_epochs = 8;
  tc.patience = 3;
  tc.seed = 11;
  const auto a = train(ds, c, tc), b = train(ds, c, tc);
  EXPECT_TRUE(a.params == b.params);
  EXPECT_EQ(a.report.best_val_mse, b.report.best_val_mse);
  EXPECT_EQ(a.report.val_history, b.report.val_history);
  const auto seg = make_train_segments(ds, 16, 4);
  EXPECT_NEAR(evaluate(a.params, c, seg.val), a.report.best_val_mse, 1e-12);
  EXPECT_NEAR(evaluate(a.params, c, seg.test), a.report.test_mse, 1e-12);
}

TEST(Train, DivergenceAborts) {
  auto ds = sinusoid(300, 10, 1);
  TrainConfig tc;
  tc.learning_rate = 1e300;
  tc.max_epochs = 5;
  tc.patience = 5;
  SFNNConfig c = linear_config(10, 2, 1);
  c.num_blocks = 2;
  EXPECT_THROW(train(ds, c, tc), NonFiniteLoss);
}

TEST(Train, SegmentTooShortAndConfigChecks) {
  const auto ds = sinusoid(100, 10, 1);
  EXPECT_THROW(train(ds, linear_config(80, 2, 1), TrainConfig{}), TooShort);
  EXPECT_THROW(train(ds, linear_config(10, 2, 3), TrainConfig{}), InvalidConfig);
  TrainConfig bad;
  bad.patience = 200;
  EXPECT_THROW(bad.validate(), InvalidConfig);
}

TEST(Evaluate, ZeroCenteredModelMatchesBruteForce) {
  const auto ds = sinusoid(300, 13, 2);
  SFNNConfig c = linear_config(10, 3, 2);
  c.use_mean_centering = true;
  const auto w = make_windows(split_chronological(ds).test, 10, 3, true);
  double sse = 0.0;
  for (std::size_t i = 0; i < w.count(); ++i) {
    const Matrix in = w.input(i), out = w.target(i);
    for (std::size_t s = 0; s < 2; ++s) {
      double m = 0.0;
      for (std::size_t r = 0; r < 10; ++r) m += in(r, s);
      m /= 10.0;
      for (std::size_t r = 0; r < 3; ++r) sse += (out(r, s) - m) * (out(r, s) - m);
    }
  }
  EXPECT_NEAR(evaluate(zero_params(c), c, w), sse / static_cast<double>(w.count() * 6), 1e-12);
}

TEST(Descent, FullBatchGradientStepsDecreaseLossOnQuadratic) {
  const SFNNConfig c = linear_config(4, 2, 1);
  const Matrix x = random_matrix(4, 30, 8), y = random_matrix(2, 30, 9);
  SeededRng rng(10);
  SFNNParams p = init_params(c, rng);
  double prev = std::numeric_limits<double>::infinity();
  for (int step = 0; step < 50; ++step) {
    const auto fr = forward(p, c, x);
    const auto loss = mse_loss(fr.output, y);
    EXPECT_LE(loss.loss, prev + 1e-15);
    prev = loss.loss;
    const auto g = backward(p, c, fr.trace, loss.grad);
    auto pt = p.tensors();
    const auto gt = g.params.tensors();
    for (std::size_t k = 0; k < pt.size(); ++k)
      for (std::size_t i = 0; i < pt[k].size(); ++i) pt[k][i] -= 0.05 * gt[k][i];
  }
}

TEST(Report, JsonLineHasRunFields) {
  TrainReport r;
  r.best_val_mse = 0.5;
  r.seed = 3;
  const std::string line = to_json_line(r);
  EXPECT_EQ(line.find('\n'), std::string::npos);
  EXPECT_NE(line.find("\"best_val_mse\":0.5"), std::string::npos);
  EXPECT_NE(line.find("\"wall_time\""), std::string::npos);
}
