#include <gtest/gtest.h>

#include <cmath>
#include <iostream>

#include "gradcheck.hpp"
#include "survgen/checkpoint.hpp"
#include "survgen/simulate.hpp"
#include "survgen/trainer.hpp"

using namespace survgen;

namespace {
SimulatedCohort toy_world(std::size_t n, std::uint64_t seed) {
  WorldConfig w;
  w.n = n;
  w.n_cont = 2;
  w.beta_cont = {0.8, -0.5};
  w.disc_cardinalities = {2};
  w.beta_disc = {0.7};
  w.weibull_shape = 1.5;
  w.censor_rate = 0.5;
  w.seed = seed;
  return simulate(w);
}

TrainerConfig small_cfg(std::size_t epochs) {
  TrainerConfig c;
  c.epochs = epochs;
  c.warmup_epochs = epochs / 2;
  c.hidden = {32, 32};
  c.surv_hidden = 16;
  c.batch_size = 64;
  return c;
}
}  // namespace

TEST(LossCont, Values) {
  Matrix a = Matrix::Random(5, 4);
  EXPECT_EQ(loss_cont(a, a), 0.0);
  EXPECT_DOUBLE_EQ(loss_cont(Matrix::Zero(1, 4), Matrix::Ones(1, 4)), 1.0);
  Matrix b = Matrix::Random(5, 4);
  double s = 0.0;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 4; ++j) s += (a(i, j) - b(i, j)) * (a(i, j) - b(i, j));
  EXPECT_NEAR(loss_cont(a, b), s / 20.0, 1e-15);
}

TEST(LossDisc, Values) {
  // one channel, C = 2, rows: class 0 and class 1
  Matrix z0 = Matrix::Zero(2, 3);
  z0(0, 0) = z0(1, 1) = 1.0;
  Matrix masked = Matrix::Zero(2, 3);
  masked.col(2).setOnes();
  Matrix uniform = Matrix::Constant(2, 3, 1.0 / 3.0);
  EXPECT_EQ(loss_disc({uniform}, {z0}, {z0}, 0.5, -1.0), 0.0);  // nothing masked
  Matrix exact = z0;
  EXPECT_EQ(loss_disc({exact}, {z0}, {masked}, 0.5, -1.0), 0.0);
  EXPECT_NEAR(loss_disc({uniform}, {z0}, {masked}, 0.5, -1.0), 2.0 * std::log(2.0), 1e-15);
  // half masked: mean over all positions
  Matrix half = z0;
  half.row(1).setZero();
  half(1, 2) = 1.0;
  EXPECT_NEAR(loss_disc({uniform}, {z0}, {half}, 0.5, -1.0), std::log(2.0), 1e-15);
}

TEST(TotalLoss, Weights) {
  LossComponents c{1.0, 2.0, 3.0};
  EXPECT_EQ(total_loss(c, 1, 1, 1), 6.0);
  EXPECT_EQ(total_loss(c, 1, 1, 0), 3.0);
  EXPECT_THROW(total_loss(c, 1, 1, -1), NumericError);
}

TEST(TotalLoss, GradientIsWeightedSumOfComponents) {
  auto p = gradcheck::small_problem(4);
  auto g = [&](double a, double b, double c) {
    return batch_objective(p.params, p.sched, p.z0_disc, p.noise, p.time, p.event, p.weight, a, b, c);
  };
  auto gc = g(1, 0, 0), gd = g(0, 1, 0), gs = g(0, 0, 1), gt = g(0.5, 2.0, 0.3);
  EXPECT_NEAR(gt.total, 0.5 * gc.parts.l_cont + 2.0 * gd.parts.l_disc + 0.3 * gs.parts.l_surv, 1e-12);
  std::vector<Matrix> a, b, c, t;
  gc.grad.for_each_tensor([&](const std::string&, const Matrix& m) { a.push_back(m); });
  gd.grad.for_each_tensor([&](const std::string&, const Matrix& m) { b.push_back(m); });
  gs.grad.for_each_tensor([&](const std::string&, const Matrix& m) { c.push_back(m); });
  gt.grad.for_each_tensor([&](const std::string&, const Matrix& m) { t.push_back(m); });
  for (std::size_t k = 0; k < t.size(); ++k)
    EXPECT_LT((t[k] - (0.5 * a[k] + 2.0 * b[k] + 0.3 * c[k])).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Calibration, Arithmetic) {
  EXPECT_DOUBLE_EQ(calibrate_lambda(7.0, 2.0, 0.3, 10.0, 0.0), 2.1 / 1.4);
  EXPECT_NEAR(calibrate_lambda(7.0, 2.0, 0.3, 10.0, 1e-8), 1.5, 1e-8);
  EXPECT_EQ(calibrate_lambda(7.0, 0.0, 0.3, 10.0, 1e-8), 10.0);
  EXPECT_NEAR(calibrate_lambda(4.0, 4.0, 0.5, 10.0, 1e-8), 1.0, 1e-8);
}

TEST(Calibration, Schedule) {
  EXPECT_EQ(lambda_schedule(0, 1500, 1.5), 0.0);
  EXPECT_EQ(lambda_schedule(1500, 1500, 1.5), 1.5);
  EXPECT_EQ(lambda_schedule(3000, 1500, 1.5), 1.5);
  EXPECT_EQ(lambda_schedule(750, 1500, 1.5), 0.75);
  EXPECT_THROW(lambda_schedule(3, 10, std::nullopt), NumericError);
}

TEST(TrainerConfig, DefaultsAndValidation) {
  TrainerConfig c;
  EXPECT_EQ(c.epochs, 4000u);
  EXPECT_EQ(c.batch_size, 256u);
  EXPECT_EQ(c.learning_rate, 0.002);
  EXPECT_EQ(c.warmup_epochs, 1500u);
  EXPECT_EQ(c.alpha_surv, 0.3);
  EXPECT_EQ(c.calibration_steps, 10u);
  EXPECT_EQ(c.ema_decay, 0.999);
  c.alpha_surv = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainerConfig{};
  c.epochs = 100;
  EXPECT_NO_THROW(c.validate());  // ramp simply does not finish
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Trainer, ZeroLearningRateLeavesParameters) {
  auto w = toy_world(100, 1);
  auto cfg = small_cfg(4);
  cfg.learning_rate = 0.0;
  auto res = train(w.records, w.schema, cfg, std::nullopt, NoiseSchedule{});
  auto init = init_params(res.model.params.layout, cfg.seed);
  std::vector<Matrix> a, b;
  res.model.params.for_each_tensor([&](const std::string&, const Matrix& m) { a.push_back(m); });
  init.for_each_tensor([&](const std::string&, const Matrix& m) { b.push_back(m); });
  EXPECT_EQ(a, b);
}

TEST(Trainer, DeterministicCheckpoint) {
  auto w = toy_world(150, 2);
  auto cfg = small_cfg(6);
  auto a = train(w.records, w.schema, cfg, std::nullopt, NoiseSchedule{});
  auto b = train(w.records, w.schema, cfg, std::nullopt, NoiseSchedule{});
  EXPECT_EQ(checkpoint_to_string(a.model), checkpoint_to_string(b.model));
  cfg.seed = 1;
  auto c = train(w.records, w.schema, cfg, std::nullopt, NoiseSchedule{});
  EXPECT_NE(checkpoint_to_string(a.model), checkpoint_to_string(c.model));
}

TEST(Trainer, LambdaRampIsMonotoneAndBounded) {
  auto w = toy_world(200, 3);
  auto cfg = small_cfg(40);
  cfg.batch_size = 50;  // 4 steps per epoch, calibration ends in epoch 2
  auto res = train(w.records, w.schema, cfg, std::nullopt, NoiseSchedule{});
  ASSERT_TRUE(res.state.lambda_calibrated);
  EXPECT_EQ(res.state.history.front().lambda_surv, 0.0);
  double prev = 0.0;
  for (const auto& h : res.state.history) {
    EXPECT_GE(h.lambda_surv, prev);
    EXPECT_LE(h.lambda_surv, cfg.lambda_max);
    prev = h.lambda_surv;
  }
  EXPECT_DOUBLE_EQ(res.state.history.back().lambda_surv, *res.state.lambda_calibrated);
}

TEST(Trainer, AblationNeverTouchesRiskHead) {
  auto w = toy_world(200, 4);
  auto cfg = small_cfg(10);
  cfg.survival_loss = false;
  auto res = train(w.records, w.schema, cfg, std::nullopt, NoiseSchedule{});
  for (const auto& h : res.state.history) EXPECT_EQ(h.lambda_surv, 0.0);
  auto init = init_params(res.model.params.layout, cfg.seed);
  EXPECT_EQ(res.model.params.surv_hidden.weight, init.surv_hidden.weight);
  EXPECT_EQ(res.model.params.surv_out.weight, init.surv_out.weight);
  EXPECT_NE(res.model.params.trunk[0].weight, init.trunk[0].weight);
}

// One noise level per batch makes single-epoch losses very noisy, so the
// first and last ten epochs are averaged. The irreducible part of the
// objective (eps is unpredictable at small sigma, masked categories keep
// their entropy) caps the possible drop near 37%; 200 epochs reach ~26%.
TEST(Trainer, LossDecreasesOnToyWorld) {
  auto w = toy_world(512, 5);
  TrainerConfig cfg;
  cfg.epochs = 200;
  auto res = train(w.records, w.schema, cfg, std::nullopt, NoiseSchedule{});
  double first = 0.0, last = 0.0;
  for (int k = 0; k < 10; ++k) {
    first += res.state.history[k].l_total / 10.0;
    last += res.state.history[190 + k].l_total / 10.0;
  }
  std::cout << "mean L_total epochs 1-10: " << first << ", epochs 191-200: " << last << "\n";
  EXPECT_LE(last, 0.8 * first);
}

TEST(Trainer, FixedSurvivalConfigIsUsed) {
  auto w = toy_world(100, 6);
  auto res = train(w.records, w.schema, small_cfg(2), SurvLossConfig{0.5, 2.0}, NoiseSchedule{});
  EXPECT_EQ(res.model.surv.tau, 0.5);
  EXPECT_EQ(res.model.surv.alpha_decay, 2.0);
}

namespace {
std::vector<double> flatten(const DenoiserParams& p) {
  std::vector<double> v;
  p.for_each_tensor([&](const std::string&, const Matrix& m) { v.insert(v.end(), m.data(), m.data() + m.size()); });
  return v;
}
}  // namespace

TEST(Trainer, WeightAverageArithmetic) {
  const auto p = gradcheck::small_problem(1).params;
  auto ema = p.zeros_like();
  auto ones = p.zeros_like();
  ones.for_each_tensor([](const std::string&, Matrix& m) { m.setOnes(); });
  // step 0 decays by min(0.9, 1/10)
  detail::ema_update(ema, ones, 0.9, 0);
  for (double v : flatten(ema)) EXPECT_NEAR(v, 0.9, 1e-15);
  // late steps use the configured decay
  detail::ema_update(ema, p.zeros_like(), 0.9, 1000000);
  for (double v : flatten(ema)) EXPECT_NEAR(v, 0.81, 1e-15);
  const auto before = flatten(ema);
  detail::ema_update(ema, ones, 0.0, 5);  // disabled
  EXPECT_EQ(flatten(ema), before);
  TrainerConfig c;
  c.ema_decay = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Trainer, SavedModelIsWeightAverage) {
  auto w = toy_world(128, 3);
  auto cfg = small_cfg(6);
  auto avg = train(w.records, w.schema, cfg, std::nullopt, NoiseSchedule{});
  cfg.ema_decay = 0.0;
  auto last = train(w.records, w.schema, cfg, std::nullopt, NoiseSchedule{});
  // same optimization path, different saved weights
  EXPECT_EQ(avg.state.history.back().l_total, last.state.history.back().l_total);
  EXPECT_EQ(flatten(avg.model.params), flatten(avg.state.ema));
  EXPECT_NE(flatten(avg.model.params), flatten(last.model.params));
}
