#include <gtest/gtest.h>

#include <sstream>

#include "survgen/config.hpp"

using namespace survgen;

namespace {
RunConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_run_config(in, "test.ini");
}
}  // namespace

TEST(RunConfig, ShippedDefaults) {
  auto c = parse("");
  EXPECT_EQ(c.trainer.epochs, 4000u);
  EXPECT_EQ(c.trainer.learning_rate, 0.002);
  EXPECT_EQ(c.trainer.batch_size, 256u);
  EXPECT_EQ(c.trainer.warmup_epochs, 1500u);
  EXPECT_EQ(c.trainer.alpha_surv, 0.3);
  EXPECT_EQ(c.trainer.calibration_steps, 10u);
  EXPECT_EQ(c.sampler.steps, 300u);
  EXPECT_EQ(c.schedule.sigma_min, 0.002);
  EXPECT_EQ(c.schedule.sigma_max, 80.0);
  EXPECT_EQ(c.schedule.rho, 7.0);
  EXPECT_EQ(c.eval.split, 0.75);
  EXPECT_FALSE(c.surv_tau.has_value());
  const std::string ini = c.to_ini();
  EXPECT_NE(ini.find("epochs = 4000"), std::string::npos);
  EXPECT_NE(ini.find("learning_rate = 0.002"), std::string::npos);
  EXPECT_NE(ini.find("steps = 300"), std::string::npos);
}

TEST(RunConfig, ParsesValues) {
  auto c = parse(
      "[run]\nseed = 7\n[trainer]\nepochs = 12\nhidden = 32, 16\nsurvival_loss = false\n"
      "[survival]\ntau = 5\nalpha_decay = 0.5\n[sampler]\nt_admin = 100\n[paths]\ndata = a.csv\n");
  c.propagate_seed();
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.trainer.seed, 7u);
  EXPECT_EQ(c.sampler.seed, 7u);
  EXPECT_EQ(c.trainer.epochs, 12u);
  EXPECT_EQ(c.trainer.hidden, (std::vector<std::size_t>{32, 16}));
  EXPECT_FALSE(c.trainer.survival_loss);
  EXPECT_EQ(c.survival_loss()->tau, 5.0);
  EXPECT_EQ(*c.sampler.t_admin, 100.0);
  EXPECT_EQ(c.data, "a.csv");
}

TEST(RunConfig, ToIniRoundTrips) {
  auto c = parse("[run]\nseed = 9\n[trainer]\nepochs = 3\n[eval]\nbrier_horizon = 12.5\n");
  auto again = parse(c.to_ini());
  EXPECT_EQ(again.to_ini(), c.to_ini());
  EXPECT_EQ(again.hash(), c.hash());
}

TEST(RunConfig, HashIgnoresPathsOnly) {
  auto a = parse("[paths]\ndata = x.csv\n");
  auto b = parse("[paths]\ndata = y.csv\nout_dir = elsewhere\n");
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_NE(a.hash(), parse("[trainer]\nepochs = 5\n").hash());
  EXPECT_NE(a.hash(), parse("[run]\nseed = 1\n").hash());
}

TEST(RunConfig, Rejections) {
  EXPECT_THROW(parse("[trainer]\nepochz = 5\n"), ConfigError);
  EXPECT_THROW(parse("[bogus]\nx = 1\n"), ConfigError);
  EXPECT_THROW(parse("[trainer]\nepochs = many\n"), ConfigError);
  EXPECT_THROW(parse("[trainer]\nepochs = -3\n"), ConfigError);
  EXPECT_THROW(parse("[trainer]\nsurvival_loss = maybe\n"), ConfigError);
  EXPECT_THROW(parse("[survival]\ntau = 5\n").validate(), ConfigError);
  EXPECT_THROW(parse("[sampler]\nn_samples = 0\n").validate(), ConfigError);
  EXPECT_THROW(parse("[eval]\nsplit = 1.5\n").validate(), ConfigError);
  EXPECT_THROW(load_run_config("/nonexistent/run.ini"), ConfigError);
}

TEST(WorldConfigParse, Values) {
  std::istringstream in(
      "[world]\nn = 50\nseed = 4\ncontinuous = 2\ndiscrete = 3, 2\nbeta_cont = 0.1, 0.2\n"
      "beta_disc = 0.3, 0.4\nweibull_shape = 1.5\nweibull_scale = 2\ncensor_rate = 0.2\n");
  auto w = parse_world_config(in);
  EXPECT_EQ(w.n, 50u);
  EXPECT_EQ(w.n_cont, 2u);
  EXPECT_EQ(w.disc_cardinalities, (std::vector<std::size_t>{3, 2}));
  EXPECT_EQ(w.beta_disc, (std::vector<double>{0.3, 0.4}));
  EXPECT_EQ(w.weibull_scale, 2.0);
  std::istringstream bad("[world]\nweibull_shape = 0\n");
  EXPECT_THROW(parse_world_config(bad).validate(), ConfigError);
}
