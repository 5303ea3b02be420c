#include <gtest/gtest.h>

#include <sstream>

#include "survgen/dataset.hpp"
#include "survgen/simulate.hpp"

using namespace survgen;

TEST(Simulate, NoCensoringMeansAllEvents) {
  WorldConfig w;
  w.n = 300;
  auto c = simulate(w);
  EXPECT_EQ(c.censoring_rate, 0.0);
  for (const auto& r : c.records) EXPECT_EQ(r.event, 1);
}

TEST(Simulate, ExponentialMeanMatchesScale) {
  // beta = 0, shape 1: T ~ Exp with mean = scale
  WorldConfig w;
  w.n = 20000;
  w.beta_cont = {0.0};
  w.weibull_scale = 2.5;
  w.seed = 11;
  auto c = simulate(w);
  double m = 0.0;
  for (const auto& r : c.records) m += r.time;
  m /= static_cast<double>(w.n);
  EXPECT_NEAR(m, 2.5, 3.0 * 2.5 / std::sqrt(static_cast<double>(w.n)));
}

TEST(Simulate, CensoringRateMatchesCount) {
  WorldConfig w;
  w.n = 1000;
  w.censor_rate = 0.5;
  w.seed = 2;
  auto c = simulate(w);
  double k = 0.0;
  for (const auto& r : c.records) k += r.event == 0;
  EXPECT_EQ(c.censoring_rate, k / 1000.0);
  EXPECT_GT(c.censoring_rate, 0.2);
  EXPECT_LT(c.censoring_rate, 0.5);
}

TEST(Simulate, SameSeedSameCohort) {
  WorldConfig w;
  w.n = 100;
  w.n_cont = 2;
  w.beta_cont = {0.5, -0.5};
  w.disc_cardinalities = {3};
  w.beta_disc = {0.4};
  w.censor_rate = 0.3;
  w.seed = 5;
  auto a = simulate(w), b = simulate(w);
  std::ostringstream sa, sb;
  write_csv(sa, a.schema, a.records);
  write_csv(sb, b.schema, b.records);
  EXPECT_EQ(sa.str(), sb.str());
  w.seed = 6;
  std::ostringstream sc;
  write_csv(sc, a.schema, simulate(w).records);
  EXPECT_NE(sa.str(), sc.str());
  for (const auto& r : a.records) EXPECT_LT(r.x_disc[0], 3u);
}

TEST(Simulate, InvalidWorlds) {
  WorldConfig w;
  w.weibull_shape = 0.0;
  EXPECT_THROW(simulate(w), ConfigError);
  w = {};
  w.weibull_scale = -1.0;
  EXPECT_THROW(simulate(w), ConfigError);
  w = {};
  w.beta_cont = {};
  EXPECT_THROW(simulate(w), ConfigError);
  w = {};
  w.censor_rate = -0.1;
  EXPECT_THROW(simulate(w), ConfigError);
}
