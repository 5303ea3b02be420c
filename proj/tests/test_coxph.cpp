#include <gtest/gtest.h>

#include <random>

#include "survgen/coxph.hpp"
#include "survgen/simulate.hpp"

using namespace survgen;

namespace {
struct Xy {
  Eigen::MatrixXd x;
  std::vector<double> t;
  std::vector<int> e;
};

Xy from_cohort(const SimulatedCohort& c) {
  Xy d;
  d.x.resize(static_cast<Eigen::Index>(c.records.size()), 1);
  for (std::size_t i = 0; i < c.records.size(); ++i) {
    d.x(static_cast<Eigen::Index>(i), 0) = c.records[i].x_cont[0];
    d.t.push_back(c.records[i].time);
    d.e.push_back(c.records[i].event);
  }
  return d;
}

WorldConfig one_covariate(std::uint64_t seed) {
  WorldConfig w;
  w.n = 2000;
  w.n_cont = 1;
  w.beta_cont = {0.8};
  w.weibull_shape = 1.0;
  w.censor_rate = 0.36;
  w.seed = seed;
  return w;
}
}  // namespace

TEST(CoxPh, RecoversCoefficient) {
  for (std::uint64_t s = 1; s <= 3; ++s) {
    auto c = simulate(one_covariate(s));
    EXPECT_NEAR(c.censoring_rate, 0.30, 0.05);
    auto d = from_cohort(c);
    auto m = coxph_fit(d.x, d.t, d.e);
    EXPECT_TRUE(m.converged);
    EXPECT_FALSE(m.separation);
    EXPECT_NEAR(m.beta(0), 0.8, 0.1) << "seed " << s;
  }
}

TEST(CoxPh, NullCovariateNearZero) {
  auto c = simulate(one_covariate(4));
  auto d = from_cohort(c);
  std::mt19937_64 g(4);
  std::shuffle(d.t.begin(), d.t.end(), g);  // break the covariate link
  std::shuffle(d.e.begin(), d.e.end(), g);
  auto m = coxph_fit(d.x, d.t, d.e);
  EXPECT_LT(std::abs(m.beta(0)), 0.1);
}

TEST(CoxPh, SeparationFlagged) {
  Eigen::MatrixXd x(2, 1);
  x << 1, 0;
  auto m = coxph_fit(x, {1.0, 2.0}, {1, 1});
  EXPECT_TRUE(m.separation);
  EXPECT_TRUE(m.beta.allFinite());
}

TEST(CoxPh, NoEventsIsError) {
  Eigen::MatrixXd x(3, 1);
  x << 1, 2, 3;
  EXPECT_THROW(coxph_fit(x, {1, 2, 3}, {0, 0, 0}), NumericError);
}

TEST(CoxPh, LoglikNondecreasingAndBaselineMonotone) {
  auto c = simulate(one_covariate(5));
  auto d = from_cohort(c);
  double prev = -1e300;
  for (std::size_t it = 0; it <= 6; ++it) {
    auto m = coxph_fit(d.x, d.t, d.e, it);
    EXPECT_GE(m.loglik, prev - 1e-9) << it;
    prev = m.loglik;
  }
  auto m = coxph_fit(d.x, d.t, d.e);
  double h = 0.0;
  for (double v : m.base_cumhaz) {
    EXPECT_GE(v, h);
    h = v;
  }
  EXPECT_NEAR(m.survival(0.0, 0.3), 1.0, 1e-12);
}

TEST(CoxPh, ConstantColumnGetsZeroCoefficient) {
  auto c = simulate(one_covariate(6));
  auto d = from_cohort(c);
  Eigen::MatrixXd x(d.x.rows(), 2);
  x.col(0) = d.x.col(0);
  x.col(1).setConstant(2.0);
  auto m = coxph_fit(x, d.t, d.e);
  EXPECT_EQ(m.beta(1), 0.0);
  EXPECT_NEAR(m.beta(0), 0.8, 0.1);
}

TEST(CoxPh, BreslowBaselineByHand) {
  // beta = 0 when x is constant: H0 is the Nelson-Aalen estimator
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(4, 1);
  auto m = coxph_fit(x, {1, 2, 2, 3}, {1, 1, 0, 1});
  ASSERT_EQ(m.base_times.size(), 3u);
  EXPECT_NEAR(m.base_cumhaz[0], 1.0 / 4.0, 1e-12);
  EXPECT_NEAR(m.base_cumhaz[1], 1.0 / 4.0 + 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(m.base_cumhaz[2], 1.0 / 4.0 + 1.0 / 3.0 + 1.0, 1e-12);
}
