#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "survgen/survival_loss.hpp"

using namespace survgen;

namespace {
CoxLoss nll(std::vector<double> r, std::vector<double> t, std::vector<int> e,
            std::vector<double> w = {}) {
  if (w.empty()) w.assign(r.size(), 1.0);
  return cox_weighted_nll(Eigen::Map<Eigen::VectorXd>(r.data(), static_cast<Eigen::Index>(r.size())),
                          Eigen::Map<Eigen::VectorXd>(t.data(), static_cast<Eigen::Index>(t.size())),
                          Eigen::Map<Eigen::VectorXi>(e.data(), static_cast<Eigen::Index>(e.size())),
                          Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size())));
}
}  // namespace

TEST(EventWeights, KneeAndDecay) {
  SurvLossConfig c{10.0, 0.5};
  Eigen::VectorXd t(4);
  t << 3.0, 10.0, 12.0, 30.0;
  auto w = event_weights(t, c);
  EXPECT_EQ(w(0), 1.0);
  EXPECT_EQ(w(1), 1.0);
  EXPECT_NEAR(w(2), std::exp(-1.0), 1e-15);
  EXPECT_NEAR(w(2), 0.367879, 1e-6);
  for (int i = 1; i < 4; ++i) EXPECT_LE(w(i), w(i - 1));
}

TEST(EventWeights, DefaultsFromTimes) {
  std::vector<double> t;
  for (int i = 1; i <= 11; ++i) t.push_back(i);
  auto c = SurvLossConfig::from_times(t);
  EXPECT_NEAR(c.tau, 10.0, 1e-12);
  EXPECT_NEAR(c.alpha_decay, 1.0, 1e-7);
  Eigen::VectorXd last(1);
  last << 11.0;
  EXPECT_NEAR(event_weights(last, c)(0), std::exp(-1.0), 1e-7);
  EXPECT_THROW((SurvLossConfig{0.0, 1.0}.validate()), ConfigError);
  EXPECT_THROW((SurvLossConfig{1.0, -1.0}.validate()), ConfigError);
}

TEST(CoxLoss, ReferenceValues) {
  EXPECT_NEAR(nll({0, 0}, {1, 2}, {1, 1}).loss, std::log(2.0), 1e-12);
  EXPECT_NEAR(nll({0.7}, {3}, {1}).loss, 0.0, 1e-15);
  const double e = std::exp(1.0);
  EXPECT_NEAR(nll({1, 0, 0}, {1, 2, 3}, {1, 1, 0}).loss, std::log((e + 2) / e) + std::log(2.0), 1e-12);
  // ln(1.7357589) + ln 2 = 0.5514447 + 0.6931472
  EXPECT_NEAR(nll({1, 0, 0}, {1, 2, 3}, {1, 1, 0}).loss, 1.2445919, 1e-6);
}

TEST(CoxLoss, NoEventsFlagged) {
  auto l = nll({1, 2, 3}, {1, 2, 3}, {0, 0, 0});
  EXPECT_TRUE(l.no_events);
  EXPECT_EQ(l.loss, 0.0);
  EXPECT_EQ(l.grad.cwiseAbs().maxCoeff(), 0.0);
}

TEST(CoxLoss, BreslowTiesShareRiskSet) {
  // tied events at t=1 both see all three subjects
  const double expect = 2.0 * std::log(3.0);
  EXPECT_NEAR(nll({0, 0, 0}, {1, 1, 2}, {1, 1, 0}).loss, expect, 1e-12);
}

TEST(CoxLoss, ShiftInvariance) {
  std::mt19937_64 g(1);
  std::normal_distribution<double> nd;
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> r(15), t(15), w(15), r2(15);
    std::vector<int> e(15);
    for (int i = 0; i < 15; ++i) {
      r[i] = nd(g);
      t[i] = std::abs(nd(g)) + 0.1;
      e[i] = nd(g) > -0.3;
      w[i] = 0.5 + 0.5 * std::abs(std::sin(i));
      r2[i] = r[i] + 3.7;
    }
    EXPECT_NEAR(nll(r, t, e, w).loss, nll(r2, t, e, w).loss, 1e-10);
  }
}

TEST(CoxLoss, MatchesBruteForce) {
  std::mt19937_64 g(2);
  std::normal_distribution<double> nd;
  std::uniform_int_distribution<int> size(1, 20);
  for (int rep = 0; rep < 20; ++rep) {
    const int n = size(g);
    std::vector<double> r(n), t(n), w(n, 1.0), wr(n);
    std::vector<int> e(n);
    for (int i = 0; i < n; ++i) {
      r[i] = nd(g);
      t[i] = std::abs(nd(g)) + 0.01 * i;  // distinct
      e[i] = nd(g) > -0.5;
      wr[i] = std::exp(-std::abs(nd(g)));
    }
    const double pl = oracle::cox_partial_likelihood(r, t, e);
    EXPECT_NEAR(nll(r, t, e).loss, -std::log(pl), 1e-10);
    EXPECT_NEAR(nll(r, t, e, wr).loss, oracle::cox_nll(r, t, e, wr), 1e-10);
  }
}

TEST(CoxLoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 g(3);
  std::normal_distribution<double> nd;
  const int n = 12;
  std::vector<double> r(n), t(n), w(n);
  std::vector<int> e(n);
  for (int i = 0; i < n; ++i) {
    r[i] = nd(g);
    t[i] = std::floor(4 * std::abs(nd(g))) + 1;  // ties included
    e[i] = i % 4 != 0;
    w[i] = 0.3 + 0.7 * std::abs(std::cos(i));
  }
  auto l = nll(r, t, e, w);
  const double h = 1e-6;
  for (int k = 0; k < n; ++k) {
    auto rp = r, rm = r;
    rp[k] += h;
    rm[k] -= h;
    const double fd = (oracle::cox_nll(rp, t, e, w) - oracle::cox_nll(rm, t, e, w)) / (2 * h);
    EXPECT_NEAR(l.grad(k), fd, 1e-6 * std::max(1.0, std::abs(fd))) << k;
  }
}

TEST(CoxLoss, LargeRisksStayFinite) {
  auto l = nll({800, 0, -800}, {1, 2, 3}, {1, 1, 1});
  EXPECT_TRUE(std::isfinite(l.loss));
  EXPECT_TRUE(l.grad.allFinite());
}
