#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "survgen/error.hpp"

namespace survgen {

struct CoxModel {
  Eigen::VectorXd beta;
  std::vector<double> base_times;   // distinct event times
  std::vector<double> base_cumhaz;  // Breslow H0 at base_times
  double loglik = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  bool separation = false;  // monotone likelihood suspected

  Eigen::VectorXd linear_predictor(const Eigen::MatrixXd& x) const { return x * beta; }

  double cumulative_hazard(double t) const {
    auto it = std::upper_bound(base_times.begin(), base_times.end(), t);
    if (it == base_times.begin()) return 0.0;
    return base_cumhaz[static_cast<std::size_t>(it - base_times.begin()) - 1];
  }

  /// S(t | x) = exp(-H0(t) exp(x'beta)).
  double survival(double t, double lp) const { return std::exp(-cumulative_hazard(t) * std::exp(lp)); }
};

namespace detail {

struct CoxDerivs {
  double loglik = 0.0;
  Eigen::VectorXd score;
  Eigen::MatrixXd info;
};

// Breslow partial log-likelihood, score and information. `order` sorts
// subjects by descending time.
inline CoxDerivs cox_derivs(const Eigen::MatrixXd& x, const std::vector<double>& time,
                            const std::vector<int>& event, const std::vector<std::size_t>& order,
                            const Eigen::VectorXd& beta) {
  const Eigen::Index p = x.cols();
  CoxDerivs d;
  d.score = Eigen::VectorXd::Zero(p);
  d.info = Eigen::MatrixXd::Zero(p, p);
  const Eigen::VectorXd eta = x * beta;
  const double shift = eta.size() ? eta.maxCoeff() : 0.0;
  double s0 = 0.0;
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);
  for (std::size_t a = 0; a < order.size();) {
    std::size_t b = a;
    const double t = time[order[a]];
    while (b < order.size() && time[order[b]] == t) {
      const auto i = static_cast<Eigen::Index>(order[b]);
      const double w = std::exp(eta(i) - shift);
      s0 += w;
      s1 += w * x.row(i).transpose();
      s2.noalias() += w * x.row(i).transpose() * x.row(i);
      ++b;
    }
    for (std::size_t k = a; k < b; ++k) {
      const auto i = static_cast<Eigen::Index>(order[k]);
      if (!event[order[k]]) continue;
      const Eigen::VectorXd mean = s1 / s0;
      d.loglik += eta(i) - shift - std::log(s0);
      d.score += x.row(i).transpose() - mean;
      d.info += s2 / s0 - mean * mean.transpose();
    }
    a = b;
  }
  return d;
}

}  // namespace detail

/// Newton-Raphson on the Breslow partial likelihood with step halving.
/// Columns without variation keep beta = 0.
inline CoxModel coxph_fit(const Eigen::MatrixXd& x, const std::vector<double>& time,
                          const std::vector<int>& event, std::size_t max_iter = 100,
                          double tol = 1e-6) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (n < 2) throw NumericError("coxph_fit needs at least 2 subjects");
  if (time.size() != n || event.size() != n) throw NumericError("coxph_fit: length mismatch");
  if (std::none_of(event.begin(), event.end(), [](int e) { return e != 0; }))
    throw NumericError("coxph_fit: no events");

  std::vector<Eigen::Index> active;
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    if (x.col(j).maxCoeff() > x.col(j).minCoeff()) active.push_back(j);
  Eigen::MatrixXd xa(x.rows(), static_cast<Eigen::Index>(active.size()));
  for (std::size_t k = 0; k < active.size(); ++k) xa.col(static_cast<Eigen::Index>(k)) = x.col(active[k]);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return time[a] > time[b]; });

  CoxModel m;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(xa.cols());
  auto d = detail::cox_derivs(xa, time, event, order, beta);
  for (m.iterations = 0; m.iterations < max_iter; ++m.iterations) {
    if (xa.cols() == 0 || d.score.cwiseAbs().maxCoeff() < tol) {
      m.converged = true;
      break;
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(d.info);
    Eigen::VectorXd step = ldlt.solve(d.score);
    if (ldlt.info() != Eigen::Success || !step.allFinite()) break;
    double scale = 1.0;
    detail::CoxDerivs next;
    for (int halvings = 0; halvings < 30; ++halvings, scale *= 0.5) {
      next = detail::cox_derivs(xa, time, event, order, beta + scale * step);
      if (std::isfinite(next.loglik) && next.loglik >= d.loglik - 1e-12) break;
    }
    beta += scale * step;
    d = std::move(next);
  }
  if (!m.converged && xa.cols() > 0 && d.score.cwiseAbs().maxCoeff() < tol) m.converged = true;

  // Monotone likelihood: the coefficient is huge relative to the covariate's
  // spread, or the information along it has collapsed.
  const auto n_events = static_cast<double>(std::count_if(event.begin(), event.end(), [](int e) { return e != 0; }));
  for (std::size_t k = 0; k < active.size(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    const auto col = xa.col(kk);
    const double mean = col.mean();
    const double var = (col.array() - mean).square().mean();
    if (std::abs(beta(kk)) * std::sqrt(var) > 5.0 || d.info(kk, kk) < 1e-4 * n_events * var)
      m.separation = true;
  }
  if (!m.converged) m.separation = true;

  m.beta = Eigen::VectorXd::Zero(x.cols());
  for (std::size_t k = 0; k < active.size(); ++k) m.beta(active[k]) = beta(static_cast<Eigen::Index>(k));
  m.loglik = d.loglik;

  // Breslow baseline: dH0(t) = d(t) / sum_{T_j >= t} exp(x_j'beta).
  const Eigen::VectorXd eta = x * m.beta;
  std::vector<double> ts, dh;
  double s0 = 0.0;
  for (std::size_t a = 0; a < order.size();) {
    std::size_t b = a, deaths = 0;
    const double t = time[order[a]];
    while (b < order.size() && time[order[b]] == t) {
      s0 += std::exp(eta(static_cast<Eigen::Index>(order[b])));
      deaths += event[order[b]] ? 1 : 0;
      ++b;
    }
    if (deaths) {
      ts.push_back(t);
      dh.push_back(static_cast<double>(deaths) / s0);
    }
    a = b;
  }
  double h = 0.0;
  for (std::size_t k = ts.size(); k-- > 0;) {
    h += dh[k];
    m.base_times.push_back(ts[k]);
    m.base_cumhaz.push_back(h);
  }
  return m;
}

}  // namespace survgen
