#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "survgen/error.hpp"

namespace survgen {

/// Knee and decay rate of the event weighting, in study time units.
struct SurvLossConfig {
  double tau = 1.0;
  double alpha_decay = 1.0;

  void validate() const {
    if (!(tau > 0.0)) throw ConfigError("survival loss tau must be positive");
    if (!(alpha_decay > 0.0)) throw ConfigError("survival loss decay rate must be positive");
  }

  /// tau = 90th percentile of training times, alpha = 1 / (max T - tau),
  /// so the latest event gets weight e^-1.
  static SurvLossConfig from_times(std::vector<double> times) {
    if (times.empty()) throw ConfigError("cannot derive survival loss defaults from no times");
    std::sort(times.begin(), times.end());
    const double pos = 0.9 * static_cast<double>(times.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, times.size() - 1);
    const double tau = times[lo] + (pos - static_cast<double>(lo)) * (times[hi] - times[lo]);
    return {tau, 1.0 / (times.back() - tau + 1e-8)};
  }
};

/// 1 up to tau, then exp(-alpha (T - tau)).
inline Eigen::VectorXd event_weights(const Eigen::VectorXd& time, const SurvLossConfig& cfg) {
  Eigen::VectorXd w(time.size());
  for (Eigen::Index i = 0; i < time.size(); ++i)
    w(i) = time(i) <= cfg.tau ? 1.0 : std::exp(-cfg.alpha_decay * (time(i) - cfg.tau));
  return w;
}

struct CoxLoss {
  double loss = 0.0;
  Eigen::VectorXd grad;  // d loss / d risk
  bool no_events = false;
};

/// Weighted Cox partial negative log-likelihood with Breslow ties:
///   -sum_{i: E_i = 1} w_i [ r_i - log sum_{j: T_j >= T_i} exp(r_j) ].
/// O(n log n) via a descending sweep over times.
inline CoxLoss cox_weighted_nll(const Eigen::VectorXd& risk, const Eigen::VectorXd& time,
                                const Eigen::VectorXi& event, const Eigen::VectorXd& weight) {
  const Eigen::Index n = risk.size();
  if (n < 1) throw NumericError("cox_weighted_nll needs at least one subject");
  if (time.size() != n || event.size() != n || weight.size() != n)
    throw NumericError("cox_weighted_nll: length mismatch");
  if (!risk.allFinite() || !time.allFinite())
    throw NumericError("cox_weighted_nll: non-finite risk or time");

  CoxLoss out;
  out.grad = Eigen::VectorXd::Zero(n);
  if ((event.array() != 0).count() == 0) {
    out.no_events = true;
    return out;
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index a, Eigen::Index b) { return time(a) > time(b); });

  // Everything in the log domain so that very unequal risks cannot underflow.
  auto log_add = [](double a, double b) {
    if (a == -std::numeric_limits<double>::infinity()) return b;
    if (b == -std::numeric_limits<double>::infinity()) return a;
    const double m = std::max(a, b);
    return m + std::log1p(std::exp(-std::abs(a - b)));
  };
  constexpr double neg_inf = -std::numeric_limits<double>::infinity();

  // Descending sweep: log S(T_i) = log sum_{T_j >= T_i} exp(r_j).
  Eigen::VectorXd log_set(n);
  double running = neg_inf;
  for (std::size_t a = 0; a < order.size();) {
    std::size_t b = a;
    while (b < order.size() && time(order[b]) == time(order[a])) {
      running = log_add(running, risk(order[b]));
      ++b;
    }
    for (std::size_t k = a; k < b; ++k) log_set(order[k]) = running;
    a = b;
  }

  // Ascending sweep: c_k = sum_{i event, T_i <= T_k} w_i / S(T_i), kept as log c_k.
  double loss = 0.0;
  double log_cum = neg_inf;
  for (std::size_t a = order.size(); a > 0;) {
    std::size_t b = a;
    const double t = time(order[a - 1]);
    while (b > 0 && time(order[b - 1]) == t) {
      const Eigen::Index i = order[b - 1];
      if (event(i)) {
        loss -= weight(i) * (risk(i) - log_set(i));
        if (weight(i) > 0.0) log_cum = log_add(log_cum, std::log(weight(i)) - log_set(i));
      }
      --b;
    }
    for (std::size_t k = b; k < a; ++k) {
      const Eigen::Index j = order[k];
      out.grad(j) = std::exp(risk(j) + log_cum) - (event(j) ? weight(j) : 0.0);
    }
    a = b;
  }
  out.loss = loss;
  return out;
}

}  // namespace survgen
