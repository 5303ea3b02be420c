#pragma once

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "survgen/coxph.hpp"
#include "survgen/error.hpp"
#include "survgen/km.hpp"

namespace survgen {

namespace detail {

inline double js_from_counts(const std::vector<double>& p, const std::vector<double>& q) {
  double sp = 0.0, sq = 0.0;
  for (double v : p) sp += v;
  for (double v : q) sq += v;
  double div = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double a = p[k] / sp, b = q[k] / sq, m = 0.5 * (a + b);
    if (a > 0.0) div += 0.5 * a * std::log2(a / m);
    if (b > 0.0) div += 0.5 * b * std::log2(b / m);
  }
  return std::sqrt(std::clamp(div, 0.0, 1.0));
}

}  // namespace detail

/// JS distance (sqrt of base-2 JS divergence) between two category columns.
inline double js_distance_discrete(const std::vector<std::size_t>& a,
                                   const std::vector<std::size_t>& b, std::size_t categories) {
  if (a.empty() || b.empty()) throw NumericError("js_distance: empty column");
  std::vector<double> p(categories, 0.0), q(categories, 0.0);
  for (auto v : a) p.at(v) += 1.0;
  for (auto v : b) q.at(v) += 1.0;
  return detail::js_from_counts(p, q);
}

/// JS distance between two continuous columns over equal-width bins spanning
/// the pooled range.
inline double js_distance_continuous(const std::vector<double>& a, const std::vector<double>& b,
                                     std::size_t bins = 20) {
  if (a.empty() || b.empty()) throw NumericError("js_distance: empty column");
  const auto [amin, amax] = std::minmax_element(a.begin(), a.end());
  const auto [bmin, bmax] = std::minmax_element(b.begin(), b.end());
  const double lo = std::min(*amin, *bmin), hi = std::max(*amax, *bmax);
  if (!(hi > lo)) return 0.0;
  auto bin = [&](double v) {
    const auto k = static_cast<std::size_t>((v - lo) / (hi - lo) * static_cast<double>(bins));
    return std::min(k, bins - 1);
  };
  std::vector<double> p(bins, 0.0), q(bins, 0.0);
  for (double v : a) p[bin(v)] += 1.0;
  for (double v : b) q[bin(v)] += 1.0;
  return detail::js_from_counts(p, q);
}

/// 1-D W1 between empirical distributions: integral of |F_a - F_b|.
inline double wasserstein_1d(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw NumericError("wasserstein: empty column");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::vector<double> all(a);
  all.insert(all.end(), b.begin(), b.end());
  std::sort(all.begin(), all.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  double w = 0.0;
  std::size_t ia = 0, ib = 0;
  for (std::size_t k = 0; k + 1 < all.size(); ++k) {
    while (ia < a.size() && a[ia] <= all[k]) ++ia;
    while (ib < b.size() && b[ib] <= all[k]) ++ib;
    w += std::abs(static_cast<double>(ia) / na - static_cast<double>(ib) / nb) * (all[k + 1] - all[k]);
  }
  return w;
}

/// W1 after min-max normalization with constants from the real column.
/// Returns nullopt (and warns) when the real column is constant.
inline std::optional<double> wasserstein_distance(const std::vector<double>& real,
                                                  const std::vector<double>& syn) {
  if (real.empty() || syn.empty()) throw NumericError("wasserstein: empty column");
  const auto [mn, mx] = std::minmax_element(real.begin(), real.end());
  const double lo = *mn, range = *mx - *mn;
  if (!(range > 0.0)) {
    std::clog << "warning: constant real column skipped in wasserstein distance\n";
    return std::nullopt;
  }
  std::vector<double> a, b;
  for (double v : real) a.push_back((v - lo) / range);
  for (double v : syn) b.push_back((v - lo) / range);
  return wasserstein_1d(std::move(a), std::move(b));
}

/// Harrell's C: over pairs with E_i = 1 and T_i < T_j, the share where the
/// earlier subject has the higher risk (risk ties count 1/2).
inline double c_index(const std::vector<double>& risk, const std::vector<double>& time,
                      const std::vector<int>& event) {
  const std::size_t n = risk.size();
  if (time.size() != n || event.size() != n) throw NumericError("c_index: length mismatch");
  double concordant = 0.0, comparable = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!event[i]) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (!(time[i] < time[j])) continue;
      comparable += 1.0;
      if (risk[i] > risk[j])
        concordant += 1.0;
      else if (risk[i] == risk[j])
        concordant += 0.5;
    }
  }
  return comparable > 0.0 ? concordant / comparable : 0.5;
}

/// IPCW Brier score at t_star for predicted survival probabilities S(t_star | x_i).
/// Censoring weights come from the KM fit of the censoring distribution.
/// Normalized by the number of subjects.
inline double brier_score(const std::vector<double>& predicted_survival,
                          const std::vector<double>& time, const std::vector<int>& event,
                          double t_star) {
  const std::size_t n = time.size();
  if (n == 0 || predicted_survival.size() != n || event.size() != n)
    throw NumericError("brier_score: length mismatch or empty input");
  const auto [mn, mx] = std::minmax_element(time.begin(), time.end());
  if (t_star < *mn || t_star > *mx) throw NumericError("brier_score: horizon outside observed times");
  std::vector<int> flipped(n);
  for (std::size_t i = 0; i < n; ++i) flipped[i] = event[i] ? 0 : 1;
  const KmCurve g = km_fit(time, flipped);
  const double g_star = g(t_star);
  if (!(g_star > 0.0)) throw NumericError("brier_score: censoring survival is 0 at the horizon");
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = predicted_survival[i];
    if (time[i] <= t_star && event[i]) {
      sum += s * s / g.left_limit(time[i]);
    } else if (time[i] > t_star) {
      sum += (1.0 - s) * (1.0 - s) / g_star;
    }
  }
  return sum / static_cast<double>(n);
}

inline double brier_score(const CoxModel& model, const Eigen::MatrixXd& x,
                          const std::vector<double>& time, const std::vector<int>& event,
                          double t_star) {
  const Eigen::VectorXd lp = model.linear_predictor(x);
  std::vector<double> pred(static_cast<std::size_t>(lp.size()));
  for (Eigen::Index i = 0; i < lp.size(); ++i) pred[static_cast<std::size_t>(i)] = model.survival(t_star, lp(i));
  return brier_score(pred, time, event, t_star);
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw NumericError("median of empty vector");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace survgen
