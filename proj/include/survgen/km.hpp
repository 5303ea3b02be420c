#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "survgen/error.hpp"

namespace survgen {

/// Product-limit survival curve as a right-continuous step function.
struct KmCurve {
  std::vector<double> times;     // sorted distinct observed times
  std::vector<double> survival;  // S(t) on [times[k], times[k+1])
  std::vector<std::size_t> at_risk;
  std::vector<std::size_t> events;
  double max_time = 0.0;

  /// S(t), with S = 1 before the first time.
  double operator()(double t) const {
    auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 1.0;
    return survival[static_cast<std::size_t>(it - times.begin()) - 1];
  }

  /// Left limit S(t-).
  double left_limit(double t) const {
    auto it = std::lower_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 1.0;
    return survival[static_cast<std::size_t>(it - times.begin()) - 1];
  }
};

/// Subjects censored at t stay in the risk set for events at t.
inline KmCurve km_fit(const std::vector<double>& time, const std::vector<int>& event) {
  if (time.empty()) throw NumericError("km_fit needs at least one subject");
  if (time.size() != event.size()) throw NumericError("km_fit: length mismatch");
  std::vector<std::size_t> order(time.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return time[a] < time[b]; });
  KmCurve c;
  std::size_t at_risk = time.size();
  double s = 1.0;
  for (std::size_t a = 0; a < order.size();) {
    std::size_t b = a, d = 0;
    while (b < order.size() && time[order[b]] == time[order[a]]) d += event[order[b++]] ? 1 : 0;
    if (d > 0) s *= static_cast<double>(at_risk - d) / static_cast<double>(at_risk);
    c.times.push_back(time[order[a]]);
    c.survival.push_back(s);
    c.at_risk.push_back(at_risk);
    c.events.push_back(d);
    at_risk -= b - a;
    a = b;
  }
  c.max_time = c.times.back();
  return c;
}

/// Mean squared gap on 100 equally spaced points of [0, min(max_a, max_b)].
inline double km_mse(const KmCurve& a, const KmCurve& b, std::size_t points = 100) {
  if (points == 0) throw NumericError("km_mse: empty grid");
  const double hi = std::min(a.max_time, b.max_time);
  double sum = 0.0;
  for (std::size_t k = 0; k < points; ++k) {
    const double t = points == 1 ? 0.0 : hi * static_cast<double>(k) / static_cast<double>(points - 1);
    const double d = a(t) - b(t);
    sum += d * d;
  }
  return sum / static_cast<double>(points);
}

/// Exact integral of the step function over [0, horizon].
inline double restricted_mean(const KmCurve& c, double horizon) {
  double area = 0.0, prev_t = 0.0, prev_s = 1.0;
  for (std::size_t k = 0; k < c.times.size() && c.times[k] < horizon; ++k) {
    area += prev_s * (c.times[k] - prev_t);
    prev_t = c.times[k];
    prev_s = c.survival[k];
  }
  return area + prev_s * (horizon - prev_t);
}

inline double rmst_gap(const KmCurve& a, const KmCurve& b, double horizon) {
  if (!(horizon > 0.0)) throw NumericError("rmst_gap: horizon must be positive");
  return std::abs(restricted_mean(a, horizon) - restricted_mean(b, horizon));
}

inline double rmst_gap(const KmCurve& a, const KmCurve& b) {
  return rmst_gap(a, b, std::min(a.max_time, b.max_time));
}

}  // namespace survgen
