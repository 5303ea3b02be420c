#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "survgen/dataset.hpp"
#include "survgen/error.hpp"
#include "survgen/random.hpp"
#include "survgen/schema.hpp"

namespace survgen {

/// Ground-truth survival world. Covariates: continuous ~ N(0, 1), discrete
/// uniform over their categories. Event times follow a Weibull proportional
/// hazards model
///   S(t | x) = exp(-(t / scale)^shape * exp(eta)),
///   eta = beta_cont . x_cont + sum_j beta_disc[j] * category_j,
/// censoring times are Exponential(censor_rate) (none when the rate is 0).
struct WorldConfig {
  std::size_t n = 1000;
  std::size_t n_cont = 1;
  std::vector<std::size_t> disc_cardinalities;
  std::vector<double> beta_cont{0.8};
  std::vector<double> beta_disc;
  double weibull_shape = 1.0;
  double weibull_scale = 1.0;
  double censor_rate = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (n == 0) throw ConfigError("world.n must be at least 1");
    if (n_cont + disc_cardinalities.size() == 0) throw ConfigError("world has no covariates");
    if (beta_cont.size() != n_cont)
      throw ConfigError("world.beta_cont needs one coefficient per continuous covariate");
    if (beta_disc.size() != disc_cardinalities.size())
      throw ConfigError("world.beta_disc needs one coefficient per discrete covariate");
    for (auto c : disc_cardinalities)
      if (c < 2) throw ConfigError("world discrete cardinalities must be at least 2");
    if (!(weibull_shape > 0.0) || !std::isfinite(weibull_shape))
      throw ConfigError("invalid Weibull shape");
    if (!(weibull_scale > 0.0) || !std::isfinite(weibull_scale))
      throw ConfigError("invalid Weibull scale");
    if (!(censor_rate >= 0.0) || !std::isfinite(censor_rate))
      throw ConfigError("censoring rate must be a finite nonnegative number");
  }

  FeatureSchema schema() const {
    FeatureSchema s;
    for (std::size_t j = 0; j < n_cont; ++j) s.columns.push_back({"x" + std::to_string(j + 1), ColumnKind::continuous, {}});
    for (std::size_t j = 0; j < disc_cardinalities.size(); ++j) {
      Column c{"c" + std::to_string(j + 1), ColumnKind::discrete, {}};
      for (std::size_t k = 0; k < disc_cardinalities[j]; ++k) c.labels.push_back(std::to_string(k));
      s.columns.push_back(std::move(c));
    }
    s.time_column = "time";
    s.event_column = "event";
    return s;
  }

  /// True S(t | x) for a record's covariates.
  double survival(double t, const SurvivalRecord& r) const {
    return std::exp(-std::pow(t / weibull_scale, weibull_shape) * std::exp(linear_predictor(r)));
  }

  double linear_predictor(const SurvivalRecord& r) const {
    double eta = 0.0;
    for (std::size_t j = 0; j < n_cont; ++j) eta += beta_cont[j] * r.x_cont[j];
    for (std::size_t j = 0; j < beta_disc.size(); ++j) eta += beta_disc[j] * static_cast<double>(r.x_disc[j]);
    return eta;
  }
};

struct SimulatedCohort {
  FeatureSchema schema;
  std::vector<SurvivalRecord> records;
  double censoring_rate = 0.0;  // realized fraction censored
};

inline SimulatedCohort simulate(const WorldConfig& w) {
  w.validate();
  SimulatedCohort out;
  out.schema = w.schema();
  std::size_t censored = 0;
  for (std::size_t i = 0; i < w.n; ++i) {
    CounterRng rng{w.seed, 0xc0407ULL, i};
    std::normal_distribution<double> normal;
    SurvivalRecord r;
    for (std::size_t j = 0; j < w.n_cont; ++j) r.x_cont.push_back(normal(rng));
    for (auto c : w.disc_cardinalities) r.x_disc.push_back(static_cast<std::size_t>(rng() % c));
    const double eta = w.linear_predictor(r);
    const double e = -std::log1p(-rng.uniform());  // Exp(1)
    const double t_event = w.weibull_scale * std::pow(e * std::exp(-eta), 1.0 / w.weibull_shape);
    double t = t_event;
    r.event = 1;
    if (w.censor_rate > 0.0) {
      const double t_cens = -std::log1p(-rng.uniform()) / w.censor_rate;
      if (t_cens < t_event) {
        t = t_cens;
        r.event = 0;
        ++censored;
      }
    }
    r.time = std::max(t, std::numeric_limits<double>::min());
    out.records.push_back(std::move(r));
  }
  out.censoring_rate = static_cast<double>(censored) / static_cast<double>(w.n);
  return out;
}

}  // namespace survgen
