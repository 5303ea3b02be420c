#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "survgen/codec.hpp"
#include "survgen/coxph.hpp"
#include "survgen/dataset.hpp"
#include "survgen/km.hpp"
#include "survgen/metrics.hpp"
#include "survgen/schema.hpp"

namespace survgen {

/// Metric keys, in report order.
inline const std::vector<std::string>& report_metric_keys() {
  static const std::vector<std::string> keys{"js_distance", "wasserstein_distance", "c_index",
                                             "brier_score", "km_mse",      "rmst_gap"};
  return keys;
}

struct EvalReport {
  std::map<std::string, std::optional<double>> metrics;  // keyed by report_metric_keys()
  std::map<std::string, std::string> failures;           // metric -> error message
  std::map<std::string, double> per_feature_js;
  std::map<std::string, double> per_feature_wasserstein;
  // Train-on-real reference on the same test split.
  std::optional<double> trtr_c_index;
  std::optional<double> trtr_brier_score;
  std::size_t n_real_train = 0, n_real_test = 0, n_syn = 0;
  std::optional<double> real_censoring_rate, syn_censoring_rate;
  std::optional<double> brier_horizon, rmst_horizon;
  bool tstr_separation = false;
  std::uint64_t seed = 0;

  std::optional<double> get(const std::string& key) const {
    auto it = metrics.find(key);
    return it == metrics.end() ? std::nullopt : it->second;
  }
};

inline nlohmann::json to_json(const EvalReport& r) {
  using nlohmann::json;
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json metrics = json::object();
  for (const auto& k : report_metric_keys()) metrics[k] = opt(r.get(k));
  json j;
  j["metrics"] = metrics;
  j["failures"] = r.failures;
  j["per_feature"] = {{"js_distance", r.per_feature_js},
                      {"wasserstein_distance", r.per_feature_wasserstein}};
  j["reference"] = {{"trtr_c_index", opt(r.trtr_c_index)},
                    {"trtr_brier_score", opt(r.trtr_brier_score)}};
  j["metadata"] = {{"n_real_train", r.n_real_train},
                   {"n_real_test", r.n_real_test},
                   {"n_syn", r.n_syn},
                   {"real_censoring_rate", opt(r.real_censoring_rate)},
                   {"syn_censoring_rate", opt(r.syn_censoring_rate)},
                   {"brier_horizon", opt(r.brier_horizon)},
                   {"rmst_horizon", opt(r.rmst_horizon)},
                   {"tstr_separation", r.tstr_separation},
                   {"seed", r.seed}};
  return j;
}

/// Downstream design matrix: standardized continuous covariates plus
/// reference-coded dummies (first category dropped) for discrete ones.
inline Eigen::MatrixXd design_matrix(const std::vector<SurvivalRecord>& rs, const CodecStats& codec) {
  Eigen::Index cols = static_cast<Eigen::Index>(codec.d_cont());
  for (const auto& l : codec.labels) cols += static_cast<Eigen::Index>(l.size()) - 1;
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rs.size()), cols);
  for (std::size_t i = 0; i < rs.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    Eigen::Index c = 0;
    for (std::size_t j = 0; j < codec.d_cont(); ++j, ++c)
      x(ii, c) = (rs[i].x_cont[j] - codec.cont_mean[j]) / codec.cont_std[j];
    for (std::size_t j = 0; j < codec.d_disc(); ++j) {
      const std::size_t k = rs[i].x_disc[j];
      if (k > 0) x(ii, c + static_cast<Eigen::Index>(k) - 1) = 1.0;
      c += static_cast<Eigen::Index>(codec.labels[j].size()) - 1;
    }
  }
  return x;
}

struct EvalOptions {
  std::optional<double> brier_horizon;  // default: median real-test time
  std::optional<double> rmst_horizon;   // default: min of the two max times
  std::uint64_t seed = 0;
};

namespace detail {
inline std::vector<double> times_of(const std::vector<SurvivalRecord>& rs) {
  std::vector<double> t;
  for (const auto& r : rs) t.push_back(r.time);
  return t;
}
inline std::vector<int> events_of(const std::vector<SurvivalRecord>& rs) {
  std::vector<int> e;
  for (const auto& r : rs) e.push_back(r.event);
  return e;
}
}  // namespace detail

/// Train-on-synthetic / test-on-real evaluation plus fidelity metrics between
/// the real training cohort and the synthetic cohort. Each metric is computed
/// independently; a failing metric is recorded under `failures` by name.
inline EvalReport tstr_evaluate(const std::vector<SurvivalRecord>& real_train,
                                const std::vector<SurvivalRecord>& real_test,
                                const std::vector<SurvivalRecord>& syn, const FeatureSchema& schema,
                                const EvalOptions& opt = {}) {
  if (syn.empty()) throw NumericError("tstr_evaluate: synthetic cohort is empty");
  EvalReport r;
  r.seed = opt.seed;
  r.n_real_train = real_train.size();
  r.n_real_test = real_test.size();
  r.n_syn = syn.size();
  r.real_censoring_rate = censoring_rate(real_train);
  r.syn_censoring_rate = censoring_rate(syn);
  for (const auto& k : report_metric_keys()) r.metrics[k] = std::nullopt;

  auto guarded = [&](const std::string& key, const std::function<double()>& f) {
    try {
      r.metrics[key] = f();
    } catch (const std::exception& e) {
      r.failures[key] = e.what();
    }
  };

  guarded("js_distance", [&] {
    double sum = 0.0;
    std::size_t ic = 0, id = 0;
    for (const auto& c : schema.columns) {
      double v;
      if (c.kind == ColumnKind::continuous) {
        std::vector<double> a, b;
        for (const auto& x : real_train) a.push_back(x.x_cont.at(ic));
        for (const auto& x : syn) b.push_back(x.x_cont.at(ic));
        v = js_distance_continuous(a, b);
        ++ic;
      } else {
        std::vector<std::size_t> a, b;
        for (const auto& x : real_train) a.push_back(x.x_disc.at(id));
        for (const auto& x : syn) b.push_back(x.x_disc.at(id));
        v = js_distance_discrete(a, b, c.cardinality());
        ++id;
      }
      r.per_feature_js[c.name] = v;
      sum += v;
    }
    return sum / static_cast<double>(schema.columns.size());
  });

  guarded("wasserstein_distance", [&] {
    double sum = 0.0;
    std::size_t used = 0, ic = 0;
    for (const auto& c : schema.columns) {
      if (c.kind != ColumnKind::continuous) continue;
      std::vector<double> a, b;
      for (const auto& x : real_train) a.push_back(x.x_cont.at(ic));
      for (const auto& x : syn) b.push_back(x.x_cont.at(ic));
      ++ic;
      if (auto w = wasserstein_distance(a, b)) {
        r.per_feature_wasserstein[c.name] = *w;
        sum += *w;
        ++used;
      }
    }
    if (used == 0) throw NumericError("no usable continuous covariates");
    return sum / static_cast<double>(used);
  });

  const KmCurve km_real = km_fit(detail::times_of(real_train), detail::events_of(real_train));
  const KmCurve km_syn = km_fit(detail::times_of(syn), detail::events_of(syn));
  guarded("km_mse", [&] { return km_mse(km_real, km_syn); });
  guarded("rmst_gap", [&] {
    const double h = opt.rmst_horizon ? *opt.rmst_horizon : std::min(km_real.max_time, km_syn.max_time);
    r.rmst_horizon = h;
    return rmst_gap(km_real, km_syn, h);
  });

  // Downstream Cox model, features scaled with the real training codec.
  std::optional<CodecStats> codec;
  std::string codec_error;
  try {
    codec = fit_codec(real_train, schema);
  } catch (const std::exception& e) {
    codec_error = e.what();
  }
  const std::vector<double> test_t = detail::times_of(real_test);
  const std::vector<int> test_e = detail::events_of(real_test);
  std::optional<double> horizon = opt.brier_horizon;
  if (!horizon && !test_t.empty()) horizon = median(test_t);
  r.brier_horizon = horizon;

  auto score = [&](const std::vector<SurvivalRecord>& fit_on, bool is_tstr,
                   std::optional<double>& c_out, std::optional<double>& b_out,
                   const std::string& c_key, const std::string& b_key) {
    try {
      if (!codec) throw NumericError("cannot standardize covariates: " + codec_error);
      if (real_test.empty() || std::none_of(test_e.begin(), test_e.end(), [](int e) { return e != 0; }))
        throw NumericError("real test split has no events");
      const CoxModel m = coxph_fit(design_matrix(fit_on, *codec), detail::times_of(fit_on),
                                   detail::events_of(fit_on));
      if (is_tstr) r.tstr_separation = m.separation;
      const Eigen::MatrixXd xt = design_matrix(real_test, *codec);
      const Eigen::VectorXd lp = m.linear_predictor(xt);
      const std::vector<double> risk(lp.data(), lp.data() + lp.size());
      c_out = c_index(risk, test_t, test_e);
      try {
        b_out = brier_score(m, xt, test_t, test_e, *horizon);
      } catch (const std::exception& e) {
        if (!b_key.empty()) r.failures[b_key] = e.what();
      }
    } catch (const std::exception& e) {
      if (!c_key.empty()) {
        r.failures[c_key] = e.what();
        r.failures[b_key] = e.what();
      }
    }
  };
  std::optional<double> c, b;
  score(syn, true, c, b, "c_index", "brier_score");
  r.metrics["c_index"] = c;
  r.metrics["brier_score"] = b;
  score(real_train, false, r.trtr_c_index, r.trtr_brier_score, "", "");
  return r;
}

/// Writes both KM step functions as CSV rows: cohort,time,survival.
inline void write_km_csv(std::ostream& os, const std::vector<SurvivalRecord>& real,
                         const std::vector<SurvivalRecord>& syn) {
  os << "cohort,time,survival\n";
  auto dump = [&](const char* name, const std::vector<SurvivalRecord>& rs) {
    if (rs.empty()) return;
    const KmCurve c = km_fit(detail::times_of(rs), detail::events_of(rs));
    for (std::size_t k = 0; k < c.times.size(); ++k)
      os << name << "," << format_double(c.times[k]) << "," << format_double(c.survival[k]) << "\n";
  };
  dump("real", real);
  dump("synthetic", syn);
}

}  // namespace survgen
