#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "survgen/diffusion.hpp"
#include "survgen/error.hpp"
#include "survgen/hash.hpp"
#include "survgen/sampler.hpp"
#include "survgen/simulate.hpp"
#include "survgen/strings.hpp"
#include "survgen/survival_loss.hpp"
#include "survgen/trainer.hpp"

namespace survgen {

struct EvalConfig {
  double split = 0.75;  // training share of the real data
  std::optional<double> brier_horizon;
  std::optional<double> rmst_horizon;
};

/// Everything a pipeline run needs. Defaults are the shipped settings.
struct RunConfig {
  std::string data;
  std::string schema;
  std::string checkpoint;
  std::string out_dir = ".";
  std::string synthetic;
  TrainerConfig trainer;
  std::optional<double> surv_tau;
  std::optional<double> surv_alpha;
  NoiseSchedule schedule;
  SamplerConfig sampler;
  EvalConfig eval;
  double t_floor = 1e-6;
  std::uint64_t seed = 0;

  /// Pushes the global seed into the per-module configs.
  void propagate_seed() {
    trainer.seed = seed;
    sampler.seed = seed;
  }

  std::optional<SurvLossConfig> survival_loss() const {
    if (surv_tau.has_value() != surv_alpha.has_value())
      throw ConfigError("survival.tau and survival.alpha_decay must be given together");
    if (!surv_tau) return std::nullopt;
    SurvLossConfig c{*surv_tau, *surv_alpha};
    c.validate();
    return c;
  }

  void validate() const {
    trainer.validate();
    schedule.validate();
    sampler.validate();
    if (!(eval.split > 0.0 && eval.split < 1.0)) throw ConfigError("eval.split must lie in (0, 1)");
    if (!(t_floor > 0.0)) throw ConfigError("codec.t_floor must be positive");
    (void)survival_loss();
  }

  /// Resolved configuration in the same INI format the parser reads.
  std::string to_ini() const {
    auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("auto"); };
    std::vector<std::string> hidden;
    for (auto h : trainer.hidden) hidden.push_back(std::to_string(h));
    std::ostringstream os;
    os << "[run]\nseed = " << seed << "\n\n"
       << "[paths]\ndata = " << data << "\nschema = " << schema << "\ncheckpoint = " << checkpoint
       << "\nout_dir = " << out_dir << "\nsynthetic = " << synthetic << "\n\n"
       << "[trainer]\nepochs = " << trainer.epochs << "\nbatch_size = " << trainer.batch_size
       << "\nlearning_rate = " << format_double(trainer.learning_rate)
       << "\nlambda_cont = " << format_double(trainer.lambda_cont)
       << "\nlambda_disc = " << format_double(trainer.lambda_disc)
       << "\nalpha_surv = " << format_double(trainer.alpha_surv)
       << "\nlambda_max = " << format_double(trainer.lambda_max)
       << "\nwarmup_epochs = " << trainer.warmup_epochs
       << "\ncalibration_steps = " << trainer.calibration_steps
       << "\neps_stab = " << format_double(trainer.eps_stab) << "\nhidden = " << join(hidden, ", ")
       << "\nsurv_hidden = " << trainer.surv_hidden
       << "\nsurvival_loss = " << (trainer.survival_loss ? "true" : "false")
       << "\nema_decay = " << format_double(trainer.ema_decay) << "\n\n"
       << "[survival]\ntau = " << opt(surv_tau) << "\nalpha_decay = " << opt(surv_alpha) << "\n\n"
       << "[schedule]\nsigma_min = " << format_double(schedule.sigma_min)
       << "\nsigma_max = " << format_double(schedule.sigma_max)
       << "\nrho = " << format_double(schedule.rho)
       << "\neps_mask = " << format_double(schedule.eps_mask) << "\n\n"
       << "[sampler]\nsteps = " << sampler.steps << "\nn_samples = " << sampler.n_samples
       << "\nt_admin = " << (sampler.t_admin ? format_double(*sampler.t_admin) : "none") << "\n\n"
       << "[eval]\nsplit = " << format_double(eval.split)
       << "\nbrier_horizon = " << opt(eval.brier_horizon)
       << "\nrmst_horizon = " << opt(eval.rmst_horizon) << "\n\n"
       << "[codec]\nt_floor = " << format_double(t_floor) << "\n";
    return os.str();
  }

  /// Hash of the settings that determine results (paths excluded).
  std::string hash() const {
    RunConfig c = *this;
    c.data = c.schema = c.checkpoint = c.out_dir = c.synthetic = "";
    return hex64(fnv1a64(c.to_ini()));
  }
};

namespace detail {

using boost::property_tree::ptree;

// Typed access to one INI section that rejects unknown keys.
class Section {
 public:
  Section(const ptree& root, std::string name, std::set<std::string> allowed)
      : name_(std::move(name)), allowed_(std::move(allowed)) {
    if (auto child = root.get_child_optional(name_)) node_ = &*child;
    if (node_)
      for (const auto& [key, v] : *node_)
        if (!allowed_.count(key)) throw ConfigError("unknown key '" + name_ + "." + key + "'");
  }

  std::optional<std::string> raw(const std::string& key) const {
    if (!node_) return std::nullopt;
    auto v = node_->get_optional<std::string>(key);
    if (!v) return std::nullopt;
    return trim(*v);
  }

  void get(const std::string& key, std::string& out) const {
    if (auto v = raw(key)) out = *v;
  }
  void get(const std::string& key, double& out) const {
    if (auto v = raw(key)) out = number(key, *v);
  }
  void get(const std::string& key, std::size_t& out) const {
    if (auto v = raw(key)) out = count(key, *v);
  }
  void get(const std::string& key, std::uint64_t& out, int) const {
    if (auto v = raw(key)) out = count(key, *v);
  }
  void get(const std::string& key, bool& out) const {
    if (auto v = raw(key)) {
      const auto s = to_lower(*v);
      if (s == "true" || s == "1" || s == "yes") out = true;
      else if (s == "false" || s == "0" || s == "no") out = false;
      else throw ConfigError(name_ + "." + key + ": expected a boolean, got '" + *v + "'");
    }
  }
  /// "auto"/"none" or empty means absent.
  void get(const std::string& key, std::optional<double>& out) const {
    if (auto v = raw(key)) {
      const auto s = to_lower(*v);
      if (s.empty() || s == "auto" || s == "none") out.reset();
      else out = number(key, *v);
    }
  }
  void get(const std::string& key, std::vector<std::size_t>& out) const {
    if (auto v = raw(key)) {
      out.clear();
      if (!v->empty())
        for (const auto& part : split_trimmed(*v, ',')) out.push_back(count(key, part));
    }
  }
  void get(const std::string& key, std::vector<double>& out) const {
    if (auto v = raw(key)) {
      out.clear();
      if (!v->empty())
        for (const auto& part : split_trimmed(*v, ',')) out.push_back(number(key, part));
    }
  }

 private:
  double number(const std::string& key, const std::string& v) const {
    auto d = parse_double(v);
    if (!d) throw ConfigError(name_ + "." + key + ": expected a number, got '" + v + "'");
    return *d;
  }
  std::size_t count(const std::string& key, const std::string& v) const {
    auto d = parse_double(v);
    if (!d || *d < 0.0 || *d != std::floor(*d))
      throw ConfigError(name_ + "." + key + ": expected a nonnegative integer, got '" + v + "'");
    return static_cast<std::size_t>(*d);
  }

  std::string name_;
  std::set<std::string> allowed_;
  const ptree* node_ = nullptr;
};

inline ptree read_ini_tree(std::istream& in, const std::string& origin) {
  ptree tree;
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  return tree;
}

inline void check_sections(const ptree& tree, const std::set<std::string>& allowed,
                           const std::string& origin) {
  for (const auto& [name, node] : tree) {
    if (node.empty() && !node.data().empty())
      throw ConfigError(origin + ": key '" + name + "' must be inside a section");
    if (!allowed.count(name)) throw ConfigError(origin + ": unknown section [" + name + "]");
  }
}

}  // namespace detail

inline RunConfig parse_run_config(std::istream& in, const std::string& origin = "config") {
  const auto tree = detail::read_ini_tree(in, origin);
  detail::check_sections(tree, {"run", "paths", "trainer", "survival", "schedule", "sampler", "eval", "codec"},
                         origin);
  RunConfig c;
  try {
    detail::Section run(tree, "run", {"seed"});
    run.get("seed", c.seed, 0);

    detail::Section paths(tree, "paths", {"data", "schema", "checkpoint", "out_dir", "synthetic"});
    paths.get("data", c.data);
    paths.get("schema", c.schema);
    paths.get("checkpoint", c.checkpoint);
    paths.get("out_dir", c.out_dir);
    paths.get("synthetic", c.synthetic);

    auto& t = c.trainer;
    detail::Section tr(tree, "trainer",
                       {"epochs", "batch_size", "learning_rate", "lambda_cont", "lambda_disc", "alpha_surv",
                        "lambda_max", "warmup_epochs", "calibration_steps", "eps_stab", "hidden",
                        "surv_hidden", "survival_loss", "ema_decay"});
    tr.get("epochs", t.epochs);
    tr.get("batch_size", t.batch_size);
    tr.get("learning_rate", t.learning_rate);
    tr.get("lambda_cont", t.lambda_cont);
    tr.get("lambda_disc", t.lambda_disc);
    tr.get("alpha_surv", t.alpha_surv);
    tr.get("lambda_max", t.lambda_max);
    tr.get("warmup_epochs", t.warmup_epochs);
    tr.get("calibration_steps", t.calibration_steps);
    tr.get("eps_stab", t.eps_stab);
    tr.get("hidden", t.hidden);
    tr.get("surv_hidden", t.surv_hidden);
    tr.get("survival_loss", t.survival_loss);
    tr.get("ema_decay", t.ema_decay);

    detail::Section sv(tree, "survival", {"tau", "alpha_decay"});
    sv.get("tau", c.surv_tau);
    sv.get("alpha_decay", c.surv_alpha);

    detail::Section sc(tree, "schedule", {"sigma_min", "sigma_max", "rho", "eps_mask"});
    sc.get("sigma_min", c.schedule.sigma_min);
    sc.get("sigma_max", c.schedule.sigma_max);
    sc.get("rho", c.schedule.rho);
    sc.get("eps_mask", c.schedule.eps_mask);

    detail::Section sa(tree, "sampler", {"steps", "n_samples", "t_admin"});
    sa.get("steps", c.sampler.steps);
    sa.get("n_samples", c.sampler.n_samples);
    sa.get("t_admin", c.sampler.t_admin);

    detail::Section ev(tree, "eval", {"split", "brier_horizon", "rmst_horizon"});
    ev.get("split", c.eval.split);
    ev.get("brier_horizon", c.eval.brier_horizon);
    ev.get("rmst_horizon", c.eval.rmst_horizon);

    detail::Section co(tree, "codec", {"t_floor"});
    co.get("t_floor", c.t_floor);
  } catch (const ConfigError& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  c.propagate_seed();
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_run_config(in, path);
}

/// [world] section: n, seed, continuous, discrete (cardinality list),
/// beta_cont, beta_disc, weibull_shape, weibull_scale, censor_rate.
inline WorldConfig parse_world_config(std::istream& in, const std::string& origin = "world") {
  const auto tree = detail::read_ini_tree(in, origin);
  detail::check_sections(tree, {"world"}, origin);
  WorldConfig w;
  try {
    detail::Section s(tree, "world",
                      {"n", "seed", "continuous", "discrete", "beta_cont", "beta_disc", "weibull_shape",
                       "weibull_scale", "censor_rate"});
    s.get("n", w.n);
    s.get("seed", w.seed, 0);
    s.get("continuous", w.n_cont);
    s.get("discrete", w.disc_cardinalities);
    w.beta_cont.assign(w.n_cont, 0.0);
    w.beta_disc.assign(w.disc_cardinalities.size(), 0.0);
    s.get("beta_cont", w.beta_cont);
    s.get("beta_disc", w.beta_disc);
    s.get("weibull_shape", w.weibull_shape);
    s.get("weibull_scale", w.weibull_scale);
    s.get("censor_rate", w.censor_rate);
  } catch (const ConfigError& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  w.validate();
  return w;
}

inline WorldConfig load_world_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open world config '" + path + "'");
  return parse_world_config(in, path);
}

}  // namespace survgen
