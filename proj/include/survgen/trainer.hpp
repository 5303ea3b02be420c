#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "survgen/codec.hpp"
#include "survgen/dataset.hpp"
#include "survgen/denoiser.hpp"
#include "survgen/diffusion.hpp"
#include "survgen/error.hpp"
#include "survgen/random.hpp"
#include "survgen/schema.hpp"
#include "survgen/survival_loss.hpp"

namespace survgen {

struct TrainerConfig {
  std::size_t epochs = 4000;
  std::size_t batch_size = 256;
  double learning_rate = 0.002;
  double lambda_cont = 1.0;
  double lambda_disc = 1.0;
  double alpha_surv = 0.3;
  double lambda_max = 10.0;
  std::size_t warmup_epochs = 1500;
  std::size_t calibration_steps = 10;
  double eps_stab = 1e-8;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::vector<std::size_t> hidden{256, 256};
  std::size_t surv_hidden = 64;
  bool survival_loss = true;  // false pins lambda_surv to 0 (plain diffusion objective)
  double ema_decay = 0.999;   // weight average used for the saved model; 0 keeps the last iterate
  std::uint64_t seed = 0;

  void validate() const {
    if (epochs == 0) throw ConfigError("trainer.epochs must be at least 1");
    if (batch_size == 0) throw ConfigError("trainer.batch_size must be at least 1");
    if (!(learning_rate >= 0.0)) throw ConfigError("trainer.learning_rate must be nonnegative");
    if (!(lambda_cont > 0.0 && lambda_disc > 0.0))
      throw ConfigError("trainer.lambda_cont and trainer.lambda_disc must be positive");
    if (!(alpha_surv > 0.0 && alpha_surv < 1.0))
      throw ConfigError("trainer.alpha_surv must lie in (0, 1)");
    if (!(lambda_max > 0.0)) throw ConfigError("trainer.lambda_max must be positive");
    if (calibration_steps < 1) throw ConfigError("trainer.calibration_steps must be at least 1");
    if (!(eps_stab > 0.0)) throw ConfigError("trainer.eps_stab must be positive");
    if (!(ema_decay >= 0.0 && ema_decay < 1.0)) throw ConfigError("trainer.ema_decay must lie in [0, 1)");
  }
};

struct EpochLog {
  std::size_t epoch = 0;
  double l_disc = 0.0;
  double l_cont = 0.0;
  double l_surv = 0.0;
  double lambda_surv = 0.0;
  double l_total = 0.0;
};

struct TrainerState {
  DenoiserParams m;  // first moments
  DenoiserParams v;  // second moments
  DenoiserParams ema;
  std::size_t step = 0;
  double lbar_diff = 0.0;
  double lbar_surv = 0.0;
  std::size_t calibration_seen = 0;
  std::optional<double> lambda_calibrated;
  std::vector<EpochLog> history;
  std::size_t clamped_probabilities = 0;
};

/// Everything needed to sample: the schema, fitted codec, schedule, weights.
struct TrainedModel {
  FeatureSchema schema;
  CodecStats codec;
  NoiseSchedule schedule;
  SurvLossConfig surv;
  DenoiserParams params;
};

struct TrainResult {
  TrainedModel model;
  TrainerState state;
};

/// Mean squared error over batch and dimensions.
inline double loss_cont(const Matrix& eps_hat, const Matrix& eps) {
  if (eps_hat.rows() != eps.rows() || eps_hat.cols() != eps.cols())
    throw NumericError("loss_cont: shape mismatch");
  if (eps.size() == 0) return 0.0;
  return (eps_hat - eps).squaredNorm() / static_cast<double>(eps.size());
}

struct DiscLoss {
  double value = 0.0;
  std::vector<Matrix> d_logits;
  std::size_t masked = 0;
  std::size_t clamped = 0;
};

/// Single-sample estimate of the masked-diffusion ELBO term:
///   (-alpha_dot / (1 - alpha)) * mean over (row, channel) of
///   1[masked] * -log p(true category),
/// with p renormalized over the true categories (mask slot excluded).
/// Also returns the gradient with respect to the logits.
inline DiscLoss discrete_elbo(const std::vector<Matrix>& x0_probs, const std::vector<Matrix>& z0,
                              const std::vector<Matrix>& zu, double alpha, double alpha_dot) {
  if (x0_probs.size() != z0.size() || z0.size() != zu.size())
    throw NumericError("loss_disc: channel count mismatch");
  DiscLoss out;
  std::size_t positions = 0;
  for (std::size_t j = 0; j < z0.size(); ++j) {
    out.d_logits.push_back(Matrix::Zero(x0_probs[j].rows(), x0_probs[j].cols()));
    positions += static_cast<std::size_t>(z0[j].rows());
  }
  if (positions == 0) return out;
  double sum = 0.0;
  for (std::size_t j = 0; j < z0.size(); ++j) {
    const Matrix& p = x0_probs[j];
    const Eigen::Index mask = p.cols() - 1;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      if (zu[j](i, mask) != 1.0) continue;
      ++out.masked;
      Eigen::Index c = 0;
      z0[j].row(i).head(mask).maxCoeff(&c);
      const double norm = p.row(i).head(mask).sum();
      double pt = norm > 0.0 ? p(i, c) / norm : 0.0;
      if (!(pt >= 1e-12)) {
        pt = 1e-12;
        ++out.clamped;
      }
      sum -= std::log(pt);
      if (norm > 0.0) out.d_logits[j].row(i).head(mask) = p.row(i).head(mask) / norm;
      out.d_logits[j](i, c) -= 1.0;
    }
  }
  if (out.masked == 0) {
    for (auto& d : out.d_logits) d.setZero();
    return out;
  }
  if (!(alpha < 1.0)) throw NumericError("loss_disc: masked positions at alpha = 1");
  const double scale = (-alpha_dot / (1.0 - alpha)) / static_cast<double>(positions);
  out.value = scale * sum;
  for (auto& d : out.d_logits) d *= scale;
  return out;
}

inline double loss_disc(const std::vector<Matrix>& x0_probs, const std::vector<Matrix>& z0,
                        const std::vector<Matrix>& zu, double alpha, double alpha_dot) {
  return discrete_elbo(x0_probs, z0, zu, alpha, alpha_dot).value;
}

struct LossComponents {
  double l_cont = 0.0;
  double l_disc = 0.0;
  double l_surv = 0.0;
};

inline double total_loss(const LossComponents& c, double lambda_cont, double lambda_disc,
                         double lambda_surv) {
  if (lambda_cont < 0.0 || lambda_disc < 0.0 || lambda_surv < 0.0)
    throw NumericError("total_loss: negative weight");
  return lambda_cont * c.l_cont + lambda_disc * c.l_disc + lambda_surv * c.l_surv;
}

/// Weight making the survival term a target fraction of the objective,
/// capped at lambda_max.
inline double calibrate_lambda(double lbar_diff, double lbar_surv, double alpha_surv,
                               double lambda_max, double eps) {
  if (lbar_diff < 0.0 || lbar_surv < 0.0 || eps < 0.0)
    throw NumericError("calibrate_lambda: inputs must be nonnegative");
  const double raw = alpha_surv * lbar_diff / ((1.0 - alpha_surv) * (lbar_surv + eps));
  return std::min(lambda_max, raw);
}

/// Linear ramp from 0 at epoch 0 to the calibrated value at warmup_epochs.
inline double lambda_schedule(std::size_t epoch, std::size_t warmup_epochs,
                              std::optional<double> lambda_calibrated) {
  if (!lambda_calibrated) throw NumericError("lambda_schedule: lambda_surv is not calibrated");
  if (warmup_epochs == 0 || epoch >= warmup_epochs) return *lambda_calibrated;
  return *lambda_calibrated * static_cast<double>(epoch) / static_cast<double>(warmup_epochs);
}

namespace detail {

inline void adam_update(DenoiserParams& p, const DenoiserParams& g, TrainerState& st,
                        const TrainerConfig& cfg) {
  const double t = static_cast<double>(st.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  std::vector<Matrix*> ps, ms, vs;
  std::vector<const Matrix*> gs;
  p.for_each_tensor([&](const std::string&, Matrix& x) { ps.push_back(&x); });
  st.m.for_each_tensor([&](const std::string&, Matrix& x) { ms.push_back(&x); });
  st.v.for_each_tensor([&](const std::string&, Matrix& x) { vs.push_back(&x); });
  g.for_each_tensor([&](const std::string&, const Matrix& x) { gs.push_back(&x); });
  for (std::size_t k = 0; k < ps.size(); ++k) {
    auto m = ms[k]->array();
    auto v = vs[k]->array();
    const auto gr = gs[k]->array();
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * gr;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * gr.square();
    ps[k]->array() -= cfg.learning_rate * (m / c1) / ((v / c2).sqrt() + cfg.adam_eps);
  }
}

// Decay ramps in as (1 + step) / (10 + step) so early weights fade quickly.
inline void ema_update(DenoiserParams& ema, const DenoiserParams& p, double decay, std::size_t step) {
  if (decay <= 0.0) return;
  const double s = static_cast<double>(step);
  const double d = std::min(decay, (1.0 + s) / (10.0 + s));
  std::vector<const Matrix*> src;
  p.for_each_tensor([&](const std::string&, const Matrix& m) { src.push_back(&m); });
  std::size_t k = 0;
  ema.for_each_tensor([&](const std::string&, Matrix& m) { m += (1.0 - d) * (*src[k++] - m); });
}

inline Matrix gather_rows(const Matrix& m, const std::vector<std::size_t>& idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

}  // namespace detail

/// Corrupted view of one minibatch at diffusion time u.
struct BatchNoise {
  double u = 0.0;
  Matrix zu;
  Matrix eps;
  std::vector<Matrix> zu_disc;
};

struct BatchObjective {
  LossComponents parts;
  double total = 0.0;
  DenoiserParams grad;
  std::size_t clamped = 0;  // probabilities floored inside loss_disc
};

/// Loss components, weighted total and its exact parameter gradient for one
/// minibatch. A zero weight drops that term from the gradient.
inline BatchObjective batch_objective(const DenoiserParams& params, const NoiseSchedule& sched,
                                      const std::vector<Matrix>& z0_disc, const BatchNoise& noise,
                                      const Eigen::VectorXd& time, const Eigen::VectorXi& event,
                                      const Eigen::VectorXd& weight, double lambda_cont,
                                      double lambda_disc, double lambda_surv) {
  const MaskRate mr = alpha_disc(noise.u, sched);
  ForwardCache cache;
  const DenoiserOutput out = forward(params, noise.zu, noise.zu_disc, noise.u, sched, &cache);

  BatchObjective res;
  res.parts.l_cont = loss_cont(out.eps_hat, noise.eps);
  const DiscLoss dl = discrete_elbo(out.x0_probs, z0_disc, noise.zu_disc, mr.alpha, mr.alpha_dot);
  res.parts.l_disc = dl.value;
  res.clamped = dl.clamped;
  const CoxLoss cl = cox_weighted_nll(out.risk, time, event, weight);
  res.parts.l_surv = cl.loss;
  res.total = total_loss(res.parts, lambda_cont, lambda_disc, lambda_surv);

  OutputGrads g;
  const double inv = 2.0 / static_cast<double>(std::max<Eigen::Index>(noise.eps.size(), 1));
  g.d_eps_hat = (lambda_cont * inv) * (out.eps_hat - noise.eps);
  g.d_logits = dl.d_logits;
  for (auto& d : g.d_logits) d *= lambda_disc;
  if (lambda_surv != 0.0) g.d_risk = lambda_surv * cl.grad;
  res.grad = backward(params, noise.zu, noise.zu_disc, noise.u, cache, g);
  return res;
}

using EpochCallback = std::function<void(const EpochLog&)>;

/// Fits codec, survival-loss defaults (unless given) and denoiser weights.
/// Deterministic given cfg.seed.
inline TrainResult train(const std::vector<SurvivalRecord>& records, const FeatureSchema& schema,
                         const TrainerConfig& cfg, std::optional<SurvLossConfig> surv_cfg,
                         const NoiseSchedule& sched, const EpochCallback& on_epoch = {}) {
  cfg.validate();
  sched.validate();
  schema.validate();
  const CodecStats codec = fit_codec(records, schema);
  std::vector<double> times;
  for (const auto& r : records) times.push_back(r.time);
  const SurvLossConfig surv = surv_cfg ? *surv_cfg : SurvLossConfig::from_times(times);
  surv.validate();

  const EncodedBatch data = encode(records, codec);
  const auto n = records.size();
  Eigen::VectorXd all_time(static_cast<Eigen::Index>(n));
  Eigen::VectorXi all_event(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    all_time(static_cast<Eigen::Index>(i)) = records[i].time;
    all_event(static_cast<Eigen::Index>(i)) = records[i].event;
  }
  const Eigen::VectorXd all_weight = event_weights(all_time, surv);

  TrainResult res;
  res.model.schema = schema;
  res.model.codec = codec;
  res.model.schedule = sched;
  res.model.surv = surv;
  DenoiserParams params =
      init_params(DenoiserLayout::for_codec(codec, cfg.hidden, cfg.surv_hidden), cfg.seed);
  TrainerState& st = res.state;
  st.m = params.zeros_like();
  st.v = params.zeros_like();
  st.ema = params;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    CounterRng shuffle_rng{cfg.seed, 0x5a1ULL, epoch};
    for (std::size_t i = n; i > 1; --i)
      std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle_rng() % i)]);

    EpochLog log;
    log.epoch = epoch;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::vector<std::size_t> idx(
          order.begin() + static_cast<std::ptrdiff_t>(start),
          order.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + cfg.batch_size)));
      const auto bn = static_cast<Eigen::Index>(idx.size());
      CounterRng rng{cfg.seed, 0x57e9ULL, st.step};

      const Matrix z0 = detail::gather_rows(data.cont, idx);
      std::vector<Matrix> z0_disc;
      for (const auto& b : data.disc) z0_disc.push_back(detail::gather_rows(b, idx));
      Eigen::VectorXd bt(bn), bw(bn);
      Eigen::VectorXi be(bn);
      for (Eigen::Index i = 0; i < bn; ++i) {
        const auto k = static_cast<Eigen::Index>(idx[static_cast<std::size_t>(i)]);
        bt(i) = all_time(k);
        be(i) = all_event(k);
        bw(i) = all_weight(k);
      }

      BatchNoise noise;
      noise.u = rng.uniform();
      const auto pc = perturb_continuous(z0, noise.u, sched, rng);
      noise.zu = pc.zu;
      noise.eps = pc.eps;
      noise.zu_disc = perturb_discrete(z0_disc, noise.u, sched, rng);

      double lambda_eff = 0.0;
      if (cfg.survival_loss && st.lambda_calibrated)
        lambda_eff = lambda_schedule(epoch, cfg.warmup_epochs, st.lambda_calibrated);
      const BatchObjective obj = batch_objective(params, sched, z0_disc, noise, bt, be, bw,
                                                 cfg.lambda_cont, cfg.lambda_disc, lambda_eff);
      const LossComponents& lc = obj.parts;
      const double total = obj.total;
      st.clamped_probabilities += obj.clamped;

      auto check = [&](double v, const char* name) {
        if (!std::isfinite(v))
          throw NumericError(std::string("non-finite ") + name + " at epoch " +
                             std::to_string(epoch) + ", step " + std::to_string(st.step));
      };
      check(lc.l_cont, "L_cont");
      check(lc.l_disc, "L_disc");
      check(lc.l_surv, "L_surv");
      check(total, "L_total");

      if (!st.lambda_calibrated) {
        st.lbar_diff += cfg.lambda_cont * lc.l_cont + cfg.lambda_disc * lc.l_disc;
        st.lbar_surv += lc.l_surv;
        if (++st.calibration_seen == cfg.calibration_steps) {
          st.lbar_diff /= static_cast<double>(cfg.calibration_steps);
          st.lbar_surv /= static_cast<double>(cfg.calibration_steps);
          st.lambda_calibrated = calibrate_lambda(st.lbar_diff, st.lbar_surv, cfg.alpha_surv,
                                                  cfg.lambda_max, cfg.eps_stab);
        }
      }

      ++st.step;
      detail::adam_update(params, obj.grad, st, cfg);
      detail::ema_update(st.ema, params, cfg.ema_decay, st.step);

      log.l_cont += lc.l_cont;
      log.l_disc += lc.l_disc;
      log.l_surv += lc.l_surv;
      log.l_total += total;
      log.lambda_surv = lambda_eff;
      ++batches;
    }
    const double b = static_cast<double>(batches);
    log.l_cont /= b;
    log.l_disc /= b;
    log.l_surv /= b;
    log.l_total /= b;
    st.history.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  res.model.params = cfg.ema_decay > 0.0 ? st.ema : params;
  return res;
}

}  // namespace survgen
