#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "survgen/codec.hpp"
#include "survgen/denoiser.hpp"
#include "survgen/diffusion.hpp"
#include "survgen/error.hpp"
#include "survgen/random.hpp"
#include "survgen/trainer.hpp"

namespace survgen {

struct SamplerConfig {
  std::size_t steps = 300;
  std::size_t n_samples = 1000;
  std::optional<double> t_admin;
  std::uint64_t seed = 0;

  void validate() const {
    if (steps < 1) throw ConfigError("sampler.steps must be at least 1");
    if (n_samples < 1) throw ConfigError("sampler.n_samples must be at least 1");
    if (t_admin && !(*t_admin > 0.0)) throw ConfigError("sampler.t_admin must be positive");
  }
};

struct SampleResult {
  std::vector<SurvivalRecord> records;
  std::size_t forced_unmask = 0;  // residual masks resolved by argmax at u = 0
  std::size_t clamped_times = 0;
};

/// Records with T > t_admin become (t_admin, censored). Order is kept.
inline std::vector<SurvivalRecord> administrative_censor(std::vector<SurvivalRecord> records,
                                                         std::optional<double> t_admin) {
  if (!t_admin) return records;
  if (!(*t_admin > 0.0)) throw ConfigError("t_admin must be positive");
  for (auto& r : records) {
    if (r.time > *t_admin) {
      r.time = *t_admin;
      r.event = 0;
    }
  }
  return records;
}

/// Runs the reverse process on a uniform grid u_K = 1 > ... > u_0 = 0 from
/// N(0, sigma_max^2) noise and all-mask discrete state, then decodes.
/// Row r at step k draws from the substream (seed, r, k), so the output does
/// not depend on how rows are batched.
inline SampleResult sample(const TrainedModel& model, const SamplerConfig& cfg) {
  cfg.validate();
  const auto& p = model.params;
  const auto& L = p.layout;
  const auto& sched = model.schedule;
  if (DenoiserLayout::for_codec(model.codec, L.hidden, L.surv_hidden, L.time_dim) != L)
    throw SchemaError("checkpoint network layout does not match its codec");

  const auto n = static_cast<Eigen::Index>(cfg.n_samples);
  const auto cd = static_cast<Eigen::Index>(L.cont_dim);
  const double sigma_top = sigma_cont(1.0, sched);

  EncodedBatch state;
  state.cont.resize(n, cd);
  for (Eigen::Index i = 0; i < n; ++i) {
    CounterRng rng{cfg.seed, static_cast<std::uint64_t>(i), 0};
    std::normal_distribution<double> normal;
    for (Eigen::Index j = 0; j < cd; ++j) state.cont(i, j) = sigma_top * normal(rng);
  }
  for (std::size_t states : L.channel_states) {
    Matrix block = Matrix::Zero(n, static_cast<Eigen::Index>(states));
    block.col(block.cols() - 1).setOnes();
    state.disc.push_back(std::move(block));
  }

  SampleResult res;
  const std::size_t K = cfg.steps;
  for (std::size_t k = K; k >= 1; --k) {
    const double u = static_cast<double>(k) / static_cast<double>(K);
    const double s = static_cast<double>(k - 1) / static_cast<double>(K);
    const DenoiserOutput out = forward(p, state.cont, state.disc, u, sched);

    const double sigma_u = sigma_cont(u, sched);
    const double sigma_s = k == 1 ? 0.0 : sigma_cont(s, sched);
    state.cont = reverse_step_continuous(state.cont, out.eps_hat, sigma_u, sigma_s);
    if (!state.cont.allFinite())
      throw NumericError("sampler produced a non-finite state at step " + std::to_string(k));

    const double alpha_u = alpha_disc(u, sched).alpha;
    const double alpha_s = alpha_disc(s, sched).alpha;
    for (Eigen::Index i = 0; i < n; ++i) {
      CounterRng rng{cfg.seed, static_cast<std::uint64_t>(i), k};
      for (std::size_t j = 0; j < state.disc.size(); ++j) {
        Matrix& block = state.disc[j];
        const Eigen::Index mask = block.cols() - 1;
        const double draw = rng.uniform();  // drawn for every channel to keep streams aligned
        if (block(i, mask) != 1.0) continue;
        const auto& probs = out.x0_probs[j];
        const double norm = probs.row(i).head(mask).sum();
        Vector z0_hat = probs.row(i).head(mask).transpose();
        z0_hat = norm > 0.0 ? Vector(z0_hat / norm)
                            : Vector(Vector::Constant(mask, 1.0 / static_cast<double>(mask)));
        const Vector post = reverse_posterior_discrete(static_cast<std::size_t>(mask), z0_hat,
                                                       alpha_s, alpha_u);
        Eigen::Index next = mask;
        double acc = 0.0;
        for (Eigen::Index c = 0; c < post.size(); ++c) {
          acc += post(c);
          if (draw < acc) {
            next = c;
            break;
          }
        }
        if (k == 1 && next == mask) {
          probs.row(i).head(mask).maxCoeff(&next);
          ++res.forced_unmask;
        }
        if (next != mask) {
          block.row(i).setZero();
          block(i, next) = 1.0;
        }
      }
    }
  }

  DecodeResult dec = decode(state, model.codec);
  res.clamped_times = dec.clamped;
  res.records = administrative_censor(std::move(dec.records), cfg.t_admin);
  return res;
}

}  // namespace survgen
