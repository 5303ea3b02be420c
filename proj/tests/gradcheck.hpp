#pragma once

// Central finite-difference check of batch_objective gradients on a tiny net.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "survgen/trainer.hpp"

namespace gradcheck {

using survgen::Matrix;

struct Problem {
  survgen::DenoiserParams params;
  survgen::NoiseSchedule sched;
  std::vector<Matrix> z0_disc;
  survgen::BatchNoise noise;
  Eigen::VectorXd time, weight;
  Eigen::VectorXi event;
};

// 1 continuous covariate, one 2-category covariate, event channel; 8 rows.
inline Problem small_problem(std::uint64_t seed, double u = 0.55) {
  survgen::DenoiserLayout L;
  L.cont_dim = 2;
  L.cov_cont = 1;
  L.channel_states = {3, 3};
  L.cov_channels = 1;
  L.hidden = {8, 8};
  L.surv_hidden = 4;
  L.time_dim = 4;
  Problem p{survgen::init_params(L, seed), {}, {}, {}, {}, {}, {}};
  // nonzero biases so every tensor is exercised
  survgen::CounterRng brng{seed, 99};
  p.params.for_each_tensor([&](const std::string& name, Matrix& m) {
    if (name.ends_with(".bias"))
      for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = 0.2 * (2.0 * brng.uniform() - 1.0);
  });
  const Eigen::Index n = 8;
  survgen::CounterRng rng{seed, 7};
  Matrix z0 = Matrix::Zero(n, 2);
  std::vector<Matrix> disc{Matrix::Zero(n, 3), Matrix::Zero(n, 3)};
  p.time.resize(n);
  p.event.resize(n);
  p.weight.resize(n);
  const double times[] = {1.0, 2.0, 2.0, 3.5, 4.0, 5.0, 6.5, 8.0};  // one tie
  for (Eigen::Index i = 0; i < n; ++i) {
    z0(i, 0) = 2.0 * rng.uniform() - 1.0;
    z0(i, 1) = 2.0 * rng.uniform() - 1.0;
    disc[0](i, i % 2) = 1.0;
    p.event(i) = (i % 3 == 2) ? 0 : 1;
    disc[1](i, p.event(i)) = 1.0;
    p.time(i) = times[i];
  }
  p.weight = survgen::event_weights(p.time, {5.0, 0.5});
  p.z0_disc = disc;
  p.noise.u = u;
  auto pc = survgen::perturb_continuous(z0, u, p.sched, rng);
  p.noise.zu = pc.zu;
  p.noise.eps = pc.eps;
  // deterministic masks: half of each channel
  p.noise.zu_disc = disc;
  for (auto& b : p.noise.zu_disc)
    for (Eigen::Index i = 0; i < n; i += 2) {
      b.row(i).setZero();
      b(i, b.cols() - 1) = 1.0;
    }
  return p;
}

struct Result {
  double max_rel_err = 0.0;
  std::string worst;
  std::size_t parameters = 0;
  double grad_norm = 0.0;
};

// Relative error |a - b| / max(|a|, |b|, floor) over every parameter.
inline Result check(Problem& p, double lc, double ld, double ls, double h = 1e-5,
                    double floor = 1e-6) {
  auto f = [&]() {
    return survgen::batch_objective(p.params, p.sched, p.z0_disc, p.noise, p.time, p.event, p.weight,
                                    lc, ld, ls)
        .total;
  };
  const auto analytic = survgen::batch_objective(p.params, p.sched, p.z0_disc, p.noise, p.time,
                                                 p.event, p.weight, lc, ld, ls)
                            .grad;
  std::vector<const Matrix*> grads;
  analytic.for_each_tensor([&](const std::string&, const Matrix& m) { grads.push_back(&m); });
  Result r;
  std::size_t t = 0;
  p.params.for_each_tensor([&](const std::string& name, Matrix& m) {
    const Matrix& g = *grads[t++];
    for (Eigen::Index k = 0; k < m.size(); ++k) {
      const double orig = m.data()[k];
      m.data()[k] = orig + h;
      const double fp = f();
      m.data()[k] = orig - h;
      const double fm = f();
      m.data()[k] = orig;
      const double fd = (fp - fm) / (2.0 * h);
      const double a = g.data()[k];
      const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), floor});
      r.grad_norm += a * a;
      ++r.parameters;
      if (rel > r.max_rel_err) {
        r.max_rel_err = rel;
        r.worst = name + "[" + std::to_string(k) + "]";
      }
    }
  });
  r.grad_norm = std::sqrt(r.grad_norm);
  return r;
}

}  // namespace gradcheck
