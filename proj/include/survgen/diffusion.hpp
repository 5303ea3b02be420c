#pragma once

#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "survgen/codec.hpp"
#include "survgen/error.hpp"
#include "survgen/random.hpp"

namespace survgen {

/// Continuous VE noise scale and discrete masking schedule over u in [0, 1].
struct NoiseSchedule {
  double sigma_min = 0.002;
  double sigma_max = 80.0;
  double rho = 7.0;
  double eps_mask = 1e-3;  // keep-probability at u = 1

  void validate() const {
    if (!(sigma_min > 0.0 && sigma_max > sigma_min))
      throw ConfigError("schedule needs 0 < sigma_min < sigma_max");
    if (!(rho > 0.0)) throw ConfigError("schedule rho must be positive");
    if (!(eps_mask >= 0.0 && eps_mask < 1.0))
      throw ConfigError("schedule eps_mask must lie in [0, 1)");
  }
};

namespace detail {
inline void check_unit(double u, const char* what) {
  if (!(u >= 0.0 && u <= 1.0))
    throw NumericError(std::string(what) + ": u = " + std::to_string(u) + " outside [0, 1]");
}
}  // namespace detail

/// Power-mean interpolation between sigma_min and sigma_max.
inline double sigma_cont(double u, const NoiseSchedule& s) {
  detail::check_unit(u, "sigma_cont");
  const double inv = 1.0 / s.rho;
  const double a = std::pow(s.sigma_min, inv);
  const double b = std::pow(s.sigma_max, inv);
  return std::pow(a + u * (b - a), s.rho);
}

struct MaskRate {
  double alpha;      // keep probability
  double alpha_dot;  // d alpha / du
};

/// Linear keep-probability, alpha(0) = 1, alpha(1) = eps_mask.
inline MaskRate alpha_disc(double u, const NoiseSchedule& s) {
  detail::check_unit(u, "alpha_disc");
  return {1.0 - (1.0 - s.eps_mask) * u, -(1.0 - s.eps_mask)};
}

struct ContinuousPerturbation {
  Matrix zu;
  Matrix eps;
};

/// z_u = z_0 + sigma(u) * eps with eps ~ N(0, I).
inline ContinuousPerturbation perturb_continuous(const Matrix& z0, double u,
                                                 const NoiseSchedule& s, CounterRng& rng) {
  if (!z0.allFinite()) throw NumericError("perturb_continuous: non-finite input");
  std::normal_distribution<double> normal;
  ContinuousPerturbation out;
  out.eps.resize(z0.rows(), z0.cols());
  for (Eigen::Index i = 0; i < z0.rows(); ++i)
    for (Eigen::Index j = 0; j < z0.cols(); ++j) out.eps(i, j) = normal(rng);
  out.zu = z0 + sigma_cont(u, s) * out.eps;
  return out;
}

/// Moves each row to the mask vertex with probability 1 - alpha(u).
inline std::vector<Matrix> perturb_discrete(const std::vector<Matrix>& z0, double u,
                                            const NoiseSchedule& s, CounterRng& rng) {
  const double keep = alpha_disc(u, s).alpha;
  std::vector<Matrix> out = z0;
  for (auto& block : out) {
    const Eigen::Index mask = block.cols() - 1;
    for (Eigen::Index i = 0; i < block.rows(); ++i) {
      if (rng.uniform() >= keep) {
        block.row(i).setZero();
        block(i, mask) = 1.0;
      }
    }
  }
  return out;
}

/// Posterior over the C + 1 states at the earlier time s given the state at u.
/// `z0_hat` is a distribution over the C true categories; `state` is the
/// current state index (C means masked). alpha_s == alpha_u is an empty
/// unmasking window and keeps the mask.
inline Vector reverse_posterior_discrete(std::size_t state, const Vector& z0_hat,
                                         double alpha_s, double alpha_u) {
  if (!(alpha_s >= alpha_u))
    throw NumericError("reverse_posterior_discrete requires alpha_s >= alpha_u");
  const auto c = z0_hat.size();
  Vector p = Vector::Zero(c + 1);
  if (state != static_cast<std::size_t>(c)) {
    p(static_cast<Eigen::Index>(state)) = 1.0;
    return p;
  }
  const double denom = 1.0 - alpha_u;
  if (!(denom > 0.0)) throw NumericError("masked state at alpha_u = 1");
  p.head(c) = ((alpha_s - alpha_u) / denom) * z0_hat;
  p(c) = (1.0 - alpha_s) / denom;
  return p;
}

/// Deterministic x0-prediction update from noise level sigma_u to sigma_s.
inline Matrix reverse_step_continuous(const Matrix& zu, const Matrix& eps_hat, double sigma_u,
                                      double sigma_s) {
  if (!(sigma_s < sigma_u)) throw NumericError("reverse_step_continuous requires sigma_s < sigma_u");
  return zu + (sigma_s - sigma_u) * eps_hat;
}

}  // namespace survgen
