#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "survgen/codec.hpp"
#include "survgen/diffusion.hpp"
#include "survgen/error.hpp"
#include "survgen/random.hpp"

namespace survgen {

/// Sizes of every block the network reads and writes.
struct DenoiserLayout {
  std::size_t cont_dim = 1;                  // d_cont + 1 (time last)
  std::size_t cov_cont = 0;                  // d_cont
  std::vector<std::size_t> channel_states;   // C_j + 1 per channel, event last
  std::size_t cov_channels = 0;              // d_disc
  std::vector<std::size_t> hidden{256, 256};
  std::size_t surv_hidden = 64;
  std::size_t time_dim = 32;

  std::size_t disc_dim() const {
    return std::accumulate(channel_states.begin(), channel_states.end(), std::size_t{0});
  }
  std::size_t input_dim() const { return cont_dim + disc_dim() + time_dim; }
  std::size_t surv_input_dim() const {
    std::size_t d = cov_cont;
    for (std::size_t j = 0; j < cov_channels; ++j) d += channel_states[j];
    return d;
  }
  std::size_t channel_offset(std::size_t j) const {
    return std::accumulate(channel_states.begin(),
                           channel_states.begin() + static_cast<std::ptrdiff_t>(j), std::size_t{0});
  }

  static DenoiserLayout for_codec(const CodecStats& codec, std::vector<std::size_t> hidden,
                                  std::size_t surv_hidden, std::size_t time_dim = 32) {
    DenoiserLayout l;
    l.cont_dim = codec.d_cont() + 1;
    l.cov_cont = codec.d_cont();
    for (const auto& labels : codec.labels) l.channel_states.push_back(labels.size() + 1);
    l.channel_states.push_back(3);
    l.cov_channels = codec.d_disc();
    l.hidden = std::move(hidden);
    l.surv_hidden = surv_hidden;
    l.time_dim = time_dim;
    return l;
  }

  bool operator==(const DenoiserLayout&) const = default;
};

/// Affine map y = x W + b with W stored (in x out) and b as a 1 x out row.
struct Dense {
  Matrix weight;
  Matrix bias;

  Dense() = default;
  Dense(std::size_t in, std::size_t out)
      : weight(Matrix::Zero(static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(out))),
        bias(Matrix::Zero(1, static_cast<Eigen::Index>(out))) {}

  Matrix apply(const Matrix& x) const {
    Matrix y = x * weight;
    y.rowwise() += bias.row(0);
    return y;
  }
};

/// Weights of the noise-prediction trunk, its output heads, and the
/// survival risk head. Gradients and optimizer moments reuse this type.
struct DenoiserParams {
  DenoiserLayout layout;
  std::vector<Dense> trunk;
  Dense head_cont;
  Dense head_disc;  // all channels side by side
  Dense surv_hidden;
  Dense surv_out;

  explicit DenoiserParams(DenoiserLayout l = {}) : layout(std::move(l)) {
    std::size_t in = layout.input_dim();
    for (std::size_t w : layout.hidden) {
      trunk.emplace_back(in, w);
      in = w;
    }
    head_cont = Dense(in, layout.cont_dim);
    head_disc = Dense(in, layout.disc_dim());
    surv_hidden = Dense(layout.surv_input_dim(), layout.surv_hidden);
    surv_out = Dense(layout.surv_hidden, 1);
  }

  /// Visits (name, tensor) in a fixed order; serialization and the optimizer
  /// both rely on that order.
  template <class F>
  void for_each_tensor(F&& f) {
    for (std::size_t l = 0; l < trunk.size(); ++l) {
      f("trunk." + std::to_string(l) + ".weight", trunk[l].weight);
      f("trunk." + std::to_string(l) + ".bias", trunk[l].bias);
    }
    f(std::string("head_cont.weight"), head_cont.weight);
    f(std::string("head_cont.bias"), head_cont.bias);
    f(std::string("head_disc.weight"), head_disc.weight);
    f(std::string("head_disc.bias"), head_disc.bias);
    f(std::string("surv_hidden.weight"), surv_hidden.weight);
    f(std::string("surv_hidden.bias"), surv_hidden.bias);
    f(std::string("surv_out.weight"), surv_out.weight);
    f(std::string("surv_out.bias"), surv_out.bias);
  }
  template <class F>
  void for_each_tensor(F&& f) const {
    const_cast<DenoiserParams*>(this)->for_each_tensor(
        [&](const std::string& name, Matrix& m) { f(name, static_cast<const Matrix&>(m)); });
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each_tensor([&](const std::string&, const Matrix& m) { n += static_cast<std::size_t>(m.size()); });
    return n;
  }

  bool all_finite() const {
    bool ok = true;
    for_each_tensor([&](const std::string&, const Matrix& m) { ok = ok && m.allFinite(); });
    return ok;
  }

  DenoiserParams zeros_like() const { return DenoiserParams(layout); }
};

/// Closed-form parameter count for a layout.
inline std::size_t expected_parameter_count(const DenoiserLayout& l) {
  std::size_t n = 0, in = l.input_dim();
  for (std::size_t w : l.hidden) {
    n += in * w + w;
    in = w;
  }
  n += in * l.cont_dim + l.cont_dim;
  n += in * l.disc_dim() + l.disc_dim();
  n += l.surv_input_dim() * l.surv_hidden + l.surv_hidden;
  n += l.surv_hidden + 1;
  return n;
}

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
inline DenoiserParams init_params(const DenoiserLayout& layout, std::uint64_t seed) {
  if (layout.hidden.empty()) throw ConfigError("denoiser needs at least one hidden layer");
  for (std::size_t w : layout.hidden)
    if (w == 0) throw ConfigError("hidden widths must be at least 1");
  if (layout.surv_hidden == 0) throw ConfigError("survival head width must be at least 1");
  if (layout.time_dim == 0 || layout.time_dim % 2 != 0)
    throw ConfigError("time embedding dimension must be a positive even number");
  DenoiserParams p(layout);
  std::uint64_t tensor = 0;
  p.for_each_tensor([&](const std::string& name, Matrix& m) {
    ++tensor;
    if (name.ends_with(".bias")) return;
    CounterRng rng{seed, 0x1417ULL, tensor};
    const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(m.rows(), 1)));
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = bound * (2.0 * rng.uniform() - 1.0);
  });
  return p;
}

/// Sinusoidal features of u: cos/sin at geometric frequencies 10000^(-k/half).
inline Eigen::RowVectorXd time_embedding(double u, std::size_t dim) {
  const std::size_t half = dim / 2;
  Eigen::RowVectorXd e(static_cast<Eigen::Index>(dim));
  for (std::size_t k = 0; k < half; ++k) {
    const double freq = std::exp(-std::log(10000.0) * static_cast<double>(k) / static_cast<double>(half));
    const double arg = 1000.0 * u * freq;
    e(static_cast<Eigen::Index>(k)) = std::cos(arg);
    e(static_cast<Eigen::Index>(half + k)) = std::sin(arg);
  }
  return e;
}

/// Input scale for the noisy continuous block (data are unit-variance).
inline double input_scale(double sigma) { return 1.0 / std::sqrt(sigma * sigma + 1.0); }

struct DenoiserOutput {
  Matrix eps_hat;                 // n x (d_cont + 1)
  std::vector<Matrix> logits;     // per channel, n x (C_j + 1)
  std::vector<Matrix> x0_probs;   // softmax of logits, mask slot included
  Vector risk;                    // n
};

/// Activations kept from forward() for the reverse pass.
struct ForwardCache {
  Matrix zu_cont;
  Matrix zu_disc;  // channels flattened
  double u = 0.0;
  double sigma = 0.0;
  std::vector<Matrix> pre;   // trunk pre-activations
  std::vector<Matrix> post;  // post[0] = input, post[l + 1] = silu(pre[l])
  Matrix probs;              // flattened x0_probs
  Matrix surv_in;
  Matrix surv_pre;
  Matrix surv_act;
};

/// Upstream gradients of the scalar training loss. Empty members count as 0.
struct OutputGrads {
  Matrix d_eps_hat;
  std::vector<Matrix> d_logits;
  Vector d_risk;
};

namespace detail {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline Matrix silu(const Matrix& a) {
  return a.unaryExpr([](double x) { return x * sigmoid(x); });
}

inline Matrix silu_grad(const Matrix& a) {
  return a.unaryExpr([](double x) {
    const double s = sigmoid(x);
    return s * (1.0 + x * (1.0 - s));
  });
}

inline Matrix flatten_channels(const std::vector<Matrix>& blocks, Eigen::Index rows) {
  Eigen::Index cols = 0;
  for (const auto& b : blocks) cols += b.cols();
  Matrix out(rows, cols);
  Eigen::Index off = 0;
  for (const auto& b : blocks) {
    out.middleCols(off, b.cols()) = b;
    off += b.cols();
  }
  return out;
}

inline void softmax_rows(Eigen::Ref<Matrix> block) {
  for (Eigen::Index i = 0; i < block.rows(); ++i) {
    const double mx = block.row(i).maxCoeff();
    block.row(i) = (block.row(i).array() - mx).exp().matrix();
    block.row(i) /= block.row(i).sum();
  }
}

}  // namespace detail

/// Runs the network on a noisy batch at diffusion time u.
inline DenoiserOutput forward(const DenoiserParams& p, const Matrix& zu_cont,
                              const std::vector<Matrix>& zu_disc, double u,
                              const NoiseSchedule& sched, ForwardCache* cache = nullptr) {
  const auto& L = p.layout;
  const Eigen::Index n = zu_cont.rows();
  if (static_cast<std::size_t>(zu_cont.cols()) != L.cont_dim)
    throw SchemaError("continuous block has " + std::to_string(zu_cont.cols()) +
                      " columns, expected " + std::to_string(L.cont_dim));
  if (zu_disc.size() != L.channel_states.size())
    throw SchemaError("discrete block has the wrong number of channels");
  for (std::size_t j = 0; j < zu_disc.size(); ++j)
    if (zu_disc[j].rows() != n || static_cast<std::size_t>(zu_disc[j].cols()) != L.channel_states[j])
      throw SchemaError("discrete channel " + std::to_string(j) + " has the wrong shape");
  if (zu_cont.hasNaN()) throw NumericError("denoiser input contains NaN");
  for (const auto& b : zu_disc)
    if (b.hasNaN()) throw NumericError("denoiser input contains NaN");

  const double sigma = sigma_cont(u, sched);
  const Matrix disc_flat = detail::flatten_channels(zu_disc, n);

  Matrix x(n, static_cast<Eigen::Index>(L.input_dim()));
  const auto cd = static_cast<Eigen::Index>(L.cont_dim);
  const auto dd = static_cast<Eigen::Index>(L.disc_dim());
  x.leftCols(cd) = input_scale(sigma) * zu_cont;
  x.middleCols(cd, dd) = disc_flat;
  x.rightCols(static_cast<Eigen::Index>(L.time_dim)).rowwise() = time_embedding(u, L.time_dim);

  std::vector<Matrix> pre, post;
  post.push_back(std::move(x));
  for (const auto& layer : p.trunk) {
    pre.push_back(layer.apply(post.back()));
    post.push_back(detail::silu(pre.back()));
  }
  const Matrix& h = post.back();

  DenoiserOutput out;
  out.eps_hat = p.head_cont.apply(h);
  Matrix logits = p.head_disc.apply(h);
  Matrix probs = logits;
  for (std::size_t j = 0; j < L.channel_states.size(); ++j) {
    const auto off = static_cast<Eigen::Index>(L.channel_offset(j));
    const auto c = static_cast<Eigen::Index>(L.channel_states[j]);
    detail::softmax_rows(probs.middleCols(off, c));
    out.logits.push_back(logits.middleCols(off, c));
    out.x0_probs.push_back(probs.middleCols(off, c));
  }

  // Risk head input: denoised continuous covariates and covariate-channel
  // probabilities. Time and event are excluded.
  const auto cc = static_cast<Eigen::Index>(L.cov_cont);
  const auto cov_disc = static_cast<Eigen::Index>(L.surv_input_dim() - L.cov_cont);
  Matrix surv_in(n, static_cast<Eigen::Index>(L.surv_input_dim()));
  surv_in.leftCols(cc) = zu_cont.leftCols(cc) - sigma * out.eps_hat.leftCols(cc);
  surv_in.rightCols(cov_disc) = probs.leftCols(cov_disc);
  Matrix surv_pre = p.surv_hidden.apply(surv_in);
  Matrix surv_act = detail::silu(surv_pre);
  out.risk = p.surv_out.apply(surv_act).col(0);

  if (cache) {
    cache->zu_cont = zu_cont;
    cache->zu_disc = disc_flat;
    cache->u = u;
    cache->sigma = sigma;
    cache->pre = std::move(pre);
    cache->post = std::move(post);
    cache->probs = std::move(probs);
    cache->surv_in = std::move(surv_in);
    cache->surv_pre = std::move(surv_pre);
    cache->surv_act = std::move(surv_act);
  }
  return out;
}

/// Exact reverse-mode gradient of the loss with respect to every parameter.
/// The cache must come from forward() on the same (zu_cont, zu_disc, u).
inline DenoiserParams backward(const DenoiserParams& p, const Matrix& zu_cont,
                               const std::vector<Matrix>& zu_disc, double u,
                               const ForwardCache& cache, const OutputGrads& g) {
  const auto& L = p.layout;
  const Eigen::Index n = zu_cont.rows();
  if (cache.post.size() != p.trunk.size() + 1 || cache.u != u || cache.zu_cont.rows() != n ||
      cache.zu_cont.cols() != zu_cont.cols() || cache.zu_cont != zu_cont ||
      cache.zu_disc != detail::flatten_channels(zu_disc, n))
    throw NumericError("backward: forward cache does not match the inputs");

  const auto cd = static_cast<Eigen::Index>(L.cont_dim);
  const auto dd = static_cast<Eigen::Index>(L.disc_dim());
  Matrix d_eps = g.d_eps_hat.size() ? g.d_eps_hat : Matrix::Zero(n, cd);
  Matrix d_logits = Matrix::Zero(n, dd);
  if (!g.d_logits.empty()) {
    if (g.d_logits.size() != L.channel_states.size())
      throw NumericError("backward: wrong number of logit gradients");
    d_logits = detail::flatten_channels(g.d_logits, n);
  }
  if (d_eps.rows() != n || d_eps.cols() != cd || d_logits.rows() != n)
    throw NumericError("backward: gradient shapes do not match the cache");

  DenoiserParams grad = p.zeros_like();

  if (g.d_risk.size()) {
    if (g.d_risk.size() != n) throw NumericError("backward: risk gradient has the wrong length");
    const Matrix d_r = g.d_risk;  // n x 1
    grad.surv_out.weight = cache.surv_act.transpose() * d_r;
    grad.surv_out.bias(0, 0) = d_r.sum();
    const Matrix d_act = d_r * p.surv_out.weight.transpose();
    const Matrix d_pre = d_act.cwiseProduct(detail::silu_grad(cache.surv_pre));
    grad.surv_hidden.weight = cache.surv_in.transpose() * d_pre;
    grad.surv_hidden.bias = d_pre.colwise().sum();
    const Matrix d_in = d_pre * p.surv_hidden.weight.transpose();

    const auto cc = static_cast<Eigen::Index>(L.cov_cont);
    d_eps.leftCols(cc) -= cache.sigma * d_in.leftCols(cc);
    // Softmax Jacobian per covariate channel: dl = p * (dp - <dp, p>).
    Eigen::Index off = cc;
    for (std::size_t j = 0; j < L.cov_channels; ++j) {
      const auto c = static_cast<Eigen::Index>(L.channel_states[j]);
      const auto fo = static_cast<Eigen::Index>(L.channel_offset(j));
      const auto pr = cache.probs.middleCols(fo, c);
      const auto dp = d_in.middleCols(off, c);
      const Vector inner = dp.cwiseProduct(pr).rowwise().sum();
      d_logits.middleCols(fo, c) +=
          pr.cwiseProduct(dp - inner.replicate(1, c));
      off += c;
    }
  }

  const Matrix& h = cache.post.back();
  grad.head_cont.weight = h.transpose() * d_eps;
  grad.head_cont.bias = d_eps.colwise().sum();
  grad.head_disc.weight = h.transpose() * d_logits;
  grad.head_disc.bias = d_logits.colwise().sum();
  Matrix d_h = d_eps * p.head_cont.weight.transpose() + d_logits * p.head_disc.weight.transpose();

  for (std::size_t l = p.trunk.size(); l-- > 0;) {
    const Matrix d_a = d_h.cwiseProduct(detail::silu_grad(cache.pre[l]));
    grad.trunk[l].weight = cache.post[l].transpose() * d_a;
    grad.trunk[l].bias = d_a.colwise().sum();
    if (l > 0) d_h = d_a * p.trunk[l].weight.transpose();
  }
  return grad;
}

}  // namespace survgen
