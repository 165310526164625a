#include "lstp/train/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "lstp/error.hpp"

namespace lstp::train {

void TrainConfig::validate() const {
  if (!(gamma >= 0 && gamma < 1)) throw ConfigError("train.gamma must be in [0, 1)");
  if (!(lambda >= 0 && lambda <= 1)) throw ConfigError("train.lambda must be in [0, 1]");
  if (!(clip > 0)) throw ConfigError("train.clip must be > 0");
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (minibatch < 1) throw ConfigError("train.minibatch must be >= 1");
  if (horizon < 1) throw ConfigError("train.horizon must be >= 1");
  if (envs < 1) throw ConfigError("train.envs must be >= 1");
  if (workers < 1) throw ConfigError("train.workers must be >= 1");
  if (sr_window < 1) throw ConfigError("train.sr_window must be >= 1");
  if (!(adam.lr > 0)) throw ConfigError("train.lr must be > 0");
  if (!(adam.beta1 >= 0 && adam.beta1 < 1 && adam.beta2 >= 0 && adam.beta2 < 1)) {
    throw ConfigError("train.beta1 and train.beta2 must be in [0, 1)");
  }
  if (!(adam.eps > 0)) throw ConfigError("train.adam_eps must be > 0");
  for (const auto& s : curriculum) {
    if (s.n_agents < 1) throw ConfigError("curriculum stage '" + s.name + "' needs at least one agent");
    if (!(s.width > 0 && s.height > 0)) throw ConfigError("curriculum stage '" + s.name + "' has a bad arena");
    if (!(s.threshold >= 0 && s.threshold <= 1)) {
      throw ConfigError("curriculum stage '" + s.name + "' threshold must be in [0, 1]");
    }
  }
}

GaeResult gae(std::span<const double> rewards, std::span<const double> values, std::span<const double> dones,
              double bootstrap_value, double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n) {
    throw ContractError("gae: rewards/values/dones lengths " + std::to_string(n) + "/" +
                        std::to_string(values.size()) + "/" + std::to_string(dones.size()) + " differ");
  }
  GaeResult out;
  out.advantages.resize(n);
  out.returns.resize(n);
  double next_value = bootstrap_value;
  double next_adv = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    const double live = 1.0 - dones[k];
    const double delta = rewards[k] + gamma * live * next_value - values[k];
    const double a = delta + gamma * lambda * live * next_adv;
    out.advantages[k] = a;
    out.returns[k] = a + values[k];
    next_value = values[k];
    next_adv = a;
  }
  return out;
}

void RolloutBuffer::reset(std::size_t n_streams, std::size_t lidar_size) {
  streams = n_streams;
  steps = 0;
  lidar_dim = lidar_size;
  for (auto* v : {&raw_actions, &log_probs, &rewards, &dones, &values, &bootstrap, &advantages, &returns}) v->clear();
  lidar.clear();
  state.clear();
}

void RolloutBuffer::check() const {
  const std::size_t n = rewards.size();
  if (n != streams * steps || log_probs.size() != n || dones.size() != n || values.size() != n ||
      raw_actions.size() != 2 * n || state.size() != 4 * n || lidar.size() != lidar_dim * n) {
    throw ContractError("rollout buffer fields have inconsistent lengths");
  }
  if (bootstrap.size() != streams) throw ContractError("rollout buffer needs one bootstrap value per stream");
}

void compute_gae(RolloutBuffer& buffer, double gamma, double lambda) {
  buffer.check();
  const std::size_t S = buffer.streams, T = buffer.steps;
  buffer.advantages.assign(S * T, 0.0);
  buffer.returns.assign(S * T, 0.0);
  std::vector<double> r(T), v(T), d(T);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t t = 0; t < T; ++t) {
      r[t] = buffer.rewards[t * S + s];
      v[t] = buffer.values[t * S + s];
      d[t] = buffer.dones[t * S + s];
    }
    const auto res = gae(r, v, d, buffer.bootstrap[s], gamma, lambda);
    for (std::size_t t = 0; t < T; ++t) {
      buffer.advantages[t * S + s] = res.advantages[t];
      buffer.returns[t * S + s] = res.returns[t];
    }
  }
}

template <typename T>
Minibatch<T> gather(const RolloutBuffer& buffer, const NetConfig& cfg, std::span<const std::size_t> indices) {
  const std::size_t B = indices.size();
  if (B == 0) throw ContractError("gather: empty minibatch");
  if (buffer.lidar_dim != cfg.stack * cfg.n_laser) {
    throw DimensionError("gather: buffer lidar size " + std::to_string(buffer.lidar_dim) + " does not match net " +
                         std::to_string(cfg.stack) + "x" + std::to_string(cfg.n_laser));
  }
  if (buffer.advantages.size() != buffer.size()) throw ContractError("gather: advantages not computed");
  const std::size_t L = buffer.lidar_dim;
  std::vector<T> lidar(B * L), state(B * 4), act(B * 2), lp(B), adv(B), ret(B), val(B);
  for (std::size_t b = 0; b < B; ++b) {
    const std::size_t i = indices[b];
    if (i >= buffer.size()) throw ContractError("gather: index out of range");
    std::copy_n(buffer.lidar.begin() + static_cast<std::ptrdiff_t>(i * L), L, lidar.begin() + static_cast<std::ptrdiff_t>(b * L));
    for (std::size_t k = 0; k < 4; ++k) state[b * 4 + k] = static_cast<T>(buffer.state[i * 4 + k]);
    for (std::size_t k = 0; k < 2; ++k) act[b * 2 + k] = static_cast<T>(buffer.raw_actions[i * 2 + k]);
    lp[b] = static_cast<T>(buffer.log_probs[i]);
    adv[b] = static_cast<T>(buffer.advantages[i]);
    ret[b] = static_cast<T>(buffer.returns[i]);
    val[b] = static_cast<T>(buffer.values[i]);
  }
  Minibatch<T> mb;
  mb.obs.lidar = Array<T>({B, cfg.stack, cfg.n_laser}, std::move(lidar));
  mb.obs.state = Array<T>({B, net::kStateDim}, std::move(state));
  mb.raw_actions = Array<T>({B, net::kActionDim}, std::move(act));
  mb.old_log_probs = Array<T>({B}, std::move(lp));
  mb.advantages = Array<T>({B}, std::move(adv));
  mb.returns = Array<T>({B}, std::move(ret));
  mb.old_values = Array<T>({B}, std::move(val));
  return mb;
}

template <typename T>
LossVars<T> ppo_loss(net::Bound<T>& p, const NetConfig& cfg, const Minibatch<T>& mb, const LossConfig& lc) {
  auto& g = p.graph();
  const auto out = net::forward(p, cfg, mb.obs);
  LossVars<T> res;

  Var log_prob = g.gaussian_log_prob(g.constant(mb.raw_actions), out.mu, out.log_sigma);
  res.ratio = g.exp(g.sub(log_prob, g.constant(mb.old_log_probs)));
  Var adv = g.constant(mb.advantages);
  Var unclipped = g.mul(res.ratio, adv);
  Var clipped = g.mul(g.clamp(res.ratio, static_cast<T>(1 - lc.clip), static_cast<T>(1 + lc.clip)), adv);
  res.policy_terms = g.scale(g.minimum(unclipped, clipped), T(-1));
  res.policy = g.mean(res.policy_terms);

  Var target = g.constant(mb.returns);
  Var err = g.sub(out.value, target);
  Var sq = g.mul(err, err);
  if (lc.value_clip > 0) {
    Var old = g.constant(mb.old_values);
    const T c = static_cast<T>(lc.value_clip);
    Var err_clipped = g.sub(g.add(old, g.clamp(g.sub(out.value, old), -c, c)), target);
    res.value = g.mean(g.maximum(sq, g.mul(err_clipped, err_clipped)));
  } else {
    res.value = g.mean(sq);
  }

  res.entropy = g.gaussian_entropy(out.log_sigma);
  res.total = g.add(g.add(res.policy, g.scale(res.value, static_cast<T>(lc.value_coef))),
                    g.scale(res.entropy, static_cast<T>(lc.entropy_coef)));
  return res;
}

double policy_term(double ratio, double advantage, double clip) {
  return -std::min(ratio * advantage, std::clamp(ratio, 1 - clip, 1 + clip) * advantage);
}

double value_term(double value, double old_value, double target, double value_clip) {
  const double a = (value - target) * (value - target);
  if (value_clip <= 0) return a;
  const double vc = old_value + std::clamp(value - old_value, -value_clip, value_clip);
  return std::max(a, (vc - target) * (vc - target));
}

double gaussian_entropy(std::span<const double> sigma) {
  double h = 0.0;
  for (double s : sigma) h += 0.5 * std::log(2 * std::numbers::pi * std::numbers::e * s * s);
  return h;
}

template <typename T>
double clip_grad_norm(std::vector<Array<T>>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) {
    for (T x : g.data()) sq += static_cast<double>(x) * static_cast<double>(x);
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const T s = static_cast<T>(max_norm / (norm + 1e-12));
    for (auto& g : grads) {
      for (T& x : g.data()) x *= s;
    }
  }
  return norm;
}

template <typename T>
UpdateStats update(const RolloutBuffer& buffer, const NetConfig& cfg, ParamStore<T>& params, tensor::Adam<T>& adam,
                   const TrainConfig& tc, std::mt19937_64& rng) {
  buffer.check();
  const std::size_t n = buffer.size();
  if (buffer.advantages.size() != n) throw ContractError("update: advantages not computed");
  std::vector<double> adv = buffer.advantages;
  if (tc.normalize_advantages && n > 1) {
    const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double a : adv) var += (a - mean) * (a - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    for (double& a : adv) a = (a - mean) / (sd + 1e-8);
  }
  const LossConfig lc{tc.clip, tc.value_clip, tc.value_coef, tc.entropy_coef};
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  UpdateStats stats;
  for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0, mb_index = 0; start < n; start += tc.minibatch, ++mb_index) {
      const std::size_t len = std::min(tc.minibatch, n - start);
      const std::span<const std::size_t> idx(order.data() + start, len);
      try {
        auto mb = gather<T>(buffer, cfg, idx);
        for (std::size_t b = 0; b < len; ++b) mb.advantages[b] = static_cast<T>(adv[idx[b]]);
        tensor::Graph<T> g;
        net::Bound<T> p(g, params);
        const auto loss = ppo_loss(p, cfg, mb, lc);
        auto grads = g.backward(loss.total, params.size());
        clip_grad_norm(grads, tc.max_grad_norm);
        adam.step(params.arrays(), grads);
        net::clamp_log_sigma(cfg, params);
        stats.policy_loss += g.value(loss.policy).item();
        stats.value_loss += g.value(loss.value).item();
        stats.entropy += g.value(loss.entropy).item();
        stats.total_loss += g.value(loss.total).item();
        ++stats.optimizer_steps;
      } catch (const NumericError& e) {
        throw NumericError("update epoch " + std::to_string(epoch) + " minibatch " + std::to_string(mb_index) + ": " +
                           e.what());
      }
    }
  }
  if (stats.optimizer_steps > 0) {
    const double k = static_cast<double>(stats.optimizer_steps);
    stats.policy_loss /= k;
    stats.value_loss /= k;
    stats.entropy /= k;
    stats.total_loss /= k;
  }
  return stats;
}

#define LSTP_INSTANTIATE(T)                                                                                   \
  template Minibatch<T> gather<T>(const RolloutBuffer&, const NetConfig&, std::span<const std::size_t>);      \
  template LossVars<T> ppo_loss<T>(net::Bound<T>&, const NetConfig&, const Minibatch<T>&, const LossConfig&); \
  template double clip_grad_norm<T>(std::vector<Array<T>>&, double);                                          \
  template UpdateStats update<T>(const RolloutBuffer&, const NetConfig&, ParamStore<T>&, tensor::Adam<T>&,    \
                                 const TrainConfig&, std::mt19937_64&);

LSTP_INSTANTIATE(float)
LSTP_INSTANTIATE(double)

#undef LSTP_INSTANTIATE

}  // namespace lstp::train
