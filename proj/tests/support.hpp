#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "lstp/net/lstp_net.hpp"
#include "lstp/tensor/graph.hpp"
#include "lstp/tensor/params.hpp"

namespace lstp::testing {

using tensor::Array;
using tensor::Graph;
using tensor::ParamStore;
using tensor::Var;

/// Builds a scalar loss on a fresh graph from parameters bound to slots.
using LossBuilder = std::function<Var(Graph<double>&, const std::vector<Var>&)>;

struct GradCheck {
  double max_rel = 0.0;  // worst relative error among entries above the absolute floor
  double max_abs = 0.0;
  std::size_t checked = 0;
};

inline double eval_loss(const ParamStore<double>& params, const LossBuilder& build) {
  Graph<double> g;
  std::vector<Var> vars;
  for (std::size_t i = 0; i < params.size(); ++i) vars.push_back(g.parameter(params[i], i));
  return g.value(build(g, vars)).item();
}

/// Central finite differences against backward() on every scalar of every
/// parameter (or a random subset of at most `max_entries` per array).
inline GradCheck grad_check(ParamStore<double> params, const LossBuilder& build, double h = 1e-6,
                            double abs_floor = 1e-7, std::size_t max_entries = 0, std::uint64_t seed = 0) {
  std::vector<Array<double>> grads;
  {
    Graph<double> g;
    std::vector<Var> vars;
    for (std::size_t i = 0; i < params.size(); ++i) vars.push_back(g.parameter(params[i], i));
    grads = g.backward(build(g, vars), params.size());
  }
  GradCheck res;
  std::mt19937_64 rng(seed);
  for (std::size_t p = 0; p < params.size(); ++p) {
    std::vector<std::size_t> idx(params[p].size());
    for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
    if (max_entries > 0 && idx.size() > max_entries) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(max_entries);
    }
    for (std::size_t k : idx) {
      const double x0 = params[p][k];
      params[p][k] = x0 + h;
      const double up = eval_loss(params, build);
      params[p][k] = x0 - h;
      const double down = eval_loss(params, build);
      params[p][k] = x0;
      const double numeric = (up - down) / (2 * h);
      const double analytic = grads[p][k];
      const double diff = std::abs(numeric - analytic);
      res.max_abs = std::max(res.max_abs, diff);
      if (diff > abs_floor) {
        res.max_rel = std::max(res.max_rel, diff / std::max(std::abs(numeric), std::abs(analytic)));
      }
      ++res.checked;
    }
  }
  return res;
}

inline Array<double> random_array(tensor::Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Array<double> a(std::move(shape));
  std::uniform_real_distribution<double> d(lo, hi);
  for (auto& x : a.data()) x = d(rng);
  return a;
}

/// n_laser 8, d_h 16, small heads: the configuration used for gradient checks.
inline net::NetConfig tiny_net(net::Variant v = net::Variant::kLstp) {
  net::NetConfig c;
  c.n_laser = 8;
  c.stack = 3;
  c.d_h = 16;
  c.gru_layers = 2;
  c.heads = 4;
  c.enc_dim = 8;
  c.actor_hidden = {12, 8};
  c.critic_hidden = {12, 8};
  c.variant = v;
  return c;
}

/// Random parameters including nonzero biases so every term is exercised.
inline ParamStore<double> random_params(const net::NetConfig& cfg, std::uint64_t seed, double scale = 0.5) {
  auto p = net::init_params<double>(cfg, seed);
  std::mt19937_64 rng(seed ^ 0x5eed);
  std::uniform_real_distribution<double> d(-scale, scale);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p.name(i) == "log_sigma") continue;
    for (auto& x : p[i].data()) x = d(rng);
  }
  return p;
}

inline net::ObsBatch<double> random_obs(const net::NetConfig& cfg, std::size_t batch, std::mt19937_64& rng) {
  return {random_array({batch, cfg.stack, cfg.n_laser}, rng, 0.0, 1.0), random_array({batch, 4}, rng)};
}

}  // namespace lstp::testing
