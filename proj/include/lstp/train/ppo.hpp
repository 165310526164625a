#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lstp/net/lstp_net.hpp"
#include "lstp/tensor/adam.hpp"

namespace lstp::train {

using net::NetConfig;
using tensor::Array;
using tensor::ParamStore;
using tensor::Var;

/// One curriculum stage: overrides the scenario's counts and arena.
struct Stage {
  std::string name;
  std::size_t n_obstacles = 5;
  std::size_t n_agents = 1;
  double width = 8.0;
  double height = 8.0;
  double threshold = 0.9;  // rolling eval SR needed to advance
};

struct TrainConfig {
  std::size_t iterations = 100;  // M
  std::size_t horizon = 2500;    // T_max decisions per environment per iteration
  std::size_t epochs = 4;        // K
  std::size_t minibatch = 1024;
  double gamma = 0.99;
  double lambda = 0.95;
  double clip = 0.2;        // policy ratio clip
  double value_clip = 0.2;  // radius around the old value estimate; <= 0 disables
  double value_coef = 0.5;  // alpha
  double entropy_coef = -0.01;  // beta; negative = entropy bonus
  bool normalize_advantages = true;
  double max_grad_norm = 0.5;  // <= 0 disables
  tensor::AdamConfig adam;
  std::size_t envs = 8;  // independent worlds stepped in lockstep
  std::size_t workers = 1;
  std::uint64_t seed = 0;
  std::vector<Stage> curriculum;  // empty: a single stage taken from the scenario
  std::size_t sr_window = 100;
  std::size_t eval_every = 5;      // iterations; 0 disables curriculum evaluation
  std::size_t eval_episodes = 20;  // per evaluation round
  std::size_t checkpoint_every = 10;

  void validate() const;
};

/// Reverse-recursion GAE for one time-ordered sequence.
/// done[t] = 1 stops bootstrapping from step t into t+1.
struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

GaeResult gae(std::span<const double> rewards, std::span<const double> values, std::span<const double> dones,
              double bootstrap_value, double gamma, double lambda);

/// Transitions from S parallel streams over T steps, stored time-major:
/// index = t * streams + s.
struct RolloutBuffer {
  std::size_t streams = 0;
  std::size_t steps = 0;
  std::size_t lidar_dim = 0;  // stack * n_laser
  std::vector<float> lidar;
  std::vector<float> state;  // 4 per transition
  std::vector<double> raw_actions;  // 2 per transition, before clamping
  std::vector<double> log_probs;
  std::vector<double> rewards;
  std::vector<double> dones;
  std::vector<double> values;
  std::vector<double> bootstrap;  // V(o_T) per stream
  std::vector<double> advantages;
  std::vector<double> returns;

  void reset(std::size_t n_streams, std::size_t lidar_size);
  std::size_t size() const { return rewards.size(); }
  /// Throws ContractError if the per-field lengths disagree.
  void check() const;
};

/// Fills buffer.advantages / buffer.returns stream by stream.
void compute_gae(RolloutBuffer& buffer, double gamma, double lambda);

template <typename T>
struct Minibatch {
  net::ObsBatch<T> obs;
  Array<T> raw_actions;  // [B, 2]
  Array<T> old_log_probs;  // [B]
  Array<T> advantages;     // [B]
  Array<T> returns;        // [B]
  Array<T> old_values;     // [B]
};

/// Gathers the given transitions. Advantages are taken as stored.
template <typename T>
Minibatch<T> gather(const RolloutBuffer& buffer, const NetConfig& cfg, std::span<const std::size_t> indices);

struct LossConfig {
  double clip = 0.2;
  double value_clip = 0.2;
  double value_coef = 0.5;
  double entropy_coef = -0.01;
};

template <typename T>
struct LossVars {
  Var total;
  Var policy;   // L_P
  Var value;    // L_V
  Var entropy;  // L_E
  Var policy_terms;  // per-sample -min(ratio A, clip(ratio) A), [B]
  Var ratio;         // [B]
};

/// Clipped PPO objective on one minibatch; builds onto the graph behind `p`.
template <typename T>
LossVars<T> ppo_loss(net::Bound<T>& p, const NetConfig& cfg, const Minibatch<T>& mb, const LossConfig& lc);

/// Scalar references for single samples.
double policy_term(double ratio, double advantage, double clip);
double value_term(double value, double old_value, double target, double value_clip);
double gaussian_entropy(std::span<const double> sigma);

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double total_loss = 0.0;
  std::size_t optimizer_steps = 0;
};

/// K epochs of shuffled minibatch updates. Advantages are normalized over the
/// whole buffer first when tc.normalize_advantages is set.
template <typename T>
UpdateStats update(const RolloutBuffer& buffer, const NetConfig& cfg, ParamStore<T>& params,
                   tensor::Adam<T>& adam, const TrainConfig& tc, std::mt19937_64& rng);

/// Rescales gradients in place so their global L2 norm is at most max_norm; returns the norm before scaling.
template <typename T>
double clip_grad_norm(std::vector<Array<T>>& grads, double max_norm);

}  // namespace lstp::train
