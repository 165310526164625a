#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lstp/tensor/array.hpp"
#include "lstp/tensor/graph.hpp"
#include "lstp/tensor/params.hpp"

namespace lstp::net {

using tensor::Array;
using tensor::Graph;
using tensor::ParamStore;
using tensor::Shape;
using tensor::Var;

/// Which temporal encoder feeds the actor/critic trunk.
enum class Variant {
  kLstp,     // GRU + multi-head attention over the GRU outputs
  kGruOnly,  // GRU, last hidden state used directly
  kLinear,   // per-frame linear+ELU encoder, attention retained
};

std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view name);

struct NetConfig {
  std::size_t n_laser = 130;
  std::size_t stack = 5;
  std::size_t d_h = 256;
  std::size_t gru_layers = 2;
  std::size_t heads = 4;
  std::size_t enc_dim = 256;
  std::vector<std::size_t> actor_hidden{256, 128};
  std::vector<std::size_t> critic_hidden{256, 128};
  Variant variant = Variant::kLstp;
  double log_sigma_init = -0.69314718055994530942;  // ln 0.5
  double log_sigma_min = -5.0;
  double log_sigma_max = 2.0;

  /// Throws ConfigError on an inconsistent configuration.
  void validate() const;
  std::size_t feature_dim() const { return d_h + enc_dim; }
};

inline constexpr std::size_t kActionDim = 2;
inline constexpr std::size_t kStateDim = 4;  // [d_g, psi_g, v, omega], normalized

/// Names and shapes of every trainable array, in slot order.
std::vector<std::pair<std::string, Shape>> param_shapes(const NetConfig& cfg);

/// Exact number of trainable scalars.
std::size_t param_count(const NetConfig& cfg);

/// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); biases 0; log_sigma = cfg.log_sigma_init.
template <typename T>
ParamStore<T> init_params(const NetConfig& cfg, std::uint64_t seed);

/// Checks that `params` has exactly the names and shapes `cfg` implies.
template <typename T>
void check_params(const NetConfig& cfg, const ParamStore<T>& params);

/// Clamps log_sigma into [log_sigma_min, log_sigma_max].
template <typename T>
void clamp_log_sigma(const NetConfig& cfg, ParamStore<T>& params);

/// Batched network input. lidar: [B, stack, n_laser] in [0,1]; state: [B, 4].
template <typename T>
struct ObsBatch {
  Array<T> lidar;
  Array<T> state;
  std::size_t batch() const { return lidar.rank() ? lidar.dim(0) : 0; }
};

/// Lazily creates one parameter node per slot in a graph.
template <typename T>
class Bound {
 public:
  Bound(Graph<T>& graph, const ParamStore<T>& params)
      : graph_(graph), params_(params), nodes_(params.size()), made_(params.size(), 0) {}

  Var operator()(std::string_view name) {
    const std::size_t slot = params_.index(name);
    if (!made_[slot]) {
      nodes_[slot] = graph_.parameter(params_[slot], slot);
      made_[slot] = 1;
    }
    return nodes_[slot];
  }

  Graph<T>& graph() { return graph_; }
  const ParamStore<T>& params() const { return params_; }

 private:
  Graph<T>& graph_;
  const ParamStore<T>& params_;
  std::vector<Var> nodes_;
  std::vector<char> made_;
};

/// Two-layer (configurable) GRU over the frame axis with h0 = 0.
/// seq: [B, T, n_laser] -> H: [B, T, d_h] (top layer).
template <typename T>
Var gru_forward(Bound<T>& p, const NetConfig& cfg, Var seq);

/// Linear-variant frame encoder: ELU(x W + b) per frame -> [B, T, d_h].
template <typename T>
Var linear_frames(Bound<T>& p, const NetConfig& cfg, Var seq);

template <typename T>
struct AttentionOut {
  Var context;                // [B, d_h]
  std::vector<Var> weights;   // per head, [B, 1, T]
};

/// Multi-head attention with the last frame as the query and all frames as keys/values.
template <typename T>
AttentionOut<T> attention(Bound<T>& p, const NetConfig& cfg, Var h);

/// Residual goal/velocity encoder: u = W_enc x + b; S = W_res (ELU(u) + u) + b_res.
template <typename T>
Var encode_state(Bound<T>& p, const NetConfig& cfg, Var state);

template <typename T>
struct NetOutput {
  Var mu;          // [B, 2]
  Var log_sigma;   // [2]
  Var value;       // [B]
  Var features;    // [B, d_h + enc_dim]
  std::vector<Var> attention_weights;
};

template <typename T>
NetOutput<T> forward(Bound<T>& p, const NetConfig& cfg, const ObsBatch<T>& obs);

/// Plain-value view of one sample's policy head.
struct PolicyOutput {
  std::array<double, 2> mu{};
  std::array<double, 2> sigma{};
  double value = 0.0;
};

struct SampledAction {
  std::array<double, 2> raw{};     // sample before clamping
  std::array<double, 2> action{};  // [v, omega] clamped to [0,1] x [-pi,pi]
  double log_prob = 0.0;           // density of `raw`
};

/// Clamps a raw command to v in [0,1], omega in [-pi, pi].
std::array<double, 2> clamp_action(std::array<double, 2> raw);

/// Diagonal Gaussian log density of `raw` under (mu, sigma).
double gaussian_log_prob(const std::array<double, 2>& raw, const std::array<double, 2>& mu,
                         const std::array<double, 2>& sigma);

/// raw ~ N(mu, sigma^2) (or raw = mu when deterministic); log-prob on raw.
SampledAction sample_action(const PolicyOutput& out, std::mt19937_64& rng, bool deterministic);

/// Runs a forward pass and extracts per-sample outputs. Throws NumericError on NaN.
template <typename T>
std::vector<PolicyOutput> evaluate(const NetConfig& cfg, const ParamStore<T>& params, const ObsBatch<T>& obs);

extern template ParamStore<float> init_params<float>(const NetConfig&, std::uint64_t);
extern template ParamStore<double> init_params<double>(const NetConfig&, std::uint64_t);

}  // namespace lstp::net
