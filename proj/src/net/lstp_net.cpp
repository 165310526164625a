#include "lstp/net/lstp_net.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace lstp::net {

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::kLstp: return "lstp";
    case Variant::kGruOnly: return "gru";
    case Variant::kLinear: return "linear";
  }
  return "lstp";
}

Variant parse_variant(std::string_view name) {
  if (name == "lstp") return Variant::kLstp;
  if (name == "gru") return Variant::kGruOnly;
  if (name == "linear") return Variant::kLinear;
  throw ConfigError("unknown network variant '" + std::string(name) + "' (expected lstp, gru or linear)");
}

void NetConfig::validate() const {
  if (n_laser < 1) throw ConfigError("net.n_laser must be >= 1");
  if (stack < 1) throw ConfigError("net.stack must be >= 1");
  if (d_h < 1 || enc_dim < 1) throw ConfigError("net.d_h and net.enc_dim must be >= 1");
  if (variant != Variant::kLinear && gru_layers < 1) throw ConfigError("net.gru_layers must be >= 1");
  if (variant != Variant::kGruOnly) {
    if (heads < 1 || d_h % heads != 0) {
      throw ConfigError("net.d_h (" + std::to_string(d_h) + ") must be divisible by net.heads (" +
                        std::to_string(heads) + ")");
    }
  }
  for (auto h : actor_hidden) {
    if (h < 1) throw ConfigError("net.actor_hidden entries must be >= 1");
  }
  for (auto h : critic_hidden) {
    if (h < 1) throw ConfigError("net.critic_hidden entries must be >= 1");
  }
  if (!(log_sigma_min <= log_sigma_init && log_sigma_init <= log_sigma_max)) {
    throw ConfigError("net.log_sigma_init outside [log_sigma_min, log_sigma_max]");
  }
}

std::vector<std::pair<std::string, Shape>> param_shapes(const NetConfig& cfg) {
  cfg.validate();
  std::vector<std::pair<std::string, Shape>> out;
  const std::size_t dh = cfg.d_h;
  if (cfg.variant == Variant::kLinear) {
    out.push_back({"lin.w", {cfg.n_laser, dh}});
    out.push_back({"lin.b", {dh}});
  } else {
    for (std::size_t l = 0; l < cfg.gru_layers; ++l) {
      const std::string p = "gru.l" + std::to_string(l) + ".";
      const std::size_t in = l == 0 ? cfg.n_laser : dh;
      out.push_back({p + "w_ih", {in, 3 * dh}});
      out.push_back({p + "w_hh", {dh, 3 * dh}});
      out.push_back({p + "b_ih", {3 * dh}});
      out.push_back({p + "b_hh", {3 * dh}});
    }
  }
  if (cfg.variant != Variant::kGruOnly) {
    // Head i owns columns [i*d_k, (i+1)*d_k) of the query/key/value projections.
    out.push_back({"attn.w_q", {dh, dh}});
    out.push_back({"attn.w_k", {dh, dh}});
    out.push_back({"attn.w_v", {dh, dh}});
    out.push_back({"attn.w_o", {dh, dh}});
  }
  out.push_back({"enc.w", {kStateDim, cfg.enc_dim}});
  out.push_back({"enc.b", {cfg.enc_dim}});
  out.push_back({"res.w", {cfg.enc_dim, cfg.enc_dim}});
  out.push_back({"res.b", {cfg.enc_dim}});

  auto head = [&](const std::string& prefix, const std::vector<std::size_t>& hidden, std::size_t out_dim) {
    std::size_t in = cfg.feature_dim();
    for (std::size_t i = 0; i < hidden.size(); ++i) {
      out.push_back({prefix + ".l" + std::to_string(i) + ".w", {in, hidden[i]}});
      out.push_back({prefix + ".l" + std::to_string(i) + ".b", {hidden[i]}});
      in = hidden[i];
    }
    out.push_back({prefix + ".out.w", {in, out_dim}});
    out.push_back({prefix + ".out.b", {out_dim}});
  };
  head("actor", cfg.actor_hidden, kActionDim);
  head("critic", cfg.critic_hidden, 1);
  out.push_back({"log_sigma", {kActionDim}});
  return out;
}

std::size_t param_count(const NetConfig& cfg) {
  std::size_t n = 0;
  for (const auto& [name, shape] : param_shapes(cfg)) n += tensor::shape_size(shape);
  return n;
}

template <typename T>
ParamStore<T> init_params(const NetConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ParamStore<T> params;
  for (auto& [name, shape] : param_shapes(cfg)) {
    Array<T> a(shape);
    if (name == "log_sigma") {
      a.fill(static_cast<T>(cfg.log_sigma_init));
    } else if (shape.size() == 2) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(shape[0]));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (auto& x : a.data()) x = static_cast<T>(dist(rng));
    }
    params.add(name, std::move(a));
  }
  return params;
}

template <typename T>
void check_params(const NetConfig& cfg, const ParamStore<T>& params) {
  const auto shapes = param_shapes(cfg);
  if (shapes.size() != params.size()) {
    throw LoadError("parameter set has " + std::to_string(params.size()) + " arrays, config implies " +
                    std::to_string(shapes.size()));
  }
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (params.name(i) != shapes[i].first || params[i].shape() != shapes[i].second) {
      throw LoadError("parameter '" + params.name(i) + "' " + tensor::shape_string(params[i].shape()) +
                      " does not match config ('" + shapes[i].first + "' " +
                      tensor::shape_string(shapes[i].second) + ")");
    }
  }
}

template <typename T>
void clamp_log_sigma(const NetConfig& cfg, ParamStore<T>& params) {
  for (auto& x : params.at("log_sigma").data()) {
    x = std::clamp(x, static_cast<T>(cfg.log_sigma_min), static_cast<T>(cfg.log_sigma_max));
  }
}

template <typename T>
Var gru_forward(Bound<T>& p, const NetConfig& cfg, Var seq) {
  auto& g = p.graph();
  const Shape& s = g.shape(seq);
  if (s.size() != 3 || s[2] != cfg.n_laser) {
    throw DimensionError("gru_forward: expected [B, T, " + std::to_string(cfg.n_laser) + "], got " +
                         tensor::shape_string(s));
  }
  const std::size_t batch = s[0], steps = s[1], dh = cfg.d_h;
  Var layer_in = seq;
  for (std::size_t l = 0; l < cfg.gru_layers; ++l) {
    const std::string pre = "gru.l" + std::to_string(l) + ".";
    // Input projections for every frame at once: [B, T, 3*d_h], gate order (r, z, n).
    Var gx = g.add(g.matmul(layer_in, p(pre + "w_ih")), p(pre + "b_ih"));
    Var w_hh = p(pre + "w_hh");
    Var b_hh = p(pre + "b_hh");
    Var h = g.constant(Array<T>(Shape{batch, dh}));
    std::vector<Var> outputs;
    outputs.reserve(steps);
    for (std::size_t t = 0; t < steps; ++t) {
      Var gx_t = g.reshape(g.slice(gx, 1, t, 1), Shape{batch, 3 * dh});
      Var gh = g.add(g.matmul(h, w_hh), b_hh);
      Var rz = g.sigmoid(g.add(g.slice(gx_t, 1, 0, 2 * dh), g.slice(gh, 1, 0, 2 * dh)));
      Var r = g.slice(rz, 1, 0, dh);
      Var z = g.slice(rz, 1, dh, dh);
      Var n = g.tanh(g.add(g.slice(gx_t, 1, 2 * dh, dh), g.mul(r, g.slice(gh, 1, 2 * dh, dh))));
      // h' = (1 - z) * n + z * h = n + z * (h - n)
      h = g.add(n, g.mul(z, g.sub(h, n)));
      outputs.push_back(g.reshape(h, Shape{batch, 1, dh}));
    }
    layer_in = steps == 1 ? outputs[0] : g.concat(outputs, 1);
  }
  return layer_in;
}

template <typename T>
Var linear_frames(Bound<T>& p, const NetConfig& cfg, Var seq) {
  auto& g = p.graph();
  const Shape& s = g.shape(seq);
  if (s.size() != 3 || s[2] != cfg.n_laser) {
    throw DimensionError("linear_frames: expected [B, T, " + std::to_string(cfg.n_laser) + "], got " +
                         tensor::shape_string(s));
  }
  return g.elu(g.add(g.matmul(seq, p("lin.w")), p("lin.b")));
}

template <typename T>
AttentionOut<T> attention(Bound<T>& p, const NetConfig& cfg, Var h) {
  auto& g = p.graph();
  const Shape& s = g.shape(h);
  if (s.size() != 3 || s[2] != cfg.d_h) {
    throw DimensionError("attention: expected [B, T, d_h], got " + tensor::shape_string(s));
  }
  if (cfg.heads == 0 || cfg.d_h % cfg.heads != 0) throw ConfigError("attention: d_h not divisible by heads");
  const std::size_t batch = s[0], steps = s[1], dh = cfg.d_h, dk = dh / cfg.heads;
  const T inv_sqrt_dk = T(1) / std::sqrt(static_cast<T>(dk));

  Var query = g.matmul(g.reshape(g.slice(h, 1, steps - 1, 1), Shape{batch, dh}), p("attn.w_q"));
  Var keys = g.matmul(h, p("attn.w_k"));
  Var values = g.matmul(h, p("attn.w_v"));

  AttentionOut<T> out;
  std::vector<Var> head_outputs;
  for (std::size_t i = 0; i < cfg.heads; ++i) {
    Var q = g.reshape(g.slice(query, 1, i * dk, dk), Shape{batch, 1, dk});
    Var k = g.slice(keys, 2, i * dk, dk);
    Var v = g.slice(values, 2, i * dk, dk);
    Var w = g.softmax_last(g.scale(g.bmm(q, k, true), inv_sqrt_dk));  // [B, 1, T]
    out.weights.push_back(w);
    head_outputs.push_back(g.bmm(w, v));  // [B, 1, d_k]
  }
  Var joined = cfg.heads == 1 ? head_outputs[0] : g.concat(head_outputs, 2);
  out.context = g.matmul(g.reshape(joined, Shape{batch, dh}), p("attn.w_o"));
  return out;
}

template <typename T>
Var encode_state(Bound<T>& p, const NetConfig& cfg, Var state) {
  auto& g = p.graph();
  const Shape& s = g.shape(state);
  if (s.size() != 2 || s[1] != kStateDim) {
    throw DimensionError("encode_state: expected [B, 4], got " + tensor::shape_string(s));
  }
  (void)cfg;
  Var u = g.add(g.matmul(state, p("enc.w")), p("enc.b"));
  return g.add(g.matmul(g.add(g.elu(u), u), p("res.w")), p("res.b"));
}

namespace {

template <typename T>
Var mlp(Bound<T>& p, const std::string& prefix, std::size_t layers, Var x) {
  auto& g = p.graph();
  for (std::size_t i = 0; i < layers; ++i) {
    const std::string l = prefix + ".l" + std::to_string(i) + ".";
    x = g.elu(g.add(g.matmul(x, p(l + "w")), p(l + "b")));
  }
  return g.add(g.matmul(x, p(prefix + ".out.w")), p(prefix + ".out.b"));
}

}  // namespace

template <typename T>
NetOutput<T> forward(Bound<T>& p, const NetConfig& cfg, const ObsBatch<T>& obs) {
  auto& g = p.graph();
  const std::size_t batch = obs.batch();
  if (batch == 0 || obs.lidar.rank() != 3 || obs.lidar.dim(1) != cfg.stack || obs.lidar.dim(2) != cfg.n_laser) {
    throw DimensionError("forward: lidar batch must be [B, " + std::to_string(cfg.stack) + ", " +
                         std::to_string(cfg.n_laser) + "], got " + tensor::shape_string(obs.lidar.shape()));
  }
  if (obs.state.rank() != 2 || obs.state.dim(0) != batch || obs.state.dim(1) != kStateDim) {
    throw DimensionError("forward: state batch must be [B, 4], got " + tensor::shape_string(obs.state.shape()));
  }
  NetOutput<T> out;
  Var seq = g.constant(obs.lidar);
  Var context;
  switch (cfg.variant) {
    case Variant::kLstp: {
      auto att = attention(p, cfg, gru_forward(p, cfg, seq));
      context = att.context;
      out.attention_weights = std::move(att.weights);
      break;
    }
    case Variant::kGruOnly: {
      Var h = gru_forward(p, cfg, seq);
      context = g.reshape(g.slice(h, 1, cfg.stack - 1, 1), Shape{batch, cfg.d_h});
      break;
    }
    case Variant::kLinear: {
      auto att = attention(p, cfg, linear_frames(p, cfg, seq));
      context = att.context;
      out.attention_weights = std::move(att.weights);
      break;
    }
  }
  Var s_enc = encode_state(p, cfg, g.constant(obs.state));
  const Var parts[2] = {context, s_enc};
  out.features = g.concat(parts, 1);
  out.mu = mlp(p, "actor", cfg.actor_hidden.size(), out.features);
  out.value = g.reshape(mlp(p, "critic", cfg.critic_hidden.size(), out.features), Shape{batch});
  out.log_sigma = p("log_sigma");
  return out;
}

std::array<double, 2> clamp_action(std::array<double, 2> raw) {
  return {std::clamp(raw[0], 0.0, 1.0), std::clamp(raw[1], -std::numbers::pi, std::numbers::pi)};
}

double gaussian_log_prob(const std::array<double, 2>& raw, const std::array<double, 2>& mu,
                         const std::array<double, 2>& sigma) {
  constexpr double kHalfLog2Pi = 0.91893853320467274178;
  double lp = 0.0;
  for (std::size_t d = 0; d < 2; ++d) {
    const double z = (raw[d] - mu[d]) / sigma[d];
    lp -= 0.5 * z * z + std::log(sigma[d]) + kHalfLog2Pi;
  }
  return lp;
}

SampledAction sample_action(const PolicyOutput& out, std::mt19937_64& rng, bool deterministic) {
  SampledAction s;
  for (std::size_t d = 0; d < 2; ++d) {
    if (!(out.sigma[d] > 0.0)) throw ContractError("sample_action: sigma must be positive");
    if (deterministic) {
      s.raw[d] = out.mu[d];
    } else {
      std::normal_distribution<double> dist(out.mu[d], out.sigma[d]);
      s.raw[d] = dist(rng);
    }
  }
  s.action = clamp_action(s.raw);
  s.log_prob = gaussian_log_prob(s.raw, out.mu, out.sigma);
  return s;
}

template <typename T>
std::vector<PolicyOutput> evaluate(const NetConfig& cfg, const ParamStore<T>& params, const ObsBatch<T>& obs) {
  Graph<T> g;
  Bound<T> p(g, params);
  auto out = forward(p, cfg, obs);
  const auto& mu = g.value(out.mu);
  const auto& ls = g.value(out.log_sigma);
  const auto& val = g.value(out.value);
  std::vector<PolicyOutput> res(obs.batch());
  for (std::size_t b = 0; b < res.size(); ++b) {
    for (std::size_t d = 0; d < 2; ++d) {
      res[b].mu[d] = mu[b * 2 + d];
      res[b].sigma[d] = std::exp(static_cast<double>(ls[d]));
    }
    res[b].value = val[b];
  }
  return res;
}

#define LSTP_INSTANTIATE(T)                                                                 \
  template ParamStore<T> init_params<T>(const NetConfig&, std::uint64_t);                  \
  template void check_params<T>(const NetConfig&, const ParamStore<T>&);                   \
  template void clamp_log_sigma<T>(const NetConfig&, ParamStore<T>&);                      \
  template Var gru_forward<T>(Bound<T>&, const NetConfig&, Var);                           \
  template Var linear_frames<T>(Bound<T>&, const NetConfig&, Var);                         \
  template AttentionOut<T> attention<T>(Bound<T>&, const NetConfig&, Var);                 \
  template Var encode_state<T>(Bound<T>&, const NetConfig&, Var);                          \
  template NetOutput<T> forward<T>(Bound<T>&, const NetConfig&, const ObsBatch<T>&);       \
  template std::vector<PolicyOutput> evaluate<T>(const NetConfig&, const ParamStore<T>&,   \
                                                 const ObsBatch<T>&);

LSTP_INSTANTIATE(float)
LSTP_INSTANTIATE(double)

#undef LSTP_INSTANTIATE

}  // namespace lstp::net
