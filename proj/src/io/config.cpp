#include "lstp/io/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "lstp/error.hpp"

namespace lstp::io {

namespace {

/// Reads keys from one JSON object and reports anything left unread.
class Reader {
 public:
  Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("'" + display() + "' must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <typename T>
  void get(const std::string& key, T& out) {
    if (!j_.contains(key)) return;
    used_.insert(key);
    const Json& v = j_.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_unsigned_v<T>) {
        if (!v.is_number_integer() || v.get<long long>() < 0) throw ConfigError("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError("");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError("");
      }
      out = v.get<T>();
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key_path(key) + "' has the wrong type (got " + v.dump() + ")");
    }
  }

  const Json& child(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }

  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.contains(it.key())) throw ConfigError("unknown config key '" + key_path(it.key()) + "'");
    }
  }

 private:
  std::string display() const { return path_.empty() ? "<root>" : path_; }

  const Json& j_;
  std::string path_;
  std::set<std::string> used_;
};

void read_pair(Reader& r, const std::string& key, double& a, double& b) {
  if (!r.has(key)) return;
  const Json& v = r.child(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    throw ConfigError("config key '" + r.key_path(key) + "' must be a two-number array");
  }
  a = v[0].get<double>();
  b = v[1].get<double>();
}

void read_sizes(Reader& r, const std::string& key, std::vector<std::size_t>& out) {
  if (!r.has(key)) return;
  const Json& v = r.child(key);
  if (!v.is_array()) throw ConfigError("config key '" + r.key_path(key) + "' must be an array of integers");
  out.clear();
  for (const auto& x : v) {
    if (!x.is_number_integer() || x.get<long long>() < 1) {
      throw ConfigError("config key '" + r.key_path(key) + "' must hold positive integers");
    }
    out.push_back(x.get<std::size_t>());
  }
}

sim::ScenarioConfig read_scenario(const Json& j, const std::string& path) {
  sim::ScenarioConfig c;
  Reader r(j, path);
  read_pair(r, "arena", c.arena.width, c.arena.height);
  r.get("n_obstacles", c.n_obstacles);
  r.get("n_agents", c.n_agents);
  if (r.has("kinds")) {
    const Json& v = r.child("kinds");
    if (!v.is_array() || v.empty()) throw ConfigError("config key '" + r.key_path("kinds") + "' must be a non-empty array");
    c.kinds.clear();
    for (const auto& k : v) {
      if (!k.is_string()) throw ConfigError("config key '" + r.key_path("kinds") + "' must hold strings");
      try {
        c.kinds.push_back(sim::parse_kind(k.get<std::string>()));
      } catch (const Error& e) {
        throw ConfigError("config key '" + r.key_path("kinds") + "': " + e.what());
      }
    }
  }
  r.get("agent_radius", c.agent_radius);
  if (r.has("lidar")) {
    Reader l(r.child("lidar"), r.key_path("lidar"));
    l.get("n_laser", c.lidar.n_laser);
    l.get("z_max", c.lidar.z_max);
    l.get("fov", c.lidar.fov);
    l.get("noise_sigma", c.lidar.noise_sigma);
    l.finish();
  }
  r.get("slip_sigma", c.slip_sigma);
  r.get("eval_slip_sigma", c.eval_slip_sigma);
  r.get("eval_noise_sigma", c.eval_noise_sigma);
  r.get("dt", c.dt);
  r.get("action_repeat", c.action_repeat);
  r.get("episode_steps", c.episode_steps);
  r.get("replay_steps", c.replay_steps);
  r.get("max_collisions", c.max_collisions);
  r.get("clearance", c.clearance);
  r.get("min_goal_distance", c.min_goal_distance);
  r.get("max_goal_distance", c.max_goal_distance);
  r.get("max_attempts", c.max_attempts);
  r.get("goal_tolerance", c.goal_tolerance);
  r.get("contact_distance", c.contact_distance);
  if (r.has("obstacles")) {
    const Json& v = r.child("obstacles");
    if (!v.is_array()) throw ConfigError("config key '" + r.key_path("obstacles") + "' must be an array");
    for (std::size_t i = 0; i < v.size(); ++i) {
      Reader o(v[i], r.key_path("obstacles") + "[" + std::to_string(i) + "]");
      sim::Obstacle ob;
      std::string kind = "sphere";
      o.get("kind", kind);
      try {
        ob.kind = sim::parse_kind(kind);
      } catch (const Error& e) {
        throw ConfigError(o.key_path("kind") + ": " + e.what());
      }
      o.get("x", ob.center.x);
      o.get("y", ob.center.y);
      o.get("theta", ob.theta);
      o.finish();
      c.obstacles.push_back(ob);
    }
    c.n_obstacles = c.obstacles.size();
  }
  if (r.has("agents")) {
    const Json& v = r.child("agents");
    if (!v.is_array()) throw ConfigError("config key '" + r.key_path("agents") + "' must be an array");
    for (std::size_t i = 0; i < v.size(); ++i) {
      Reader a(v[i], r.key_path("agents") + "[" + std::to_string(i) + "]");
      sim::AgentSpawn s;
      read_pair(a, "start", s.start.x, s.start.y);
      a.get("heading", s.heading);
      read_pair(a, "goal", s.goal.x, s.goal.y);
      a.finish();
      c.agents.push_back(s);
    }
    c.n_agents = c.agents.size();
  }
  r.finish();
  return c;
}

net::NetConfig read_net(const Json& j, const std::string& path, std::size_t default_n_laser) {
  net::NetConfig c;
  c.n_laser = default_n_laser;
  Reader r(j, path);
  r.get("n_laser", c.n_laser);
  r.get("stack", c.stack);
  r.get("d_h", c.d_h);
  r.get("gru_layers", c.gru_layers);
  r.get("heads", c.heads);
  r.get("enc_dim", c.enc_dim);
  read_sizes(r, "actor_hidden", c.actor_hidden);
  read_sizes(r, "critic_hidden", c.critic_hidden);
  std::string variant(net::variant_name(c.variant));
  r.get("variant", variant);
  c.variant = net::parse_variant(variant);
  r.get("log_sigma_init", c.log_sigma_init);
  r.get("log_sigma_min", c.log_sigma_min);
  r.get("log_sigma_max", c.log_sigma_max);
  r.finish();
  return c;
}

train::TrainConfig read_train(const Json& j, const std::string& path) {
  train::TrainConfig c;
  Reader r(j, path);
  r.get("iterations", c.iterations);
  r.get("horizon", c.horizon);
  r.get("epochs", c.epochs);
  r.get("minibatch", c.minibatch);
  r.get("gamma", c.gamma);
  r.get("lambda", c.lambda);
  r.get("clip", c.clip);
  r.get("value_clip", c.value_clip);
  r.get("value_coef", c.value_coef);
  r.get("entropy_coef", c.entropy_coef);
  r.get("normalize_advantages", c.normalize_advantages);
  r.get("max_grad_norm", c.max_grad_norm);
  r.get("lr", c.adam.lr);
  r.get("beta1", c.adam.beta1);
  r.get("beta2", c.adam.beta2);
  r.get("adam_eps", c.adam.eps);
  r.get("envs", c.envs);
  r.get("workers", c.workers);
  r.get("seed", c.seed);
  r.get("sr_window", c.sr_window);
  r.get("eval_every", c.eval_every);
  r.get("eval_episodes", c.eval_episodes);
  r.get("checkpoint_every", c.checkpoint_every);
  if (r.has("curriculum")) {
    const Json& v = r.child("curriculum");
    if (!v.is_array()) throw ConfigError("config key '" + r.key_path("curriculum") + "' must be an array");
    for (std::size_t i = 0; i < v.size(); ++i) {
      Reader s(v[i], r.key_path("curriculum") + "[" + std::to_string(i) + "]");
      train::Stage st;
      st.name = "stage" + std::to_string(i + 1);
      s.get("name", st.name);
      s.get("n_obstacles", st.n_obstacles);
      s.get("n_agents", st.n_agents);
      read_pair(s, "arena", st.width, st.height);
      s.get("threshold", st.threshold);
      s.finish();
      c.curriculum.push_back(st);
    }
  }
  r.finish();
  return c;
}

reward::RewardConfig read_reward(const Json& j, const std::string& path) {
  reward::RewardConfig c;
  Reader r(j, path);
  std::string mode(reward::mode_name(c.mode));
  r.get("mode", mode);
  c.mode = reward::parse_mode(mode);
  r.get("r_arrival", c.r_arrival);
  r.get("r_collision", c.r_collision);
  r.get("w_g", c.w_g);
  r.get("k_c", c.k_c);
  r.get("sigma_hs", c.sigma_hs);
  r.finish();
  return c;
}

}  // namespace

RunConfig parse_config(const Json& j) {
  RunConfig cfg;
  Reader r(j, "");
  if (r.has("scenario")) cfg.scenario = read_scenario(r.child("scenario"), "scenario");
  cfg.net.n_laser = cfg.scenario.lidar.n_laser;
  if (r.has("net")) cfg.net = read_net(r.child("net"), "net", cfg.scenario.lidar.n_laser);
  if (r.has("train")) cfg.train = read_train(r.child("train"), "train");
  if (r.has("reward")) cfg.reward = read_reward(r.child("reward"), "reward");
  r.finish();
  cfg.validate();
  return cfg;
}

RunConfig parse_config_text(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

Json to_json(const sim::ScenarioConfig& c) {
  Json j;
  j["arena"] = {c.arena.width, c.arena.height};
  j["n_obstacles"] = c.n_obstacles;
  j["n_agents"] = c.n_agents;
  Json kinds = Json::array();
  for (auto k : c.kinds) kinds.push_back(std::string(sim::kind_name(k)));
  j["kinds"] = kinds;
  j["agent_radius"] = c.agent_radius;
  j["lidar"] = {{"n_laser", c.lidar.n_laser},
                {"z_max", c.lidar.z_max},
                {"fov", c.lidar.fov},
                {"noise_sigma", c.lidar.noise_sigma}};
  j["slip_sigma"] = c.slip_sigma;
  j["eval_slip_sigma"] = c.eval_slip_sigma;
  j["eval_noise_sigma"] = c.eval_noise_sigma;
  j["dt"] = c.dt;
  j["action_repeat"] = c.action_repeat;
  j["episode_steps"] = c.episode_steps;
  j["replay_steps"] = c.replay_steps;
  j["max_collisions"] = c.max_collisions;
  j["clearance"] = c.clearance;
  j["min_goal_distance"] = c.min_goal_distance;
  j["max_goal_distance"] = c.max_goal_distance;
  j["max_attempts"] = c.max_attempts;
  j["goal_tolerance"] = c.goal_tolerance;
  j["contact_distance"] = c.contact_distance;
  if (!c.obstacles.empty()) {
    Json obs = Json::array();
    for (const auto& o : c.obstacles) {
      obs.push_back({{"kind", std::string(sim::kind_name(o.kind))}, {"x", o.center.x}, {"y", o.center.y}, {"theta", o.theta}});
    }
    j["obstacles"] = obs;
  }
  if (!c.agents.empty()) {
    Json agents = Json::array();
    for (const auto& a : c.agents) {
      agents.push_back({{"start", {a.start.x, a.start.y}}, {"heading", a.heading}, {"goal", {a.goal.x, a.goal.y}}});
    }
    j["agents"] = agents;
  }
  return j;
}

Json to_json(const net::NetConfig& c) {
  Json j;
  j["n_laser"] = c.n_laser;
  j["stack"] = c.stack;
  j["d_h"] = c.d_h;
  j["gru_layers"] = c.gru_layers;
  j["heads"] = c.heads;
  j["enc_dim"] = c.enc_dim;
  j["actor_hidden"] = c.actor_hidden;
  j["critic_hidden"] = c.critic_hidden;
  j["variant"] = std::string(net::variant_name(c.variant));
  j["log_sigma_init"] = c.log_sigma_init;
  j["log_sigma_min"] = c.log_sigma_min;
  j["log_sigma_max"] = c.log_sigma_max;
  return j;
}

Json to_json(const RunConfig& cfg) {
  Json j;
  j["scenario"] = to_json(cfg.scenario);
  j["net"] = to_json(cfg.net);
  const auto& t = cfg.train;
  Json tj;
  tj["iterations"] = t.iterations;
  tj["horizon"] = t.horizon;
  tj["epochs"] = t.epochs;
  tj["minibatch"] = t.minibatch;
  tj["gamma"] = t.gamma;
  tj["lambda"] = t.lambda;
  tj["clip"] = t.clip;
  tj["value_clip"] = t.value_clip;
  tj["value_coef"] = t.value_coef;
  tj["entropy_coef"] = t.entropy_coef;
  tj["normalize_advantages"] = t.normalize_advantages;
  tj["max_grad_norm"] = t.max_grad_norm;
  tj["lr"] = t.adam.lr;
  tj["beta1"] = t.adam.beta1;
  tj["beta2"] = t.adam.beta2;
  tj["adam_eps"] = t.adam.eps;
  tj["envs"] = t.envs;
  tj["workers"] = t.workers;
  tj["seed"] = t.seed;
  Json stages = Json::array();
  for (const auto& s : t.curriculum) {
    stages.push_back({{"name", s.name},
                      {"n_obstacles", s.n_obstacles},
                      {"n_agents", s.n_agents},
                      {"arena", {s.width, s.height}},
                      {"threshold", s.threshold}});
  }
  tj["curriculum"] = stages;
  tj["sr_window"] = t.sr_window;
  tj["eval_every"] = t.eval_every;
  tj["eval_episodes"] = t.eval_episodes;
  tj["checkpoint_every"] = t.checkpoint_every;
  j["train"] = tj;
  const auto& r = cfg.reward;
  j["reward"] = {{"mode", std::string(reward::mode_name(r.mode))},
                 {"r_arrival", r.r_arrival},
                 {"r_collision", r.r_collision},
                 {"w_g", r.w_g},
                 {"k_c", r.k_c},
                 {"sigma_hs", r.sigma_hs}};
  return j;
}

net::NetConfig net_config_from_json(const Json& j) {
  auto c = read_net(j, "net", net::NetConfig{}.n_laser);
  c.validate();
  return c;
}

sim::ScenarioConfig scenario_from_json(const Json& j) {
  auto c = read_scenario(j, "scenario");
  c.validate();
  return c;
}

void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace lstp::io
