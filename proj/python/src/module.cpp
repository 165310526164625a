#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <string>
#include <vector>

#include "lstp/error.hpp"
#include "lstp/eval/harness.hpp"
#include "lstp/io/config.hpp"
#include "lstp/net/lstp_net.hpp"
#include "lstp/reward/rewards.hpp"
#include "lstp/sim/world.hpp"
#include "lstp/train/ppo.hpp"
#include "lstp/train/trainer.hpp"

namespace py = pybind11;
using namespace lstp;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

sim::SimMode parse_mode(const std::string& s) {
  if (s == "eval") return sim::SimMode::kEval;
  if (s == "training") return sim::SimMode::kTraining;
  throw ContractError("mode must be 'eval' or 'training', got '" + s + "'");
}

py::dict agent_dict(const sim::AgentState& a) {
  py::dict d;
  d["x"] = a.pos.x;
  d["y"] = a.pos.y;
  d["theta"] = a.heading;
  d["goal"] = py::make_tuple(a.goal.x, a.goal.y);
  d["v"] = a.v_cmd;
  d["w"] = a.w_cmd;
  d["active"] = a.active;
  d["arrived"] = a.arrived;
  d["collided"] = a.collided;
  d["timed_out"] = a.timed_out;
  d["collision_count"] = a.collision_count;
  return d;
}

py::dict metrics_dict(const eval::Metrics& m) {
  py::dict d;
  d["n_trials"] = m.n_trials;
  d["n_agent_trials"] = m.n_agent_trials;
  d["SR"] = m.sr;
  d["CR"] = m.cr;
  d["TR"] = m.tr;
  d["AS"] = m.as ? py::cast(*m.as) : py::none();
  d["successes"] = m.successes;
  d["collisions"] = m.collisions;
  d["traps"] = m.traps;
  return d;
}

reward::RewardConfig reward_config(double k_c, double sigma_hs, double dt, double z_max) {
  reward::RewardConfig c;
  c.k_c = k_c;
  c.sigma_hs = sigma_hs;
  c.dt = dt;
  c.z_max = z_max;
  c.validate();
  return c;
}

class Network {
 public:
  Network(net::NetConfig cfg, tensor::ParamStore<float> params) : cfg_(std::move(cfg)), params_(std::move(params)) {}

  static Network from_config(const std::string& config_json, std::uint64_t seed) {
    const auto cfg = io::parse_config_text(config_json);
    return {cfg.net, net::init_params<float>(cfg.net, seed)};
  }

  static Network load(const std::string& path) {
    auto policy = eval::load_policy(path, true);
    auto* np = dynamic_cast<eval::NetPolicy*>(policy.get());
    if (!np) throw LoadError(path + " is not a network checkpoint");
    return {np->config(), np->params()};
  }

  py::tuple forward(const FloatArray& lidar, const FloatArray& state) const {
    if (lidar.ndim() != 3 || state.ndim() != 2) throw DimensionError("lidar must be [B, stack, n_laser], state [B, 4]");
    const auto b = static_cast<std::size_t>(lidar.shape(0));
    net::ObsBatch<float> obs{
        tensor::Array<float>({b, static_cast<std::size_t>(lidar.shape(1)), static_cast<std::size_t>(lidar.shape(2))}),
        tensor::Array<float>({static_cast<std::size_t>(state.shape(0)), static_cast<std::size_t>(state.shape(1))})};
    std::copy_n(lidar.data(), obs.lidar.size(), obs.lidar.data().begin());
    std::copy_n(state.data(), obs.state.size(), obs.state.data().begin());
    const auto outs = net::evaluate(cfg_, params_, obs);
    DoubleArray mu({b, std::size_t{2}}), sigma({b, std::size_t{2}}), value({b});
    auto m = mu.mutable_unchecked<2>();
    auto s = sigma.mutable_unchecked<2>();
    auto v = value.mutable_unchecked<1>();
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t k = 0; k < 2; ++k) {
        m(i, k) = outs[i].mu[k];
        s(i, k) = outs[i].sigma[k];
      }
      v(i) = outs[i].value;
    }
    return py::make_tuple(mu, sigma, value);
  }

  std::size_t param_count() const { return params_.scalar_count(); }
  std::size_t n_laser() const { return cfg_.n_laser; }
  std::size_t stack() const { return cfg_.stack; }

 private:
  net::NetConfig cfg_;
  tensor::ParamStore<float> params_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "LSTP-Nav simulator, network, rewards, PPO and evaluation";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<LoadError>(m, "LoadError", PyExc_IOError);

  m.def("normalize_config", [](const std::string& text) { return io::to_json(io::parse_config_text(text)).dump(); },
        py::arg("config_json"), "Parses a config strictly and returns it with every default filled in");

  m.def("param_count", [](const std::string& text) { return net::param_count(io::parse_config_text(text).net); },
        py::arg("config_json") = "{}");

  py::class_<sim::World>(m, "World")
      .def_static(
          "generate",
          [](const std::string& text, const std::string& mode, std::uint64_t seed) {
            return sim::World::generate(io::parse_config_text(text).scenario, parse_mode(mode), seed);
          },
          py::arg("config_json") = "{}", py::arg("mode") = "eval", py::arg("seed") = 0)
      .def("step",
           [](sim::World& w, const std::vector<std::pair<double, double>>& commands) {
             std::vector<sim::Command> cmds;
             for (const auto& [v, om] : commands) cmds.push_back({v, om});
             py::list out;
             for (const auto& e : w.step(cmds)) {
               py::dict d;
               d["collided"] = e.collided;
               d["arrived"] = e.arrived;
               d["timed_out"] = e.timed_out;
               out.append(d);
             }
             return out;
           })
      .def("scan", [](const sim::World& w, std::size_t agent) { return w.lidar_scan_clean(agent); })
      .def("surface_distance", &sim::World::surface_distance)
      .def("apply_replay", &sim::World::apply_replay)
      .def_property_readonly("step_count", &sim::World::step_count)
      .def_property_readonly("layout_hash", &sim::World::layout_hash)
      .def_property_readonly("beams", &sim::World::beams)
      .def_property_readonly("agents",
                             [](const sim::World& w) {
                               py::list out;
                               for (const auto& a : w.agents()) out.append(agent_dict(a));
                               return out;
                             })
      .def_property_readonly("obstacles", [](const sim::World& w) {
        py::list out;
        for (const auto& o : w.obstacles())
          out.append(py::make_tuple(std::string(sim::kind_name(o.kind)), o.center.x, o.center.y, o.theta));
        return out;
      });

  m.def("goal_reward",
        [](std::pair<double, double> prev, std::pair<double, double> pos, std::pair<double, double> goal) {
          return reward::goal_reward({prev.first, prev.second}, {pos.first, pos.second}, {goal.first, goal.second},
                                     reward::RewardConfig{});
        },
        py::arg("prev"), py::arg("pos"), py::arg("goal"));
  m.def(
      "hs_weights",
      [](double omega, const std::vector<double>& beams, double sigma_hs, double dt) {
        return reward::hs_weights(omega, reward_config(0.5, sigma_hs, dt, 4.0), beams);
      },
      py::arg("omega"), py::arg("beams"), py::arg("sigma_hs") = 0.5, py::arg("dt") = 1.0 / 60.0);
  m.def(
      "obstacle_reward",
      [](const std::vector<double>& scan, double omega, bool collided, const std::vector<double>& beams, double k_c,
         double dt, const std::string& mode) {
        auto c = reward_config(k_c, 0.5, dt, 4.0);
        c.mode = reward::parse_mode(mode);
        return reward::obstacle_reward_for_mode(scan, omega, collided, c, beams);
      },
      py::arg("scan"), py::arg("omega"), py::arg("collided"), py::arg("beams"), py::arg("k_c") = 0.5,
      py::arg("dt") = 1.0 / 60.0, py::arg("mode") = "hs");

  m.def(
      "gae",
      [](const std::vector<double>& rewards, const std::vector<double>& values, const std::vector<double>& dones,
         double bootstrap, double gamma, double lam) {
        auto r = train::gae(rewards, values, dones, bootstrap, gamma, lam);
        return py::make_tuple(r.advantages, r.returns);
      },
      py::arg("rewards"), py::arg("values"), py::arg("dones"), py::arg("bootstrap"), py::arg("gamma") = 0.99,
      py::arg("lam") = 0.95);

  py::class_<Network>(m, "Network")
      .def(py::init(&Network::from_config), py::arg("config_json") = "{}", py::arg("seed") = 0)
      .def_static("load", &Network::load, py::arg("path"))
      .def("forward", &Network::forward, py::arg("lidar"), py::arg("state"),
           "Returns (mu [B,2], sigma [B,2], value [B])")
      .def_property_readonly("param_count", &Network::param_count)
      .def_property_readonly("n_laser", &Network::n_laser)
      .def_property_readonly("stack", &Network::stack);

  m.def(
      "evaluate",
      [](const std::string& text, const std::string& policy, std::size_t n_trials, std::uint64_t seed,
         bool deterministic) {
        const auto cfg = io::parse_config_text(text);
        auto p = eval::load_policy(policy, deterministic);
        eval::EvalOptions opt;
        opt.n_trials = n_trials;
        opt.seed = seed;
        opt.reward = cfg.reward_for(cfg.scenario);
        eval::EvalResult res;
        {
          py::gil_scoped_release release;
          res = eval::run_trials(*p, cfg.scenario, opt);
        }
        return metrics_dict(res.metrics);
      },
      py::arg("config_json"), py::arg("policy"), py::arg("n_trials") = 10, py::arg("seed") = 0,
      py::arg("deterministic") = true);

  m.def(
      "train",
      [](const std::string& text, const std::string& out_dir) {
        const auto cfg = io::parse_config_text(text);
        std::vector<train::IterationStats> stats;
        {
          py::gil_scoped_release release;
          stats = train::train(cfg, out_dir);
        }
        py::list out;
        for (const auto& s : stats) {
          py::dict d;
          d["iteration"] = s.iteration;
          d["stage"] = s.stage;
          d["mean_reward"] = s.mean_reward;
          d["episodes"] = s.episodes;
          d["SR"] = s.train_sr;
          d["L_P"] = s.policy_loss;
          d["L_V"] = s.value_loss;
          d["L_E"] = s.entropy;
          out.append(d);
        }
        return out;
      },
      py::arg("config_json"), py::arg("out_dir") = "");
}
