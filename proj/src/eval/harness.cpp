#include "lstp/eval/harness.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "lstp/common.hpp"
#include "lstp/error.hpp"
#include "lstp/io/config.hpp"
#include "lstp/tensor/checkpoint.hpp"

namespace lstp::eval {

std::string_view outcome_name(Outcome o) {
  switch (o) {
    case Outcome::kSuccess: return "success";
    case Outcome::kCollision: return "collision";
    case Outcome::kTrap: return "trap";
  }
  return "trap";
}

Metrics aggregate(std::span<const TrialRecord> trials) {
  Metrics m;
  m.n_trials = trials.size();
  double success_steps = 0.0;
  for (const auto& t : trials) {
    for (std::size_t a = 0; a < t.outcomes.size(); ++a) {
      ++m.n_agent_trials;
      switch (t.outcomes[a]) {
        case Outcome::kSuccess:
          ++m.successes;
          success_steps += static_cast<double>(t.steps.at(a));
          break;
        case Outcome::kCollision: ++m.collisions; break;
        case Outcome::kTrap: ++m.traps; break;
      }
    }
  }
  if (m.n_agent_trials > 0) {
    const double n = static_cast<double>(m.n_agent_trials);
    m.sr = static_cast<double>(m.successes) / n;
    m.cr = static_cast<double>(m.collisions) / n;
    m.tr = static_cast<double>(m.traps) / n;
  }
  if (m.successes > 0) m.as = success_steps / static_cast<double>(m.successes);
  return m;
}

std::vector<std::array<double, 2>> StationaryPolicy::act(std::span<const sim::Observation> obs,
                                                         std::span<std::mt19937_64* const>) {
  return std::vector<std::array<double, 2>>(obs.size(), {0.0, 0.0});
}

std::vector<std::array<double, 2>> GoalSeekerPolicy::act(std::span<const sim::Observation> obs,
                                                         std::span<std::mt19937_64* const>) {
  std::vector<std::array<double, 2>> out;
  out.reserve(obs.size());
  for (const auto& o : obs) {
    const double psi = o.state[1] * std::numbers::pi;
    out.push_back(net::clamp_action({std::max(0.0, std::cos(psi)), 3.0 * psi}));
  }
  return out;
}

NetPolicy::NetPolicy(net::NetConfig cfg, tensor::ParamStore<float> params, bool deterministic, std::string name)
    : cfg_(std::move(cfg)), params_(std::move(params)), deterministic_(deterministic), name_(std::move(name)) {
  net::check_params(cfg_, params_);
}

std::vector<std::array<double, 2>> NetPolicy::act(std::span<const sim::Observation> obs,
                                                  std::span<std::mt19937_64* const> rngs) {
  if (obs.empty()) return {};
  if (rngs.size() != obs.size()) throw ContractError("NetPolicy::act: one rng per observation required");
  const std::size_t B = obs.size(), L = cfg_.stack * cfg_.n_laser;
  std::vector<float> lidar(B * L), state(B * net::kStateDim);
  for (std::size_t b = 0; b < B; ++b) {
    if (obs[b].lidar.size() != L) {
      throw DimensionError("NetPolicy::act: observation has " + std::to_string(obs[b].lidar.size()) +
                           " lidar values, network expects " + std::to_string(L));
    }
    std::transform(obs[b].lidar.begin(), obs[b].lidar.end(), lidar.begin() + static_cast<std::ptrdiff_t>(b * L),
                   [](double x) { return static_cast<float>(x); });
    for (std::size_t k = 0; k < net::kStateDim; ++k) state[b * net::kStateDim + k] = static_cast<float>(obs[b].state[k]);
  }
  net::ObsBatch<float> batch{tensor::Array<float>({B, cfg_.stack, cfg_.n_laser}, std::move(lidar)),
                             tensor::Array<float>({B, net::kStateDim}, std::move(state))};
  const auto outs = net::evaluate(cfg_, params_, batch);
  std::vector<std::array<double, 2>> actions(B);
  for (std::size_t b = 0; b < B; ++b) actions[b] = net::sample_action(outs[b], *rngs[b], deterministic_).action;
  return actions;
}

std::unique_ptr<Policy> load_policy(const std::string& spec, bool deterministic) {
  if (spec == "builtin:stationary") return std::make_unique<StationaryPolicy>();
  if (spec == "builtin:goal-seeker") return std::make_unique<GoalSeekerPolicy>();
  if (spec.starts_with("builtin:")) throw LoadError("unknown builtin policy '" + spec + "'");
  const auto ckpt = tensor::read_checkpoint(spec);
  auto it = ckpt.meta.find("net");
  if (it == ckpt.meta.end()) throw LoadError("checkpoint " + spec + " has no network config");
  net::NetConfig cfg;
  try {
    cfg = io::net_config_from_json(io::Json::parse(it->second));
  } catch (const std::exception& e) {
    throw LoadError("checkpoint " + spec + " has a bad network config: " + e.what());
  }
  tensor::ParamStore<float> params;
  for (const auto& [name, shape] : net::param_shapes(cfg)) params.add(name, tensor::Array<float>(shape));
  tensor::load_params(ckpt, params, "param/");
  return std::make_unique<NetPolicy>(cfg, std::move(params), deterministic, spec);
}

std::uint64_t trial_seed(std::uint64_t seed, std::size_t i) { return derive_seed(seed, 0x7472'6961'6cull, i); }

namespace {

struct Trial {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  sim::World world;
  std::vector<sim::FrameStack> frames;
  std::mt19937_64 rng;
  bool done = false;
  bool record = false;
};

const char* finish_event(const sim::AgentState& a) {
  if (a.collided) return "collision";
  if (a.arrived) return "arrival";
  if (a.timed_out) return "timeout";
  return "move";
}

}  // namespace

EvalResult run_trials(Policy& policy, const sim::ScenarioConfig& scenario, const EvalOptions& opt) {
  scenario.validate();
  if (const auto* np = dynamic_cast<const NetPolicy*>(&policy); np && np->config().n_laser != scenario.lidar.n_laser) {
    throw LoadError("policy '" + policy.name() + "' expects " + std::to_string(np->config().n_laser) +
                    " beams but the scenario has " + std::to_string(scenario.lidar.n_laser));
  }
  reward::RewardConfig rc = opt.reward;
  rc.dt = scenario.decision_dt();
  rc.z_max = scenario.lidar.z_max;
  rc.goal_tolerance = scenario.goal_tolerance;

  EvalResult result;
  constexpr std::size_t kChunk = 64;
  std::vector<std::vector<TrajectoryRecord>> logs;

  for (std::size_t first = 0; first < opt.n_trials; first += kChunk) {
    const std::size_t count = std::min(kChunk, opt.n_trials - first);
    std::vector<std::optional<Trial>> slots(count);
    parallel_for(count, opt.workers, [&](std::size_t k) {
      const std::size_t i = first + k;
      const std::uint64_t s = trial_seed(opt.seed, i);
      Trial t{i, s, sim::World::generate(scenario, sim::SimMode::kEval, s), {}, std::mt19937_64(derive_seed(s, 7)),
              false, i < opt.record_trials};
      for (std::size_t a = 0; a < t.world.agents().size(); ++a) {
        t.frames.emplace_back(policy.stack());
        t.frames.back().reset(t.world.lidar_scan(a));
      }
      slots[k] = std::move(t);
    });
    std::vector<Trial> trials;
    for (auto& s : slots) trials.push_back(std::move(*s));
    logs.assign(count, {});

    auto log_state = [&](Trial& t, std::size_t k, std::size_t a, double reward, const char* event) {
      const auto& ag = t.world.agent(a);
      logs[k].push_back({t.index, t.world.step_count(), a, ag.pos.x, ag.pos.y, ag.heading, ag.v_cmd, ag.w_cmd, reward,
                         event});
    };
    for (std::size_t k = 0; k < count; ++k) {
      if (!trials[k].record) continue;
      for (std::size_t a = 0; a < trials[k].world.agents().size(); ++a) log_state(trials[k], k, a, 0.0, "start");
    }

    while (true) {
      std::vector<sim::Observation> obs;
      std::vector<std::mt19937_64*> rngs;
      std::vector<std::pair<std::size_t, std::size_t>> owner;
      for (std::size_t k = 0; k < count; ++k) {
        auto& t = trials[k];
        if (t.done) continue;
        for (std::size_t a = 0; a < t.world.agents().size(); ++a) {
          if (!t.world.agent(a).active) continue;
          obs.push_back(sim::observe(t.world, a, t.frames[a]));
          rngs.push_back(&t.rng);
          owner.emplace_back(k, a);
        }
      }
      if (obs.empty()) break;
      const auto actions = policy.act(obs, rngs);
      if (actions.size() != obs.size()) throw ContractError("policy returned the wrong number of actions");

      std::vector<std::vector<std::array<double, 2>>> per_trial(count);
      for (std::size_t k = 0; k < count; ++k) per_trial[k].assign(trials[k].world.agents().size(), {0.0, 0.0});
      for (std::size_t n = 0; n < actions.size(); ++n) {
        const auto a = actions[n];
        if (!std::isfinite(a[0]) || !std::isfinite(a[1])) throw NumericError("policy produced a non-finite action");
        per_trial[owner[n].first][owner[n].second] = net::clamp_action(a);
      }

      parallel_for(count, opt.workers, [&](std::size_t k) {
        auto& t = trials[k];
        if (t.done) return;
        auto& w = t.world;
        const std::size_t n_agents = w.agents().size();
        std::vector<char> was_active(n_agents);
        std::vector<sim::Vec2> prev(n_agents);
        for (std::size_t a = 0; a < n_agents; ++a) {
          was_active[a] = w.agent(a).active;
          prev[a] = w.agent(a).pos;
        }
        std::vector<sim::Command> cmds;
        for (std::size_t r = 0; r < w.config().action_repeat; ++r) {
          cmds.clear();
          for (std::size_t a = 0; a < n_agents; ++a) {
            if (w.agent(a).active) cmds.push_back({per_trial[k][a][0], per_trial[k][a][1]});
          }
          if (cmds.empty()) break;
          w.step(cmds);
        }
        for (std::size_t a = 0; a < n_agents; ++a) {
          if (!was_active[a]) continue;
          const auto& ag = w.agent(a);
          if (ag.active) t.frames[a].push(w.lidar_scan(a));
          if (t.record) {
            const auto clean = w.lidar_scan_clean(a);
            const double r = reward::total_reward(
                reward::goal_reward(prev[a], ag.pos, ag.goal, rc),
                reward::obstacle_reward_for_mode(clean, ag.w_cmd, ag.collided, rc, w.beams()));
            log_state(t, k, a, r, finish_event(ag));
          }
        }
        t.done = w.check_termination().done;
      });
    }

    for (std::size_t k = 0; k < count; ++k) {
      const auto& t = trials[k];
      TrialRecord rec{t.index, t.seed, t.world.layout_hash(), {}, {}};
      for (const auto& a : t.world.agents()) {
        rec.outcomes.push_back(a.arrived ? Outcome::kSuccess : a.collided ? Outcome::kCollision : Outcome::kTrap);
        rec.steps.push_back(a.finish_step);
      }
      result.trials.push_back(std::move(rec));
      for (auto& r : logs[k]) result.trajectory.push_back(std::move(r));
    }
  }
  result.metrics = aggregate(result.trials);
  return result;
}

std::vector<ComparisonRow> compare_policies(std::span<Policy* const> policies, const sim::ScenarioConfig& scenario,
                                            const EvalOptions& opt) {
  std::vector<ComparisonRow> rows;
  for (Policy* p : policies) {
    EvalOptions o = opt;
    o.record_trials = 0;
    const auto res = run_trials(*p, scenario, o);
    ComparisonRow row{p->name(), res.metrics, {}};
    for (const auto& t : res.trials) row.world_hashes.push_back(t.world_hash);
    rows.push_back(std::move(row));
  }
  return rows;
}

bool hashes_paired(std::span<const ComparisonRow> rows) {
  for (const auto& r : rows) {
    if (r.world_hashes != rows.front().world_hashes) return false;
  }
  return true;
}

std::string metrics_jsonl(std::span<const ComparisonRow> rows) {
  std::string out;
  for (const auto& r : rows) {
    io::Json j;
    j["policy"] = r.name;
    j["n_trials"] = r.metrics.n_trials;
    j["n_agent_trials"] = r.metrics.n_agent_trials;
    j["SR"] = r.metrics.sr;
    j["CR"] = r.metrics.cr;
    j["TR"] = r.metrics.tr;
    j["AS"] = r.metrics.as ? io::Json(*r.metrics.as) : io::Json(nullptr);
    j["successes"] = r.metrics.successes;
    j["collisions"] = r.metrics.collisions;
    j["traps"] = r.metrics.traps;
    out += j.dump() + "\n";
  }
  return out;
}

std::string metrics_table(std::span<const ComparisonRow> rows) {
  std::size_t width = 6;
  for (const auto& r : rows) width = std::max(width, r.name.size());
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(width)) << "policy" << std::right << std::setw(9) << "trials"
     << std::setw(9) << "SR(%)" << std::setw(9) << "CR(%)" << std::setw(9) << "TR(%)" << std::setw(10) << "AS"
     << '\n';
  os << std::fixed;
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    os << std::left << std::setw(static_cast<int>(width)) << r.name << std::right << std::setw(9) << m.n_agent_trials
       << std::setprecision(2) << std::setw(9) << 100 * m.sr << std::setw(9) << 100 * m.cr << std::setw(9)
       << 100 * m.tr << std::setw(10);
    if (m.as) {
      os << std::setprecision(1) << *m.as;
    } else {
      os << "-";
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace lstp::eval
