#include "lstp/train/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "lstp/common.hpp"
#include "lstp/error.hpp"
#include "lstp/eval/harness.hpp"
#include "lstp/io/config.hpp"

namespace lstp::train {

TrainingEnv::TrainingEnv(const sim::ScenarioConfig& scenario, const reward::RewardConfig& rc, std::size_t stack,
                         std::uint64_t seed)
    : scenario_(scenario),
      reward_(rc),
      stack_(stack),
      seed_(seed),
      world_(sim::World::generate(scenario, sim::SimMode::kTraining, derive_seed(seed, 1, 0))) {
  generation_ = 1;
  frames_.assign(world_.agents().size(), sim::FrameStack(stack_));
  for (std::size_t a = 0; a < frames_.size(); ++a) frames_[a].reset(world_.lidar_scan(a));
  returns_.assign(frames_.size(), 0.0);
  lengths_.assign(frames_.size(), 0);
}

void TrainingEnv::regenerate() {
  world_ = sim::World::generate(scenario_, sim::SimMode::kTraining, derive_seed(seed_, 1, generation_++));
  frames_.assign(world_.agents().size(), sim::FrameStack(stack_));
  for (std::size_t a = 0; a < frames_.size(); ++a) frames_[a].reset(world_.lidar_scan(a));
  returns_.assign(frames_.size(), 0.0);
  lengths_.assign(frames_.size(), 0);
}

void TrainingEnv::finish(std::size_t agent, bool arrived) {
  finished_.push_back({returns_[agent], arrived, lengths_[agent]});
  returns_[agent] = 0.0;
  lengths_[agent] = 0;
}

void TrainingEnv::observe(std::vector<sim::Observation>& out) const {
  for (std::size_t a = 0; a < frames_.size(); ++a) out.push_back(sim::observe(world_, a, frames_[a]));
}

std::vector<AgentStep> TrainingEnv::step(std::span<const sim::Command> commands) {
  const std::size_t n = agent_count();
  if (commands.size() != n) {
    throw ContractError("TrainingEnv::step: got " + std::to_string(commands.size()) + " commands for " +
                        std::to_string(n) + " agents");
  }
  std::vector<sim::Vec2> prev(n);
  for (std::size_t a = 0; a < n; ++a) prev[a] = world_.agent(a).pos;
  std::vector<AgentStep> out(n);
  for (std::size_t r = 0; r < scenario_.action_repeat; ++r) {
    const auto events = world_.step(commands);
    bool any = false;
    for (std::size_t a = 0; a < n; ++a) {
      out[a].collided = out[a].collided || events[a].collided;
      out[a].arrived = out[a].arrived || events[a].arrived;
      out[a].timed_out = out[a].timed_out || events[a].timed_out;
      any = any || events[a].collided || events[a].arrived || events[a].timed_out;
    }
    if (any) break;
  }

  bool timeout = false;
  std::vector<std::vector<double>> scans(n);
  for (std::size_t a = 0; a < n; ++a) {
    const auto& ag = world_.agent(a);
    scans[a] = world_.lidar_scan(a);
    const double goal_r = out[a].collided ? reward_.w_g * (norm(prev[a] - ag.goal) - norm(ag.pos - ag.goal))
                                          : reward::goal_reward(prev[a], ag.pos, ag.goal, reward_);
    const double obstacle_r =
        reward::obstacle_reward_for_mode(scans[a], ag.w_cmd, out[a].collided, reward_, world_.beams());
    out[a].reward = reward::total_reward(goal_r, obstacle_r);
    out[a].done = out[a].collided || out[a].arrived || out[a].timed_out;
    returns_[a] += out[a].reward;
    ++lengths_[a];
    timeout = timeout || out[a].timed_out;
  }

  if (timeout) {
    for (std::size_t a = 0; a < n; ++a) {
      out[a].done = true;
      finish(a, out[a].arrived);
    }
    regenerate();
    return out;
  }

  bool regen = false;
  for (std::size_t a = 0; a < n; ++a) {
    if (out[a].collided) {
      world_.apply_replay(a);
      frames_[a].reset(world_.lidar_scan(a));
    } else if (out[a].arrived) {
      finish(a, true);
      if (n == 1) {
        regen = true;
      } else {
        world_.clear_events(a);
        try {
          world_.assign_new_goal(a);
        } catch (const InfeasibleScenarioError&) {
          regen = true;
        }
        frames_[a].push(scans[a]);
      }
    } else {
      frames_[a].push(scans[a]);
    }
  }
  if (regen) {
    for (std::size_t a = 0; a < n; ++a) {
      if (lengths_[a] > 0) finish(a, false);
    }
    regenerate();
  }
  return out;
}

std::vector<EpisodeRecord> TrainingEnv::take_finished() {
  std::vector<EpisodeRecord> out;
  out.swap(finished_);
  return out;
}

RolloutBuffer collect_rollouts(std::vector<TrainingEnv>& envs, const NetConfig& cfg, const ParamStore<float>& params,
                               std::size_t horizon, std::mt19937_64& rng, std::size_t workers) {
  std::size_t streams = 0;
  std::vector<std::size_t> offset;
  for (const auto& e : envs) {
    offset.push_back(streams);
    streams += e.agent_count();
  }
  const std::size_t L = cfg.stack * cfg.n_laser;
  RolloutBuffer buf;
  buf.reset(streams, L);
  buf.lidar.reserve(horizon * streams * L);

  std::vector<sim::Observation> obs;
  auto policy_outputs = [&](std::size_t t) {
    obs.clear();
    for (const auto& e : envs) e.observe(obs);
    std::vector<float> lidar(streams * L), state(streams * net::kStateDim);
    for (std::size_t s = 0; s < streams; ++s) {
      if (obs[s].lidar.size() != L) throw DimensionError("collect_rollouts: observation size does not match the network");
      for (std::size_t k = 0; k < L; ++k) lidar[s * L + k] = static_cast<float>(obs[s].lidar[k]);
      for (std::size_t k = 0; k < net::kStateDim; ++k) state[s * 4 + k] = static_cast<float>(obs[s].state[k]);
    }
    net::ObsBatch<float> batch{Array<float>({streams, cfg.stack, cfg.n_laser}, lidar),
                               Array<float>({streams, net::kStateDim}, state)};
    try {
      return std::make_pair(net::evaluate(cfg, params, batch), std::move(batch));
    } catch (const NumericError& e) {
      throw NumericError("collect_rollouts step " + std::to_string(t) + ": " + e.what());
    }
  };

  std::vector<std::vector<sim::Command>> commands(envs.size());
  std::vector<std::vector<AgentStep>> results(envs.size());
  for (std::size_t t = 0; t < horizon; ++t) {
    auto [outs, batch] = policy_outputs(t);
    buf.lidar.insert(buf.lidar.end(), batch.lidar.data().begin(), batch.lidar.data().end());
    buf.state.insert(buf.state.end(), batch.state.data().begin(), batch.state.data().end());
    for (std::size_t e = 0; e < envs.size(); ++e) commands[e].assign(envs[e].agent_count(), {});
    for (std::size_t e = 0; e < envs.size(); ++e) {
      for (std::size_t a = 0; a < envs[e].agent_count(); ++a) {
        const std::size_t s = offset[e] + a;
        const auto sa = net::sample_action(outs[s], rng, false);
        if (!std::isfinite(sa.raw[0]) || !std::isfinite(sa.raw[1])) {
          throw NumericError("collect_rollouts step " + std::to_string(t) + ": non-finite action");
        }
        buf.raw_actions.push_back(sa.raw[0]);
        buf.raw_actions.push_back(sa.raw[1]);
        buf.log_probs.push_back(sa.log_prob);
        buf.values.push_back(outs[s].value);
        commands[e][a] = {sa.action[0], sa.action[1]};
      }
    }
    parallel_for(envs.size(), workers, [&](std::size_t e) { results[e] = envs[e].step(commands[e]); });
    for (std::size_t e = 0; e < envs.size(); ++e) {
      for (const auto& r : results[e]) {
        buf.rewards.push_back(r.reward);
        buf.dones.push_back(r.done ? 1.0 : 0.0);
      }
    }
    ++buf.steps;
  }
  auto [last, unused] = policy_outputs(horizon);
  for (const auto& o : last) buf.bootstrap.push_back(o.value);
  buf.check();
  return buf;
}

sim::ScenarioConfig stage_scenario(const RunConfig& cfg, std::size_t stage) {
  sim::ScenarioConfig sc = cfg.scenario;
  if (cfg.train.curriculum.empty()) return sc;
  const Stage& s = cfg.train.curriculum.at(stage);
  sc.n_obstacles = s.n_obstacles;
  sc.n_agents = s.n_agents;
  sc.arena = {s.width, s.height};
  sc.obstacles.clear();
  sc.agents.clear();
  return sc;
}

Trainer::Trainer(RunConfig cfg)
    : cfg_(std::move(cfg)),
      adam_(cfg_.train.adam),
      rng_(derive_seed(cfg_.train.seed, 2)) {
  cfg_.validate();
  params_ = net::init_params<float>(cfg_.net, derive_seed(cfg_.train.seed, 3));
  build_envs();
}

std::size_t Trainer::stage_count() const { return std::max<std::size_t>(1, cfg_.train.curriculum.size()); }

void Trainer::build_envs() {
  envs_.clear();
  const auto sc = stage_scenario(cfg_, stage_);
  const auto rc = cfg_.reward_for(sc);
  for (std::size_t i = 0; i < cfg_.train.envs; ++i) {
    envs_.emplace_back(sc, rc, cfg_.net.stack, derive_seed(cfg_.train.seed, 4, stage_ * 1'000'003 + i));
  }
}

IterationStats Trainer::iterate() {
  const auto t0 = std::chrono::steady_clock::now();
  ++iteration_;
  IterationStats s;
  s.iteration = iteration_;
  s.stage = stage_;
  for (auto& e : envs_) e.begin_iteration();

  auto buffer = collect_rollouts(envs_, cfg_.net, params_, cfg_.train.horizon, rng_, cfg_.train.workers);
  compute_gae(buffer, cfg_.train.gamma, cfg_.train.lambda);
  const auto u = update<float>(buffer, cfg_.net, params_, adam_, cfg_.train, rng_);
  s.policy_loss = u.policy_loss;
  s.value_loss = u.value_loss;
  s.entropy = u.entropy;

  std::vector<EpisodeRecord> finished;
  for (auto& e : envs_) {
    auto f = e.take_finished();
    finished.insert(finished.end(), f.begin(), f.end());
  }
  s.episodes = finished.size();
  if (!finished.empty()) {
    double total = 0.0;
    std::size_t arrived = 0;
    for (const auto& f : finished) {
      total += f.total_reward;
      arrived += f.arrived ? 1 : 0;
    }
    s.mean_reward = total / static_cast<double>(finished.size());
    s.train_sr = static_cast<double>(arrived) / static_cast<double>(finished.size());
  } else {
    std::vector<double> partial;
    for (const auto& e : envs_) {
      const auto p = e.partial_returns();
      partial.insert(partial.end(), p.begin(), p.end());
    }
    s.mean_reward = std::accumulate(partial.begin(), partial.end(), 0.0) / static_cast<double>(partial.size());
  }

  const auto& tc = cfg_.train;
  if (tc.eval_every > 0 && tc.eval_episodes > 0 && iteration_ % tc.eval_every == 0) {
    eval::NetPolicy policy(cfg_.net, params_, true, "training");
    eval::EvalOptions opt;
    opt.n_trials = tc.eval_episodes;
    opt.seed = derive_seed(tc.seed, 5, iteration_);
    opt.workers = tc.workers;
    opt.reward = cfg_.reward;
    const auto res = eval::run_trials(policy, stage_scenario(cfg_, stage_), opt);
    s.eval_sr = res.metrics.sr;
    for (const auto& t : res.trials) {
      for (auto o : t.outcomes) window_.push_back(o == eval::Outcome::kSuccess);
    }
    while (window_.size() > tc.sr_window) window_.pop_front();
    s.rolling_sr = static_cast<double>(std::count(window_.begin(), window_.end(), true)) /
                   static_cast<double>(window_.size());
    const double threshold = tc.curriculum.empty() ? 1.0 : tc.curriculum[stage_].threshold;
    if (window_.size() >= tc.sr_window && s.rolling_sr >= threshold && stage_ + 1 < stage_count()) {
      ++stage_;
      window_.clear();
      build_envs();
    }
  }
  s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return s;
}

tensor::Checkpoint Trainer::checkpoint() const {
  tensor::Checkpoint c;
  c.meta["format"] = "lstp-nav-policy";
  c.meta["net"] = io::to_json(cfg_.net).dump();
  c.meta["variant"] = std::string(net::variant_name(cfg_.net.variant));
  c.meta["reward_mode"] = std::string(reward::mode_name(cfg_.reward.mode));
  c.meta["iteration"] = std::to_string(iteration_);
  c.meta["stage"] = std::to_string(stage_);
  c.meta["seed"] = std::to_string(cfg_.train.seed);
  tensor::append_params(c, params_, "param/");
  tensor::append_adam(c, adam_, params_);
  return c;
}

std::string curve_line(const IterationStats& s) {
  io::Json j;
  j["iteration"] = s.iteration;
  j["stage"] = s.stage;
  j["mean_reward"] = s.mean_reward;
  j["L_P"] = s.policy_loss;
  j["L_V"] = s.value_loss;
  j["L_E"] = s.entropy;
  j["SR"] = s.train_sr;
  j["episodes"] = s.episodes;
  j["eval_SR"] = s.eval_sr >= 0 ? io::Json(s.eval_sr) : io::Json(nullptr);
  j["rolling_SR"] = s.rolling_sr >= 0 ? io::Json(s.rolling_sr) : io::Json(nullptr);
  return j.dump();
}

namespace {

std::string checkpoint_name(std::size_t iteration) {
  std::ostringstream os;
  os << "ckpt_" << std::setw(4) << std::setfill('0') << iteration << ".lstp";
  return os.str();
}

}  // namespace

std::vector<IterationStats> train(const RunConfig& cfg, const std::filesystem::path& out_dir,
                                  const std::function<void(const IterationStats&)>& on_iteration) {
  Trainer trainer(cfg);
  const bool write = !out_dir.empty();
  std::ofstream curves;
  if (write) {
    std::filesystem::create_directories(out_dir / "checkpoints");
    tensor::write_checkpoint(out_dir / "checkpoints" / checkpoint_name(0), trainer.checkpoint());
    curves.open(out_dir / "curves.jsonl");
    if (!curves) throw Error("cannot write " + (out_dir / "curves.jsonl").string());
  }
  std::vector<IterationStats> all;
  for (std::size_t i = 0; i < cfg.train.iterations; ++i) {
    auto s = trainer.iterate();
    if (write) {
      curves << curve_line(s) << '\n' << std::flush;
      if (cfg.train.checkpoint_every > 0 && s.iteration % cfg.train.checkpoint_every == 0) {
        tensor::write_checkpoint(out_dir / "checkpoints" / checkpoint_name(s.iteration), trainer.checkpoint());
      }
    }
    if (on_iteration) on_iteration(s);
    all.push_back(s);
  }
  if (write) tensor::write_checkpoint(out_dir / "final.lstp", trainer.checkpoint());
  return all;
}

}  // namespace lstp::train
