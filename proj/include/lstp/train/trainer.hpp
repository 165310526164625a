#pragma once

#include <deque>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "lstp/reward/rewards.hpp"
#include "lstp/run_config.hpp"
#include "lstp/sim/observation.hpp"
#include "lstp/sim/world.hpp"
#include "lstp/tensor/adam.hpp"
#include "lstp/tensor/checkpoint.hpp"
#include "lstp/train/ppo.hpp"

namespace lstp::train {

/// Return and outcome of one finished training episode (spawn to arrival or timeout).
struct EpisodeRecord {
  double total_reward = 0.0;
  bool arrived = false;
  std::size_t decisions = 0;
};

/// Result of one policy decision for one agent.
struct AgentStep {
  double reward = 0.0;
  bool done = false;
  bool collided = false;
  bool arrived = false;
  bool timed_out = false;
};

/// Training-mode world plus per-agent frame stacks and reward bookkeeping.
///
/// A decision applies one command for action_repeat physics steps, stopping
/// early at the first event. Collisions trigger local replay; an arrival
/// regenerates a single-agent world or gives the agent a new goal in a
/// multi-agent one; the step limit regenerates the world.
class TrainingEnv {
 public:
  TrainingEnv(const sim::ScenarioConfig& scenario, const reward::RewardConfig& rc, std::size_t stack,
              std::uint64_t seed);

  std::size_t agent_count() const { return world_.agents().size(); }
  const sim::World& world() const noexcept { return world_; }

  void observe(std::vector<sim::Observation>& out) const;
  /// One command per agent (all agents stay active in training mode).
  std::vector<AgentStep> step(std::span<const sim::Command> commands);
  /// Start of an iteration: clears per-iteration collision counters.
  void begin_iteration() { world_.reset_collision_counts(); }
  /// Finished episodes since the last call.
  std::vector<EpisodeRecord> take_finished();
  /// Returns of episodes still in progress.
  std::vector<double> partial_returns() const { return returns_; }

 private:
  void regenerate();
  void finish(std::size_t agent, bool arrived);

  sim::ScenarioConfig scenario_;
  reward::RewardConfig reward_;
  std::size_t stack_;
  std::uint64_t seed_;
  std::uint64_t generation_ = 0;
  sim::World world_;
  std::vector<sim::FrameStack> frames_;
  std::vector<double> returns_;
  std::vector<std::size_t> lengths_;
  std::vector<EpisodeRecord> finished_;
};

/// Runs the frozen policy in every environment for `horizon` decisions.
/// Buffer streams are the environments' agents in order.
RolloutBuffer collect_rollouts(std::vector<TrainingEnv>& envs, const NetConfig& cfg,
                               const ParamStore<float>& params, std::size_t horizon, std::mt19937_64& rng,
                               std::size_t workers);

struct IterationStats {
  std::size_t iteration = 0;  // 1-based
  std::size_t stage = 0;
  double mean_reward = 0.0;  // mean return of episodes finished in this iteration
  std::size_t episodes = 0;
  double train_sr = 0.0;  // fraction of those episodes that ended at the goal
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double eval_sr = -1.0;     // -1 when no evaluation ran
  double rolling_sr = -1.0;  // over the last sr_window evaluation episodes
  double seconds = 0.0;
};

/// Scenario of curriculum stage `i` (the base scenario when there is no curriculum).
sim::ScenarioConfig stage_scenario(const RunConfig& cfg, std::size_t stage);

/// Algorithm 1 driver: collect, GAE, update; curriculum on rolling eval SR.
class Trainer {
 public:
  explicit Trainer(RunConfig cfg);

  IterationStats iterate();

  std::size_t iteration() const noexcept { return iteration_; }
  std::size_t stage() const noexcept { return stage_; }
  std::size_t stage_count() const;
  const RunConfig& config() const noexcept { return cfg_; }
  const ParamStore<float>& params() const noexcept { return params_; }
  const tensor::Adam<float>& optimizer() const noexcept { return adam_; }
  /// Parameters under "param/", optimizer state, and run metadata.
  tensor::Checkpoint checkpoint() const;

 private:
  void build_envs();

  RunConfig cfg_;
  ParamStore<float> params_;
  tensor::Adam<float> adam_;
  std::mt19937_64 rng_;
  std::vector<TrainingEnv> envs_;
  std::size_t iteration_ = 0;
  std::size_t stage_ = 0;
  std::deque<bool> window_;
};

/// Training-curve line: iteration, stage, mean_reward, L_P, L_V, L_E, SR and extras.
std::string curve_line(const IterationStats& s);

/// Runs cfg.train.iterations iterations. With a non-empty out_dir, writes
/// checkpoints/ckpt_<iter>.lstp (iteration 0 and every checkpoint_every),
/// final.lstp and curves.jsonl.
std::vector<IterationStats> train(const RunConfig& cfg, const std::filesystem::path& out_dir,
                                  const std::function<void(const IterationStats&)>& on_iteration = {});

}  // namespace lstp::train
