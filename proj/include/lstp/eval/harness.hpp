#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lstp/net/lstp_net.hpp"
#include "lstp/reward/rewards.hpp"
#include "lstp/sim/observation.hpp"
#include "lstp/sim/world.hpp"

namespace lstp::eval {

enum class Outcome { kSuccess, kCollision, kTrap };

std::string_view outcome_name(Outcome o);

/// SR/CR/TR over agent-trials; AS (mean steps of successes) only when there is one.
struct Metrics {
  std::size_t n_trials = 0;
  std::size_t n_agent_trials = 0;
  std::size_t successes = 0;
  std::size_t collisions = 0;
  std::size_t traps = 0;
  double sr = 0.0;
  double cr = 0.0;
  double tr = 0.0;
  std::optional<double> as;

  friend bool operator==(const Metrics&, const Metrics&) = default;
};

struct TrialRecord {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  std::uint64_t world_hash = 0;
  std::vector<Outcome> outcomes;   // per agent
  std::vector<std::size_t> steps;  // physics step at which each agent finished

  friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

Metrics aggregate(std::span<const TrialRecord> trials);

/// One line of a trajectory log.
struct TrajectoryRecord {
  std::size_t trial = 0;
  std::size_t step = 0;
  std::size_t agent = 0;
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
  double v = 0.0;
  double w = 0.0;
  double reward = 0.0;
  std::string event;  // start, move, arrival, collision, timeout, replay, respawn

  friend bool operator==(const TrajectoryRecord&, const TrajectoryRecord&) = default;
};

/// Maps a batch of observations to [v, omega] commands.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string name() const = 0;
  /// Frames per observation the policy expects.
  virtual std::size_t stack() const { return 1; }
  /// rngs[i] belongs to the trial that produced obs[i]; used by stochastic policies only.
  virtual std::vector<std::array<double, 2>> act(std::span<const sim::Observation> obs,
                                                 std::span<std::mt19937_64* const> rngs) = 0;
};

/// Always commands v = 0, omega = 0.
class StationaryPolicy : public Policy {
 public:
  std::string name() const override { return "builtin:stationary"; }
  std::vector<std::array<double, 2>> act(std::span<const sim::Observation> obs,
                                         std::span<std::mt19937_64* const> rngs) override;
};

/// Turns toward the goal and drives at v = max(0, cos psi); ignores obstacles.
class GoalSeekerPolicy : public Policy {
 public:
  std::string name() const override { return "builtin:goal-seeker"; }
  std::vector<std::array<double, 2>> act(std::span<const sim::Observation> obs,
                                         std::span<std::mt19937_64* const> rngs) override;
};

/// LSTP-Net policy in 32-bit precision; deterministic mode uses the clamped mean.
class NetPolicy : public Policy {
 public:
  NetPolicy(net::NetConfig cfg, tensor::ParamStore<float> params, bool deterministic, std::string name);

  std::string name() const override { return name_; }
  std::size_t stack() const override { return cfg_.stack; }
  std::vector<std::array<double, 2>> act(std::span<const sim::Observation> obs,
                                         std::span<std::mt19937_64* const> rngs) override;

  const net::NetConfig& config() const noexcept { return cfg_; }
  const tensor::ParamStore<float>& params() const noexcept { return params_; }

 private:
  net::NetConfig cfg_;
  tensor::ParamStore<float> params_;
  bool deterministic_;
  std::string name_;
};

/// Loads "builtin:stationary", "builtin:goal-seeker" or a checkpoint path.
/// Throws LoadError if the checkpoint is unreadable.
std::unique_ptr<Policy> load_policy(const std::string& spec, bool deterministic);

struct EvalOptions {
  std::size_t n_trials = 100;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::size_t record_trials = 0;  // trajectories are kept for the first k trials
  reward::RewardConfig reward;    // used only for the logged per-step reward
};

struct EvalResult {
  Metrics metrics;
  std::vector<TrialRecord> trials;
  std::vector<TrajectoryRecord> trajectory;
};

/// World seed of trial i; depends only on (seed, i), never on the policy.
std::uint64_t trial_seed(std::uint64_t seed, std::size_t i);

/// Runs n independent eval-mode trials (no replay, collisions terminal).
/// Throws LoadError if the policy does not fit the scenario's LiDAR.
EvalResult run_trials(Policy& policy, const sim::ScenarioConfig& scenario, const EvalOptions& opt);

struct ComparisonRow {
  std::string name;
  Metrics metrics;
  std::vector<std::uint64_t> world_hashes;
};

/// Paired evaluation: every policy sees the same trial worlds.
std::vector<ComparisonRow> compare_policies(std::span<Policy* const> policies, const sim::ScenarioConfig& scenario,
                                            const EvalOptions& opt);

/// True when all rows saw identical world hashes.
bool hashes_paired(std::span<const ComparisonRow> rows);

/// One JSON object per row (line-delimited) and an aligned text table.
std::string metrics_jsonl(std::span<const ComparisonRow> rows);
std::string metrics_table(std::span<const ComparisonRow> rows);

}  // namespace lstp::eval
