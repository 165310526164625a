#pragma once

#include <cstdint>
#include <deque>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "lstp/sim/geometry.hpp"

namespace lstp::sim {

struct LidarConfig {
  std::size_t n_laser = 130;
  double z_max = 4.0;
  double fov = 0.8 * std::numbers::pi;
  double noise_sigma = 0.02;  // training mode only
};

/// Explicit start/goal for hand-authored layouts.
struct AgentSpawn {
  Vec2 start;
  double heading = 0.0;
  Vec2 goal;
};

struct ScenarioConfig {
  Arena arena{8.0, 8.0};
  std::size_t n_obstacles = 5;
  std::size_t n_agents = 1;
  std::vector<ObstacleKind> kinds{ObstacleKind::kSphere, ObstacleKind::kCube, ObstacleKind::kCapsule,
                                  ObstacleKind::kCylinder};
  double agent_radius = 0.105;
  LidarConfig lidar;
  double slip_sigma = 0.05;       // multiplicative actuation noise, training mode
  double eval_slip_sigma = 0.0;
  double eval_noise_sigma = 0.0;
  double dt = 1.0 / 60.0;
  std::size_t action_repeat = 1;  // physics steps per policy decision
  std::size_t episode_steps = 2500;
  std::size_t replay_steps = 300;
  std::size_t max_collisions = 3;  // per agent per iteration before a random respawn
  double clearance = 0.1;
  double min_goal_distance = 1.0;
  double max_goal_distance = 0.0;  // 0 = unbounded
  std::size_t max_attempts = 10000;
  double goal_tolerance = 0.1;
  double contact_distance = 0.01;
  std::vector<Obstacle> obstacles;  // used instead of random obstacles when non-empty
  std::vector<AgentSpawn> agents;   // used instead of random agents when non-empty

  void validate() const;
  double decision_dt() const { return dt * static_cast<double>(action_repeat); }
};

enum class SimMode { kTraining, kEval };

/// Kinematic state that local replay saves and restores.
struct Snapshot {
  std::size_t step = 0;
  Vec2 pos;
  double heading = 0.0;
  double v_cmd = 0.0;
  double w_cmd = 0.0;
  double v_eff = 0.0;
  double w_eff = 0.0;

  friend bool operator==(const Snapshot&, const Snapshot&) = default;
};

struct AgentState {
  Vec2 pos;
  double heading = 0.0;
  Vec2 goal;
  double radius = 0.105;
  double v_cmd = 0.0;
  double w_cmd = 0.0;
  double v_eff = 0.0;
  double w_eff = 0.0;
  int collision_count = 0;
  bool active = true;
  bool arrived = false;
  bool collided = false;
  bool timed_out = false;
  std::size_t finish_step = 0;  // step at which the agent became inactive

  Snapshot snapshot(std::size_t step) const { return {step, pos, heading, v_cmd, w_cmd, v_eff, w_eff}; }

  friend bool operator==(const AgentState&, const AgentState&) = default;
};

struct Command {
  double v = 0.0;
  double w = 0.0;
};

/// Per-agent outcome of one physics step.
struct StepEvent {
  bool collided = false;
  bool arrived = false;
  bool timed_out = false;
};

enum class AgentStatus { kActive, kArrived, kCollided, kTimedOut };

struct Termination {
  std::vector<AgentStatus> status;
  bool done = false;
};

/// Integrates the unicycle model exactly over `dt` (straight line when |w| < 1e-6).
void integrate_unicycle(Vec2& pos, double& heading, double v, double w, double dt);

/// Beam angles relative to the heading: evenly spaced over the fov, endpoints
/// included; for a full circle the endpoint duplicate is dropped.
std::vector<double> beam_angles(const LidarConfig& lidar);

/// Multi-agent 2D world with obstacles, walls, LiDAR and local replay.
///
/// One instance is mutated by one thread at a time. All randomness comes from
/// the world's own generator, so (config, seed, commands) fixes the trajectory.
class World {
 public:
  /// Samples obstacles, starts and goals by rejection. Throws InfeasibleScenarioError.
  static World generate(const ScenarioConfig& cfg, SimMode mode, std::uint64_t seed);

  const ScenarioConfig& config() const noexcept { return cfg_; }
  SimMode mode() const noexcept { return mode_; }
  std::size_t step_count() const noexcept { return step_; }
  const std::vector<Obstacle>& obstacles() const noexcept { return obstacles_; }
  const std::vector<AgentState>& agents() const noexcept { return agents_; }
  const AgentState& agent(std::size_t i) const { return agents_.at(i); }
  std::size_t active_count() const;
  const std::deque<Snapshot>& history(std::size_t i) const { return history_.at(i); }
  const std::vector<double>& beams() const noexcept { return beams_; }
  std::mt19937_64& rng() noexcept { return rng_; }

  /// Advances one physics step. `commands` holds one entry per active agent,
  /// in agent-index order. Throws ContractError on a count mismatch.
  std::vector<StepEvent> step(std::span<const Command> commands);

  /// Ranges from the agent centre, capped at z_max; noisy in training mode.
  std::vector<double> lidar_scan(std::size_t agent);
  /// Noise-free ranges.
  std::vector<double> lidar_scan_clean(std::size_t agent) const;

  /// Minimum surface-to-surface distance from the agent to any obstacle, wall or other agent.
  double surface_distance(std::size_t agent) const;

  /// Restores a just-collided agent to its state replay_steps earlier (or the
  /// oldest stored), or respawns it once its collision count exceeds the limit.
  void apply_replay(std::size_t agent);

  Termination check_termination() const;

  /// Training-mode bookkeeping after the caller has handled an event.
  void clear_events(std::size_t agent);
  void reset_collision_counts();
  /// Draws a new collision-free goal for the agent.
  void assign_new_goal(std::size_t agent);

  /// Hash of the initial layout (obstacles, starts, goals).
  std::uint64_t layout_hash() const;
  /// Initial starts and goals as generated.
  const std::vector<AgentSpawn>& spawns() const noexcept { return spawns_; }

  /// Rebuilds a world from explicit state, e.g. a saved world file.
  static World from_layout(const ScenarioConfig& cfg, SimMode mode, std::uint64_t seed,
                           std::vector<Obstacle> obstacles, std::vector<AgentSpawn> agents);

 private:
  World(const ScenarioConfig& cfg, SimMode mode, std::uint64_t seed);

  bool free_disc(Vec2 p, double radius, std::size_t ignore_agent, bool check_goals) const;
  Vec2 sample_free_point(double radius, std::size_t ignore_agent, bool check_goals, const char* what);
  double slip_sigma() const;
  double noise_sigma() const;
  void record_history(std::size_t agent);

  ScenarioConfig cfg_;
  SimMode mode_;
  std::mt19937_64 rng_;
  std::vector<Obstacle> obstacles_;
  std::vector<AgentState> agents_;
  std::vector<AgentSpawn> spawns_;
  std::vector<std::deque<Snapshot>> history_;
  std::vector<double> beams_;
  std::size_t step_ = 0;
};

}  // namespace lstp::sim
