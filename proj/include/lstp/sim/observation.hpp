#pragma once

#include <array>
#include <deque>
#include <vector>

#include "lstp/sim/world.hpp"

namespace lstp::sim {

/// Goal distances are clipped to this range before normalization.
inline constexpr double kGoalClip = 4.0;

/// One agent's network input: stacked normalized scans plus goal/velocity state.
struct Observation {
  std::vector<double> lidar;     // stack * n_laser, oldest frame first, each range / z_max
  std::array<double, 4> state{};  // [min(d_g, 4)/4, psi_g/pi, v, omega/pi]
};

/// Last `depth` raw scans of one agent.
class FrameStack {
 public:
  explicit FrameStack(std::size_t depth = 5) : depth_(depth) {}

  /// Fills every slot with `scan` (episode start or after a replay/respawn).
  void reset(const std::vector<double>& scan);
  /// Appends the newest scan; replicates it when the stack is empty.
  void push(const std::vector<double>& scan);

  bool empty() const noexcept { return frames_.empty(); }
  std::size_t depth() const noexcept { return depth_; }
  const std::deque<std::vector<double>>& frames() const noexcept { return frames_; }

 private:
  std::size_t depth_;
  std::deque<std::vector<double>> frames_;
};

/// Goal bearing relative to heading in (-pi, pi]; positive = goal to the left.
double goal_bearing(const AgentState& a);

/// Builds the observation from the agent's frame stack and current state.
/// Throws ContractError if the agent is inactive or the stack is empty.
Observation observe(const World& world, std::size_t agent, const FrameStack& frames);

}  // namespace lstp::sim
