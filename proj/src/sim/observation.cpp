#include "lstp/sim/observation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "lstp/error.hpp"

namespace lstp::sim {

void FrameStack::reset(const std::vector<double>& scan) {
  frames_.assign(depth_, scan);
}

void FrameStack::push(const std::vector<double>& scan) {
  if (frames_.empty()) {
    reset(scan);
    return;
  }
  frames_.push_back(scan);
  while (frames_.size() > depth_) frames_.pop_front();
}

double goal_bearing(const AgentState& a) {
  const Vec2 d = a.goal - a.pos;
  return wrap_angle(std::atan2(d.y, d.x) - a.heading);
}

Observation observe(const World& world, std::size_t agent, const FrameStack& frames) {
  const auto& a = world.agent(agent);
  if (!a.active) throw ContractError("observe: agent " + std::to_string(agent) + " is inactive");
  if (frames.empty()) throw ContractError("observe: empty frame stack");
  const double z_max = world.config().lidar.z_max;
  Observation obs;
  obs.lidar.reserve(frames.depth() * world.beams().size());
  for (const auto& scan : frames.frames()) {
    if (scan.size() != world.beams().size()) throw ContractError("observe: scan length does not match beam count");
    for (double r : scan) obs.lidar.push_back(r / z_max);
  }
  obs.state[0] = std::min(norm(a.goal - a.pos), kGoalClip) / kGoalClip;
  obs.state[1] = goal_bearing(a) / std::numbers::pi;
  obs.state[2] = a.v_cmd;
  obs.state[3] = a.w_cmd / std::numbers::pi;
  return obs;
}

}  // namespace lstp::sim
