#pragma once

#include <string>

#include "lstp/error.hpp"
#include "lstp/net/lstp_net.hpp"
#include "lstp/reward/rewards.hpp"
#include "lstp/sim/world.hpp"
#include "lstp/train/ppo.hpp"

namespace lstp {

/// Everything one run needs: scenario, network, trainer and reward settings.
struct RunConfig {
  sim::ScenarioConfig scenario;
  net::NetConfig net;
  train::TrainConfig train;
  reward::RewardConfig reward;

  /// Validates each section and their cross-section consistency.
  void validate() const {
    scenario.validate();
    net.validate();
    train.validate();
    reward_for(scenario).validate();
    if (net.n_laser != scenario.lidar.n_laser) {
      throw ConfigError("net.n_laser (" + std::to_string(net.n_laser) + ") must equal scenario.lidar.n_laser (" +
                        std::to_string(scenario.lidar.n_laser) + ")");
    }
  }

  /// Reward settings with the fields derived from a scenario filled in:
  /// decision interval, LiDAR range and arrival tolerance.
  reward::RewardConfig reward_for(const sim::ScenarioConfig& sc) const {
    reward::RewardConfig r = reward;
    r.dt = sc.decision_dt();
    r.z_max = sc.lidar.z_max;
    r.goal_tolerance = sc.goal_tolerance;
    return r;
  }
};

}  // namespace lstp
