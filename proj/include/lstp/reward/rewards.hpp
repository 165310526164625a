#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "lstp/sim/geometry.hpp"

namespace lstp::reward {

enum class ObstacleRewardMode { kHeadingStability, kConventional };

std::string_view mode_name(ObstacleRewardMode mode);
ObstacleRewardMode parse_mode(std::string_view name);

struct RewardConfig {
  double r_arrival = 20.0;
  double r_collision = -20.0;
  double w_g = 2.5;
  double k_c = 0.5;
  double sigma_hs = 0.5;  // rad
  double z_max = 4.0;
  double dt = 1.0 / 60.0;  // decision interval used for the heading prediction omega * dt
  double goal_tolerance = 0.1;
  ObstacleRewardMode mode = ObstacleRewardMode::kHeadingStability;

  void validate() const;
};

/// r_arrival inside the goal tolerance, else w_g times the distance progress.
double goal_reward(sim::Vec2 prev_pos, sim::Vec2 pos, sim::Vec2 goal, const RewardConfig& cfg);

/// Gaussian density N(theta; omega*dt, sigma_hs^2) before normalization.
double hs_raw_weight(double theta, double omega, const RewardConfig& cfg);

/// Per-beam heading weights, normalized to sum to 1.
std::vector<double> hs_weights(double omega, const RewardConfig& cfg, std::span<const double> beam_angles);

/// Heading-stability obstacle reward: r_collision on contact, otherwise
/// -k_c * sum_j w_j (z_max - z_j). Throws ContractError if the scan and beam
/// counts differ.
double obstacle_reward(std::span<const double> scan, double omega, bool collided, const RewardConfig& cfg,
                       std::span<const double> beam_angles);

/// Nearest-obstacle penalty used as the conventional baseline:
/// r_collision on contact, otherwise -k_c * (z_max - min_j z_j).
double conventional_obstacle_reward(std::span<const double> scan, bool collided, const RewardConfig& cfg);

inline double total_reward(double goal_r, double obstacle_r) { return goal_r + obstacle_r; }

/// Obstacle reward under cfg.mode.
double obstacle_reward_for_mode(std::span<const double> scan, double omega, bool collided, const RewardConfig& cfg,
                                std::span<const double> beam_angles);

}  // namespace lstp::reward
