#include "lstp/reward/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "lstp/error.hpp"

namespace lstp::reward {

std::string_view mode_name(ObstacleRewardMode mode) {
  return mode == ObstacleRewardMode::kHeadingStability ? "hs" : "conventional";
}

ObstacleRewardMode parse_mode(std::string_view name) {
  if (name == "hs") return ObstacleRewardMode::kHeadingStability;
  if (name == "conventional") return ObstacleRewardMode::kConventional;
  throw ConfigError("unknown reward mode '" + std::string(name) + "' (expected hs or conventional)");
}

void RewardConfig::validate() const {
  if (!(sigma_hs > 0)) throw ConfigError("reward.sigma_hs must be > 0");
  if (!(z_max > 0)) throw ConfigError("reward.z_max must be > 0");
  if (!(r_arrival > 0)) throw ConfigError("reward.r_arrival must be > 0");
  if (!(r_collision < 0)) throw ConfigError("reward.r_collision must be < 0");
  if (!(dt > 0)) throw ConfigError("reward.dt must be > 0");
}

double goal_reward(sim::Vec2 prev_pos, sim::Vec2 pos, sim::Vec2 goal, const RewardConfig& cfg) {
  const double d = sim::norm(pos - goal);
  if (d < cfg.goal_tolerance) return cfg.r_arrival;
  return cfg.w_g * (sim::norm(prev_pos - goal) - d);
}

double hs_raw_weight(double theta, double omega, const RewardConfig& cfg) {
  const double s = cfg.sigma_hs;
  const double z = (theta - omega * cfg.dt) / s;
  return std::exp(-0.5 * z * z) / (std::sqrt(2.0 * std::numbers::pi) * s);
}

std::vector<double> hs_weights(double omega, const RewardConfig& cfg, std::span<const double> beam_angles) {
  if (!(cfg.sigma_hs > 0)) throw ContractError("hs_weights: sigma_hs must be positive");
  std::vector<double> w(beam_angles.size());
  double total = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) {
    w[j] = hs_raw_weight(beam_angles[j], omega, cfg);
    total += w[j];
  }
  if (!(total > 0)) {
    // Every beam underflowed: fall back to the nearest beam.
    std::size_t best = 0;
    for (std::size_t j = 1; j < w.size(); ++j) {
      if (std::abs(beam_angles[j] - omega * cfg.dt) < std::abs(beam_angles[best] - omega * cfg.dt)) best = j;
    }
    std::fill(w.begin(), w.end(), 0.0);
    if (!w.empty()) w[best] = 1.0;
    return w;
  }
  for (auto& x : w) x /= total;
  return w;
}

double obstacle_reward(std::span<const double> scan, double omega, bool collided, const RewardConfig& cfg,
                       std::span<const double> beam_angles) {
  if (scan.size() != beam_angles.size()) {
    throw ContractError("obstacle_reward: scan has " + std::to_string(scan.size()) + " ranges for " +
                        std::to_string(beam_angles.size()) + " beams");
  }
  if (collided) return cfg.r_collision;
  const auto w = hs_weights(omega, cfg, beam_angles);
  double penalty = 0.0;
  for (std::size_t j = 0; j < scan.size(); ++j) penalty += w[j] * (cfg.z_max - scan[j]);
  return -cfg.k_c * penalty;
}

double conventional_obstacle_reward(std::span<const double> scan, bool collided, const RewardConfig& cfg) {
  if (collided) return cfg.r_collision;
  if (scan.empty()) return 0.0;
  return -cfg.k_c * (cfg.z_max - *std::min_element(scan.begin(), scan.end()));
}

double obstacle_reward_for_mode(std::span<const double> scan, double omega, bool collided, const RewardConfig& cfg,
                                std::span<const double> beam_angles) {
  return cfg.mode == ObstacleRewardMode::kHeadingStability
             ? obstacle_reward(scan, omega, collided, cfg, beam_angles)
             : conventional_obstacle_reward(scan, collided, cfg);
}

}  // namespace lstp::reward
