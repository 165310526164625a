#include "lstp/sim/world.hpp"

#include <algorithm>
#include <cstring>
#include <limits>
#include <string>

#include "lstp/error.hpp"

namespace lstp::sim {

void ScenarioConfig::validate() const {
  if (!(arena.width > 0 && arena.height > 0)) throw ConfigError("scenario.arena must have positive extents");
  if (n_agents < 1 && agents.empty()) throw ConfigError("scenario.agents must be >= 1");
  if (kinds.empty()) throw ConfigError("scenario.kinds must not be empty");
  if (!(agent_radius > 0)) throw ConfigError("scenario.agent_radius must be > 0");
  if (lidar.n_laser < 1) throw ConfigError("lidar.n_laser must be >= 1");
  if (!(lidar.z_max > 0)) throw ConfigError("lidar.z_max must be > 0");
  if (!(lidar.fov > 0 && lidar.fov <= 2 * std::numbers::pi + 1e-12)) throw ConfigError("lidar.fov must be in (0, 2pi]");
  if (lidar.noise_sigma < 0 || slip_sigma < 0 || eval_slip_sigma < 0 || eval_noise_sigma < 0) {
    throw ConfigError("noise magnitudes must be >= 0");
  }
  if (!(dt > 0)) throw ConfigError("scenario.dt must be > 0");
  if (action_repeat < 1) throw ConfigError("scenario.action_repeat must be >= 1");
  if (episode_steps < 1) throw ConfigError("scenario.episode_steps must be >= 1");
  if (max_attempts < 1) throw ConfigError("scenario.max_attempts must be >= 1");
  if (!(goal_tolerance > 0) || !(contact_distance >= 0)) throw ConfigError("bad goal/contact tolerance");
  if (max_goal_distance != 0.0 && max_goal_distance < min_goal_distance) {
    throw ConfigError("scenario.max_goal_distance must be >= min_goal_distance");
  }
}

void integrate_unicycle(Vec2& pos, double& heading, double v, double w, double dt) {
  if (std::abs(w) < 1e-6) {
    pos.x += v * std::cos(heading) * dt;
    pos.y += v * std::sin(heading) * dt;
  } else {
    const double r = v / w;
    const double next = heading + w * dt;
    pos.x += r * (std::sin(next) - std::sin(heading));
    pos.y -= r * (std::cos(next) - std::cos(heading));
    heading = next;
  }
  heading = wrap_angle(heading);
}

std::vector<double> beam_angles(const LidarConfig& lidar) {
  const std::size_t n = lidar.n_laser;
  std::vector<double> out(n);
  const bool full = lidar.fov >= 2 * std::numbers::pi - 1e-12;
  if (n == 1) {
    out[0] = 0.0;
    return out;
  }
  const double step = full ? lidar.fov / static_cast<double>(n) : lidar.fov / static_cast<double>(n - 1);
  const double first = full ? -std::numbers::pi : -lidar.fov / 2;
  for (std::size_t j = 0; j < n; ++j) out[j] = first + step * static_cast<double>(j);
  return out;
}

World::World(const ScenarioConfig& cfg, SimMode mode, std::uint64_t seed)
    : cfg_(cfg), mode_(mode), rng_(seed), beams_(beam_angles(cfg.lidar)) {
  cfg_.validate();
}

std::size_t World::active_count() const {
  return static_cast<std::size_t>(std::count_if(agents_.begin(), agents_.end(), [](const AgentState& a) { return a.active; }));
}

bool World::free_disc(Vec2 p, double radius, std::size_t ignore_agent, bool check_goals) const {
  const double need = cfg_.clearance;
  if (cfg_.arena.wall_distance(p) - radius < need) return false;
  for (const auto& ob : obstacles_) {
    if (norm(p - ob.center) - bounding_radius(ob) - radius >= need) continue;
    if (signed_distance(ob, p) - radius < need) return false;
  }
  for (std::size_t j = 0; j < agents_.size(); ++j) {
    if (j == ignore_agent) continue;
    if (norm(p - agents_[j].pos) - radius - agents_[j].radius < need) return false;
    if (check_goals && norm(p - agents_[j].goal) - radius - agents_[j].radius < need) return false;
  }
  return true;
}

Vec2 World::sample_free_point(double radius, std::size_t ignore_agent, bool check_goals, const char* what) {
  const double margin = radius + cfg_.clearance;
  std::uniform_real_distribution<double> ux(margin, cfg_.arena.width - margin);
  std::uniform_real_distribution<double> uy(margin, cfg_.arena.height - margin);
  if (cfg_.arena.width <= 2 * margin || cfg_.arena.height <= 2 * margin) {
    throw InfeasibleScenarioError(std::string("arena too small to place ") + what);
  }
  for (std::size_t attempt = 0; attempt < cfg_.max_attempts; ++attempt) {
    const Vec2 p{ux(rng_), uy(rng_)};
    if (free_disc(p, radius, ignore_agent, check_goals)) return p;
  }
  throw InfeasibleScenarioError(std::string("could not place ") + what + " after " +
                                std::to_string(cfg_.max_attempts) + " attempts");
}

World World::generate(const ScenarioConfig& cfg, SimMode mode, std::uint64_t seed) {
  World w(cfg, mode, seed);
  auto& rng = w.rng_;

  if (!cfg.obstacles.empty()) {
    w.obstacles_ = cfg.obstacles;
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, cfg.kinds.size() - 1);
    std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
    for (std::size_t i = 0; i < cfg.n_obstacles; ++i) {
      bool placed = false;
      for (std::size_t attempt = 0; attempt < cfg.max_attempts && !placed; ++attempt) {
        Obstacle ob;
        ob.kind = cfg.kinds[pick(rng)];
        ob.theta = angle(rng);
        const double br = bounding_radius(ob);
        if (cfg.arena.width <= 2 * br || cfg.arena.height <= 2 * br) break;
        ob.center = {std::uniform_real_distribution<double>(br, cfg.arena.width - br)(rng),
                     std::uniform_real_distribution<double>(br, cfg.arena.height - br)(rng)};
        placed = std::all_of(w.obstacles_.begin(), w.obstacles_.end(),
                             [&](const Obstacle& o) { return footprint_gap(o, ob) >= cfg.clearance; });
        if (placed) w.obstacles_.push_back(ob);
      }
      if (!placed) {
        throw InfeasibleScenarioError("could not place obstacle " + std::to_string(i) + " after " +
                                      std::to_string(cfg.max_attempts) + " attempts");
      }
    }
  }

  if (!cfg.agents.empty()) {
    for (const auto& spawn : cfg.agents) {
      AgentState a;
      a.pos = spawn.start;
      a.heading = wrap_angle(spawn.heading);
      a.goal = spawn.goal;
      a.radius = cfg.agent_radius;
      w.agents_.push_back(a);
    }
  } else {
    std::uniform_real_distribution<double> heading(-std::numbers::pi, std::numbers::pi);
    // Goals start far outside the arena so they do not constrain start placement.
    const Vec2 far{-1e9, -1e9};
    for (std::size_t i = 0; i < cfg.n_agents; ++i) {
      AgentState a;
      a.radius = cfg.agent_radius;
      a.goal = far;
      a.pos = w.sample_free_point(cfg.agent_radius, std::numeric_limits<std::size_t>::max(), true, "agent start");
      a.heading = heading(rng);
      w.agents_.push_back(a);
    }
    for (std::size_t i = 0; i < cfg.n_agents; ++i) w.assign_new_goal(i);
  }

  for (const auto& a : w.agents_) w.spawns_.push_back({a.pos, a.heading, a.goal});
  w.history_.assign(w.agents_.size(), {});
  for (std::size_t i = 0; i < w.agents_.size(); ++i) w.record_history(i);
  return w;
}

World World::from_layout(const ScenarioConfig& cfg, SimMode mode, std::uint64_t seed, std::vector<Obstacle> obstacles,
                         std::vector<AgentSpawn> agents) {
  ScenarioConfig c = cfg;
  c.obstacles = std::move(obstacles);
  c.agents = std::move(agents);
  c.n_obstacles = c.obstacles.size();
  c.n_agents = c.agents.size();
  return generate(c, mode, seed);
}

void World::assign_new_goal(std::size_t agent) {
  auto& a = agents_.at(agent);
  const double margin = a.radius + cfg_.clearance;
  std::uniform_real_distribution<double> ux(margin, cfg_.arena.width - margin);
  std::uniform_real_distribution<double> uy(margin, cfg_.arena.height - margin);
  for (std::size_t attempt = 0; attempt < cfg_.max_attempts; ++attempt) {
    const Vec2 g{ux(rng_), uy(rng_)};
    const double d = norm(g - a.pos);
    if (d < cfg_.min_goal_distance) continue;
    if (cfg_.max_goal_distance > 0 && d > cfg_.max_goal_distance) continue;
    // The goal disc must also clear the agent's own body.
    if (d - 2 * a.radius < cfg_.clearance) continue;
    if (free_disc(g, a.radius, agent, true)) {
      a.goal = g;
      return;
    }
  }
  throw InfeasibleScenarioError("could not place goal for agent " + std::to_string(agent) + " after " +
                                std::to_string(cfg_.max_attempts) + " attempts");
}

double World::slip_sigma() const { return mode_ == SimMode::kTraining ? cfg_.slip_sigma : cfg_.eval_slip_sigma; }

double World::noise_sigma() const {
  return mode_ == SimMode::kTraining ? cfg_.lidar.noise_sigma : cfg_.eval_noise_sigma;
}

void World::record_history(std::size_t agent) {
  auto& h = history_[agent];
  h.push_back(agents_[agent].snapshot(step_));
  while (h.size() > cfg_.replay_steps + 1) h.pop_front();
}

std::vector<StepEvent> World::step(std::span<const Command> commands) {
  const std::size_t active = active_count();
  if (commands.size() != active) {
    throw ContractError("step: got " + std::to_string(commands.size()) + " commands for " + std::to_string(active) +
                        " active agents");
  }
  const double sigma = slip_sigma();
  std::size_t k = 0;
  for (auto& a : agents_) {
    if (!a.active) continue;
    const Command& c = commands[k++];
    if (!std::isfinite(c.v) || !std::isfinite(c.w)) throw NumericError("step: non-finite command");
    a.v_cmd = c.v;
    a.w_cmd = c.w;
    if (sigma > 0) {
      std::normal_distribution<double> slip(0.0, sigma);
      a.v_eff = c.v * (1.0 + slip(rng_));
      a.w_eff = c.w * (1.0 + slip(rng_));
    } else {
      a.v_eff = c.v;
      a.w_eff = c.w;
    }
    integrate_unicycle(a.pos, a.heading, a.v_eff, a.w_eff, cfg_.dt);
  }
  ++step_;

  std::vector<StepEvent> events(agents_.size());
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    if (!agents_[i].active) continue;
    record_history(i);
    if (surface_distance(i) < cfg_.contact_distance) {
      events[i].collided = true;
    } else if (norm(agents_[i].pos - agents_[i].goal) < cfg_.goal_tolerance) {
      events[i].arrived = true;
    }
  }
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    auto& a = agents_[i];
    if (!a.active) continue;
    if (events[i].collided) a.collided = true;
    if (events[i].arrived) a.arrived = true;
    if (step_ >= cfg_.episode_steps && !events[i].collided && !events[i].arrived) {
      events[i].timed_out = true;
      a.timed_out = true;
    }
    if (mode_ == SimMode::kEval && (a.collided || a.arrived || a.timed_out)) {
      a.active = false;
      a.finish_step = step_;
    }
  }
  return events;
}

double World::surface_distance(std::size_t agent) const {
  const auto& a = agents_.at(agent);
  double best = cfg_.arena.wall_distance(a.pos) - a.radius;
  for (const auto& ob : obstacles_) {
    if (norm(a.pos - ob.center) - bounding_radius(ob) - a.radius >= best) continue;
    best = std::min(best, signed_distance(ob, a.pos) - a.radius);
  }
  for (std::size_t j = 0; j < agents_.size(); ++j) {
    if (j == agent) continue;
    best = std::min(best, norm(a.pos - agents_[j].pos) - a.radius - agents_[j].radius);
  }
  return best;
}

std::vector<double> World::lidar_scan_clean(std::size_t agent) const {
  const auto& a = agents_.at(agent);
  const double z_max = cfg_.lidar.z_max;
  std::vector<const Obstacle*> near_obstacles;
  for (const auto& ob : obstacles_) {
    if (norm(ob.center - a.pos) - bounding_radius(ob) <= z_max) near_obstacles.push_back(&ob);
  }
  std::vector<const AgentState*> near_agents;
  for (std::size_t j = 0; j < agents_.size(); ++j) {
    if (j != agent && norm(agents_[j].pos - a.pos) - agents_[j].radius <= z_max) near_agents.push_back(&agents_[j]);
  }
  std::vector<double> ranges(beams_.size());
  for (std::size_t b = 0; b < beams_.size(); ++b) {
    const Vec2 dir = unit(a.heading + beams_[b]);
    double t = std::min(z_max, cfg_.arena.ray_to_wall(a.pos, dir));
    for (const Obstacle* ob : near_obstacles) {
      if (auto hit = ray_distance(*ob, a.pos, dir); hit && *hit < t) t = *hit;
    }
    for (const AgentState* o : near_agents) {
      if (auto hit = ray_disc(a.pos, dir, o->pos, o->radius); hit && *hit < t) t = *hit;
    }
    ranges[b] = std::clamp(t, 0.0, z_max);
  }
  return ranges;
}

std::vector<double> World::lidar_scan(std::size_t agent) {
  auto ranges = lidar_scan_clean(agent);
  const double sigma = noise_sigma();
  if (sigma > 0) {
    std::normal_distribution<double> noise(0.0, sigma);
    for (auto& r : ranges) r = std::clamp(r + noise(rng_), 0.0, cfg_.lidar.z_max);
  }
  return ranges;
}

void World::apply_replay(std::size_t agent) {
  auto& a = agents_.at(agent);
  if (mode_ != SimMode::kTraining) throw ContractError("apply_replay: only available in training mode");
  if (!a.collided) throw ContractError("apply_replay: agent " + std::to_string(agent) + " has not collided");
  ++a.collision_count;
  a.collided = false;
  auto& h = history_[agent];

  if (a.collision_count > static_cast<int>(cfg_.max_collisions)) {
    std::uniform_real_distribution<double> heading(-std::numbers::pi, std::numbers::pi);
    const Vec2 goal = a.goal;
    for (std::size_t attempt = 0;; ++attempt) {
      const Vec2 p = sample_free_point(a.radius, agent, false, "respawned agent");
      if (norm(p - goal) >= cfg_.min_goal_distance || attempt + 1 >= cfg_.max_attempts) {
        a.pos = p;
        break;
      }
    }
    a.heading = heading(rng_);
    a.v_cmd = a.w_cmd = a.v_eff = a.w_eff = 0.0;
    a.collision_count = 0;
    h.clear();
    h.push_back(a.snapshot(step_));
    return;
  }

  const std::size_t target = step_ >= cfg_.replay_steps ? step_ - cfg_.replay_steps : 0;
  // Latest snapshot at or before the target step; the oldest one if history is shorter.
  auto it = std::find_if(h.rbegin(), h.rend(), [&](const Snapshot& s) { return s.step <= target; });
  const std::size_t keep = it == h.rend() ? 1 : static_cast<std::size_t>(h.rend() - it);
  h.resize(keep);
  const Snapshot& s = h.back();
  a.pos = s.pos;
  a.heading = s.heading;
  a.v_cmd = s.v_cmd;
  a.w_cmd = s.w_cmd;
  a.v_eff = s.v_eff;
  a.w_eff = s.w_eff;
}

Termination World::check_termination() const {
  Termination t;
  bool any_active = false;
  for (const auto& a : agents_) {
    if (a.collided) {
      t.status.push_back(AgentStatus::kCollided);
    } else if (a.arrived) {
      t.status.push_back(AgentStatus::kArrived);
    } else if (a.timed_out) {
      t.status.push_back(AgentStatus::kTimedOut);
    } else {
      t.status.push_back(AgentStatus::kActive);
    }
    any_active = any_active || a.active;
  }
  t.done = !any_active || step_ >= cfg_.episode_steps;
  return t;
}

void World::clear_events(std::size_t agent) {
  auto& a = agents_.at(agent);
  a.arrived = false;
  a.collided = false;
  a.timed_out = false;
}

void World::reset_collision_counts() {
  for (auto& a : agents_) a.collision_count = 0;
}

std::uint64_t World::layout_hash() const {
  std::uint64_t h = 14695981039346656037ull;
  auto mix = [&](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ull;
    }
  };
  auto mix_d = [&](double d) { mix(&d, sizeof d); };
  mix_d(cfg_.arena.width);
  mix_d(cfg_.arena.height);
  for (const auto& ob : obstacles_) {
    const int k = static_cast<int>(ob.kind);
    mix(&k, sizeof k);
    mix_d(ob.center.x);
    mix_d(ob.center.y);
    mix_d(ob.theta);
  }
  for (const auto& s : spawns_) {
    mix_d(s.start.x);
    mix_d(s.start.y);
    mix_d(s.heading);
    mix_d(s.goal.x);
    mix_d(s.goal.y);
  }
  return h;
}

}  // namespace lstp::sim
