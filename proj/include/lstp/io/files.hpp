#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "lstp/eval/harness.hpp"
#include "lstp/io/config.hpp"
#include "lstp/sim/world.hpp"

namespace lstp::io {

/// Static part of a world: what a plot or a hand-authored scenario needs.
struct WorldLayout {
  sim::Arena arena;
  std::vector<sim::Obstacle> obstacles;
  std::vector<sim::AgentSpawn> agents;
};

WorldLayout layout_of(const sim::World& world);

/// A world file is a scenario object restricted to arena, obstacles and
/// agents, so it can be pasted into a config as a hand-authored layout.
Json to_json(const WorldLayout& layout);
WorldLayout layout_from_json(const Json& j);
void write_world(const std::filesystem::path& path, const WorldLayout& layout);
WorldLayout read_world(const std::filesystem::path& path);

Json to_json(const eval::TrajectoryRecord& r);
eval::TrajectoryRecord trajectory_from_json(const Json& j);
/// One JSON object per line.
void write_trajectory(const std::filesystem::path& path, std::span<const eval::TrajectoryRecord> records);
/// Throws LoadError on unreadable files or malformed lines.
std::vector<eval::TrajectoryRecord> read_trajectory(const std::filesystem::path& path);

Json to_json(const eval::TrialRecord& t);

}  // namespace lstp::io
