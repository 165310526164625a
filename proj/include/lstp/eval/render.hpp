#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>

#include "lstp/eval/harness.hpp"
#include "lstp/io/files.hpp"

namespace lstp::eval {

/// Trajectory colours by agent index: red, green, blue, magenta, cyan,
/// orange, purple, lime green, then repeating.
std::string_view agent_color(std::size_t agent);

/// Renders one trial: obstacles, starts, goals and one polyline per agent.
/// A trial with any collision or timeout gets a red frame. Throws
/// ContractError if the log mixes trials or names an agent the layout lacks.
std::string render_svg(const io::WorldLayout& layout, std::span<const TrajectoryRecord> log);

void write_svg(const std::filesystem::path& path, const io::WorldLayout& layout,
               std::span<const TrajectoryRecord> log);

}  // namespace lstp::eval
