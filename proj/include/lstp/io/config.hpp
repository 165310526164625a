#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "lstp/run_config.hpp"

namespace lstp::io {

using Json = nlohmann::ordered_json;

/// Strict parse: unknown keys and wrongly typed values raise ConfigError
/// naming the full key path. Missing keys keep their defaults. When
/// net.n_laser is absent it follows scenario.lidar.n_laser.
RunConfig parse_config(const Json& j);
RunConfig parse_config_text(const std::string& text);
/// Throws ConfigError if the file is missing or not valid JSON.
RunConfig load_config(const std::filesystem::path& path);

Json to_json(const RunConfig& cfg);
Json to_json(const sim::ScenarioConfig& cfg);
Json to_json(const net::NetConfig& cfg);

net::NetConfig net_config_from_json(const Json& j);
sim::ScenarioConfig scenario_from_json(const Json& j);

/// Writes JSON with two-space indentation and a trailing newline.
void write_json(const std::filesystem::path& path, const Json& j);

}  // namespace lstp::io
