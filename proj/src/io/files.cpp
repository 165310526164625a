#include "lstp/io/files.hpp"

#include <fstream>
#include <string>

#include "lstp/error.hpp"

namespace lstp::io {

WorldLayout layout_of(const sim::World& world) {
  return {world.config().arena, world.obstacles(), world.spawns()};
}

Json to_json(const WorldLayout& layout) {
  Json j;
  j["arena"] = {layout.arena.width, layout.arena.height};
  Json obs = Json::array();
  for (const auto& o : layout.obstacles) {
    obs.push_back({{"kind", std::string(sim::kind_name(o.kind))}, {"x", o.center.x}, {"y", o.center.y}, {"theta", o.theta}});
  }
  j["obstacles"] = obs;
  Json agents = Json::array();
  for (const auto& a : layout.agents) {
    agents.push_back({{"start", {a.start.x, a.start.y}}, {"heading", a.heading}, {"goal", {a.goal.x, a.goal.y}}});
  }
  j["agents"] = agents;
  return j;
}

WorldLayout layout_from_json(const Json& j) {
  sim::ScenarioConfig sc;
  try {
    sc = scenario_from_json(j);
  } catch (const ConfigError& e) {
    throw LoadError(std::string("bad world file: ") + e.what());
  }
  return {sc.arena, sc.obstacles, sc.agents};
}

void write_world(const std::filesystem::path& path, const WorldLayout& layout) { write_json(path, to_json(layout)); }

WorldLayout read_world(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot read world file " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw LoadError("world file " + path.string() + " is not valid JSON: " + e.what());
  }
  return layout_from_json(j);
}

Json to_json(const eval::TrajectoryRecord& r) {
  return {{"trial", r.trial}, {"step", r.step},   {"agent", r.agent},   {"x", r.x},         {"y", r.y},
          {"theta", r.theta}, {"v", r.v},         {"w", r.w},           {"reward", r.reward}, {"event", r.event}};
}

eval::TrajectoryRecord trajectory_from_json(const Json& j) {
  eval::TrajectoryRecord r;
  try {
    r.trial = j.value("trial", std::size_t{0});
    r.step = j.at("step").get<std::size_t>();
    r.agent = j.at("agent").get<std::size_t>();
    r.x = j.at("x").get<double>();
    r.y = j.at("y").get<double>();
    r.theta = j.at("theta").get<double>();
    r.v = j.at("v").get<double>();
    r.w = j.at("w").get<double>();
    r.reward = j.at("reward").get<double>();
    r.event = j.at("event").get<std::string>();
  } catch (const Json::exception& e) {
    throw LoadError(std::string("malformed trajectory record: ") + e.what());
  }
  return r;
}

void write_trajectory(const std::filesystem::path& path, std::span<const eval::TrajectoryRecord> records) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

std::vector<eval::TrajectoryRecord> read_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot read trajectory log " + path.string());
  std::vector<eval::TrajectoryRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(trajectory_from_json(Json::parse(line)));
    } catch (const Json::parse_error& e) {
      throw LoadError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

Json to_json(const eval::TrialRecord& t) {
  Json outcomes = Json::array();
  for (auto o : t.outcomes) outcomes.push_back(std::string(eval::outcome_name(o)));
  return {{"trial", t.index}, {"seed", t.seed}, {"world_hash", t.world_hash}, {"outcomes", outcomes}, {"steps", t.steps}};
}

}  // namespace lstp::io
