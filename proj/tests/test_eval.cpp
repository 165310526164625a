#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <set>
#include <string>

#include "lstp/error.hpp"
#include "lstp/eval/harness.hpp"
#include "lstp/eval/render.hpp"
#include "lstp/io/files.hpp"
#include "lstp/tensor/checkpoint.hpp"
#include "lstp/train/trainer.hpp"

namespace lstp::eval {
namespace {

namespace fs = std::filesystem;

fs::path temp_path(const std::string& name) {
  auto p = fs::temp_directory_path() / ("lstp_eval_" + name);
  fs::remove_all(p);
  return p;
}

std::size_t count(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + 1)) ++n;
  return n;
}

sim::ScenarioConfig straight_line(std::size_t action_repeat) {
  sim::ScenarioConfig c;
  c.n_obstacles = 0;
  c.action_repeat = action_repeat;
  c.agents = {{{2.0, 4.0}, 0.0, {5.005, 4.0}}};
  return c;
}

// Metrics

TEST(Metrics, AggregateCountsAgentTrials) {
  const std::vector<TrialRecord> trials{
      {0, 1, 11, {Outcome::kSuccess, Outcome::kCollision}, {100, 40}},
      {1, 2, 12, {Outcome::kSuccess, Outcome::kTrap}, {300, 2500}},
  };
  const auto m = aggregate(trials);
  EXPECT_EQ(m.n_trials, 2u);
  EXPECT_EQ(m.n_agent_trials, 4u);
  EXPECT_DOUBLE_EQ(m.sr, 0.5);
  EXPECT_DOUBLE_EQ(m.cr, 0.25);
  EXPECT_DOUBLE_EQ(m.tr, 0.25);
  ASSERT_TRUE(m.as.has_value());
  EXPECT_DOUBLE_EQ(*m.as, 200.0);
}

TEST(Metrics, NoSuccessLeavesAsUnset) {
  const std::vector<TrialRecord> trials{{0, 1, 11, {Outcome::kTrap}, {2500}}};
  const auto m = aggregate(trials);
  EXPECT_FALSE(m.as.has_value());
  EXPECT_DOUBLE_EQ(m.tr, 1.0);
  EXPECT_EQ(aggregate({}).n_agent_trials, 0u);
}

TEST(Metrics, RatesSumToOne) {
  sim::ScenarioConfig c;
  c.n_agents = 3;
  c.n_obstacles = 10;
  c.episode_steps = 600;
  GoalSeekerPolicy p;
  EvalOptions o;
  o.n_trials = 10;
  const auto m = run_trials(p, c, o).metrics;
  EXPECT_EQ(m.n_agent_trials, 30u);
  EXPECT_EQ(m.successes + m.collisions + m.traps, 30u);
  EXPECT_NEAR(m.sr + m.cr + m.tr, 1.0, 1e-12);
}

// Trials

TEST(Trials, StraightLineAverageSteps) {
  for (std::size_t repeat : {std::size_t{1}, std::size_t{4}}) {
    GoalSeekerPolicy p;
    EvalOptions o;
    o.n_trials = 3;
    const auto res = run_trials(p, straight_line(repeat), o);
    EXPECT_DOUBLE_EQ(res.metrics.sr, 1.0);
    ASSERT_TRUE(res.metrics.as.has_value());
    // 2.905 m at 1/60 m per step: first step past the tolerance is 175.
    EXPECT_DOUBLE_EQ(*res.metrics.as, 175.0) << repeat;
  }
}

TEST(Trials, StationaryAlwaysTimesOut) {
  sim::ScenarioConfig c;
  c.episode_steps = 300;
  StationaryPolicy p;
  EvalOptions o;
  o.n_trials = 20;
  const auto m = run_trials(p, c, o).metrics;
  EXPECT_DOUBLE_EQ(m.tr, 1.0);
  EXPECT_DOUBLE_EQ(m.sr, 0.0);
}

TEST(Trials, GoalSeekerBeatsStationary) {
  sim::ScenarioConfig c;
  c.episode_steps = 1500;
  GoalSeekerPolicy g;
  StationaryPolicy s;
  EvalOptions o;
  o.n_trials = 30;
  EXPECT_GT(run_trials(g, c, o).metrics.sr, run_trials(s, c, o).metrics.sr + 0.2);
}

TEST(Trials, WorkerCountDoesNotChangeResults) {
  sim::ScenarioConfig c;
  c.n_agents = 2;
  c.episode_steps = 500;
  GoalSeekerPolicy p;
  EvalOptions o;
  o.n_trials = 70;
  o.workers = 1;
  const auto a = run_trials(p, c, o);
  o.workers = 4;
  const auto b = run_trials(p, c, o);
  EXPECT_EQ(a.trials, b.trials);
  EXPECT_EQ(a.metrics, b.metrics);
}

TEST(Trials, StochasticNetPolicyIsSeeded) {
  RunConfig rc;
  rc.scenario.lidar.n_laser = 16;
  rc.scenario.episode_steps = 200;
  rc.scenario.action_repeat = 4;
  rc.net.n_laser = 16;
  rc.net.d_h = 16;
  rc.net.enc_dim = 8;
  rc.net.actor_hidden = {8};
  rc.net.critic_hidden = {8};
  NetPolicy p(rc.net, net::init_params<float>(rc.net, 3), false, "net");
  EvalOptions o;
  o.n_trials = 4;
  o.record_trials = 4;
  const auto a = run_trials(p, rc.scenario, o);
  const auto b = run_trials(p, rc.scenario, o);
  EXPECT_EQ(a.trajectory, b.trajectory);
  o.seed = 1;
  EXPECT_NE(run_trials(p, rc.scenario, o).trajectory, a.trajectory);
}

TEST(Trials, BeamMismatchIsLoadError) {
  net::NetConfig cfg;
  cfg.n_laser = 16;
  cfg.d_h = 8;
  cfg.enc_dim = 8;
  cfg.actor_hidden = {8};
  cfg.critic_hidden = {8};
  NetPolicy p(cfg, net::init_params<float>(cfg, 1), true, "net");
  EvalOptions o;
  o.n_trials = 1;
  EXPECT_THROW(run_trials(p, sim::ScenarioConfig{}, o), LoadError);
}

TEST(Trials, TrajectoryLogsStartAndFinish) {
  GoalSeekerPolicy p;
  EvalOptions o;
  o.n_trials = 2;
  o.record_trials = 1;
  const auto res = run_trials(p, straight_line(1), o);
  ASSERT_FALSE(res.trajectory.empty());
  EXPECT_EQ(res.trajectory.front().event, "start");
  EXPECT_EQ(res.trajectory.front().step, 0u);
  EXPECT_EQ(res.trajectory.back().event, "arrival");
  EXPECT_EQ(res.trajectory.back().step, 175u);
  for (const auto& r : res.trajectory) EXPECT_EQ(r.trial, 0u);
  EXPECT_EQ(res.trajectory.size(), 176u);
}

// Comparison

TEST(Compare, PoliciesSeeIdenticalWorlds) {
  sim::ScenarioConfig c;
  c.episode_steps = 400;
  GoalSeekerPolicy g;
  StationaryPolicy s;
  std::vector<Policy*> ps{&g, &s};
  EvalOptions o;
  o.n_trials = 12;
  o.seed = 99;
  const auto rows = compare_policies(ps, c, o);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_TRUE(hashes_paired(rows));
  EXPECT_EQ(rows[0].world_hashes.size(), 12u);
  EXPECT_EQ(std::set<std::uint64_t>(rows[0].world_hashes.begin(), rows[0].world_hashes.end()).size(), 12u);
  auto broken = rows;
  broken[1].world_hashes[3] ^= 1;
  EXPECT_FALSE(hashes_paired(broken));
}

TEST(Compare, TrialSeedIgnoresPolicy) {
  EXPECT_EQ(trial_seed(5, 3), trial_seed(5, 3));
  EXPECT_NE(trial_seed(5, 3), trial_seed(5, 4));
  EXPECT_NE(trial_seed(5, 3), trial_seed(6, 3));
}

TEST(Compare, TableAndJsonl) {
  std::vector<ComparisonRow> rows{{"builtin:goal-seeker", {}, {}}, {"x", {}, {}}};
  rows[0].metrics = aggregate(std::vector<TrialRecord>{{0, 0, 0, {Outcome::kSuccess, Outcome::kTrap}, {120, 9}}});
  rows[1].metrics = aggregate(std::vector<TrialRecord>{{0, 0, 0, {Outcome::kCollision}, {5}}});
  const auto table = metrics_table(rows);
  EXPECT_NE(table.find("SR(%)"), std::string::npos);
  EXPECT_NE(table.find("50.00"), std::string::npos);
  EXPECT_NE(table.find("120.0"), std::string::npos);
  EXPECT_EQ(count(table, "\n"), 3u);
  const auto jsonl = metrics_jsonl(rows);
  std::istringstream in(jsonl);
  std::string line;
  std::getline(in, line);
  const auto j = io::Json::parse(line);
  EXPECT_EQ(j["policy"], "builtin:goal-seeker");
  EXPECT_DOUBLE_EQ(j["SR"].get<double>(), 0.5);
  std::getline(in, line);
  EXPECT_TRUE(io::Json::parse(line)["AS"].is_null());
}

// Policies

TEST(Policies, GoalSeekerTurnsTowardGoal) {
  GoalSeekerPolicy p;
  sim::Observation left, behind;
  left.state = {0.5, 0.25, 0, 0};
  behind.state = {0.5, 1.0, 0, 0};
  const std::vector<sim::Observation> obs{left, behind};
  const auto a = p.act(obs, {});
  EXPECT_NEAR(a[0][0], std::cos(std::numbers::pi / 4), 1e-12);
  EXPECT_NEAR(a[0][1], 3 * std::numbers::pi / 4, 1e-12);
  EXPECT_DOUBLE_EQ(a[1][0], 0.0);
  EXPECT_DOUBLE_EQ(a[1][1], std::numbers::pi);
}

TEST(Policies, LoadBuiltinsAndCheckpoints) {
  EXPECT_EQ(load_policy("builtin:stationary", true)->name(), "builtin:stationary");
  EXPECT_EQ(load_policy("builtin:goal-seeker", true)->name(), "builtin:goal-seeker");
  EXPECT_THROW(load_policy("builtin:nope", true), LoadError);
  EXPECT_THROW(load_policy("/nonexistent/policy.lstp", true), LoadError);

  RunConfig rc;
  rc.net.d_h = 8;
  rc.net.enc_dim = 8;
  rc.net.actor_hidden = {8};
  rc.net.critic_hidden = {8};
  rc.train.envs = 1;
  train::Trainer t(rc);
  const auto path = temp_path("policy.lstp");
  tensor::write_checkpoint(path, t.checkpoint());
  auto p = load_policy(path.string(), true);
  auto* np = dynamic_cast<NetPolicy*>(p.get());
  ASSERT_NE(np, nullptr);
  EXPECT_EQ(np->config().d_h, 8u);
  for (std::size_t i = 0; i < np->params().size(); ++i)
    EXPECT_TRUE(std::ranges::equal(np->params()[i].data(), t.params()[i].data()));
  fs::remove(path);
}

// Rendering

io::WorldLayout eight_agent_layout() {
  io::WorldLayout l;
  l.arena = {10, 10};
  l.obstacles = {{sim::ObstacleKind::kSphere, {5, 5}, 0.0},
                 {sim::ObstacleKind::kCube, {2, 8}, 0.3},
                 {sim::ObstacleKind::kCapsule, {8, 2}, 1.0},
                 {sim::ObstacleKind::kCylinder, {8, 8}, 0.0}};
  for (int a = 0; a < 8; ++a) l.agents.push_back({{1.0 + a, 1.0}, 0.0, {1.0 + a, 9.0}});
  return l;
}

std::vector<TrajectoryRecord> walk(std::size_t agents, const std::string& last_event) {
  std::vector<TrajectoryRecord> log;
  for (std::size_t a = 0; a < agents; ++a) {
    const double x = 1.0 + static_cast<double>(a);
    log.push_back({0, 0, a, x, 1.0, 0, 0, 0, 0, "start"});
    log.push_back({0, 60, a, x, 3.0, 0, 1, 0, 0.1, "move"});
    log.push_back({0, 120, a, x, 5.0, 0, 1, 0, 0.1, a == 0 ? last_event : "move"});
  }
  return log;
}

TEST(Render, PaletteHasEightDistinctColours) {
  std::set<std::string> seen;
  for (std::size_t a = 0; a < 8; ++a) seen.insert(std::string(agent_color(a)));
  EXPECT_EQ(seen.size(), 8u);
  EXPECT_EQ(agent_color(0), "red");
  EXPECT_EQ(agent_color(8), agent_color(0));
}

TEST(Render, EightAgentsGetTheirColours) {
  const auto svg = render_svg(eight_agent_layout(), walk(8, "arrival"));
  EXPECT_NE(svg.find("<svg"), std::string::npos);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  EXPECT_EQ(count(svg, "<polyline"), 8u);
  for (std::size_t a = 0; a < 8; ++a)
    EXPECT_NE(svg.find("stroke=\"" + std::string(agent_color(a)) + "\""), std::string::npos) << a;
  EXPECT_EQ(count(svg, "<g"), count(svg, "</g>"));
  EXPECT_EQ(svg.find("id=\"failure\""), std::string::npos);
}

TEST(Render, FailureFrameOnCollisionOrTimeout) {
  for (const char* ev : {"collision", "timeout"}) {
    const auto svg = render_svg(eight_agent_layout(), walk(2, ev));
    EXPECT_NE(svg.find("id=\"failure\""), std::string::npos) << ev;
  }
}

TEST(Render, EmptyLogDrawsLayoutOnly) {
  const auto svg = render_svg(eight_agent_layout(), {});
  EXPECT_EQ(count(svg, "<polyline"), 0u);
  EXPECT_NE(svg.find("obstacles"), std::string::npos);
}

TEST(Render, RejectsMixedTrialsAndUnknownAgents) {
  auto log = walk(2, "arrival");
  log[1].trial = 3;
  EXPECT_THROW(render_svg(eight_agent_layout(), log), ContractError);
  auto layout = eight_agent_layout();
  layout.agents.resize(1);
  EXPECT_THROW(render_svg(layout, walk(2, "arrival")), ContractError);
}

// Files

TEST(Files, WorldRoundTrip) {
  sim::ScenarioConfig c;
  c.n_obstacles = 12;
  c.n_agents = 3;
  const auto w = sim::World::generate(c, sim::SimMode::kEval, 4);
  const auto layout = io::layout_of(w);
  const auto path = temp_path("world.json");
  io::write_world(path, layout);
  const auto back = io::read_world(path);
  EXPECT_EQ(back.obstacles, layout.obstacles);
  ASSERT_EQ(back.agents.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back.agents[i].start, layout.agents[i].start);
    EXPECT_EQ(back.agents[i].goal, layout.agents[i].goal);
    EXPECT_EQ(back.agents[i].heading, layout.agents[i].heading);
  }
  auto sc = c;
  sc.obstacles = back.obstacles;
  sc.agents = back.agents;
  EXPECT_EQ(sim::World::generate(sc, sim::SimMode::kEval, 0).layout_hash(), w.layout_hash());
  fs::remove(path);
}

TEST(Files, TrajectoryRoundTrip) {
  GoalSeekerPolicy p;
  EvalOptions o;
  o.n_trials = 1;
  o.record_trials = 1;
  const auto res = run_trials(p, straight_line(2), o);
  const auto path = temp_path("traj.jsonl");
  io::write_trajectory(path, res.trajectory);
  EXPECT_EQ(io::read_trajectory(path), res.trajectory);
  fs::remove(path);
}

TEST(Files, MalformedTrajectoryIsLoadError) {
  const auto path = temp_path("bad.jsonl");
  {
    std::ofstream out(path);
    out << "{\"trial\": 0}\nnot json\n";
  }
  EXPECT_THROW(io::read_trajectory(path), LoadError);
  EXPECT_THROW(io::read_trajectory(temp_path("missing.jsonl")), LoadError);
  fs::remove(path);
}

}  // namespace
}  // namespace lstp::eval
