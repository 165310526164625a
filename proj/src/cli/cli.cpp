#include "lstp/cli.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "lstp/common.hpp"
#include "lstp/error.hpp"
#include "lstp/eval/harness.hpp"
#include "lstp/eval/render.hpp"
#include "lstp/io/config.hpp"
#include "lstp/io/files.hpp"
#include "lstp/sim/observation.hpp"
#include "lstp/train/trainer.hpp"

namespace lstp::cli {
namespace fs = std::filesystem;

namespace {

constexpr const char* kArtifactVersion = "lstp-nav 0.1.0";

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
}

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::string variant;
  std::string reward;
};

void apply(RunConfig& cfg, const Overrides& o) {
  if (o.seed) cfg.train.seed = *o.seed;
  if (o.workers) cfg.train.workers = *o.workers;
  if (!o.variant.empty()) cfg.net.variant = net::parse_variant(o.variant);
  if (!o.reward.empty()) cfg.reward.mode = reward::parse_mode(o.reward);
}

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seed, "Base seed")->envname("LSTP_SEED");
  cmd->add_option("--workers", o.workers, "Worker threads")->envname("LSTP_WORKERS")->check(CLI::PositiveNumber);
  cmd->add_option("--variant", o.variant, "Temporal module")
      ->envname("LSTP_VARIANT")
      ->check(CLI::IsMember({"lstp", "gru", "linear"}));
  cmd->add_option("--reward", o.reward, "Obstacle reward")
      ->envname("LSTP_REWARD")
      ->check(CLI::IsMember({"hs", "conventional"}));
}

struct TrainArgs {
  std::string config;
  std::string out;
  std::optional<std::size_t> iterations;
  Overrides o;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  RunConfig cfg = io::load_config(a.config);
  apply(cfg, a.o);
  if (a.iterations) cfg.train.iterations = *a.iterations;
  cfg.validate();

  const fs::path dir(a.out);
  fs::create_directories(dir);
  const std::string started = timestamp();
  io::write_json(dir / "config.json", io::to_json(cfg));

  std::vector<std::string> checkpoints;
  train::train(cfg, dir, [&](const train::IterationStats& s) {
    out << "iter " << s.iteration << " stage " << s.stage << " reward " << s.mean_reward << " sr " << s.train_sr
        << " L_P " << s.policy_loss << " L_V " << s.value_loss;
    if (s.eval_sr >= 0) out << " eval_sr " << s.eval_sr << " rolling_sr " << s.rolling_sr;
    out << " (" << std::fixed << std::setprecision(1) << s.seconds << " s)" << std::defaultfloat
        << std::setprecision(6) << '\n'
        << std::flush;
  });
  for (const auto& e : fs::directory_iterator(dir / "checkpoints")) {
    checkpoints.push_back((fs::path("checkpoints") / e.path().filename()).string());
  }
  std::sort(checkpoints.begin(), checkpoints.end());
  checkpoints.push_back("final.lstp");

  io::Json m;
  m["artifact_version"] = kArtifactVersion;
  m["command"] = "train";
  m["config"] = "config.json";
  m["seeds"] = {{"base", cfg.train.seed}};
  m["checkpoints"] = checkpoints;
  m["logs"] = {"curves.jsonl"};
  m["started"] = started;
  m["finished"] = timestamp();
  io::write_json(dir / "manifest.json", m);
  out << "wrote " << (dir / "final.lstp").string() << '\n';
  return kOk;
}

struct EvalArgs {
  std::vector<std::string> policies;
  std::string config;
  std::string out;
  std::size_t n_trials = 100;
  bool stochastic = false;
  bool paired = false;
  std::size_t record = 0;
  Overrides o;
};

int cmd_eval(const EvalArgs& a, bool compare, std::ostream& out) {
  RunConfig cfg = io::load_config(a.config);
  apply(cfg, a.o);
  cfg.scenario.validate();
  if (compare && a.policies.size() < 2) throw ContractError("compare needs at least two policies");
  if (!compare && !a.paired && a.policies.size() != 1) {
    throw ContractError("eval takes one policy; use --paired or compare for several");
  }

  std::vector<std::unique_ptr<eval::Policy>> owned;
  std::vector<eval::Policy*> policies;
  for (const auto& spec : a.policies) {
    owned.push_back(eval::load_policy(spec, !a.stochastic));
    policies.push_back(owned.back().get());
  }

  eval::EvalOptions opt;
  opt.n_trials = a.n_trials;
  opt.seed = cfg.train.seed;
  opt.workers = cfg.train.workers;
  opt.record_trials = a.record;
  opt.reward = cfg.reward_for(cfg.scenario);

  std::vector<eval::ComparisonRow> rows;
  std::vector<eval::EvalResult> results;
  for (auto* p : policies) {
    auto res = eval::run_trials(*p, cfg.scenario, opt);
    eval::ComparisonRow row{p->name(), res.metrics, {}};
    for (const auto& t : res.trials) row.world_hashes.push_back(t.world_hash);
    rows.push_back(std::move(row));
    results.push_back(std::move(res));
  }
  if (rows.size() > 1 && !eval::hashes_paired(rows)) throw Error("paired evaluation saw different worlds");

  out << eval::metrics_table(rows);
  if (a.out.empty()) return kOk;

  const fs::path dir(a.out);
  fs::create_directories(dir);
  const std::string started = timestamp();
  io::write_json(dir / "config.json", io::to_json(cfg));
  write_text(dir / "metrics.jsonl", eval::metrics_jsonl(rows));
  write_text(dir / "metrics.txt", eval::metrics_table(rows));
  std::vector<std::string> logs{"metrics.jsonl", "metrics.txt"};
  for (std::size_t p = 0; p < results.size(); ++p) {
    const std::string tag = results.size() == 1 ? "" : "_" + std::to_string(p);
    std::ostringstream trials;
    for (const auto& t : results[p].trials) trials << io::to_json(t).dump() << '\n';
    write_text(dir / ("trials" + tag + ".jsonl"), trials.str());
    logs.push_back("trials" + tag + ".jsonl");
    if (a.record > 0) {
      io::write_trajectory(dir / ("trajectory" + tag + ".jsonl"), results[p].trajectory);
      logs.push_back("trajectory" + tag + ".jsonl");
    }
  }
  for (std::size_t i = 0; i < std::min(a.record, a.n_trials); ++i) {
    const auto world = sim::World::generate(cfg.scenario, sim::SimMode::kEval, eval::trial_seed(opt.seed, i));
    const std::string name = "world_" + std::to_string(i) + ".json";
    io::write_world(dir / name, io::layout_of(world));
    logs.push_back(name);
  }

  io::Json m;
  m["artifact_version"] = kArtifactVersion;
  m["command"] = compare ? "compare" : "eval";
  m["config"] = "config.json";
  m["seeds"] = {{"base", opt.seed}};
  m["checkpoints"] = a.policies;
  m["n_trials"] = a.n_trials;
  m["deterministic"] = !a.stochastic;
  m["logs"] = logs;
  m["started"] = started;
  m["finished"] = timestamp();
  io::write_json(dir / "manifest.json", m);
  return kOk;
}

struct PlotArgs {
  std::string trajectory;
  std::string world;
  std::string out;
  std::optional<std::size_t> trial;
};

int cmd_plot(const PlotArgs& a, std::ostream& out) {
  const auto layout = io::read_world(a.world);
  auto log = io::read_trajectory(a.trajectory);
  if (a.trial) {
    std::erase_if(log, [&](const eval::TrajectoryRecord& r) { return r.trial != *a.trial; });
  }
  const fs::path path(a.out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  eval::write_svg(path, layout, log);
  out << "wrote " << path.string() << '\n';
  return kOk;
}

struct ReplayArgs {
  std::string config;
  std::string policy = "builtin:goal-seeker";
  std::string out;
  std::size_t max_decisions = 5000;
  std::size_t collisions = 1;
  Overrides o;
};

io::Json snapshot_json(const sim::Snapshot& s) {
  return {{"step", s.step}, {"x", s.pos.x},         {"y", s.pos.y},         {"theta", s.heading},
          {"v", s.v_cmd},   {"w", s.w_cmd},         {"v_eff", s.v_eff},     {"w_eff", s.w_eff}};
}

int cmd_inspect_replay(const ReplayArgs& a, std::ostream& out) {
  RunConfig cfg = io::load_config(a.config);
  apply(cfg, a.o);
  cfg.scenario.validate();
  auto policy = eval::load_policy(a.policy, true);
  auto world = sim::World::generate(cfg.scenario, sim::SimMode::kTraining, cfg.train.seed);
  const std::size_t n = world.agents().size();
  std::vector<sim::FrameStack> frames(n, sim::FrameStack(policy->stack()));
  for (std::size_t i = 0; i < n; ++i) frames[i].reset(world.lidar_scan(i));
  std::mt19937_64 rng(derive_seed(cfg.train.seed, 6));
  std::vector<std::mt19937_64*> rngs(n, &rng);

  io::Json events = io::Json::array();
  for (std::size_t d = 0; d < a.max_decisions && events.size() < a.collisions; ++d) {
    std::vector<sim::Observation> obs;
    for (std::size_t i = 0; i < n; ++i) obs.push_back(sim::observe(world, i, frames[i]));
    const auto acts = policy->act(obs, rngs);
    std::vector<sim::Command> cmds;
    for (const auto& u : acts) cmds.push_back({u[0], u[1]});
    std::vector<sim::StepEvent> ev(n);
    for (std::size_t r = 0; r < cfg.scenario.action_repeat; ++r) {
      const auto e = world.step(cmds);
      bool any = false;
      for (std::size_t i = 0; i < n; ++i) {
        ev[i].collided = ev[i].collided || e[i].collided;
        ev[i].arrived = ev[i].arrived || e[i].arrived;
        ev[i].timed_out = ev[i].timed_out || e[i].timed_out;
        any = any || e[i].collided || e[i].arrived || e[i].timed_out;
      }
      if (any) break;
    }
    bool timeout = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (ev[i].collided && events.size() < a.collisions) {
        io::Json rec;
        rec["agent"] = i;
        rec["step"] = world.step_count();
        rec["collision_count"] = world.agent(i).collision_count;
        rec["at_collision"] = snapshot_json(world.agent(i).snapshot(world.step_count()));
        io::Json ring = io::Json::array();
        for (const auto& s : world.history(i)) ring.push_back(snapshot_json(s));
        rec["history"] = ring;
        world.apply_replay(i);
        rec["restored"] = snapshot_json(world.agent(i).snapshot(world.step_count()));
        events.push_back(rec);
        frames[i].reset(world.lidar_scan(i));
      } else if (ev[i].collided) {
        world.apply_replay(i);
        frames[i].reset(world.lidar_scan(i));
      } else if (ev[i].arrived) {
        world.clear_events(i);
        try {
          world.assign_new_goal(i);
        } catch (const InfeasibleScenarioError&) {
          timeout = true;
        }
        frames[i].push(world.lidar_scan(i));
      } else {
        frames[i].push(world.lidar_scan(i));
      }
      timeout = timeout || ev[i].timed_out;
    }
    if (timeout) break;
  }

  io::Json j;
  j["policy"] = policy->name();
  j["seed"] = cfg.train.seed;
  j["replay_steps"] = cfg.scenario.replay_steps;
  j["collisions"] = events;
  if (a.out.empty()) {
    out << j.dump(2) << '\n';
  } else {
    const fs::path path(a.out);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    io::write_json(path, j);
    out << "wrote " << events.size() << " collision record(s) to " << path.string() << '\n';
  }
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Map-free multi-agent navigation: training, evaluation and plotting", "lstp_nav"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Train a policy with PPO and the curriculum");
  train_cmd->add_option("--config", ta.config, "Run config (JSON)")->required()->envname("LSTP_CONFIG");
  train_cmd->add_option("--out", ta.out, "Run directory")->required()->envname("LSTP_OUT");
  train_cmd->add_option("--iterations", ta.iterations, "Override train.iterations");
  add_overrides(train_cmd, ta.o);

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a policy over independent trials");
  auto* cmp_cmd = app.add_subcommand("compare", "Paired evaluation of several policies");
  for (auto* c : {eval_cmd, cmp_cmd}) {
    c->add_option("--policy,--checkpoint", ea.policies, "Checkpoint path or builtin:stationary|builtin:goal-seeker")
        ->required();
    c->add_option("--config", ea.config, "Scenario config (JSON)")->required()->envname("LSTP_CONFIG");
    c->add_option("--out", ea.out, "Output directory")->envname("LSTP_OUT");
    c->add_option("--n-trials", ea.n_trials, "Number of trials")->envname("LSTP_N_TRIALS")->check(CLI::PositiveNumber);
    c->add_flag("--stochastic,!--deterministic", ea.stochastic, "Sample actions instead of using the mean");
    c->add_option("--record", ea.record, "Keep trajectories and world files for the first k trials");
    add_overrides(c, ea.o);
  }
  eval_cmd->add_flag("--paired", ea.paired, "Evaluate several policies on the same worlds");

  PlotArgs pa;
  auto* plot_cmd = app.add_subcommand("plot", "Render a trajectory log over a world as SVG");
  plot_cmd->add_option("--trajectory", pa.trajectory, "Trajectory log (JSON lines)")->required();
  plot_cmd->add_option("--world", pa.world, "World file (JSON)")->required();
  plot_cmd->add_option("--out", pa.out, "Output SVG")->required();
  plot_cmd->add_option("--trial", pa.trial, "Only this trial of the log");

  ReplayArgs ra;
  auto* replay_cmd = app.add_subcommand("inspect-replay", "Dump the history ring around collisions");
  replay_cmd->add_option("--config", ra.config, "Scenario config (JSON)")->required()->envname("LSTP_CONFIG");
  replay_cmd->add_option("--policy", ra.policy, "Checkpoint path or builtin policy");
  replay_cmd->add_option("--out", ra.out, "Output JSON (stdout when absent)");
  replay_cmd->add_option("--max-decisions", ra.max_decisions, "Decision budget");
  replay_cmd->add_option("--collisions", ra.collisions, "Stop after this many collisions");
  add_overrides(replay_cmd, ra.o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(ta, out);
    if (eval_cmd->parsed()) return cmd_eval(ea, false, out);
    if (cmp_cmd->parsed()) return cmd_eval(ea, true, out);
    if (plot_cmd->parsed()) return cmd_plot(pa, out);
    if (replay_cmd->parsed()) return cmd_inspect_replay(ra, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}

}  // namespace lstp::cli
