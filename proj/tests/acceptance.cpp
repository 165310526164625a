#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lstp/eval/harness.hpp"
#include "lstp/io/config.hpp"
#include "lstp/net/lstp_net.hpp"
#include "lstp/reward/rewards.hpp"
#include "lstp/sim/world.hpp"
#include "lstp/train/ppo.hpp"
#include "lstp/train/trainer.hpp"
#include "sim_oracles.hpp"
#include "support.hpp"

namespace {

using namespace lstp;
using testing::random_array;
using testing::random_obs;
using testing::random_params;
using testing::tiny_net;
using Clock = std::chrono::steady_clock;
constexpr double kPi = std::numbers::pi;

struct Verdict {
  bool pass = true;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// 1. Gradient integrity

using LossFn = std::function<double(const tensor::ParamStore<double>&, std::vector<tensor::Array<double>>*)>;

std::size_t g_checked = 0;

// Relative error with a 1e-6 denominator floor for near-zero derivatives.
double worst_rel_error(tensor::ParamStore<double> store, const LossFn& loss_of, std::uint64_t seed,
                       std::size_t per_array = 4) {
  std::vector<tensor::Array<double>> grads;
  loss_of(store, &grads);
  std::mt19937_64 pick(seed);
  double worst = 0.0;
  for (std::size_t i = 0; i < store.size(); ++i) {
    if (grads[i].size() == 0) continue;
    for (std::size_t n = 0; n < std::min(per_array, store[i].size()); ++n) {
      const std::size_t k = pick() % store[i].size();
      const double x0 = store[i][k];
      store[i][k] = x0 + 1e-6;
      const double up = loss_of(store, nullptr);
      store[i][k] = x0 - 1e-6;
      const double down = loss_of(store, nullptr);
      store[i][k] = x0;
      const double fd = (up - down) / 2e-6;
      const double diff = std::abs(fd - grads[i][k]);
      worst = std::max(worst, diff / std::max({std::abs(fd), std::abs(grads[i][k]), 1e-6}));
      ++g_checked;
    }
  }
  return worst;
}

// Random linear functional of a graph output, so every output entry carries gradient.
tensor::Var project(tensor::Graph<double>& g, tensor::Var v, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return g.sum(g.mul(v, g.constant(random_array(g.shape(v), rng))));
}

Verdict gradient_integrity() {
  constexpr int kPoints = 20;
  using net::Bound;
  using net::Variant;
  struct Component {
    std::string name;
    Variant variant;
    std::function<tensor::Var(Bound<double>&, const net::NetConfig&, const net::ObsBatch<double>&, std::uint64_t)>
        build;
  };
  const std::vector<Component> components = {
      {"gru", Variant::kLstp,
       [](auto& p, const auto& cfg, const auto& obs, std::uint64_t s) {
         auto& g = p.graph();
         return project(g, net::gru_forward(p, cfg, g.constant(obs.lidar)), s);
       }},
      {"linear_frames", Variant::kLinear,
       [](auto& p, const auto& cfg, const auto& obs, std::uint64_t s) {
         auto& g = p.graph();
         return project(g, net::linear_frames(p, cfg, g.constant(obs.lidar)), s);
       }},
      {"attention", Variant::kLstp,
       [](auto& p, const auto& cfg, const auto& obs, std::uint64_t s) {
         auto& g = p.graph();
         const auto h = net::gru_forward(p, cfg, g.constant(obs.lidar));
         return project(g, net::attention(p, cfg, h).context, s);
       }},
      {"encoder", Variant::kLstp,
       [](auto& p, const auto& cfg, const auto& obs, std::uint64_t s) {
         auto& g = p.graph();
         return project(g, net::encode_state(p, cfg, g.constant(obs.state)), s);
       }},
  };
  std::vector<Component> all = components;
  for (auto v : {Variant::kLstp, Variant::kGruOnly, Variant::kLinear}) {
    all.push_back({"forward/" + std::string(net::variant_name(v)), v,
                   [](auto& p, const auto& cfg, const auto& obs, std::uint64_t s) {
                     auto& g = p.graph();
                     const auto out = net::forward(p, cfg, obs);
                     return g.add(g.add(project(g, out.mu, s), project(g, out.value, s + 1)),
                                  project(g, out.log_sigma, s + 2));
                   }});
  }

  double worst = 0.0;
  std::string worst_name;
  for (const auto& c : all) {
    const auto cfg = tiny_net(c.variant);
    for (int pt = 0; pt < kPoints; ++pt) {
      const std::uint64_t seed = 1000 + 37 * static_cast<std::uint64_t>(pt);
      std::mt19937_64 rng(seed);
      const auto obs = random_obs(cfg, 2, rng);
      const double e = worst_rel_error(
          random_params(cfg, seed, 0.4),
          [&](const tensor::ParamStore<double>& ps, std::vector<tensor::Array<double>>* grads) {
            tensor::Graph<double> g;
            Bound<double> b(g, ps);
            const auto l = c.build(b, cfg, obs, seed + 5);
            if (grads) *grads = g.backward(l, ps.size());
            return g.value(l).item();
          },
          seed + 9, 2);
      if (e > worst) {
        worst = e;
        worst_name = c.name;
      }
    }
  }

  // Full PPO loss, clip radius wide enough that no sample sits on a kink.
  const auto cfg = tiny_net();
  for (int pt = 0; pt < kPoints; ++pt) {
    const std::uint64_t seed = 5000 + 13 * static_cast<std::uint64_t>(pt);
    std::mt19937_64 rng(seed);
    const std::size_t n = 6;
    train::Minibatch<double> mb;
    mb.obs = random_obs(cfg, n, rng);
    mb.raw_actions = random_array({n, 2}, rng);
    mb.old_log_probs = random_array({n}, rng, -3.0, -1.0);
    mb.advantages = random_array({n}, rng);
    mb.returns = random_array({n}, rng);
    mb.old_values = random_array({n}, rng);
    train::LossConfig lc;
    lc.clip = 100.0;
    lc.value_clip = 0.0;
    const double e = worst_rel_error(
        random_params(cfg, seed, 0.3),
        [&](const tensor::ParamStore<double>& ps, std::vector<tensor::Array<double>>* grads) {
          tensor::Graph<double> g;
          net::Bound<double> b(g, ps);
          const auto l = train::ppo_loss(b, cfg, mb, lc);
          if (grads) *grads = g.backward(l.total, ps.size());
          return g.value(l.total).item();
        },
        seed + 9, 2);
    if (e > worst) {
      worst = e;
      worst_name = "ppo_loss";
    }
  }
  return {worst < 1e-3, fmt("max rel err %.2e (%s), %zu derivatives at %d points per component", worst,
                            worst_name.c_str(), g_checked, kPoints)};
}

// 2. GAE oracle

Verdict gae_oracle() {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-2, 2), ug(0.8, 1.0), ul(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> len(1, 64);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = len(rng);
    std::bernoulli_distribution done(ul(rng) * 0.3);
    std::vector<double> r(n), v(n), d(n);
    for (std::size_t t = 0; t < n; ++t) {
      r[t] = u(rng);
      v[t] = u(rng);
      d[t] = done(rng) ? 1.0 : 0.0;
    }
    const double boot = u(rng), gamma = ug(rng), lambda = ul(rng);
    const auto res = train::gae(r, v, d, boot, gamma, lambda);
    for (std::size_t t = 0; t < n; ++t) {
      double want = 0.0, disc = 1.0;
      for (std::size_t l = t; l < n; ++l) {
        const double next = d[l] ? 0.0 : (l + 1 < n ? v[l + 1] : boot);
        want += disc * (r[l] + gamma * next - v[l]);
        if (d[l]) break;
        disc *= gamma * lambda;
      }
      worst = std::max({worst, std::abs(res.advantages[t] - want), std::abs(res.returns[t] - want - v[t])});
    }
  }
  return {worst <= 1e-10, fmt("max abs err %.2e over 1000 sequences", worst)};
}

// 3. PPO loss anchors

Verdict ppo_anchors() {
  using train::policy_term;
  std::vector<std::string> failed;
  auto check = [&](bool ok, const std::string& what) {
    if (!ok) failed.push_back(what);
  };
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int i = 0; i < 100; ++i) {
    const double a = u(rng);
    check(policy_term(1.0, a, 0.2) == -a, "ratio=1");
  }
  const double eps = 0.2;
  check(std::abs(policy_term(1 + 2 * eps, 1.0, eps) - -(1 + eps)) < 1e-12, "A>0 upper clip");
  check(std::abs(policy_term(1 - 2 * eps, 1.0, eps) - -(1 - 2 * eps)) < 1e-12, "A>0 below range");
  check(std::abs(policy_term(1 - 2 * eps, -1.0, eps) - (1 - eps)) < 1e-12, "A<0 lower clip");
  check(std::abs(policy_term(1 + 2 * eps, -1.0, eps) - (1 + 2 * eps)) < 1e-12, "A<0 above range");
  const double ent = train::gaussian_entropy(std::vector<double>{1.0, 1.0});
  check(std::abs(ent - std::log(2 * kPi * std::numbers::e)) < 1e-9, "entropy sigma=1");
  for (int i = 0; i < 20; ++i) {
    const std::vector<double> s{std::exp(u(rng) / 2), std::exp(u(rng) / 2)};
    const double want = std::log(s[0]) + std::log(s[1]) + std::log(2 * kPi * std::numbers::e);
    check(std::abs(train::gaussian_entropy(s) - want) < 1e-9, "entropy random");
  }
  // Graph entropy node against the closed form.
  tensor::Graph<double> g;
  tensor::Array<double> ls({2});
  ls[0] = -0.7;
  ls[1] = 0.3;
  const double ge = g.value(g.gaussian_entropy(g.constant(ls))).item();
  check(std::abs(ge - (-0.4 + std::log(2 * kPi * std::numbers::e))) < 1e-9, "graph entropy");
  std::string detail = failed.empty() ? "ratio=1, 4 clip branches, entropy closed form" : "failed:";
  for (const auto& f : failed) detail += " " + f;
  return {failed.empty(), detail};
}

// 4. Reward properties

Verdict reward_properties() {
  using namespace reward;
  std::vector<std::string> failed;
  auto check = [&](bool ok, const std::string& what) {
    if (!ok) failed.push_back(what);
  };
  RewardConfig c;
  std::vector<double> beams(64);
  for (std::size_t j = 0; j < beams.size(); ++j) beams[j] = -kPi + 2 * kPi * j / (beams.size() - 1);
  c.dt = 0.1;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> uw(-kPi, kPi), uz(0.0, 4.0);
  for (int i = 0; i < 200; ++i) {
    const double omega = uw(rng);
    const auto w = hs_weights(omega, c, beams);
    double sum = 0.0;
    for (double x : w) sum += x;
    check(std::abs(sum - 1.0) < 1e-12, "weights sum");
    const auto peak = std::max_element(w.begin(), w.end()) - w.begin();
    double best = 1e9;
    for (double b : beams) best = std::min(best, std::abs(b - omega * c.dt));
    check(std::abs(std::abs(beams[peak] - omega * c.dt) - best) < 1e-12, "argmax tracks omega dt");
    // Symmetry about omega dt: raw density at omega dt +- delta.
    const double delta = std::abs(uw(rng));
    check(std::abs(hs_raw_weight(omega * c.dt + delta, omega, c) - hs_raw_weight(omega * c.dt - delta, omega, c)) <
              1e-15,
          "symmetry");
    std::vector<double> scan(beams.size());
    for (auto& z : scan) z = uz(rng);
    const double r = obstacle_reward(scan, omega, false, c, beams);
    auto closer = scan;
    closer[rng() % scan.size()] *= 0.5;
    check(obstacle_reward(closer, omega, false, c, beams) <= r, "monotone");
  }
  RewardConfig d;
  check(goal_reward({2.0, 0.0}, {1.5, 0.0}, {0.0, 0.0}, d) == 1.25, "goal 1.25");
  check(std::abs(hs_raw_weight(0.6, 0.1 / d.dt, d) - 0.48394) < 5e-6, "raw 0.48394");
  check(obstacle_reward(std::vector<double>{3.0}, 0.0, false, d, std::vector<double>{0.0}) == -0.5, "single beam");
  check(conventional_obstacle_reward(std::vector<double>{4.0, 1.0, 3.0}, false, d) == -1.5, "min range");
  check(obstacle_reward(std::vector<double>{3.0}, 0.0, true, d, std::vector<double>{0.0}) == -20.0, "collision");
  std::string detail = failed.empty() ? "normalized, symmetric, argmax, monotone, 5 substitution examples" : "failed:";
  for (const auto& f : std::set<std::string>(failed.begin(), failed.end())) detail += " " + f;
  return {failed.empty(), detail};
}

// 5. Simulator fidelity

sim::ScenarioConfig quiet() {
  sim::ScenarioConfig c;
  c.slip_sigma = 0.0;
  c.lidar.noise_sigma = 0.0;
  return c;
}

Verdict simulator_fidelity() {
  using namespace sim;
  std::vector<std::string> failed;
  double lidar_err = 0.0, euler_err = 0.0;

  auto c = quiet();
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    c.arena = seed % 2 ? Arena{8, 8} : Arena{10, 10};
    c.n_obstacles = seed % 2 ? 5 + seed % 11 : 10 + seed % 21;
    c.n_agents = 1 + seed % 4;
    auto w = World::generate(c, SimMode::kEval, seed);
    const auto scan = w.lidar_scan_clean(0);
    for (std::size_t k = 0; k < w.beams().size(); ++k) {
      const double ang = w.agent(0).heading + w.beams()[k];
      lidar_err = std::max(lidar_err, std::abs(scan[k] - testing::raymarch(w, 0, {std::cos(ang), std::sin(ang)})));
    }
  }
  if (!(lidar_err < 2e-4)) failed.push_back("lidar");

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> uv(0, 1), uw(-kPi, kPi);
  for (int trial = 0; trial < 200; ++trial) {
    const double v = uv(rng), w = uw(rng), h0 = uw(rng), dt = 1.0 / 60.0;
    Vec2 p{0, 0};
    double h = h0;
    integrate_unicycle(p, h, v, w, dt);
    double x = 0, y = 0, th = h0;
    const double sub = dt / 1000;
    for (int k = 0; k < 1000; ++k) {
      const double mid = th + 0.5 * w * sub;
      x += v * std::cos(mid) * sub;
      y += v * std::sin(mid) * sub;
      th += w * sub;
    }
    euler_err = std::max({euler_err, std::abs(p.x - x), std::abs(p.y - y)});
  }
  if (!(euler_err < 1e-6)) failed.push_back("unicycle");

  // Replay: drive into the wall, then compare against the snapshot recorded N steps earlier.
  {
    auto w = World::from_layout(quiet(), SimMode::kTraining, 1, {}, {{{7.0, 4.0}, 0.0, {2, 2}}});
    std::vector<Snapshot> recorded{w.agent(0).snapshot(0)};
    std::size_t t = 0;
    while (true) {
      ++t;
      const Command cmd = t <= 646 ? Command{0.0, 0.001 * static_cast<double>(t % 7)} : Command{1.0, 0.0};
      const bool hit = w.step({&cmd, 1})[0].collided;
      recorded.push_back(w.agent(0).snapshot(t));
      if (hit || t > 5000) break;
    }
    const std::size_t n = w.config().replay_steps;
    if (t <= n || n != 300) {
      failed.push_back("replay setup");
    } else {
      w.apply_replay(0);
      const auto& a = w.agent(0);
      const auto& want = recorded[t - n];
      if (!(a.pos == want.pos && a.heading == want.heading && a.v_cmd == want.v_cmd && a.w_cmd == want.w_cmd))
        failed.push_back("replay state");
    }
  }

  // No tunneling: adversarial driving, every penetration must be reported.
  std::size_t steps = 0, missed = 0, detected = 0;
  {
    auto sc = quiet();
    sc.n_obstacles = 15;
    sc.n_agents = 3;
    sc.max_collisions = 1000000;
    for (std::uint64_t seed = 0; steps < 10000; ++seed) {
      auto w = World::generate(sc, SimMode::kTraining, seed);
      for (int s = 0; s < 500 && steps < 10000; ++s, ++steps) {
        std::vector<Command> cmds;
        std::vector<std::pair<Vec2, double>> before;
        for (const auto& a : w.agents()) {
          double best = 1e9, target = a.heading;
          for (const auto& ob : w.obstacles()) {
            const double d = norm(ob.center - a.pos);
            if (d < best) {
              best = d;
              target = std::atan2(ob.center.y - a.pos.y, ob.center.x - a.pos.x);
            }
          }
          cmds.push_back({1.0, std::clamp(wrap_angle(target - a.heading) * 60.0, -kPi, kPi)});
          before.push_back({a.pos, a.heading});
        }
        const auto events = w.step(cmds);
        for (std::size_t i = 0; i < cmds.size(); ++i) {
          bool penetrated = false;
          for (int k = 1; k <= 20; ++k) {
            Vec2 p = before[i].first;
            double h = before[i].second;
            integrate_unicycle(p, h, cmds[i].v, cmds[i].w, sc.dt * k / 20.0);
            if (testing::surface_gap(w, i, p) < 0) penetrated = true;
          }
          if (penetrated && !events[i].collided) ++missed;
          if (events[i].collided) {
            ++detected;
            w.apply_replay(i);
          }
        }
      }
    }
  }
  if (missed > 0 || detected == 0) failed.push_back("tunneling");

  std::string detail = fmt("lidar %.2e m, unicycle %.2e m, %zu adversarial steps, %zu collisions, %zu missed",
                           lidar_err, euler_err, steps, detected, missed);
  for (const auto& f : failed) detail += "; failed " + f;
  return {failed.empty(), detail};
}

// 6. Desk-scale training smoke

struct SmokeRun {
  std::vector<train::IterationStats> stats;
  tensor::ParamStore<float> params;
  double seconds = 0.0;
};

SmokeRun train_smoke(RunConfig cfg, reward::ObstacleRewardMode mode) {
  cfg.reward.mode = mode;
  SmokeRun run;
  const auto t0 = Clock::now();
  train::Trainer trainer(cfg);
  for (std::size_t i = 0; i < cfg.train.iterations; ++i) {
    run.stats.push_back(trainer.iterate());
    const auto& s = run.stats.back();
    std::cerr << "  [" << reward::mode_name(mode) << "] iter " << s.iteration << " reward " << s.mean_reward
              << " sr " << s.train_sr << "\n";
  }
  run.params = trainer.params();
  run.seconds = seconds_since(t0);
  return run;
}

struct SmokeOutcome {
  Verdict verdict;
  std::vector<eval::ComparisonRow> rows;
};

SmokeOutcome training_smoke(const std::filesystem::path& config_path) {
  const auto cfg = io::load_config(config_path);
  const auto hs = train_smoke(cfg, reward::ObstacleRewardMode::kHeadingStability);
  const auto conv = train_smoke(cfg, reward::ObstacleRewardMode::kConventional);

  const double first = hs.stats.front().mean_reward;
  double best = first;
  for (const auto& s : hs.stats)
    if (s.episodes > 0) best = std::max(best, s.mean_reward);

  eval::NetPolicy hs_policy(cfg.net, hs.params, true, "hs");
  eval::NetPolicy conv_policy(cfg.net, conv.params, true, "conventional");
  std::vector<eval::Policy*> policies{&hs_policy, &conv_policy};
  eval::EvalOptions opt;
  opt.n_trials = 100;
  opt.seed = cfg.train.seed;
  opt.workers = cfg.train.workers;
  opt.reward = cfg.reward_for(cfg.scenario);
  auto rows = eval::compare_policies(policies, cfg.scenario, opt);
  const double sr_hs = rows[0].metrics.sr, sr_conv = rows[1].metrics.sr;

  const bool improves = best > first;
  const bool sr_ok = sr_hs >= 0.6;
  const bool ablation_ok = sr_hs >= sr_conv - 0.05;
  const bool budget_ok = hs.seconds <= 1800.0 && conv.seconds <= 1800.0;
  return {{improves && sr_ok && ablation_ok && budget_ok && eval::hashes_paired(rows),
           fmt("reward %.2f -> best %.2f; HS SR %.2f, conventional SR %.2f over 100 paired episodes; "
               "train %.0f s + %.0f s",
               first, best, sr_hs, sr_conv, hs.seconds, conv.seconds)},
          std::move(rows)};
}

// 7. Throughput

Verdict throughput() {
  net::NetConfig cfg;
  const auto params = net::init_params<float>(cfg, 7);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<float> u(0, 1);
  net::ObsBatch<float> obs{tensor::Array<float>({1, cfg.stack, cfg.n_laser}), tensor::Array<float>({1, 4})};
  for (auto& x : obs.lidar.data()) x = u(rng);
  for (auto& x : obs.state.data()) x = u(rng);
  for (int i = 0; i < 20; ++i) net::evaluate(cfg, params, obs);
  std::vector<double> lat;
  const auto t0 = Clock::now();
  while (seconds_since(t0) < 2.0 || lat.size() < 100) {
    const auto t = Clock::now();
    net::evaluate(cfg, params, obs);
    lat.push_back(seconds_since(t) * 1e3);
  }
  const double fps = static_cast<double>(lat.size()) / seconds_since(t0);
  std::sort(lat.begin(), lat.end());
  const double median = lat[lat.size() / 2];
  return {median < 10.0 && fps >= 300.0, fmt("median %.2f ms, %.0f forwards/s (batch 1, default net)", median, fps)};
}

// 8. Parameter count

Verdict parameter_count() {
  const net::NetConfig cfg;
  const std::size_t n = net::param_count(cfg);
  std::size_t by_shape = 0;
  for (const auto& [name, shape] : net::param_shapes(cfg)) {
    std::size_t k = 1;
    for (auto d : shape) k *= d;
    by_shape += k;
  }
  const std::size_t stored = net::init_params<float>(cfg, 0).scalar_count();
  return {n >= 1'000'000 && n <= 1'500'000 && n == by_shape && n == stored,
          fmt("%zu trainable scalars (shapes %zu, allocated %zu)", n, by_shape, stored)};
}

// 9. Metrics algebra

Verdict metrics_algebra(const std::vector<eval::ComparisonRow>& extra_rows) {
  double worst = 0.0;
  bool paired = true;
  std::size_t runs = 0;
  auto check_rows = [&](const std::vector<eval::ComparisonRow>& rows) {
    for (const auto& r : rows) {
      worst = std::max(worst, std::abs(r.metrics.sr + r.metrics.cr + r.metrics.tr - 1.0));
      ++runs;
    }
    paired = paired && eval::hashes_paired(rows);
  };
  eval::StationaryPolicy stationary;
  eval::GoalSeekerPolicy seeker;
  const auto random_net_params = net::init_params<float>(tiny_net(), 3);
  for (std::size_t agents : {1u, 4u, 10u}) {
    auto sc = quiet();
    sc.arena = {10, 10};
    sc.n_agents = agents;
    sc.n_obstacles = 20;
    sc.episode_steps = 600;
    sc.lidar.n_laser = tiny_net().n_laser;
    eval::NetPolicy net_policy(tiny_net(), random_net_params, false, "random-net");
    std::vector<eval::Policy*> policies{&stationary, &seeker, &net_policy};
    eval::EvalOptions opt;
    opt.n_trials = 20;
    opt.seed = agents;
    check_rows(eval::compare_policies(policies, sc, opt));
  }
  if (!extra_rows.empty()) check_rows(extra_rows);
  return {worst <= 1e-9 && paired, fmt("%zu evaluation runs, max |SR+CR+TR-1| = %.1e, hashes %s", runs, worst,
                                       paired ? "paired" : "NOT paired")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks; prints one PASS/FAIL line per criterion"};
  std::string smoke_config = std::string(LSTP_SOURCE_DIR) + "/configs/smoke_stage1.json";
  std::vector<int> only;
  app.add_option("--smoke-config", smoke_config, "Config for the training smoke")->check(CLI::ExistingFile);
  app.add_option("--only", only, "Run only these criteria")->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);

  auto wanted = [&](int k) { return only.empty() || std::ranges::find(only, k) != only.end(); };
  std::vector<eval::ComparisonRow> smoke_rows;
  // Wall-clock budgets in seconds; 0 means the criterion sets none.
  constexpr std::array<double, 9> kBudget = {60, 10, 0, 0, 120, 0, 0, 0, 0};
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"gradient integrity", gradient_integrity},
      {"GAE oracle", gae_oracle},
      {"PPO loss anchors", ppo_anchors},
      {"reward properties", reward_properties},
      {"simulator fidelity", simulator_fidelity},
      {"training smoke",
       [&] {
         auto out = training_smoke(smoke_config);
         smoke_rows = std::move(out.rows);
         return out.verdict;
       }},
      {"throughput", throughput},
      {"parameter count", parameter_count},
      {"metrics algebra", [&] { return metrics_algebra(smoke_rows); }},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int k = static_cast<int>(i) + 1;
    if (!wanted(k)) continue;
    const auto t0 = Clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double took = seconds_since(t0);
    if (kBudget[i] > 0 && took > kBudget[i]) {
      v.pass = false;
      v.detail += fmt("; over the %.0f s budget", kBudget[i]);
    }
    if (!v.pass) ++failures;
    std::cout << (v.pass ? "PASS" : "FAIL") << " " << k << " " << criteria[i].first << ": " << v.detail << " ("
              << fmt("%.1f", took) << " s)" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
