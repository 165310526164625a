#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "lstp/error.hpp"
#include "lstp/net/lstp_net.hpp"
#include "support.hpp"

namespace {

using namespace lstp;
using namespace lstp::testing;
using net::Bound;
using net::NetConfig;
using net::Variant;
using Vec = std::vector<double>;
using Mat = std::vector<Vec>;  // [T][dim]

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double elu(double x) { return x >= 0 ? x : std::exp(x) - 1.0; }

// y = x W + b for a [in, out] row-major weight.
Vec affine(const Vec& x, const Array<double>& w, const Array<double>* b) {
  const std::size_t in = w.dim(0), out = w.dim(1);
  Vec y(out, 0.0);
  for (std::size_t o = 0; o < out; ++o) {
    double s = b ? (*b)[o] : 0.0;
    for (std::size_t i = 0; i < in; ++i) s += x[i] * w[i * out + o];
    y[o] = s;
  }
  return y;
}

// Step-by-step GRU: r, z, n gates in that column order.
Mat gru_oracle(const NetConfig& cfg, const ParamStore<double>& p, const Mat& seq) {
  Mat in = seq;
  const std::size_t dh = cfg.d_h;
  for (std::size_t l = 0; l < cfg.gru_layers; ++l) {
    const std::string pre = "gru.l" + std::to_string(l) + ".";
    const auto &wih = p.at(pre + "w_ih"), &whh = p.at(pre + "w_hh"), &bih = p.at(pre + "b_ih"),
               &bhh = p.at(pre + "b_hh");
    Vec h(dh, 0.0);
    Mat out;
    for (const Vec& x : in) {
      const Vec gx = affine(x, wih, &bih);
      const Vec gh = affine(h, whh, &bhh);
      Vec next(dh);
      for (std::size_t j = 0; j < dh; ++j) {
        const double r = sig(gx[j] + gh[j]);
        const double z = sig(gx[dh + j] + gh[dh + j]);
        const double n = std::tanh(gx[2 * dh + j] + r * gh[2 * dh + j]);
        next[j] = (1 - z) * n + z * h[j];
      }
      h = next;
      out.push_back(h);
    }
    in = out;
  }
  return in;
}

// Naive per-head attention with the last row as query.
Vec attention_oracle(const NetConfig& cfg, const ParamStore<double>& p, const Mat& h, Mat* weights = nullptr) {
  const std::size_t T = h.size(), dh = cfg.d_h, dk = dh / cfg.heads;
  const auto &wq = p.at("attn.w_q"), &wk = p.at("attn.w_k"), &wv = p.at("attn.w_v"), &wo = p.at("attn.w_o");
  const Vec q = affine(h[T - 1], wq, nullptr);
  Mat k, v;
  for (const auto& row : h) {
    k.push_back(affine(row, wk, nullptr));
    v.push_back(affine(row, wv, nullptr));
  }
  Vec joined(dh, 0.0);
  for (std::size_t head = 0; head < cfg.heads; ++head) {
    Vec score(T);
    double mx = -1e300;
    for (std::size_t t = 0; t < T; ++t) {
      double s = 0;
      for (std::size_t d = 0; d < dk; ++d) s += q[head * dk + d] * k[t][head * dk + d];
      score[t] = s / std::sqrt(static_cast<double>(dk));
      mx = std::max(mx, score[t]);
    }
    double z = 0;
    for (auto& s : score) z += (s = std::exp(s - mx));
    for (auto& s : score) s /= z;
    if (weights) weights->push_back(score);
    for (std::size_t d = 0; d < dk; ++d) {
      double acc = 0;
      for (std::size_t t = 0; t < T; ++t) acc += score[t] * v[t][head * dk + d];
      joined[head * dk + d] = acc;
    }
  }
  return affine(joined, wo, nullptr);
}

Vec encoder_oracle(const ParamStore<double>& p, const Vec& state) {
  Vec u = affine(state, p.at("enc.w"), &p.at("enc.b"));
  for (auto& x : u) x = elu(x) + x;
  return affine(u, p.at("res.w"), &p.at("res.b"));
}

Vec mlp_oracle(const ParamStore<double>& p, const std::string& prefix, std::size_t layers, Vec x) {
  for (std::size_t i = 0; i < layers; ++i) {
    const std::string l = prefix + ".l" + std::to_string(i) + ".";
    x = affine(x, p.at(l + "w"), &p.at(l + "b"));
    for (auto& v : x) v = elu(v);
  }
  return affine(x, p.at(prefix + ".out.w"), &p.at(prefix + ".out.b"));
}

Mat sample_rows(const Array<double>& lidar, std::size_t b) {
  const std::size_t T = lidar.dim(1), n = lidar.dim(2);
  Mat m(T, Vec(n));
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < n; ++i) m[t][i] = lidar[(b * T + t) * n + i];
  return m;
}

Mat graph_rows(const Array<double>& a, std::size_t b) {
  const std::size_t T = a.dim(1), d = a.dim(2);
  Mat m(T, Vec(d));
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < d; ++i) m[t][i] = a[(b * T + t) * d + i];
  return m;
}

TEST(Gru, ZeroWeightsZeroInputGiveZero) {
  auto cfg = tiny_net();
  auto p = net::init_params<double>(cfg, 1);
  for (auto& a : p.arrays()) a.fill(0.0);
  Graph<double> g;
  Bound<double> b(g, p);
  auto h = net::gru_forward(b, cfg, g.constant(Array<double>({2, cfg.stack, cfg.n_laser})));
  for (double x : g.value(h).data()) EXPECT_EQ(x, 0.0);
}

TEST(Gru, MatchesScalarOracle) {
  for (std::size_t T : {std::size_t{1}, std::size_t{5}}) {
    auto cfg = tiny_net();
    cfg.stack = T;
    const auto p = random_params(cfg, 11);
    std::mt19937_64 rng(12);
    auto obs = random_obs(cfg, 3, rng);
    Graph<double> g;
    Bound<double> b(g, p);
    const auto& h = g.value(net::gru_forward(b, cfg, g.constant(obs.lidar)));
    ASSERT_EQ(h.shape(), (tensor::Shape{3, T, cfg.d_h}));
    for (std::size_t s = 0; s < 3; ++s) {
      const auto want = gru_oracle(cfg, p, sample_rows(obs.lidar, s));
      const auto got = graph_rows(h, s);
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t j = 0; j < cfg.d_h; ++j) EXPECT_NEAR(got[t][j], want[t][j], 1e-12);
    }
  }
}

TEST(Gru, WrongShapeRejected) {
  auto cfg = tiny_net();
  const auto p = random_params(cfg, 1);
  Graph<double> g;
  Bound<double> b(g, p);
  EXPECT_THROW(net::gru_forward(b, cfg, g.constant(Array<double>({1, cfg.stack, cfg.n_laser + 1}))), DimensionError);
}

TEST(Attention, MatchesNaiveOracle) {
  auto cfg = tiny_net();
  cfg.stack = 5;
  const auto p = random_params(cfg, 21);
  std::mt19937_64 rng(22);
  auto h = random_array({1, 5, cfg.d_h}, rng);
  Graph<double> g;
  Bound<double> b(g, p);
  auto out = net::attention(b, cfg, g.constant(h));
  Mat w_oracle;
  const auto want = attention_oracle(cfg, p, graph_rows(h, 0), &w_oracle);
  const auto& got = g.value(out.context);
  for (std::size_t j = 0; j < cfg.d_h; ++j) EXPECT_NEAR(got[j], want[j], 1e-12);
  ASSERT_EQ(out.weights.size(), cfg.heads);
  for (std::size_t head = 0; head < cfg.heads; ++head) {
    const auto& w = g.value(out.weights[head]);
    double sum = 0;
    for (std::size_t t = 0; t < 5; ++t) {
      EXPECT_NEAR(w[t], w_oracle[head][t], 1e-12);
      sum += w[t];
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(Attention, SingleFrameAndIdenticalFrames) {
  auto cfg = tiny_net();
  const auto p = random_params(cfg, 31);
  std::mt19937_64 rng(32);
  {
    auto h = random_array({2, 1, cfg.d_h}, rng);
    Graph<double> g;
    Bound<double> b(g, p);
    auto out = net::attention(b, cfg, g.constant(h));
    for (auto w : out.weights)
      for (double x : g.value(w).data()) EXPECT_EQ(x, 1.0);
    const auto want = attention_oracle(cfg, p, graph_rows(h, 1));
    for (std::size_t j = 0; j < cfg.d_h; ++j) EXPECT_NEAR(g.value(out.context)[cfg.d_h + j], want[j], 1e-12);
  }
  {
    auto row = random_array({cfg.d_h}, rng);
    Array<double> h({1, 4, cfg.d_h});
    for (std::size_t t = 0; t < 4; ++t)
      for (std::size_t j = 0; j < cfg.d_h; ++j) h[t * cfg.d_h + j] = row[j];
    Graph<double> g;
    Bound<double> b(g, p);
    auto out = net::attention(b, cfg, g.constant(h));
    for (auto w : out.weights)
      for (double x : g.value(w).data()) EXPECT_NEAR(x, 0.25, 1e-15);
  }
}

TEST(Attention, HeadsMustDivideHiddenSize) {
  auto cfg = tiny_net();
  const auto p = random_params(cfg, 1);
  cfg.heads = 3;
  Graph<double> g;
  Bound<double> b(g, p);
  EXPECT_THROW(net::attention(b, cfg, g.constant(Array<double>({1, 2, cfg.d_h}))), ConfigError);
}

TEST(Encoder, Examples) {
  auto cfg = tiny_net();
  auto p = random_params(cfg, 41);
  std::mt19937_64 rng(42);
  auto state = random_array({3, 4}, rng);
  Graph<double> g;
  Bound<double> b(g, p);
  const auto& s = g.value(net::encode_state(b, cfg, g.constant(state)));
  for (std::size_t r = 0; r < 3; ++r) {
    const auto want = encoder_oracle(p, Vec(state.raw() + 4 * r, state.raw() + 4 * r + 4));
    for (std::size_t j = 0; j < cfg.enc_dim; ++j) EXPECT_NEAR(s[r * cfg.enc_dim + j], want[j], 1e-12);
  }

  p.at("enc.b").fill(0);
  p.at("res.b").fill(0);
  Graph<double> g0;
  Bound<double> b0(g0, p);
  for (double x : g0.value(net::encode_state(b0, cfg, g0.constant(Array<double>({2, 4})))).data()) EXPECT_EQ(x, 0.0);

  // Nonnegative u: S = W_res (2u).
  for (auto& x : p.at("enc.w").data()) x = std::abs(x);
  Array<double> pos({1, 4}, {0.2, 0.4, 0.1, 0.3});
  Graph<double> g1;
  Bound<double> b1(g1, p);
  const auto& s1 = g1.value(net::encode_state(b1, cfg, g1.constant(pos)));
  Vec u = affine(pos.vec(), p.at("enc.w"), nullptr);
  for (auto& x : u) x *= 2;
  const Vec want = affine(u, p.at("res.w"), nullptr);
  for (std::size_t j = 0; j < cfg.enc_dim; ++j) EXPECT_NEAR(s1[j], want[j], 1e-12);
}

struct Oracle {
  Vec mu;
  double value;
};

Oracle forward_oracle(const NetConfig& cfg, const ParamStore<double>& p, const net::ObsBatch<double>& obs,
                      std::size_t b) {
  Mat seq = sample_rows(obs.lidar, b);
  Vec context;
  if (cfg.variant == Variant::kLinear) {
    Mat h;
    for (const auto& x : seq) {
      Vec y = affine(x, p.at("lin.w"), &p.at("lin.b"));
      for (auto& v : y) v = elu(v);
      h.push_back(y);
    }
    context = attention_oracle(cfg, p, h);
  } else {
    Mat h = gru_oracle(cfg, p, seq);
    context = cfg.variant == Variant::kGruOnly ? h.back() : attention_oracle(cfg, p, h);
  }
  const Vec s = encoder_oracle(p, Vec(obs.state.raw() + 4 * b, obs.state.raw() + 4 * b + 4));
  Vec feat = context;
  feat.insert(feat.end(), s.begin(), s.end());
  return {mlp_oracle(p, "actor", cfg.actor_hidden.size(), feat),
          mlp_oracle(p, "critic", cfg.critic_hidden.size(), feat)[0]};
}

TEST(Forward, MatchesComposedOracleForEveryVariant) {
  for (auto v : {Variant::kLstp, Variant::kGruOnly, Variant::kLinear}) {
    auto cfg = tiny_net(v);
    const auto p = random_params(cfg, 51);
    std::mt19937_64 rng(52);
    auto obs = random_obs(cfg, 4, rng);
    const auto outs = net::evaluate(cfg, p, obs);
    for (std::size_t b = 0; b < 4; ++b) {
      const auto want = forward_oracle(cfg, p, obs, b);
      EXPECT_NEAR(outs[b].mu[0], want.mu[0], 1e-10) << net::variant_name(v);
      EXPECT_NEAR(outs[b].mu[1], want.mu[1], 1e-10);
      EXPECT_NEAR(outs[b].value, want.value, 1e-10);
      EXPECT_NEAR(outs[b].sigma[0], 0.5, 1e-15);
    }
  }
}

TEST(Forward, ZeroParamsGiveZeroOutputs) {
  auto cfg = tiny_net();
  auto p = net::init_params<double>(cfg, 3);
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p.name(i) != "log_sigma") p[i].fill(0);
  net::ObsBatch<double> obs{Array<double>({1, cfg.stack, cfg.n_laser}), Array<double>({1, 4})};
  const auto out = net::evaluate(cfg, p, obs)[0];
  EXPECT_EQ(out.mu[0], 0.0);
  EXPECT_EQ(out.mu[1], 0.0);
  EXPECT_EQ(out.value, 0.0);
  EXPECT_DOUBLE_EQ(out.sigma[1], 0.5);
}

TEST(Forward, BatchPermutationPermutesOutputs) {
  auto cfg = tiny_net();
  const auto p = random_params(cfg, 61);
  std::mt19937_64 rng(62);
  auto obs = random_obs(cfg, 3, rng);
  const std::size_t order[3] = {2, 0, 1};
  net::ObsBatch<double> perm{Array<double>(obs.lidar.shape()), Array<double>(obs.state.shape())};
  const std::size_t L = cfg.stack * cfg.n_laser;
  for (std::size_t i = 0; i < 3; ++i) {
    std::copy_n(obs.lidar.raw() + order[i] * L, L, perm.lidar.raw() + i * L);
    std::copy_n(obs.state.raw() + order[i] * 4, 4, perm.state.raw() + i * 4);
  }
  const auto a = net::evaluate(cfg, p, obs);
  const auto b = net::evaluate(cfg, p, perm);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(b[i].mu[0], a[order[i]].mu[0], 1e-12);
    EXPECT_NEAR(b[i].value, a[order[i]].value, 1e-12);
  }
  const auto again = net::evaluate(cfg, p, obs);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(again[i].mu, a[i].mu);
}

TEST(Forward, EncoderPathIdenticalAcrossVariants) {
  std::mt19937_64 rng(71);
  auto base = tiny_net();
  auto obs = random_obs(base, 2, rng);
  std::vector<Array<double>> encodings;
  for (auto v : {Variant::kLstp, Variant::kGruOnly, Variant::kLinear}) {
    auto cfg = tiny_net(v);
    auto p = random_params(cfg, 72);
    std::mt19937_64 r(73);
    for (const char* n : {"enc.w", "enc.b", "res.w", "res.b"}) p.at(n) = random_array(p.at(n).shape(), r);
    Graph<double> g;
    Bound<double> b(g, p);
    encodings.push_back(g.value(net::encode_state(b, cfg, g.constant(obs.state))));
  }
  EXPECT_EQ(encodings[0], encodings[1]);
  EXPECT_EQ(encodings[0], encodings[2]);
}

TEST(Forward, WrongObservationShapeRejected) {
  auto cfg = tiny_net();
  const auto p = random_params(cfg, 1);
  net::ObsBatch<double> bad{Array<double>({1, cfg.stack + 1, cfg.n_laser}), Array<double>({1, 4})};
  EXPECT_THROW(net::evaluate(cfg, p, bad), DimensionError);
}

TEST(Forward, FullNetworkGradientMatchesFiniteDifferences) {
  for (auto v : {Variant::kLstp, Variant::kGruOnly, Variant::kLinear}) {
    auto cfg = tiny_net(v);
    const auto p = random_params(cfg, 81, 0.4);
    std::mt19937_64 rng(82);
    auto obs = random_obs(cfg, 2, rng);
    auto w = random_array({2, 2}, rng);
    ParamStore<double> store = p;
    auto loss_of = [&](const ParamStore<double>& ps, std::vector<Array<double>>* grads) {
      Graph<double> g;
      Bound<double> b(g, ps);
      auto out = net::forward(b, cfg, obs);
      Var l = g.add(g.sum(g.mul(out.mu, g.constant(w))), g.sum(g.mul(out.value, out.value)));
      l = g.add(l, g.sum(out.log_sigma));
      if (grads) *grads = g.backward(l, ps.size());
      return g.value(l).item();
    };
    std::vector<Array<double>> grads;
    loss_of(store, &grads);
    double worst = 0;
    std::mt19937_64 pick(83);
    for (std::size_t i = 0; i < store.size(); ++i) {
      for (std::size_t n = 0; n < std::min<std::size_t>(6, store[i].size()); ++n) {
        const std::size_t k = pick() % store[i].size();
        const double x0 = store[i][k];
        store[i][k] = x0 + 1e-6;
        const double up = loss_of(store, nullptr);
        store[i][k] = x0 - 1e-6;
        const double down = loss_of(store, nullptr);
        store[i][k] = x0;
        const double num = (up - down) / 2e-6;
        const double diff = std::abs(num - grads[i][k]);
        if (diff > 1e-7) worst = std::max(worst, diff / std::max(std::abs(num), std::abs(grads[i][k])));
      }
    }
    EXPECT_LT(worst, 1e-3) << net::variant_name(v);
  }
}

TEST(SampleAction, DeterministicClampAndPeakDensity) {
  std::mt19937_64 rng(1);
  net::PolicyOutput out{{0.5, 0.0}, {0.5, 0.25}, 0.0};
  auto a = net::sample_action(out, rng, true);
  EXPECT_EQ(a.action, (std::array<double, 2>{0.5, 0.0}));
  const double peak = -(std::log(0.5 * std::sqrt(2 * std::numbers::pi)) + std::log(0.25 * std::sqrt(2 * std::numbers::pi)));
  EXPECT_NEAR(a.log_prob, peak, 1e-14);
  out.mu = {2.0, 0.0};
  EXPECT_EQ(net::sample_action(out, rng, true).action, (std::array<double, 2>{1.0, 0.0}));
  out.mu = {-0.3, 9.0};
  EXPECT_EQ(net::sample_action(out, rng, true).action, (std::array<double, 2>{0.0, std::numbers::pi}));
  out.sigma = {0.0, 1.0};
  EXPECT_THROW(net::sample_action(out, rng, false), ContractError);
}

TEST(SampleAction, StochasticLogProbIsOnRawSample) {
  std::mt19937_64 rng(2);
  net::PolicyOutput out{{0.9, -0.2}, {0.6, 0.3}, 0.0};
  double mean0 = 0;
  for (int i = 0; i < 4000; ++i) {
    auto s = net::sample_action(out, rng, false);
    EXPECT_NEAR(s.log_prob, net::gaussian_log_prob(s.raw, out.mu, out.sigma), 1e-12);
    EXPECT_GE(s.action[0], 0.0);
    EXPECT_LE(s.action[0], 1.0);
    mean0 += s.raw[0] / 4000;
  }
  EXPECT_NEAR(mean0, 0.9, 0.05);
}

TEST(InitParams, DeterministicBoundedAndSigmaHalf) {
  net::NetConfig cfg;
  const auto a = net::init_params<float>(cfg, 9);
  const auto b = net::init_params<float>(cfg, 9);
  EXPECT_EQ(a, b);
  EXPECT_FALSE(a == net::init_params<float>(cfg, 10));
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& arr = a[i];
    if (a.name(i) == "log_sigma") {
      for (float x : arr.data()) EXPECT_FLOAT_EQ(std::exp(x), 0.5f);
    } else if (arr.rank() == 2) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(arr.dim(0)));
      for (float x : arr.data()) EXPECT_LE(std::abs(x), bound);
      if (arr.dim(0) == 256) EXPECT_LE(std::abs(arr[0]), 0.0625f);
    } else {
      for (float x : arr.data()) EXPECT_EQ(x, 0.0f);
    }
  }
}

TEST(ParamCount, DefaultLinearAndHeads) {
  net::NetConfig cfg;
  const auto n = net::param_count(cfg);
  EXPECT_EQ(n, 1350789u);
  EXPECT_GE(n, 1000000u);
  EXPECT_LE(n, 1500000u);
  auto lin = cfg;
  lin.variant = Variant::kLinear;
  EXPECT_LT(net::param_count(lin), n);
  auto heads = cfg;
  heads.heads = 8;
  EXPECT_EQ(net::param_count(heads), n);
}

TEST(ParamCount, MatchesShapeDerivation) {
  // GRU: layer 1 3*256*(130+256) + 2*3*256, layer 2 3*256*(256+256) + 2*3*256.
  const std::size_t gru = 3 * 256 * (130 + 256) + 6 * 256 + 3 * 256 * 512 + 6 * 256;
  const std::size_t attn = 4 * 256 * 256;
  const std::size_t enc = 4 * 256 + 256 + 256 * 256 + 256;
  const std::size_t head = 512 * 256 + 256 + 256 * 128 + 128;
  const std::size_t actor = head + 128 * 2 + 2;
  const std::size_t critic = head + 128 + 1;
  EXPECT_EQ(net::param_count(net::NetConfig{}), gru + attn + enc + actor + critic + 2);
}

TEST(LogSigma, ClampedToBounds) {
  auto cfg = tiny_net();
  auto p = net::init_params<double>(cfg, 1);
  p.at("log_sigma") = Array<double>({2}, {-9.0, 4.0});
  net::clamp_log_sigma(cfg, p);
  EXPECT_EQ(p.at("log_sigma").vec(), (std::vector<double>{-5.0, 2.0}));
}

}  // namespace
