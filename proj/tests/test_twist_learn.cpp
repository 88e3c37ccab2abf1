#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "lips/adam.hpp"
#include "lips/error.hpp"
#include "lips/euler.hpp"
#include "lips/oracle.hpp"
#include "lips/twistnet.hpp"
#include "tiny.hpp"

using namespace lips;

namespace {

StateSpaceSpec random_spec(int d, int V, int F, double p_edge, Rng& rng) {
  std::vector<std::uint8_t> a(std::size_t(d) * d, 0);
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j)
      if (uniform01(rng) < p_edge) a[i * d + j] = a[j * d + i] = 1;
  std::vector<double> xi(std::size_t(d) * F);
  for (auto& x : xi) x = standard_normal(rng);
  return StateSpaceSpec(d, V, a, xi, F);
}

ObservationSequence random_obs(int d, int V, double T, int K, double p_mask, Rng& rng) {
  ObservationSequence o;
  o.d = d;
  o.V = V;
  o.p_mask = p_mask;
  o.delta = 0.1;
  for (int k = 0; k < K; ++k) o.times.push_back(T * (k + 1) / (K + 1) + 0.01 * uniform01(rng));
  for (int k = 0; k < K; ++k) {
    std::vector<int> row(d);
    for (int i = 0; i < d; ++i) row[i] = uniform01(rng) < p_mask ? V : static_cast<int>(rng() % V);
    o.values.push_back(row);
  }
  return o;
}

LatentState random_state(int d, int V, Rng& rng) {
  LatentState z(d);
  for (auto& x : z) x = static_cast<int>(rng() % V);
  return z;
}

// every block non-zero so all gradient paths are exercised
TwistNetParams random_net(int F, int m, std::uint64_t seed) {
  TwistNetParams net = TwistNetParams::init(F, m, seed);
  Rng rng = make_stream(seed, 5);
  for (std::size_t k = net.off_be(); k < net.off_W1(); ++k) net.p[k] = 0.3 * standard_normal(rng);
  for (std::size_t k = net.off_b1(); k < net.size(); ++k) net.p[k] = 0.5 * standard_normal(rng);
  return net;
}

std::vector<SleepSample> sleep_batch(const RateModel& prior, const Params& theta, const InitialDistribution& p0,
                                     const std::vector<double>& tau, double T, double dt, double p_mask,
                                     double delta, int B, Rng& rng) {
  std::vector<SleepSample> out;
  for (int b = 0; b < B; ++b) {
    SleepSample s;
    s.grid = make_grid(T, dt, tau);
    s.path = euler_simulate_grid(prior, theta, p0.sample(rng), s.grid, rng);
    s.obs = sample_observations(s.path, tau, prior.V(), p_mask, delta, rng);
    out.push_back(std::move(s));
  }
  return out;
}

// central differences on every parameter
template <class Loss>
void check_gradient(TwistNetParams net, Loss loss, int min_nonzero, double h = 1e-5) {
  LossResult r = loss(net);
  REQUIRE(r.grad.size() == net.size());
  double worst = 0.0;
  int nonzero = 0;
  for (std::size_t k = 0; k < net.size(); ++k) {
    double keep = net.p[k];
    net.p[k] = keep + h;
    double up = loss(net).loss;
    net.p[k] = keep - h;
    double dn = loss(net).loss;
    net.p[k] = keep;
    double fd = (up - dn) / (2 * h);
    double a = r.grad[k];
    double err = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6});
    if (std::abs(fd) > 1e-8) ++nonzero;
    worst = std::max(worst, err);
  }
  CHECK(worst <= 1e-5);
  CHECK(nonzero >= min_nonzero);
}

}  // namespace

TEST_CASE("context features: sentinels, indicator and shape") {
  auto spec = tiny::pair_spec(3);
  FeatureBuilder fb(spec);
  const int F = fb.dim(), V = 3;
  const int B = (F - 2) / V;
  auto obs = tiny::masked_obs();
  std::vector<double> f;
  fb.build(obs, 2.0, 1.5, false, f);
  REQUIRE(f.size() == std::size_t(2 * V * F));
  CHECK_FALSE(FeatureBuilder::has_future(obs, 1.5, false));
  for (int i = 0; i < 2; ++i)
    for (int v = 0; v < V; ++v) {
      const double* x = f.data() + (i * V + v) * F;
      const double* g = x + v * B;
      CHECK(g[0] == 1.0);
      CHECK(g[1 + V] == 1.0);  // next value: mask
      for (int u = 0; u < V; ++u) CHECK(g[1 + u] == 0.0);
      CHECK(g[B - 6] == 0.0);  // future count
      CHECK(g[B - 1] == doctest::Approx(0.25 * std::log(0.5 + 0.02)));  // sentinel T - t
      CHECK(x[V * B] == 0.0);
    }

  // node 0 observed as value 1 at t = 1, node 1 masked
  auto o2 = obs;
  o2.values = {{2, 3}};
  fb.build(o2, 2.0, 1.0 - 1e-6, false, f);
  for (int v = 0; v < V; ++v) {
    CHECK(f[(0 * V + v) * F + V * B] == (v == 2 ? 1.0 : 0.0));
    CHECK(f[(1 * V + v) * F + V * B] == 0.0);
  }
  // left limit at tau sees the observation, the right limit does not
  fb.build(o2, 2.0, 1.0, true, f);
  CHECK(f[(0 * V + 2) * F + V * B] == 1.0);
  fb.build(o2, 2.0, 1.0, false, f);
  CHECK(f[(0 * V + 2) * F + V * B] == 0.0);

  Rng rng = make_stream(3);
  auto big = random_spec(12, 3, 5, 0.3, rng);
  FeatureBuilder fb2(big);
  CHECK(fb2.dim() == F);
}

TEST_CASE("encoder: zero weights, purity and locality") {
  auto spec = tiny::line_spec(6, 3);
  FeatureBuilder fb(spec);
  Rng rng = make_stream(4);
  auto obs = random_obs(6, 3, 2.0, 3, 0.3, rng);

  TwistNetParams zero(fb.dim(), 8);
  for (int a = 0; a < 8; ++a) zero.p[zero.off_be() + a] = 0.1 * a;
  auto phi0 = encode_context(zero, fb, obs, 2.0, 0.2);
  for (int i = 0; i < 6; ++i)
    for (int v = 0; v < 3; ++v)
      for (int a = 0; a < 8; ++a) CHECK(phi0.at(i, v)[a] == silu(0.1 * a));

  auto net = random_net(fb.dim(), 8, 11);
  auto p1 = encode_context(net, fb, obs, 2.0, 0.2);
  auto p2 = encode_context(net, fb, obs, 2.0, 0.2);
  CHECK(p1.phi == p2.phi);

  // change a future observation of node 2 only: rows of 1, 2, 3 may move
  for (int trial = 0; trial < 20; ++trial) {
    auto o2 = obs;
    int k = static_cast<int>(rng() % 3);
    o2.values[k][2] = (o2.values[k][2] + 1 + static_cast<int>(rng() % 3)) % 4;
    auto q = encode_context(net, fb, o2, 2.0, 0.2);
    for (int i : {0, 4, 5})
      for (int v = 0; v < 3; ++v)
        for (int a = 0; a < 8; ++a) CHECK(q.at(i, v)[a] == p1.at(i, v)[a]);
  }
}

TEST_CASE("twist value: d=1 reduction, sum symmetry, explicit sum") {
  auto net = random_net(7, 5, 2);
  ContextEmbedding phi{1, 2, 5, {}};
  Rng rng = make_stream(6);
  for (int k = 0; k < 10; ++k) phi.phi.push_back(standard_normal(rng));
  CHECK(twist_log_value(net, phi, {1}) == rho(net, phi.at(0, 1)));

  ContextEmbedding p3{3, 2, 5, {}};
  for (int k = 0; k < 30; ++k) p3.phi.push_back(standard_normal(rng));
  // nodes 0 and 2 share rows
  for (int v = 0; v < 2; ++v) std::copy(p3.at(0, v), p3.at(0, v) + 5, const_cast<double*>(p3.at(2, v)));
  CHECK(twist_log_value(net, p3, {0, 1, 1}) == doctest::Approx(twist_log_value(net, p3, {1, 1, 0})).epsilon(1e-14));
  std::vector<double> s(5, 0.0);
  LatentState z{1, 0, 1};
  for (int i = 0; i < 3; ++i)
    for (int a = 0; a < 5; ++a) s[a] += p3.at(i, z[i])[a];
  CHECK(std::abs(twist_log_value(net, p3, z) - rho(net, s.data())) <= 1e-12);
}

TEST_CASE("score table: S-trick equals naive evaluation and is invariant") {
  Rng rng = make_stream(7);
  auto spec = random_spec(32, 3, 16, 5.0 / 31, rng);
  FeatureBuilder fb(spec);
  auto net = random_net(fb.dim(), 64, 3);
  auto obs = random_obs(32, 3, 10.0, 10, 0.5, rng);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    double t = 10.0 * uniform01(rng);
    auto phi = encode_context(net, fb, obs, 10.0, t);
    auto z = random_state(32, 3, rng);
    auto a = twist_score_table(net, phi, z);
    auto b = twist_score_table_naive(net, phi, z);
    for (int i = 0; i < 32; ++i) {
      CHECK(a(i, z[i]) == 0.0);
      for (int v = 0; v < 3; ++v) worst = std::max(worst, std::abs(a(i, v) - b(i, v)));
    }
    // invariance: entry [i][v] is the same at z and z^{i->u}
    for (int k = 0; k < 10; ++k) {
      int i = static_cast<int>(rng() % 32), u = static_cast<int>(rng() % 3), v = static_cast<int>(rng() % 3);
      auto zu = flipped(z, i, u);
      double lhs = twist_log_value(net, phi, flipped(z, i, v)) - twist_log_value(net, phi, z);
      auto tu = twist_score_table(net, phi, zu);
      double rhs = v == u ? 0.0 : tu(i, v);
      double hu = twist_log_value(net, phi, zu) - twist_log_value(net, phi, z);
      CHECK(std::abs(lhs - (rhs + hu)) <= 1e-10);
    }
  }
  CHECK(worst <= 1e-10);

}

TEST_CASE("neural twist evaluator agrees with the score table") {
  Rng rng = make_stream(8);
  auto spec = random_spec(10, 3, 4, 0.3, rng);
  FeatureBuilder fb(spec);
  auto net = random_net(fb.dim(), 6, 4);
  auto obs = random_obs(10, 3, 2.0, 2, 0.3, rng);
  NeuralTwist tw(net, fb, obs, 2.0);
  auto z = random_state(10, 3, rng);
  auto ev = tw.at(0.4);
  auto phi = encode_context(net, fb, obs, 2.0, 0.4);
  CHECK(ev->log_h(z) == doctest::Approx(twist_log_value(net, phi, z)).epsilon(1e-12));
  ScoreTable s(10, 3);
  ev->scores(z, s, nullptr);
  auto ref = twist_score_table(net, phi, z);
  for (int i = 0; i < 10; ++i)
    for (int v = 0; v < 3; ++v) CHECK(std::abs(s(i, v) - ref(i, v)) <= 1e-10);
  // past the last observation the twist is constant
  auto late = tw.at(obs.times.back());
  CHECK(late->log_h(z) == 0.0);
  CHECK(tw.at_left(obs.times.back())->log_h(z) == doctest::Approx(
        twist_log_value(net, encode_context(net, fb, obs, 2.0, obs.times.back(), true), z)));
}

TEST_CASE("sleep loss: single-step hand example") {
  auto spec = StateSpaceSpec::empty_graph(1, 2);
  IndependentFlipModel prior(spec);
  Params th{0.0, 1.0, 1.0, 0.0};
  FeatureBuilder fb(spec);
  TwistNetParams net(fb.dim(), 4);  // all zero: score 1, q0 uniform
  SleepSample s;
  s.grid = {0.0, 0.1};
  s.path.horizon = 0.1;
  s.path.initial = {0};
  s.obs.d = 1;
  s.obs.V = 2;
  s.obs.p_mask = 0.5;
  s.obs.delta = 0.0;
  s.obs.times = {0.1};
  s.obs.values = {{0}};
  auto r = sleep_loss_forward_kl(net, fb, prior, th, {s}, 0.1, 0, nullptr);
  CHECK(r.loss == doctest::Approx(std::log(2.0) + 0.1).epsilon(1e-12));
  CHECK(r.loss == doctest::Approx(0.7931).epsilon(1e-4));
  // with a jump the loss drops the rate term of that coordinate's log score only
  s.path.jumps = {{0.1, 0, 1}};
  r = sleep_loss_forward_kl(net, fb, prior, th, {s}, 0.1, 0, nullptr);
  CHECK(r.loss == doctest::Approx(std::log(2.0) + 0.1).epsilon(1e-12));
}

TEST_CASE("sleep KL gradient matches finite differences") {
  auto spec = tiny::pair_spec(3);
  SirsModel prior(spec);
  FeatureBuilder fb(spec);
  auto p0 = ProductDistribution::iid(2, tiny::sirs_node_p0());
  Rng rng = make_stream(9);
  auto batch = sleep_batch(prior, tiny::sirs_theta(), p0, {0.7, 1.5}, 2.0, 0.1, 0.3, 0.1, 4, rng);
  int jumps = 0;
  for (auto& s : batch) jumps += int(s.path.jumps.size());
  CHECK(jumps > 0);
  auto net = random_net(fb.dim(), 4, 5);
  check_gradient(net, [&](const TwistNetParams& n) {
    return sleep_loss_forward_kl(n, fb, prior, tiny::sirs_theta(), batch, 2.0, 0, nullptr);
  }, int(net.size()) / 2);
}

TEST_CASE("DRE loss: value at zero and gradient") {
  auto spec = tiny::pair_spec(3);
  SirsModel prior(spec);
  FeatureBuilder fb(spec);
  auto p0 = ProductDistribution::iid(2, tiny::sirs_node_p0());
  Rng rng = make_stream(10);
  auto batch = sleep_batch(prior, tiny::sirs_theta(), p0, {0.7, 1.5}, 2.0, 0.1, 0.3, 0.1, 3, rng);
  std::vector<std::vector<double>> times(3, std::vector<double>{0.0, 0.3, 0.9, 1.6});
  TwistNetParams zero(fb.dim(), 4);
  CHECK(dre_loss(zero, fb, batch, 2.0, times).loss == doctest::Approx(2 * std::log(2.0)).epsilon(1e-12));
  auto net = random_net(fb.dim(), 4, 6);
  auto r = dre_loss(net, fb, batch, 2.0, times);
  CHECK(r.loss > 0.0);
  check_gradient(net, [&](const TwistNetParams& n) { return dre_loss(n, fb, batch, 2.0, times); }, int(net.size()) / 4);
  CHECK_THROWS_AS(dre_loss(net, fb, {batch[0]}, 2.0, {times[0]}), Error);
}

TEST_CASE("q0 NLL gradient and uniform default") {
  auto spec = tiny::pair_spec(3);
  SirsModel prior(spec);
  FeatureBuilder fb(spec);
  auto p0 = ProductDistribution::iid(2, tiny::sirs_node_p0());
  Rng rng = make_stream(12);
  auto batch = sleep_batch(prior, tiny::sirs_theta(), p0, {0.7, 1.5}, 2.0, 0.1, 0.3, 0.1, 4, rng);
  TwistNetParams zero(fb.dim(), 4);
  auto q = q0_distribution(zero, fb, batch[0].obs, 2.0);
  for (double p : q.probs()) CHECK(p == doctest::Approx(1.0 / 3));
  auto net = random_net(fb.dim(), 4, 7);
  auto qn = q0_distribution(net, fb, batch[0].obs, 2.0);
  for (int k = 0; k < 50; ++k) {
    auto z = qn.sample(rng);
    double lp = qn.log_pmf(z);
    CHECK(std::isfinite(lp));
  }
  double tot = 0.0;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) tot += std::exp(qn.log_pmf({a, b}));
  CHECK(tot == doctest::Approx(1.0).epsilon(1e-12));
  check_gradient(net, [&](const TwistNetParams& n) { return q0_nll(n, fb, batch, 2.0); }, 40);
}

TEST_CASE("Monte Carlo time estimator is unbiased") {
  auto spec = tiny::pair_spec(3);
  SirsModel prior(spec);
  FeatureBuilder fb(spec);
  auto p0 = ProductDistribution::iid(2, tiny::sirs_node_p0());
  Rng rng = make_stream(13);
  auto batch = sleep_batch(prior, tiny::sirs_theta(), p0, {0.7, 1.5}, 2.0, 0.1, 0.3, 0.1, 1, rng);
  auto net = random_net(fb.dim(), 4, 8);
  const int M = int(batch[0].grid.size()) - 1;
  std::vector<int> all(M);
  for (int j = 0; j < M; ++j) all[j] = j;
  auto full = sleep_loss_steps(net, fb, prior, tiny::sirs_theta(), batch, 2.0, {all}, 1.0, false);
  double mean = 0.0;
  std::vector<double> g(net.size(), 0.0);
  for (int j = 0; j < M; ++j) {
    auto r = sleep_loss_steps(net, fb, prior, tiny::sirs_theta(), batch, 2.0, {{j}}, double(M), false);
    mean += r.loss / M;
    for (std::size_t k = 0; k < g.size(); ++k) g[k] += r.grad[k] / M;
  }
  CHECK(std::abs(mean - full.loss) <= 1e-10);
  for (std::size_t k = 0; k < g.size(); ++k) CHECK(std::abs(g[k] - full.grad[k]) <= 1e-10);
}

TEST_CASE("adam examples") {
  std::vector<double> x{1.0, -2.0};
  AdamState st;
  st.lr = 0.001;
  adam_step(x, {0.0, 0.0}, st);
  CHECK(x == std::vector<double>{1.0, -2.0});
  CHECK(st.step == 1);

  std::vector<double> y{0.0};
  AdamState s1;
  s1.lr = 0.001;
  adam_step(y, {1.0}, s1);
  CHECK(y[0] == doctest::Approx(-0.001).epsilon(1e-6));

  Rng rng = make_stream(14);
  std::vector<double> w(20, 0.0);
  AdamState s2;
  s2.lr = 0.01;
  for (int it = 0; it < 200; ++it) {
    std::vector<double> g(20), before = w;
    for (auto& v : g) v = std::exp(8 * standard_normal(rng)) * (uniform01(rng) < 0.5 ? -1 : 1);
    adam_step(w, g, s2);
    for (int k = 0; k < 20; ++k) CHECK(std::abs(w[k] - before[k]) <= s2.lr * (1 + 1e-6) * 3.0);
  }
  // first steps are bounded by lr exactly
  std::vector<double> u(5, 0.0);
  AdamState s3;
  s3.lr = 0.001;
  adam_step(u, {1e9, -1e-9, 3.0, -7.0, 0.5}, s3);
  for (double v : u) CHECK(std::abs(v) <= 0.001 * (1 + 1e-6));
  CHECK_THROWS_AS(adam_step(u, {NAN, 0, 0, 0, 0}, s3), Error);
  CHECK_THROWS_AS(adam_step(u, {0, 0}, s3), Error);
}

TEST_CASE("q0 concentrates on a point-mass prior") {
  Rng rng = make_stream(15);
  auto spec = random_spec(8, 3, 4, 0.3, rng);
  SirsModel prior(spec);
  FeatureBuilder fb(spec);
  LatentState atom{0, 1, 0, 0, 2, 1, 0, 0};
  auto p0 = ProductDistribution::point_mass(atom, 3);
  Params th{0.01, 0.05, 0.05, 0.01};
  const std::vector<double> tau{0.5, 1.5};
  auto net = TwistNetParams::init(fb.dim(), 8, 1);
  AdamState st;
  st.lr = 0.01;
  for (int it = 0; it < 300; ++it) {
    auto batch = sleep_batch(prior, th, p0, tau, 2.0, 0.1, 0.1, 0.02, 8, rng);
    auto r = sleep_loss_forward_kl(net, fb, prior, th, batch, 2.0, 3, &rng);
    adam_step(net.p, r.grad, st);
  }
  auto batch = sleep_batch(prior, th, p0, tau, 2.0, 0.1, 0.1, 0.02, 25, rng);
  int hits = 0;
  for (auto& s : batch) {
    auto q = q0_distribution(net, fb, s.obs, 2.0);
    for (int i = 0; i < 8; ++i) {
      const double* p = q.probs().data() + 3 * i;
      hits += int(std::max_element(p, p + 3) - p) == atom[i];
    }
  }
  CHECK(hits >= 0.95 * 8 * 25);
}

TEST_CASE("learned scores point toward a noiseless endpoint observation") {
  auto spec = StateSpaceSpec::empty_graph(1, 2);
  IndependentFlipModel prior(spec);
  Params th{0.0, 0.5, 0.5, 0.0};
  FeatureBuilder fb(spec);
  auto p0 = ProductDistribution::iid(1, {0.5, 0.5});
  const double T = 1.0;
  auto net = TwistNetParams::init(fb.dim(), 16, 2);
  AdamState st;
  st.lr = 0.01;
  Rng rng = make_stream(16);
  for (int it = 0; it < 400; ++it) {
    auto batch = sleep_batch(prior, th, p0, {T}, T, 0.05, 0.0, 0.0, 16, rng);
    auto r = sleep_loss_forward_kl(net, fb, prior, th, batch, T, 0, nullptr);
    adam_step(net.p, r.grad, st);
  }
  int agree = 0, total = 0;
  for (int c = 0; c < 2; ++c) {
    ObservationSequence obs;
    obs.d = 1;
    obs.V = 2;
    obs.p_mask = 0.0;
    obs.delta = 0.0;
    obs.times = {T};
    obs.values = {{c}};
    ExactTwist exact(prior, th, obs, T);
    NeuralTwist learned(net, fb, obs, T);
    for (int k = 0; k < 20; ++k) {
      double t = 0.5 * T + 0.5 * T * k / 20.0;
      LatentState z{1 - c};
      ScoreTable a(1, 2), b(1, 2);
      exact.at(t)->scores(z, a, nullptr);
      learned.at(t)->scores(z, b, nullptr);
      ++total;
      agree += (a(0, c) > 0) == (b(0, c) > 0);
    }
  }
  CHECK(agree >= 0.95 * total);
}
