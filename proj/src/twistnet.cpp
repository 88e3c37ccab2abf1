#include "lips/twistnet.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "lips/error.hpp"

namespace lips {

// ---- features ----

FeatureBuilder::FeatureBuilder(const StateSpaceSpec& spec, double expected_degree)
    : d_(spec.d()), V_(spec.V()), deg_scale_(expected_degree > 0.0 ? expected_degree : 1.0) {
  base_ = 1 + 7 * (V_ + 1) + 2 * V_ + 8;
  nbrs_.resize(d_);
  w_.resize(d_);
  wsum_.assign(d_, 0.0);
  wmean_.assign(d_, 0.0);
  wmax_.assign(d_, 0.0);
  for (int i = 0; i < d_; ++i) {
    nbrs_[i] = spec.neighbors(i);
    for (int j : nbrs_[i]) {
      double w = 1.0 / (1.0 + std::exp(-spec.feature_dot(i, j)));
      w_[i].push_back(w);
      wsum_[i] += w;
      wmax_[i] = std::max(wmax_[i], w);
    }
    if (!nbrs_[i].empty()) wmean_[i] = wsum_[i] / nbrs_[i].size();
  }
}

bool FeatureBuilder::has_future(const ObservationSequence& obs, double t, bool inclusive) {
  if (obs.K() == 0) return false;
  double last = obs.times.back();
  return inclusive ? last >= t : last > t;
}

void FeatureBuilder::build(const ObservationSequence& obs, double T, double t, bool inclusive,
                           std::vector<double>& out) const {
  const int K = obs.K(), V = V_, B = base_, F = dim();
  const int none = V;
  out.assign(std::size_t(d_) * V * F, 0.0);
  int k0 = 0;
  while (k0 < K && (inclusive ? obs.times[k0] < t : obs.times[k0] <= t)) ++k0;
  const double sentinel = T - t;

  // next and second-next unmasked value of every node
  std::vector<int> ca(d_, none), cb(d_, none);
  std::vector<double> da(d_, sentinel), db(d_, sentinel);
  for (int i = 0; i < d_; ++i) {
    int found = 0;
    for (int k = k0; k < K && found < 2; ++k) {
      int c = obs.values[k][i];
      if (c == obs.mask()) continue;
      if (found == 0) {
        ca[i] = c;
        da[i] = obs.times[k] - t;
      } else {
        cb[i] = c;
        db[i] = obs.times[k] - t;
      }
      ++found;
    }
  }
  const double dnext = k0 < K ? obs.times[k0] - t : sentinel;
  std::vector<double> g(B);
  for (int i = 0; i < d_; ++i) {
    std::fill(g.begin(), g.end(), 0.0);
    int p = 0;
    g[p++] = 1.0;
    g[p + ca[i]] = 1.0;
    p += V + 1;
    const double dec[3] = {std::exp(-4.0 * da[i]), std::exp(-da[i]), std::exp(-0.25 * da[i])};
    for (int r = 0; r < 3; ++r) {
      g[p + ca[i]] = dec[r];
      p += V + 1;
    }
    g[p + cb[i]] = 1.0;
    p += V + 1;
    g[p + cb[i]] = std::exp(-0.5 * db[i]);
    p += V + 1;
    int cn = k0 < K ? obs.values[k0][i] : none;
    g[p + cn] = 1.0;
    p += V + 1;
    g[p++] = std::exp(-dnext);
    // neighbours' next unmasked values
    double wtot = 0.0;
    for (std::size_t q = 0; q < nbrs_[i].size(); ++q) {
      int j = nbrs_[i][q];
      double w = w_[i][q];
      wtot += w;
      if (ca[j] == none) continue;
      g[p + ca[j]] += w;
      g[p + V + ca[j]] += w * std::exp(-da[j]) / deg_scale_;
    }
    if (wtot > 0.0)
      for (int u = 0; u < V; ++u) g[p + u] /= wtot;
    p += 2 * V;
    g[p++] = T > 0.0 ? t / T : 0.0;
    g[p++] = K > 0 ? double(K - k0) / K : 0.0;
    g[p++] = wsum_[i] / deg_scale_;
    g[p++] = double(nbrs_[i].size()) / deg_scale_;
    g[p++] = wmean_[i];
    g[p++] = wmax_[i];
    g[p++] = 0.25 * std::log(da[i] + 0.02);
    for (int v = 0; v < V; ++v) {
      double* f = out.data() + (std::size_t(i) * V + v) * F;
      std::copy(g.begin(), g.end(), f + std::size_t(v) * B);
      f[V * B] = v == ca[i] ? 1.0 : 0.0;
      f[V * B + 1] = v == cn ? 1.0 : 0.0;
    }
  }
}

// ---- parameters ----

TwistNetParams::TwistNetParams(int F_, int m_) : F(F_), m(m_) {
  p.assign(std::size_t(m) * F + m + std::size_t(m) * m + m + m + 1 + F, 0.0);
}

TwistNetParams TwistNetParams::init(int F, int m, std::uint64_t seed) {
  TwistNetParams net(F, m);
  Rng rng = make_stream(seed, 0x7457, 0);
  double a = 1.0 / std::sqrt(double(F));
  for (std::size_t k = 0; k < std::size_t(m) * F; ++k) net.p[net.off_We() + k] = a * (2.0 * uniform01(rng) - 1.0);
  double b = 1.0 / std::sqrt(double(m));
  for (std::size_t k = 0; k < std::size_t(m) * m; ++k) net.p[net.off_W1() + k] = b * (2.0 * uniform01(rng) - 1.0);
  return net;
}

// ---- forward ----

namespace {

// x = We f + be (pre-activation), skipping zero features
void encoder_pre(const TwistNetParams& net, const double* f, double* x) {
  const int m = net.m, F = net.F;
  const double* We = net.We();
  for (int a = 0; a < m; ++a) x[a] = net.be()[a];
  for (int k = 0; k < F; ++k) {
    double fk = f[k];
    if (fk == 0.0) continue;
    for (int a = 0; a < m; ++a) x[a] += We[std::size_t(a) * F + k] * fk;
  }
}

// y = W1 x
void matvec_W1(const TwistNetParams& net, const double* x, double* y) {
  const int m = net.m;
  const double* W = net.W1();
  for (int a = 0; a < m; ++a) {
    double s = 0.0;
    const double* row = W + std::size_t(a) * m;
    for (int b = 0; b < m; ++b) s += row[b] * x[b];
    y[a] = s;
  }
}

// w2 . silu(u + b1) + b2, where u = W1 s
double rho_from_u(const TwistNetParams& net, const double* u) {
  double s = net.b2();
  const double* b1 = net.b1();
  const double* w2 = net.w2();
  for (int a = 0; a < net.m; ++a) s += w2[a] * silu(u[a] + b1[a]);
  return s;
}

}  // namespace

ContextEmbedding encode_features(const TwistNetParams& net, const std::vector<double>& feats, int d, int V) {
  ContextEmbedding e{d, V, net.m, std::vector<double>(std::size_t(d) * V * net.m)};
  std::vector<double> x(net.m);
  for (int i = 0; i < d; ++i)
    for (int v = 0; v < V; ++v) {
      encoder_pre(net, feats.data() + (std::size_t(i) * V + v) * net.F, x.data());
      double* phi = e.phi.data() + (std::size_t(i) * V + v) * net.m;
      for (int a = 0; a < net.m; ++a) phi[a] = silu(x[a]);
    }
  return e;
}

ContextEmbedding encode_context(const TwistNetParams& net, const FeatureBuilder& fb, const ObservationSequence& obs,
                                double T, double t, bool inclusive) {
  std::vector<double> f;
  fb.build(obs, T, t, inclusive, f);
  return encode_features(net, f, fb.d(), fb.V());
}

double rho(const TwistNetParams& net, const double* s) {
  std::vector<double> u(net.m);
  matvec_W1(net, s, u.data());
  return rho_from_u(net, u.data());
}

double twist_log_value(const TwistNetParams& net, const ContextEmbedding& phi, const LatentState& z) {
  std::vector<double> s(phi.m, 0.0);
  for (int i = 0; i < phi.d; ++i) {
    const double* p = phi.at(i, z[i]);
    for (int a = 0; a < phi.m; ++a) s[a] += p[a];
  }
  return rho(net, s.data());
}

ScoreTable twist_score_table(const TwistNetParams& net, const ContextEmbedding& phi, const LatentState& z) {
  const int m = phi.m;
  std::vector<double> S(m, 0.0), x(m);
  for (int i = 0; i < phi.d; ++i) {
    const double* p = phi.at(i, z[i]);
    for (int a = 0; a < m; ++a) S[a] += p[a];
  }
  double base = rho(net, S.data());
  ScoreTable out(phi.d, phi.V);
  for (int i = 0; i < phi.d; ++i)
    for (int v = 0; v < phi.V; ++v) {
      if (v == z[i]) continue;
      const double* pv = phi.at(i, v);
      const double* pz = phi.at(i, z[i]);
      for (int a = 0; a < m; ++a) x[a] = S[a] + pv[a] - pz[a];
      out(i, v) = rho(net, x.data()) - base;
    }
  return out;
}

ScoreTable twist_score_table_naive(const TwistNetParams& net, const ContextEmbedding& phi, const LatentState& z) {
  double base = twist_log_value(net, phi, z);
  ScoreTable out(phi.d, phi.V);
  for (int i = 0; i < phi.d; ++i)
    for (int v = 0; v < phi.V; ++v)
      if (v != z[i]) out(i, v) = twist_log_value(net, phi, flipped(z, i, v)) - base;
  return out;
}

ProductDistribution q0_distribution(const TwistNetParams& net, const FeatureBuilder& fb,
                                    const ObservationSequence& obs, double T) {
  std::vector<double> f;
  fb.build(obs, T, 0.0, true, f);
  const int d = fb.d(), V = fb.V(), F = net.F;
  std::vector<double> p(std::size_t(d) * V);
  for (int i = 0; i < d; ++i) {
    double mx = -INFINITY;
    for (int v = 0; v < V; ++v) {
      const double* fi = f.data() + (std::size_t(i) * V + v) * F;
      double l = 0.0;
      for (int k = 0; k < F; ++k) l += net.wq()[k] * fi[k];
      p[std::size_t(i) * V + v] = l;
      mx = std::max(mx, l);
    }
    for (int v = 0; v < V; ++v) p[std::size_t(i) * V + v] = std::exp(p[std::size_t(i) * V + v] - mx);
  }
  return ProductDistribution(d, V, p);
}

// ---- neural twist ----

namespace {

class NeuralEval : public TwistEvaluator {
 public:
  NeuralEval(const TwistNetParams& net, const ContextEmbedding& phi) : net_(net), d_(phi.d), V_(phi.V), m_(phi.m) {
    u_.resize(phi.phi.size());
    for (int i = 0; i < d_; ++i)
      for (int v = 0; v < V_; ++v) matvec_W1(net, phi.at(i, v), u_.data() + (std::size_t(i) * V_ + v) * m_);
  }

  double log_h(const LatentState& z) const override {
    std::vector<double> A(m_);
    sum(z, A.data());
    return rho_from_u(net_, A.data());
  }

  void scores(const LatentState& z, ScoreTable& out, const RateField* base) const override {
    std::vector<double> A(m_), x(m_);
    sum(z, A.data());
    double l0 = rho_from_u(net_, A.data());
    for (int i = 0; i < d_; ++i) {
      const double* uz = u(i, z[i]);
      for (int v = 0; v < V_; ++v) {
        out(i, v) = 0.0;
        if (v == z[i] || (base && (*base)(i, v) <= 0.0)) continue;
        const double* uv = u(i, v);
        for (int a = 0; a < m_; ++a) x[a] = A[a] + uv[a] - uz[a];
        out(i, v) = rho_from_u(net_, x.data()) - l0;
      }
    }
  }

 private:
  const double* u(int i, int v) const { return u_.data() + (std::size_t(i) * V_ + v) * m_; }
  void sum(const LatentState& z, double* A) const {
    std::fill(A, A + m_, 0.0);
    for (int i = 0; i < d_; ++i) {
      const double* p = u(i, z[i]);
      for (int a = 0; a < m_; ++a) A[a] += p[a];
    }
  }
  const TwistNetParams& net_;
  int d_, V_, m_;
  std::vector<double> u_;
};

class ZeroEval : public TwistEvaluator {
 public:
  double log_h(const LatentState&) const override { return 0.0; }
  void scores(const LatentState&, ScoreTable& out, const RateField*) const override { out.zero(); }
  bool constant() const override { return true; }
};

}  // namespace

NeuralTwist::NeuralTwist(const TwistNetParams& net, const FeatureBuilder& fb, const ObservationSequence& obs, double T)
    : net_(net), fb_(fb), obs_(obs), T_(T) {}

std::unique_ptr<TwistEvaluator> NeuralTwist::make(double t, bool inclusive) const {
  if (!FeatureBuilder::has_future(obs_, t, inclusive)) return std::make_unique<ZeroEval>();
  return std::make_unique<NeuralEval>(net_, encode_context(net_, fb_, obs_, T_, t, inclusive));
}

std::unique_ptr<TwistEvaluator> NeuralTwist::at(double t) const { return make(t, false); }
std::unique_ptr<TwistEvaluator> NeuralTwist::at_left(double t) const { return make(t, true); }

// ---- losses ----

namespace {

// Gradient accumulation for one context (fixed obs and t): dU holds
// d loss / d U[i][v] where U = W1 Phi; flush() pushes it to W1, We, be.
struct Backprop {
  const TwistNetParams& net;
  const std::vector<double>& feats;
  const ContextEmbedding& phi;
  std::vector<double>& grad;
  std::vector<double> dU;
  std::vector<char> touched;

  Backprop(const TwistNetParams& n, const std::vector<double>& f, const ContextEmbedding& p, std::vector<double>& g)
      : net(n), feats(f), phi(p), grad(g), dU(p.phi.size(), 0.0), touched(std::size_t(p.d) * p.V, 0) {}

  double* du(int i, int v) {
    touched[std::size_t(i) * phi.V + v] = 1;
    return dU.data() + (std::size_t(i) * phi.V + v) * phi.m;
  }

  // head at pre-activation x = u + b1 with upstream c: w2, b1, b2 grads;
  // returns g = c * w2 * silu'(x) into out
  void head(const double* u, double c, double* out) {
    const int m = net.m;
    const double* b1 = net.b1();
    const double* w2 = net.w2();
    for (int a = 0; a < m; ++a) {
      double x = u[a] + b1[a];
      grad[net.off_w2() + a] += c * silu(x);
      double g = c * w2[a] * silu_grad(x);
      grad[net.off_b1() + a] += g;
      out[a] = g;
    }
    grad[net.off_b2()] += c;
  }

  void flush() {
    const int m = net.m, F = net.F, V = phi.V;
    const double* W1 = net.W1();
    std::vector<double> dphi(m), dx(m), x(m);
    for (int i = 0; i < phi.d; ++i)
      for (int v = 0; v < V; ++v) {
        if (!touched[std::size_t(i) * V + v]) continue;
        const double* d = dU.data() + (std::size_t(i) * V + v) * m;
        const double* p = phi.at(i, v);
        // U = W1 phi
        for (int a = 0; a < m; ++a) {
          if (d[a] == 0.0) continue;
          double* gw = grad.data() + net.off_W1() + std::size_t(a) * m;
          for (int b = 0; b < m; ++b) gw[b] += d[a] * p[b];
        }
        std::fill(dphi.begin(), dphi.end(), 0.0);
        for (int a = 0; a < m; ++a) {
          if (d[a] == 0.0) continue;
          const double* row = W1 + std::size_t(a) * m;
          for (int b = 0; b < m; ++b) dphi[b] += row[b] * d[a];
        }
        const double* f = feats.data() + (std::size_t(i) * V + v) * F;
        encoder_pre(net, f, x.data());
        for (int a = 0; a < m; ++a) dx[a] = dphi[a] * silu_grad(x[a]);
        for (int a = 0; a < m; ++a) {
          grad[net.off_be() + a] += dx[a];
          double* gw = grad.data() + net.off_We() + std::size_t(a) * F;
          for (int k = 0; k < F; ++k)
            if (f[k] != 0.0) gw[k] += dx[a] * f[k];
        }
      }
  }
};

std::vector<double> all_u(const TwistNetParams& net, const ContextEmbedding& phi) {
  std::vector<double> u(phi.phi.size());
  for (int i = 0; i < phi.d; ++i)
    for (int v = 0; v < phi.V; ++v)
      matvec_W1(net, phi.at(i, v), u.data() + (std::size_t(i) * phi.V + v) * phi.m);
  return u;
}

void add_q0_nll(const TwistNetParams& net, const FeatureBuilder& fb, const SleepSample& s, double T, double scale,
                LossResult& out) {
  std::vector<double> f;
  fb.build(s.obs, T, 0.0, true, f);
  const int d = fb.d(), V = fb.V(), F = net.F;
  std::vector<double> l(V);
  for (int i = 0; i < d; ++i) {
    double mx = -INFINITY;
    for (int v = 0; v < V; ++v) {
      const double* fi = f.data() + (std::size_t(i) * V + v) * F;
      double x = 0.0;
      for (int k = 0; k < F; ++k) x += net.wq()[k] * fi[k];
      l[v] = x;
      mx = std::max(mx, x);
    }
    double se = 0.0;
    for (int v = 0; v < V; ++v) se += std::exp(l[v] - mx);
    double lse = mx + std::log(se);
    int zi = s.path.initial[i];
    out.loss += scale * (lse - l[zi]);
    for (int v = 0; v < V; ++v) {
      double c = scale * (std::exp(l[v] - lse) - (v == zi ? 1.0 : 0.0));
      const double* fi = f.data() + (std::size_t(i) * V + v) * F;
      for (int k = 0; k < F; ++k) out.grad[net.off_wq() + k] += c * fi[k];
    }
  }
}

}  // namespace

LossResult q0_nll(const TwistNetParams& net, const FeatureBuilder& fb, const std::vector<SleepSample>& batch, double T) {
  LossResult out{0.0, std::vector<double>(net.size(), 0.0)};
  for (const auto& s : batch) add_q0_nll(net, fb, s, T, 1.0 / batch.size(), out);
  return out;
}

LossResult sleep_loss_steps(const TwistNetParams& net, const FeatureBuilder& fb, const RateModel& prior,
                            const Params& theta, const std::vector<SleepSample>& batch, double T,
                            const std::vector<std::vector<int>>& steps, double scale, bool with_q0) {
  LossResult out{0.0, std::vector<double>(net.size(), 0.0)};
  if (batch.empty()) return out;
  const int d = fb.d(), V = fb.V(), m = net.m;
  const double wb = 1.0 / batch.size();
  RateField r(d, V);
  std::vector<double> feats, A(m), x(m), g(m), gA(m);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const SleepSample& s = batch[b];
    if (with_q0) add_q0_nll(net, fb, s, T, wb, out);
    auto states = s.path.states_at(s.grid);
    for (int j : steps[b]) {
      double t = s.grid[j], dt = s.grid[j + 1] - s.grid[j];
      if (!FeatureBuilder::has_future(s.obs, t, false)) continue;
      const LatentState& z = states[j];
      const LatentState& zn = states[j + 1];
      prior.fill_rates(t, z, theta, r);
      fb.build(s.obs, T, t, false, feats);
      ContextEmbedding phi = encode_features(net, feats, d, V);
      std::vector<double> U = all_u(net, phi);
      auto u = [&](int i, int v) { return U.data() + (std::size_t(i) * V + v) * m; };
      std::fill(A.begin(), A.end(), 0.0);
      for (int i = 0; i < d; ++i)
        for (int a = 0; a < m; ++a) A[a] += u(i, z[i])[a];
      double l0 = rho_from_u(net, A.data());
      Backprop bp(net, feats, phi, out.grad);
      double c0 = 0.0;
      std::fill(gA.begin(), gA.end(), 0.0);
      const double w = wb * scale;
      for (int i = 0; i < d; ++i) {
        const double* uz = u(i, z[i]);
        for (int v = 0; v < V; ++v) {
          if (v == z[i]) continue;
          const bool jump = zn[i] == v;
          if (r(i, v) <= 0.0) {
            if (jump) throw Error(fmt::format("sleep path jumps along a zero rate (node {}, t={})", i, t));
            continue;
          }
          const double* uv = u(i, v);
          for (int a = 0; a < m; ++a) x[a] = A[a] + uv[a] - uz[a];
          double lv = rho_from_u(net, x.data());
          double sc = std::exp(lv - l0);
          out.loss += w * (dt * r(i, v) * sc - (jump ? lv - l0 : 0.0));
          double c = w * (dt * r(i, v) * sc - (jump ? 1.0 : 0.0));
          if (c == 0.0) continue;
          c0 -= c;
          bp.head(x.data(), c, g.data());
          double* dv = bp.du(i, v);
          double* dz = bp.du(i, z[i]);
          for (int a = 0; a < m; ++a) {
            dv[a] += g[a];
            dz[a] -= g[a];
            gA[a] += g[a];
          }
        }
      }
      bp.head(A.data(), c0, g.data());
      for (int a = 0; a < m; ++a) gA[a] += g[a];
      for (int i = 0; i < d; ++i) {
        double* dz = bp.du(i, z[i]);
        for (int a = 0; a < m; ++a) dz[a] += gA[a];
      }
      bp.flush();
    }
  }
  return out;
}

LossResult sleep_loss_forward_kl(const TwistNetParams& net, const FeatureBuilder& fb, const RateModel& prior,
                                 const Params& theta, const std::vector<SleepSample>& batch, double T, int mc_steps,
                                 Rng* rng, bool with_q0) {
  std::vector<std::vector<int>> steps(batch.size());
  double scale = 1.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    int M = static_cast<int>(batch[b].grid.size()) - 1;
    if (mc_steps <= 0) {
      for (int j = 0; j < M; ++j) steps[b].push_back(j);
    } else {
      if (!rng) throw Error("Monte Carlo time sampling needs an rng");
      for (int k = 0; k < mc_steps; ++k) steps[b].push_back(static_cast<int>((*rng)() % std::uint64_t(M)));
    }
  }
  if (mc_steps > 0) {
    // every path shares the grid length in practice; scale per path otherwise
    bool same = true;
    for (auto& s : batch) same = same && s.grid.size() == batch[0].grid.size();
    if (!same) {
      LossResult out{0.0, std::vector<double>(net.size(), 0.0)};
      for (std::size_t b = 0; b < batch.size(); ++b) {
        double M = double(batch[b].grid.size() - 1);
        auto part = sleep_loss_steps(net, fb, prior, theta, {batch[b]}, T, {steps[b]}, M / mc_steps, with_q0);
        out.loss += part.loss / batch.size();
        for (std::size_t k = 0; k < out.grad.size(); ++k) out.grad[k] += part.grad[k] / batch.size();
      }
      return out;
    }
    scale = double(batch[0].grid.size() - 1) / mc_steps;
  }
  return sleep_loss_steps(net, fb, prior, theta, batch, T, steps, scale, with_q0);
}

LossResult dre_loss(const TwistNetParams& net, const FeatureBuilder& fb, const std::vector<SleepSample>& batch,
                    double T, const std::vector<std::vector<double>>& times) {
  LossResult out{0.0, std::vector<double>(net.size(), 0.0)};
  const int B = static_cast<int>(batch.size());
  if (B < 2) throw Error("DRE loss needs at least two paths");
  const int d = fb.d(), V = fb.V(), m = net.m;
  int pairs = 0;
  for (int b = 0; b < B; ++b)
    for (double t : times[b])
      if (FeatureBuilder::has_future(batch[b].obs, t, false)) ++pairs;
  if (pairs == 0) return out;
  std::vector<double> feats, A(m), g(m);
  for (int b = 0; b < B; ++b) {
    const SleepSample& pos = batch[b];
    const SleepSample& neg = batch[(b + 1) % B];
    for (double t : times[b]) {
      if (!FeatureBuilder::has_future(pos.obs, t, false)) continue;
      fb.build(pos.obs, T, t, false, feats);
      ContextEmbedding phi = encode_features(net, feats, d, V);
      std::vector<double> U = all_u(net, phi);
      Backprop bp(net, feats, phi, out.grad);
      for (int label = 1; label >= 0; --label) {
        LatentState z = (label ? pos.path : neg.path).state_at(t);
        std::fill(A.begin(), A.end(), 0.0);
        for (int i = 0; i < d; ++i)
          for (int a = 0; a < m; ++a) A[a] += U[(std::size_t(i) * V + z[i]) * m + a];
        double L = rho_from_u(net, A.data());
        double sig = 1.0 / (1.0 + std::exp(-L));
        // softplus(-L) for positives, softplus(L) for negatives
        double sp = label ? std::max(-L, 0.0) + std::log1p(std::exp(-std::abs(L)))
                          : std::max(L, 0.0) + std::log1p(std::exp(-std::abs(L)));
        out.loss += sp / pairs;
        double c = (label ? sig - 1.0 : sig) / pairs;
        bp.head(A.data(), c, g.data());
        for (int i = 0; i < d; ++i) {
          double* dz = bp.du(i, z[i]);
          for (int a = 0; a < m; ++a) dz[a] += g[a];
        }
      }
      bp.flush();
    }
  }
  return out;
}

}  // namespace lips
