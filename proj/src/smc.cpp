#include "lips/smc.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "lips/error.hpp"
#include "lips/parallel.hpp"

namespace lips {

ProductDistribution::ProductDistribution(int d, int V, std::vector<double> probs)
    : d_(d), V_(V), p_(std::move(probs)) {
  if (p_.size() != std::size_t(d) * V) throw DimensionError("product distribution needs d x V probs");
  logp_.resize(p_.size());
  for (int i = 0; i < d; ++i) {
    double s = 0.0;
    for (int v = 0; v < V; ++v) s += p_[std::size_t(i) * V + v];
    if (!(s > 0.0)) throw Error(fmt::format("node {} has no probability mass", i));
    for (int v = 0; v < V; ++v) {
      double& x = p_[std::size_t(i) * V + v];
      x /= s;
      logp_[std::size_t(i) * V + v] = std::log(x);
    }
  }
}

ProductDistribution ProductDistribution::point_mass(const LatentState& z, int V) {
  int d = static_cast<int>(z.size());
  std::vector<double> p(std::size_t(d) * V, 0.0);
  for (int i = 0; i < d; ++i) p[std::size_t(i) * V + z[i]] = 1.0;
  return ProductDistribution(d, V, p);
}

ProductDistribution ProductDistribution::iid(int d, const std::vector<double>& node) {
  int V = static_cast<int>(node.size());
  std::vector<double> p;
  for (int i = 0; i < d; ++i) p.insert(p.end(), node.begin(), node.end());
  return ProductDistribution(d, V, p);
}

ProductDistribution ProductDistribution::restricted_to(const ProductDistribution& other) const {
  if (other.d_ != d_ || other.V_ != V_) throw DimensionError("restricting to a distribution of another shape");
  std::vector<double> p(p_);
  for (std::size_t k = 0; k < p.size(); ++k)
    if (other.p_[k] == 0.0) p[k] = 0.0;
  return ProductDistribution(d_, V_, std::move(p));
}

double ProductDistribution::log_pmf(const LatentState& z) const {
  double s = 0.0;
  for (int i = 0; i < d_; ++i) s += logp_[std::size_t(i) * V_ + z[i]];
  return s;
}

LatentState ProductDistribution::sample(Rng& rng) const {
  LatentState z(d_);
  for (int i = 0; i < d_; ++i) z[i] = categorical(rng, p_.data() + std::size_t(i) * V_, V_);
  return z;
}

double ParticleEnsemble::min_ess() const {
  double m = INFINITY;
  for (auto& e : ess_history) m = std::min(m, e.second);
  return m;
}

double ParticleEnsemble::mean_ess() const {
  if (ess_history.empty()) return 0.0;
  double s = 0.0;
  for (auto& e : ess_history) s += e.second;
  return s / ess_history.size();
}

double log_sum_exp(const std::vector<double>& x) {
  double m = -INFINITY;
  for (double v : x)
    if (v > m) m = v;
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s);
}

double effective_sample_size(const std::vector<double>& lw) {
  double l = log_sum_exp(lw);
  if (!std::isfinite(l)) throw CollapseError("all particle weights are zero");
  double s = 0.0;
  for (double v : lw) {
    double w = std::exp(v - l);
    s += w * w;
  }
  return 1.0 / s;
}

std::vector<int> systematic_resample(const std::vector<double>& lw, double u) {
  double l = log_sum_exp(lw);
  if (!std::isfinite(l)) throw CollapseError("cannot resample: all particle weights are zero");
  int S = static_cast<int>(lw.size());
  // last index <= j with positive weight, so rounding at the top end never
  // selects a zero-weight particle
  std::vector<int> live(S);
  int last = -1;
  for (int s = 0; s < S; ++s) {
    if (lw[s] > -INFINITY) last = s;
    live[s] = last;
  }
  std::vector<int> a(S);
  int j = 0;
  double cum = std::exp(lw[0] - l) * S;
  for (int s = 0; s < S; ++s) {
    double pos = s + u;
    while (pos >= cum && j < S - 1) {
      ++j;
      cum += std::exp(lw[j] - l) * S;
    }
    a[s] = live[j] >= 0 ? live[j] : j;
  }
  return a;
}

std::vector<int> systematic_resample(const std::vector<double>& lw, Rng& rng) {
  return systematic_resample(lw, uniform01(rng));
}

namespace {

struct Stepper {
  const RateModel& prior;
  const Params& theta;
  int d, V;

  // Advances z over [t, t+h] with the twisted Euler kernel, halving the step
  // while A2 fails. Returns log prior kernel - log proposal kernel.
  double advance(LatentState& z, double t, double h, const TwistEvaluator& ev, bool constant,
                 std::vector<Jump>* jumps, Rng& rng, long& extra, int depth) const {
    RateField r(d, V), q(d, V);
    ScoreTable sc(d, V);
    prior.fill_rates(t, z, theta, r);
    const RateField* prop = &r;
    if (!constant) {
      ev.scores(z, sc, &r);
      twist_rate_field_into(r, sc, z, q);
      prop = &q;
    }
    double m = std::max(r.max_exit_rate(z), prop->max_exit_rate(z));
    if (h * m > 1.0) {
      if (depth > 40) throw StepSizeError(fmt::format("step clamp did not converge at t={}", t));
      extra += 1;
      double a = advance(z, t, 0.5 * h, ev, constant, jumps, rng, extra, depth + 1);
      return a + advance(z, t + 0.5 * h, 0.5 * h, ev, constant, jumps, rng, extra, depth + 1);
    }
    double lr = 0.0;
    for (int i = 0; i < d; ++i) {
      const double* pr = prop->row(i);
      const double* br = r.row(i);
      int zi = z[i];
      double u = uniform01(rng);
      double leave = h * -pr[zi];
      int next = zi;
      if (u < leave) {
        for (int v = 0; v < V; ++v) {
          if (v == zi || pr[v] <= 0.0) continue;
          next = v;
          double p = h * pr[v];
          if (u < p) break;
          u -= p;
        }
      }
      if (!constant) {
        if (next == zi)
          lr += std::log1p(h * br[zi]) - std::log1p(h * pr[zi]);
        else
          lr += std::log(br[next]) - std::log(pr[next]);
      }
      if (next != zi) {
        z[i] = next;
        if (jumps) jumps->push_back({t + h, i, next});
      }
    }
    return lr;
  }
};

void normalize(std::vector<double>& lw) {
  double l = log_sum_exp(lw);
  for (double& v : lw) v -= l;
}

}  // namespace

ParticleEnsemble tsmc_run(const RateModel& prior, const Params& theta, const TwistOracle& twist,
                          const InitialDistribution& p0, const InitialDistribution& q0,
                          const ObservationSequence& obs, double T, const SMCConfig& cfg) {
  if (cfg.S < 1) throw Error("SMC needs S >= 1");
  if (!(cfg.dt > 0.0)) throw Error("SMC needs dt > 0");
  const int S = cfg.S, d = prior.d(), V = prior.V();
  ParticleEnsemble ens;
  ens.horizon = T;
  ens.grid = make_grid(T, cfg.dt, obs.times);
  const auto& g = ens.grid;

  std::vector<Rng> rngs;
  rngs.reserve(S);
  for (int s = 0; s < S; ++s) rngs.push_back(make_stream(cfg.seed, 1, s));
  Rng rs_rng = make_stream(cfg.seed, 2, 0);

  auto ev = twist.at(0.0);
  ens.states.resize(S);
  ens.log_weights.resize(S);
  if (cfg.store_paths) ens.paths.resize(S);
  parallel_for(S, [&](std::size_t s) {
    LatentState z = q0.sample(rngs[s]);
    ens.log_weights[s] = p0.log_pmf(z) + ev->log_h(z) - q0.log_pmf(z);
    if (cfg.store_paths) ens.paths[s] = PathSample{T, z, {}};
    ens.states[s] = std::move(z);
  });
  double l0 = log_sum_exp(ens.log_weights);
  if (!std::isfinite(l0)) throw CollapseError("initial weights all zero");
  ens.log_z = l0 - std::log(double(S));
  normalize(ens.log_weights);
  ens.ess_history.emplace_back(0.0, effective_sample_size(ens.log_weights));

  Stepper st{prior, theta, d, V};
  std::vector<double> incr(S);
  std::vector<long> extra(S, 0);
  for (std::size_t j = 0; j + 1 < g.size(); ++j) {
    double ess = effective_sample_size(ens.log_weights);
    if (ess < cfg.ess_threshold * S * (1.0 - 1e-12)) {
      auto anc = systematic_resample(ens.log_weights, rs_rng);
      std::vector<LatentState> ns(S);
      std::vector<PathSample> np(cfg.store_paths ? S : 0);
      for (int s = 0; s < S; ++s) {
        ns[s] = ens.states[anc[s]];
        if (cfg.store_paths) np[s] = ens.paths[anc[s]];
      }
      ens.states.swap(ns);
      ens.paths.swap(np);
      std::fill(ens.log_weights.begin(), ens.log_weights.end(), -std::log(double(S)));
      ens.ancestry.push_back({g[j], std::move(anc)});
    }
    auto ev_next = twist.at(g[j + 1]);
    const bool constant = ev->constant();
    const int k = obs.index_at(g[j + 1]);
    const double h = g[j + 1] - g[j];
    parallel_for(S, [&](std::size_t s) {
      LatentState& z = ens.states[s];
      double before = ev->log_h(z);
      std::vector<Jump>* jumps = cfg.store_paths ? &ens.paths[s].jumps : nullptr;
      double a = st.advance(z, g[j], h, *ev, constant, jumps, rngs[s], extra[s], 0);
      a += ev_next->log_h(z) - before;
      if (k >= 0) a += obs.log_potential(k, z);
      incr[s] = std::isnan(a) ? -INFINITY : a;
    });
    std::vector<double> comb(S);
    for (int s = 0; s < S; ++s) comb[s] = ens.log_weights[s] + incr[s];
    double lz = log_sum_exp(comb);
    if (!std::isfinite(lz))
      throw CollapseError(fmt::format("particle weights collapsed at step {} (t={})", j + 1, g[j + 1]));
    ens.log_z += lz;
    ens.log_weights = std::move(comb);
    normalize(ens.log_weights);
    ens.ess_history.emplace_back(g[j + 1], effective_sample_size(ens.log_weights));
    ev = std::move(ev_next);
  }
  for (long e : extra) ens.substeps += e;
  return ens;
}

ParticleEnsemble bpf_run(const RateModel& prior, const Params& theta, const InitialDistribution& p0,
                         const ObservationSequence& obs, double T, const SMCConfig& cfg) {
  ConstantTwist one;
  return tsmc_run(prior, theta, one, p0, p0, obs, T, cfg);
}

std::vector<std::vector<double>> posterior_marginals_from_ensemble(const ParticleEnsemble& ens,
                                                                   const std::vector<double>& times,
                                                                   int V, double eps) {
  if (ens.paths.empty()) throw Error("ensemble has no stored paths");
  int d = static_cast<int>(ens.paths[0].initial.size());
  std::vector<std::vector<double>> out(times.size(), std::vector<double>(std::size_t(d) * V, 0.0));
  for (int s = 0; s < ens.S(); ++s) {
    double w = std::exp(ens.log_weights[s]);
    if (w == 0.0) continue;
    auto states = ens.paths[s].states_at(times);
    for (std::size_t m = 0; m < times.size(); ++m)
      for (int i = 0; i < d; ++i) out[m][std::size_t(i) * V + states[m][i]] += w;
  }
  for (auto& tab : out)
    for (int i = 0; i < d; ++i) {
      double s = 0.0;
      for (int v = 0; v < V; ++v) s += tab[std::size_t(i) * V + v];
      for (int v = 0; v < V; ++v) {
        double& x = tab[std::size_t(i) * V + v];
        x = (1.0 - eps) * (x / s) + eps / V;
      }
    }
  return out;
}

const PathSample& draw_single_path(const ParticleEnsemble& ens, Rng& rng) {
  if (ens.paths.empty()) throw Error("ensemble has no stored paths");
  std::vector<double> w(ens.S());
  for (int s = 0; s < ens.S(); ++s) w[s] = std::exp(ens.log_weights[s]);
  return ens.paths[categorical(rng, w.data(), ens.S())];
}

}  // namespace lips
