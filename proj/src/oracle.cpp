#include "lips/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "lips/error.hpp"
#include "lips/gillespie.hpp"

namespace lips {

namespace {

std::size_t checked_size(int d, int V) {
  double n = std::pow(double(V), double(d));
  if (n > double(kOracleMaxStates))
    throw DimensionError(fmt::format("oracle state space V^d = {}^{} exceeds 2^20", V, d));
  return static_cast<std::size_t>(std::llround(n));
}

std::vector<std::size_t> radix(int d, int V) {
  std::vector<std::size_t> p(d);
  std::size_t x = 1;
  for (int i = 0; i < d; ++i) {
    p[i] = x;
    x *= V;
  }
  return p;
}

// Poisson(k; lam) weights up to 1e-12 tail mass
std::vector<double> poisson_weights(double lam) {
  std::vector<double> w;
  if (lam <= 0.0) return {1.0};
  double cum = 0.0;
  for (int k = 0;; ++k) {
    double lw = -lam + k * std::log(lam) - std::lgamma(k + 1.0);
    double x = std::exp(lw);
    w.push_back(x);
    cum += x;
    if (k > lam && 1.0 - cum <= 1e-12) break;
    if (k > lam + 40.0 * std::sqrt(lam) + 100.0) break;
  }
  return w;
}

// exp(x - shift) entrywise; std::exp keeps exp(-inf) an exact zero
Eigen::VectorXd exp_shifted(const Eigen::VectorXd& x, double shift) {
  Eigen::VectorXd out(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) out[k] = std::exp(x[k] - shift);
  return out;
}

template <class Apply>
Eigen::VectorXd uniformize(const DenseGenerator& g, const Eigen::VectorXd& x, double delta, Apply apply) {
  if (delta < 0.0) throw Error("negative propagation time");
  double q = g.max_exit;
  if (q <= 0.0 || delta == 0.0) return x;
  auto w = poisson_weights(q * delta);
  Eigen::VectorXd term = x, acc = w[0] * x;
  for (std::size_t k = 1; k < w.size(); ++k) {
    term = term + apply(term) / q;
    acc += w[k] * term;
  }
  return acc;
}

}  // namespace

DenseGenerator build_dense_generator(const RateModel& model, const Params& theta, double t) {
  int d = model.d(), V = model.V();
  DenseGenerator g;
  g.d = d;
  g.V = V;
  g.n = checked_size(d, V);
  auto p = radix(d, V);
  std::vector<Eigen::Triplet<double>> trip;
  RateField r(d, V);
  for (std::size_t idx = 0; idx < g.n; ++idx) {
    LatentState z = state_from_index(idx, d, V);
    model.fill_rates(t, z, theta, r);
    double out = 0.0;
    for (int i = 0; i < d; ++i)
      for (int v = 0; v < V; ++v) {
        if (v == z[i] || r(i, v) == 0.0) continue;
        std::size_t j = idx + (std::size_t(v) - std::size_t(z[i])) * p[i];
        trip.emplace_back(static_cast<int>(idx), static_cast<int>(j), r(i, v));
        out += r(i, v);
      }
    if (out > 0.0) trip.emplace_back(static_cast<int>(idx), static_cast<int>(idx), -out);
    g.max_exit = std::max(g.max_exit, out);
  }
  g.Q.resize(static_cast<int>(g.n), static_cast<int>(g.n));
  g.Q.setFromTriplets(trip.begin(), trip.end());
  return g;
}

Eigen::VectorXd propagate_backward(const DenseGenerator& g, const Eigen::VectorXd& h, double delta) {
  return uniformize(g, h, delta, [&](const Eigen::VectorXd& v) -> Eigen::VectorXd { return g.Q * v; });
}

Eigen::VectorXd propagate_forward(const DenseGenerator& g, const Eigen::VectorXd& p, double delta) {
  return uniformize(g, p, delta,
                    [&](const Eigen::VectorXd& v) -> Eigen::VectorXd { return g.Q.transpose() * v; });
}

Eigen::MatrixXd transition_matrix(const DenseGenerator& g, double delta) {
  if (g.n > 4096) throw DimensionError("dense transition matrix limited to 4096 states");
  int n = static_cast<int>(g.n);
  Eigen::MatrixXd P(n, n);
  for (int j = 0; j < n; ++j) P.col(j) = propagate_backward(g, Eigen::VectorXd::Unit(n, j), delta);
  return P;
}

Eigen::VectorXd log_propagate_backward(const DenseGenerator& g, const Eigen::VectorXd& log_h, double delta) {
  double m = -INFINITY;
  for (double x : log_h) m = std::max(m, x);
  if (!std::isfinite(m)) return log_h;
  Eigen::VectorXd h = exp_shifted(log_h, m);
  Eigen::VectorXd out = propagate_backward(g, h, delta);
  Eigen::VectorXd lo(out.size());
  for (Eigen::Index k = 0; k < out.size(); ++k) lo[k] = out[k] > 0.0 ? std::log(out[k]) + m : -INFINITY;
  return lo;
}

std::vector<Potential> observation_potentials(const ObservationSequence& obs, int d, int V) {
  std::size_t n = checked_size(d, V);
  std::vector<Potential> pots;
  for (int k = 0; k < obs.K(); ++k) {
    Potential p{obs.times[k], Eigen::VectorXd(n)};
    for (std::size_t idx = 0; idx < n; ++idx) p.log_g[idx] = obs.log_potential(k, state_from_index(idx, d, V));
    pots.push_back(std::move(p));
  }
  return pots;
}

Eigen::VectorXd product_distribution(const std::vector<double>& node_probs, int d, int V) {
  std::size_t n = checked_size(d, V);
  Eigen::VectorXd p(n);
  for (std::size_t idx = 0; idx < n; ++idx) {
    LatentState z = state_from_index(idx, d, V);
    double x = 1.0;
    for (int i = 0; i < d; ++i) x *= node_probs[std::size_t(i) * V + z[i]];
    p[idx] = x;
  }
  return p;
}

std::vector<double> oracle_grid(double T, double max_rate, const std::vector<double>& times) {
  double dt = max_rate > 0.0 ? std::min(T, 0.1 / max_rate) : T;
  return make_grid(T, dt, times);
}

LookaheadTable exact_lookahead(const RateModel& model, const Params& theta,
                               const std::vector<Potential>& pots, const std::vector<double>& grid) {
  if (grid.empty()) throw Error("empty grid");
  LookaheadTable tab;
  tab.grid = grid;
  std::size_t M = grid.size();
  tab.potential.assign(M, -1);
  for (std::size_t k = 0; k < pots.size(); ++k) {
    auto it = std::min_element(grid.begin(), grid.end(), [&](double a, double b) {
      return std::abs(a - pots[k].time) < std::abs(b - pots[k].time);
    });
    if (std::abs(*it - pots[k].time) > 1e-9)
      throw Error(fmt::format("potential time {} not on the grid", pots[k].time));
    tab.potential[it - grid.begin()] = static_cast<int>(k);
  }
  std::size_t n = checked_size(model.d(), model.V());
  tab.log_h.assign(M, Eigen::VectorXd::Zero(n));
  tab.log_h_left.assign(M, Eigen::VectorXd::Zero(n));
  const bool homog = model.time_homogeneous();
  DenseGenerator g;
  if (homog) g = build_dense_generator(model, theta, 0.0);
  auto left_of = [&](std::size_t j) {
    tab.log_h_left[j] = tab.log_h[j];
    if (tab.potential[j] >= 0) tab.log_h_left[j] += pots[tab.potential[j]].log_g;
  };
  left_of(M - 1);
  for (std::size_t j = M - 1; j-- > 0;) {
    if (!homog) g = build_dense_generator(model, theta, 0.5 * (grid[j] + grid[j + 1]));
    tab.log_h[j] = log_propagate_backward(g, tab.log_h_left[j + 1], grid[j + 1] - grid[j]);
    left_of(j);
  }
  return tab;
}

namespace {

std::vector<double> merged_grid(const std::vector<double>& grid, const ObservationSequence& obs) {
  std::vector<double> g = grid;
  for (double t : obs.times)
    if (t <= grid.back() + 1e-12) g.push_back(t);
  std::sort(g.begin(), g.end());
  std::vector<double> out;
  for (double t : g)
    if (out.empty() || t - out.back() > 1e-9) out.push_back(t);
  return out;
}

}  // namespace

std::vector<Eigen::VectorXd> exact_posterior_marginals(const RateModel& model, const Params& theta,
                                                       const Eigen::VectorXd& p0,
                                                       const ObservationSequence& obs,
                                                       const std::vector<double>& grid) {
  int d = model.d(), V = model.V();
  auto g = merged_grid(grid, obs);
  auto pots = observation_potentials(obs, d, V);
  auto tab = exact_lookahead(model, theta, pots, g);
  const bool homog = model.time_homogeneous();
  DenseGenerator gen;
  if (homog) gen = build_dense_generator(model, theta, 0.0);

  std::vector<Eigen::VectorXd> out;
  Eigen::VectorXd alpha = p0 / p0.sum();
  std::size_t next_out = 0;
  for (std::size_t j = 0; j < g.size(); ++j) {
    if (j > 0) {
      if (!homog) gen = build_dense_generator(model, theta, 0.5 * (g[j - 1] + g[j]));
      alpha = propagate_forward(gen, alpha, g[j] - g[j - 1]);
      if (tab.potential[j] >= 0) {
        const auto& lg = pots[tab.potential[j]].log_g;
        double m = lg.maxCoeff();
        alpha = alpha.cwiseProduct(exp_shifted(lg, m));
      }
      double s = alpha.sum();
      if (!(s > 0.0))
        throw InconsistentObservations(fmt::format("filter mass vanished at t={}", g[j]));
      alpha /= s;
    }
    if (next_out < grid.size() && std::abs(g[j] - grid[next_out]) <= 1e-9) {
      const auto& lh = tab.log_h[j];
      double m = -INFINITY;
      for (Eigen::Index k = 0; k < lh.size(); ++k)
        if (alpha[k] > 0.0) m = std::max(m, lh[k]);
      Eigen::VectorXd post(alpha.size());
      for (Eigen::Index k = 0; k < lh.size(); ++k)
        post[k] = alpha[k] > 0.0 && std::isfinite(lh[k]) ? alpha[k] * std::exp(lh[k] - m) : 0.0;
      double s = post.sum();
      if (!(s > 0.0)) throw InconsistentObservations("observations have zero probability");
      out.push_back(post / s);
      ++next_out;
    }
  }
  return out;
}

double exact_log_marginal_likelihood(const RateModel& model, const Params& theta,
                                     const Eigen::VectorXd& p0, const ObservationSequence& obs,
                                     double T, std::string* diag) {
  if (obs.K() == 0) return 0.0;
  auto pots = observation_potentials(obs, model.d(), model.V());
  double lam = build_dense_generator(model, theta, 0.0).max_exit;
  auto grid = oracle_grid(T, lam, obs.times);
  auto tab = exact_lookahead(model, theta, pots, grid);
  const auto& lh = tab.log_h[0];
  double m = -INFINITY;
  for (Eigen::Index k = 0; k < lh.size(); ++k)
    if (p0[k] > 0.0) m = std::max(m, lh[k]);
  if (!std::isfinite(m)) {
    if (diag) *diag = "observations have zero probability under the model";
    return -INFINITY;
  }
  double s = 0.0;
  for (Eigen::Index k = 0; k < lh.size(); ++k)
    if (p0[k] > 0.0) s += p0[k] * std::exp(lh[k] - m);
  return m + std::log(s);
}

std::vector<double> node_marginals(const Eigen::VectorXd& p, int d, int V) {
  std::vector<double> out(std::size_t(d) * V, 0.0);
  for (Eigen::Index idx = 0; idx < p.size(); ++idx) {
    LatentState z = state_from_index(idx, d, V);
    for (int i = 0; i < d; ++i) out[std::size_t(i) * V + z[i]] += p[idx];
  }
  return out;
}

namespace {

class VectorEval : public TwistEvaluator {
 public:
  VectorEval(Eigen::VectorXd lh, int d, int V) : lh_(std::move(lh)), p_(radix(d, V)), V_(V) {}
  double log_h(const LatentState& z) const override { return lh_[state_index(z, V_)]; }
  void scores(const LatentState& z, ScoreTable& out, const RateField* base) const override {
    std::size_t idx = state_index(z, V_);
    double h0 = lh_[idx];
    for (std::size_t i = 0; i < z.size(); ++i)
      for (int v = 0; v < V_; ++v) {
        if (v == z[i] || (base && (*base)(int(i), v) <= 0.0)) {
          out(int(i), v) = 0.0;
          continue;
        }
        out(int(i), v) = lh_[idx + (std::size_t(v) - std::size_t(z[i])) * p_[i]] - h0;
      }
  }

 private:
  Eigen::VectorXd lh_;
  std::vector<std::size_t> p_;
  int V_;
};

}  // namespace

ExactTwist::ExactTwist(const RateModel& model, const Params& theta, const ObservationSequence& obs,
                       double T, std::vector<double> extra_times)
    : model_(model), theta_(theta), T_(T) {
  if (!model.time_homogeneous()) throw Error("ExactTwist needs a time-homogeneous model");
  gen_ = build_dense_generator(model, theta, 0.0);
  auto times = obs.times;
  times.insert(times.end(), extra_times.begin(), extra_times.end());
  auto grid = oracle_grid(T, gen_.max_exit, times);
  table_ = exact_lookahead(model, theta, observation_potentials(obs, model.d(), model.V()), grid);
}

Eigen::VectorXd ExactTwist::log_h_vector(double t, bool left) const {
  const auto& g = table_.grid;
  auto it = std::lower_bound(g.begin(), g.end(), t - 1e-12);
  if (it == g.end()) return table_.log_h.back();
  std::size_t j = it - g.begin();
  if (std::abs(g[j] - t) <= 1e-12) return left ? table_.log_h_left[j] : table_.log_h[j];
  return log_propagate_backward(gen_, table_.log_h_left[j], g[j] - t);
}

std::unique_ptr<TwistEvaluator> ExactTwist::at(double t) const {
  return std::make_unique<VectorEval>(log_h_vector(t, false), model_.d(), model_.V());
}

std::unique_ptr<TwistEvaluator> ExactTwist::at_left(double t) const {
  return std::make_unique<VectorEval>(log_h_vector(t, true), model_.d(), model_.V());
}

double ExactTwist::doob_rate_bound(int points) const {
  int d = model_.d(), V = model_.V();
  auto p = radix(d, V);
  std::vector<double> ts;
  for (int k = 0; k <= points; ++k) ts.push_back(T_ * k / points);
  for (double t : table_.grid) {
    ts.push_back(t);
    ts.push_back(std::max(0.0, t - 1e-9));
  }
  RateField r(d, V);
  double best = 0.0;
  for (double t : ts) {
    Eigen::VectorXd lh = log_h_vector(t, false);
    for (std::size_t idx = 0; idx < gen_.n; ++idx) {
      if (!std::isfinite(lh[idx])) continue;
      LatentState z = state_from_index(idx, d, V);
      model_.fill_rates(t, z, theta_, r);
      double s = 0.0;
      for (int i = 0; i < d; ++i)
        for (int v = 0; v < V; ++v) {
          if (v == z[i] || r(i, v) <= 0.0) continue;
          s += r(i, v) * std::exp(lh[idx + (std::size_t(v) - std::size_t(z[i])) * p[i]] - lh[idx]);
        }
      best = std::max(best, s);
    }
  }
  return 1.5 * best;
}

EnumeratedDistribution::EnumeratedDistribution(Eigen::VectorXd p, int d, int V)
    : p_(std::move(p)), d_(d), V_(V) {
  if (static_cast<std::size_t>(p_.size()) != checked_size(d, V)) throw DimensionError("distribution size is not V^d");
  double s = p_.sum();
  if (!(s > 0.0)) throw Error("distribution has no mass");
  p_ /= s;
}

double EnumeratedDistribution::log_pmf(const LatentState& z) const {
  return std::log(p_[state_index(z, V_)]);
}

LatentState EnumeratedDistribution::sample(Rng& rng) const {
  int idx = categorical(rng, p_.data(), static_cast<int>(p_.size()));
  return state_from_index(idx, d_, V_);
}

Eigen::VectorXd exact_initial_posterior(const Eigen::VectorXd& p0, const Eigen::VectorXd& lh) {
  double m = -INFINITY;
  for (Eigen::Index k = 0; k < lh.size(); ++k)
    if (p0[k] > 0.0) m = std::max(m, lh[k]);
  if (!std::isfinite(m)) throw InconsistentObservations("observations have zero probability");
  Eigen::VectorXd out(lh.size());
  for (Eigen::Index k = 0; k < lh.size(); ++k)
    out[k] = p0[k] > 0.0 && std::isfinite(lh[k]) ? p0[k] * std::exp(lh[k] - m) : 0.0;
  return out / out.sum();
}

PosteriorSampler::PosteriorSampler(const RateModel& model, const Params& theta, const Eigen::VectorXd& p0,
                                   const ObservationSequence& obs, double T)
    : model_(model),
      theta_(theta),
      twist_(model, theta, obs, T),
      p_star0_(exact_initial_posterior(p0, twist_.table().log_h[0]), model.d(), model.V()),
      T_(T) {
  bound_ = twist_.doob_rate_bound();
  if (bound_ <= 0.0) bound_ = 1e-12;
}

PathSample PosteriorSampler::sample(Rng& rng) const {
  LatentState z0 = p_star0_.sample(rng);
  TwistedRateModel doob(model_, twist_, bound_);
  return gillespie_simulate(doob, theta_, z0, T_, rng, bound_);
}

StepPmfs exact_step_pmfs(const RateModel& model, const Params& theta, const TwistOracle& twist,
                         const ObservationSequence& obs, int obs_k, double t, double dt,
                         const LatentState& z) {
  if (!model.time_homogeneous()) throw Error("exact step pmfs need a time-homogeneous model");
  int d = model.d(), V = model.V();
  std::size_t n = checked_size(d, V);
  RateField r(d, V), q(d, V);
  ScoreTable sc(d, V);
  model.fill_rates(t, z, theta, r);
  auto now = twist.at(t);
  auto next = twist.at(t + dt);
  now->scores(z, sc, &r);
  twist_rate_field_into(r, sc, z, q);
  // row z of exp(Q dt)
  DenseGenerator g = build_dense_generator(model, theta, t);
  Eigen::VectorXd prior = propagate_forward(g, Eigen::VectorXd::Unit(Eigen::Index(n), Eigen::Index(state_index(z, V))), dt);
  StepPmfs out{std::vector<double>(n), std::vector<double>(n)};
  std::vector<double> lp(n);
  double m = -INFINITY;
  for (std::size_t k = 0; k < n; ++k) {
    LatentState y = state_from_index(k, d, V);
    out.q[k] = std::exp(euler_kernel_log_pmf(q, z, y, dt));
    lp[k] = prior[Eigen::Index(k)] > 0.0 ? std::log(prior[Eigen::Index(k)]) + next->log_h(y) : -INFINITY;
    if (obs_k >= 0) lp[k] += obs.log_potential(obs_k, y);
    m = std::max(m, lp[k]);
  }
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) s += out.p[k] = std::exp(lp[k] - m);
  for (double& x : out.p) x /= s;
  return out;
}

void write_marginals_csv(std::ostream& os, const std::vector<double>& grid,
                         const std::vector<Eigen::VectorXd>& marginals) {
  os << "time,state,probability\n";
  for (std::size_t j = 0; j < grid.size(); ++j)
    for (Eigen::Index k = 0; k < marginals[j].size(); ++k)
      os << fmt::format("{},{},{}\n", grid[j], k, marginals[j][k]);
}

}  // namespace lips
