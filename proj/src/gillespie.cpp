#include "lips/gillespie.hpp"

#include <cmath>

#include <fmt/format.h>

#include "lips/error.hpp"

namespace lips {

namespace {

// picks an off-target (i, v) proportionally to its rate; u in [0, total)
void pick_event(const RateField& r, const LatentState& z, double u, int& node, int& value) {
  node = value = -1;
  for (int i = 0; i < r.d(); ++i) {
    const double* row = r.row(i);
    for (int v = 0; v < r.V(); ++v) {
      if (v == z[i] || row[v] <= 0.0) continue;
      node = i;
      value = v;
      if (u < row[v]) return;
      u -= row[v];
    }
  }
}

}  // namespace

PathSample gillespie_simulate(const RateModel& model, const Params& theta, const LatentState& z0,
                              double T, Rng& rng, double bound) {
  model.spec().check_state(z0);
  PathSample path;
  path.horizon = T;
  path.initial = z0;
  LatentState z = z0;
  RateField r(model.d(), model.V());
  double t = 0.0;

  if (model.time_homogeneous()) {
    for (;;) {
      model.fill_rates(t, z, theta, r);
      double lam = total_exit_rate(r);
      if (lam <= 0.0) break;
      t += exponential(rng, lam);
      if (t >= T) break;
      int i, v;
      pick_event(r, z, uniform01(rng) * lam, i, v);
      z[i] = v;
      path.jumps.push_back({t, i, v});
    }
    return path;
  }

  if (bound <= 0.0) bound = model.rate_bound(theta);
  if (bound <= 0.0) throw Error("time-inhomogeneous model needs a total rate bound for thinning");
  for (;;) {
    t += exponential(rng, bound);
    if (t >= T) break;
    model.fill_rates(t, z, theta, r);
    double lam = total_exit_rate(r);
    if (lam > bound * (1.0 + 1e-9))
      throw Error(fmt::format("total rate {} exceeds thinning bound {} at t={}", lam, bound, t));
    double u = uniform01(rng) * bound;
    if (u >= lam) continue;
    int i, v;
    pick_event(r, z, u, i, v);
    if (i < 0) continue;
    z[i] = v;
    path.jumps.push_back({t, i, v});
  }
  return path;
}

double path_log_density(const RateModel& model, const Params& theta, const PathSample& path,
                        const LogPmf& p0_log, double quad_dt, std::string* diag) {
  LatentState z = path.initial;
  double lp = p0_log(z);
  RateField r(model.d(), model.V());
  const bool homog = model.time_homogeneous();

  auto survival = [&](double a, double b) {
    if (b <= a) return 0.0;
    if (homog) {
      model.fill_rates(a, z, theta, r);
      return total_exit_rate(r) * (b - a);
    }
    long n = std::max(1L, static_cast<long>(std::ceil((b - a) / quad_dt)));
    double h = (b - a) / n, s = 0.0;
    for (long k = 0; k < n; ++k) {
      model.fill_rates(a + (k + 0.5) * h, z, theta, r);
      s += total_exit_rate(r) * h;
    }
    return s;
  };

  double t = 0.0;
  for (const Jump& j : path.jumps) {
    lp -= survival(t, j.time);
    t = j.time;
    model.fill_rates(t, z, theta, r);
    double rate = j.value == z[j.node] ? 0.0 : r(j.node, j.value);
    if (!(rate > 0.0)) {
      if (diag)
        *diag = fmt::format("jump to {} at node {} (t={}) has zero rate", j.value, j.node, j.time);
      return -INFINITY;
    }
    lp += std::log(rate);
    z[j.node] = j.value;
  }
  lp -= survival(t, path.horizon);
  return lp;
}

}  // namespace lips
