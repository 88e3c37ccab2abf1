#include "lips/euler.hpp"

#include <cmath>

#include <fmt/format.h>

#include "lips/error.hpp"
#include "lips/path.hpp"

namespace lips {

namespace {

constexpr double kA2Slack = 1e-12;

void check_a2(const RateField& rates, const LatentState& z, double dt) {
  double m = rates.max_exit_rate(z);
  if (dt * m > 1.0 + kA2Slack)
    throw StepSizeError(fmt::format("dt={} violates dt*max exit rate <= 1 (max rate {})", dt, m));
}

}  // namespace

int euler_step_inplace(const RateField& rates, LatentState& z, double dt, Rng& rng) {
  check_a2(rates, z, dt);
  int moved = 0;
  const int V = rates.V();
  for (int i = 0; i < rates.d(); ++i) {
    double u = uniform01(rng);
    const double* r = rates.row(i);
    double leave = dt * -r[z[i]];
    if (u >= leave) continue;
    int pick = -1;
    for (int v = 0; v < V; ++v) {
      if (v == z[i] || r[v] <= 0.0) continue;
      pick = v;
      double p = dt * r[v];
      if (u < p) break;
      u -= p;
    }
    if (pick >= 0) {
      z[i] = pick;
      ++moved;
    }
  }
  return moved;
}

LatentState euler_kernel_sample(const RateField& rates, const LatentState& z, double dt, Rng& rng) {
  LatentState out = z;
  euler_step_inplace(rates, out, dt, rng);
  return out;
}

double euler_kernel_log_pmf(const RateField& rates, const LatentState& z, const LatentState& z_next,
                            double dt) {
  double lp = 0.0;
  for (int i = 0; i < rates.d(); ++i) {
    double p = (z_next[i] == z[i] ? 1.0 : 0.0) + dt * rates(i, z_next[i]);
    if (z_next[i] == z[i] && p < -kA2Slack)
      throw StepSizeError(fmt::format("negative stay probability at node {} (dt={})", i, dt));
    if (p <= 0.0) {
      if (z_next[i] == z[i])
        throw StepSizeError(fmt::format("zero stay probability at node {} (dt={})", i, dt));
      return -INFINITY;
    }
    lp += std::log(p);
  }
  return lp;
}

PathSample euler_simulate_grid(const RateModel& model, const Params& theta, const LatentState& z0,
                               const std::vector<double>& grid, Rng& rng) {
  if (grid.size() < 2 || grid.front() != 0.0) throw Error("Euler grid must start at 0 and have a step");
  PathSample path;
  path.horizon = grid.back();
  path.initial = z0;
  LatentState z = z0;
  RateField r(model.d(), model.V());
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    double t0 = grid[k], t1 = grid[k + 1];
    model.fill_rates(t0, z, theta, r);
    LatentState prev = z;
    euler_step_inplace(r, z, t1 - t0, rng);
    for (int i = 0; i < model.d(); ++i)
      if (z[i] != prev[i]) path.jumps.push_back({t1, i, z[i]});
  }
  return path;
}

PathSample euler_simulate(const RateModel& model, const Params& theta, const LatentState& z0,
                          double T, double dt, Rng& rng) {
  long n = std::max(1L, static_cast<long>(std::ceil(T / dt - 1e-9)));
  std::vector<double> grid(n + 1);
  for (long k = 0; k <= n; ++k) grid[k] = std::min(T, k * dt);
  grid[n] = T;
  return euler_simulate_grid(model, theta, z0, grid, rng);
}

}  // namespace lips
