#include "lips/rate_model.hpp"

#include <cmath>

#include <fmt/format.h>

#include "lips/error.hpp"

namespace lips {

RateField RateModel::rates(double t, const LatentState& z, const Params& theta) const {
  RateField out(d(), V());
  fill_rates(t, z, theta, out);
  return out;
}

double RateModel::rate_bound(const Params&) const { return 0.0; }

void RateModel::rate_gradient(double t, const LatentState& z, int i, int v, const Params& theta,
                              double* grad) const {
  RateField rp(d(), V()), rm(d(), V());
  Params th = theta;
  for (int k = 0; k < num_params(); ++k) {
    double h = 1e-6 * std::max(1.0, std::abs(theta[k]));
    th[k] = theta[k] + h;
    fill_rates(t, z, th, rp);
    th[k] = theta[k] - h;
    fill_rates(t, z, th, rm);
    th[k] = theta[k];
    grad[k] = (rp(i, v) - rm(i, v)) / (2 * h);
  }
}

void RateModel::exit_rate_gradient(double t, const LatentState& z, const Params& theta,
                                   double* grad) const {
  int P = num_params();
  std::vector<double> g(P);
  for (int k = 0; k < P; ++k) grad[k] = 0.0;
  RateField r(d(), V());
  fill_rates(t, z, theta, r);
  for (int i = 0; i < d(); ++i)
    for (int v = 0; v < V(); ++v) {
      if (v == z[i] || r(i, v) == 0.0) continue;
      rate_gradient(t, z, i, v, theta, g.data());
      for (int k = 0; k < P; ++k) grad[k] += g[k];
    }
}

void check_step_size(const RateModel& model, const Params& theta, double dt) {
  double b = model.local_rate_bound(theta);
  if (b <= 0.0) return;
  if (dt * b > 1.0)
    throw StepSizeError(fmt::format("dt={} exceeds 1/max local rate ({})", dt, 1.0 / b));
}

namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void check_theta(const Params& theta, int n, const char* name) {
  if (static_cast<int>(theta.size()) != n)
    throw DimensionError(fmt::format("{} expects {} parameters, got {}", name, n, theta.size()));
}

}  // namespace

SirsModel::SirsModel(StateSpaceSpec spec) : RateModel(std::move(spec)) {
  if (V() != 3) throw DimensionError("SIRS needs V=3");
  const StateSpaceSpec& sp = this->spec();
  w_.resize(d());
  for (int i = 0; i < d(); ++i)
    for (int j : sp.neighbors(i)) w_[i].push_back(logistic(sp.feature_dot(i, j)));
}

std::vector<std::string> SirsModel::param_names() const {
  return {"alpha0", "alpha1", "beta", "gamma"};
}

double SirsModel::infection_pressure(int i, const LatentState& z) const {
  const auto& nb = spec().neighbors(i);
  double s = 0.0;
  for (std::size_t k = 0; k < nb.size(); ++k)
    if (z[nb[k]] == I) s += w_[i][k];
  return s;
}

double SirsModel::weight_sum(int i) const {
  double s = 0.0;
  for (double w : w_[i]) s += w;
  return s;
}

void SirsModel::fill_rates(double, const LatentState& z, const Params& theta, RateField& out) const {
  check_theta(theta, 4, "SIRS");
  spec().check_state(z);
  if (out.d() != d() || out.V() != 3) out.resize(d(), 3);
  for (int i = 0; i < d(); ++i) {
    double* r = out.row(i);
    r[S] = r[I] = r[R] = 0.0;
    switch (z[i]) {
      case S:
        r[I] = theta[0] + theta[1] * infection_pressure(i, z);
        r[S] = -r[I];
        break;
      case I:
        r[R] = theta[2];
        r[I] = -r[R];
        break;
      default:
        r[S] = theta[3];
        r[R] = -r[S];
    }
  }
}

double SirsModel::local_rate_bound(const Params& theta) const {
  double wmax = 0.0;
  for (int i = 0; i < d(); ++i) wmax = std::max(wmax, weight_sum(i));
  return std::max({theta[0] + theta[1] * wmax, theta[2], theta[3]});
}

double SirsModel::rate_bound(const Params& theta) const {
  double s = 0.0;
  for (int i = 0; i < d(); ++i)
    s += std::max({theta[0] + theta[1] * weight_sum(i), theta[2], theta[3]});
  return s;
}

void SirsModel::rate_gradient(double, const LatentState& z, int i, int v, const Params&,
                              double* grad) const {
  grad[0] = grad[1] = grad[2] = grad[3] = 0.0;
  if (z[i] == S && v == I) {
    grad[0] = 1.0;
    grad[1] = infection_pressure(i, z);
  } else if (z[i] == I && v == R) {
    grad[2] = 1.0;
  } else if (z[i] == R && v == S) {
    grad[3] = 1.0;
  }
}

void SirsModel::exit_rate_gradient(double, const LatentState& z, const Params&, double* grad) const {
  grad[0] = grad[1] = grad[2] = grad[3] = 0.0;
  for (int i = 0; i < d(); ++i) {
    if (z[i] == S) {
      grad[0] += 1.0;
      grad[1] += infection_pressure(i, z);
    } else if (z[i] == I) {
      grad[2] += 1.0;
    } else {
      grad[3] += 1.0;
    }
  }
}

ContactModel::ContactModel(StateSpaceSpec spec) : RateModel(std::move(spec)) {
  if (V() != 2) throw DimensionError("contact process needs V=2");
}

std::vector<std::string> ContactModel::param_names() const { return {"alpha0", "alpha1", "beta"}; }

void ContactModel::fill_rates(double, const LatentState& z, const Params& theta, RateField& out) const {
  check_theta(theta, 3, "contact");
  spec().check_state(z);
  if (out.d() != d() || out.V() != 2) out.resize(d(), 2);
  for (int i = 0; i < d(); ++i) {
    double* r = out.row(i);
    if (z[i] == 0) {
      int n = 0;
      for (int j : spec().neighbors(i)) n += z[j];
      r[1] = theta[0] + theta[1] * n;
      r[0] = -r[1];
    } else {
      r[0] = theta[2];
      r[1] = -r[0];
    }
  }
}

double ContactModel::local_rate_bound(const Params& theta) const {
  std::size_t deg = 0;
  for (int i = 0; i < d(); ++i) deg = std::max(deg, spec().neighbors(i).size());
  return std::max(theta[0] + theta[1] * double(deg), theta[2]);
}

double ContactModel::rate_bound(const Params& theta) const { return d() * local_rate_bound(theta); }

void ContactModel::rate_gradient(double, const LatentState& z, int i, int v, const Params&,
                                 double* grad) const {
  grad[0] = grad[1] = grad[2] = 0.0;
  if (z[i] == v) return;
  if (z[i] == 0) {
    int n = 0;
    for (int j : spec().neighbors(i)) n += z[j];
    grad[0] = 1.0;
    grad[1] = n;
  } else {
    grad[2] = 1.0;
  }
}

IndependentFlipModel::IndependentFlipModel(StateSpaceSpec spec) : RateModel(std::move(spec)) {}

std::vector<std::string> IndependentFlipModel::param_names() const {
  std::vector<std::string> n;
  for (int u = 0; u < V(); ++u)
    for (int v = 0; v < V(); ++v) n.push_back(fmt::format("r_{}_{}", u, v));
  return n;
}

void IndependentFlipModel::fill_rates(double, const LatentState& z, const Params& theta,
                                      RateField& out) const {
  check_theta(theta, V() * V(), "independent flip");
  spec().check_state(z);
  if (out.d() != d() || out.V() != V()) out.resize(d(), V());
  for (int i = 0; i < d(); ++i) {
    double* r = out.row(i);
    for (int v = 0; v < V(); ++v) r[v] = v == z[i] ? 0.0 : theta[z[i] * V() + v];
  }
  out.finalize(z);
}

double IndependentFlipModel::local_rate_bound(const Params& theta) const {
  double m = 0.0;
  for (int u = 0; u < V(); ++u) {
    double s = 0.0;
    for (int v = 0; v < V(); ++v)
      if (v != u) s += theta[u * V() + v];
    m = std::max(m, s);
  }
  return m;
}

double IndependentFlipModel::rate_bound(const Params& theta) const {
  return d() * local_rate_bound(theta);
}

void IndependentFlipModel::rate_gradient(double, const LatentState& z, int i, int v, const Params&,
                                         double* grad) const {
  for (int k = 0; k < num_params(); ++k) grad[k] = 0.0;
  if (v != z[i]) grad[z[i] * V() + v] = 1.0;
}

ModulatedModel::ModulatedModel(const RateModel& base, double amp, double omega)
    : RateModel(base.spec()), base_(base), amp_(amp), omega_(omega) {
  if (std::abs(amp) >= 1.0) throw Error("modulation amplitude must be < 1");
}

void ModulatedModel::fill_rates(double t, const LatentState& z, const Params& theta,
                                RateField& out) const {
  base_.fill_rates(t, z, theta, out);
  double f = 1.0 + amp_ * std::sin(omega_ * t);
  for (int i = 0; i < d(); ++i)
    for (int v = 0; v < V(); ++v) out(i, v) *= f;
}

double ModulatedModel::rate_bound(const Params& theta) const {
  return base_.rate_bound(theta) * (1.0 + std::abs(amp_));
}

double ModulatedModel::local_rate_bound(const Params& theta) const {
  return base_.local_rate_bound(theta) * (1.0 + std::abs(amp_));
}

}  // namespace lips
