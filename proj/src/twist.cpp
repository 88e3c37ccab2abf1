#include "lips/twist.hpp"

#include <cmath>

#include <fmt/format.h>

#include "lips/error.hpp"

namespace lips {

void TwistEvaluator::scores(const LatentState& z, ScoreTable& out, const RateField* base) const {
  int d = static_cast<int>(z.size());
  int V = out.V();
  double lh = log_h(z);
  LatentState y = z;
  for (int i = 0; i < d; ++i) {
    for (int v = 0; v < V; ++v) {
      out(i, v) = 0.0;
      if (v == z[i] || (base && (*base)(i, v) <= 0.0)) continue;
      y[i] = v;
      out(i, v) = log_h(y) - lh;
    }
    y[i] = z[i];
  }
}

ScoreTable TwistOracle::score_table(double t, const LatentState& z, int V) const {
  ScoreTable out(static_cast<int>(z.size()), V);
  at(t)->scores(z, out);
  return out;
}

namespace {

class ConstantEval : public TwistEvaluator {
 public:
  double log_h(const LatentState&) const override { return 0.0; }
  void scores(const LatentState&, ScoreTable& out, const RateField*) const override { out.zero(); }
  bool constant() const override { return true; }
};

class FunctionEval : public TwistEvaluator {
 public:
  FunctionEval(const FunctionTwist::Fn& f, double t) : f_(f), t_(t) {}
  double log_h(const LatentState& z) const override { return f_(t_, z); }

 private:
  const FunctionTwist::Fn& f_;
  double t_;
};

}  // namespace

std::unique_ptr<TwistEvaluator> ConstantTwist::at(double) const {
  return std::make_unique<ConstantEval>();
}

std::unique_ptr<TwistEvaluator> FunctionTwist::at(double t) const {
  return std::make_unique<FunctionEval>(f_, t);
}

std::unique_ptr<TwistEvaluator> FunctionTwist::at_left(double t) const {
  return std::make_unique<FunctionEval>(fl_ ? fl_ : f_, t);
}

void twist_rate_field_into(const RateField& base, const ScoreTable& score, const LatentState& z,
                           RateField& out) {
  if (out.d() != base.d() || out.V() != base.V()) out.resize(base.d(), base.V());
  for (int i = 0; i < base.d(); ++i) {
    const double* r = base.row(i);
    const double* s = score.row(i);
    double* o = out.row(i);
    for (int v = 0; v < base.V(); ++v) {
      if (v == z[i] || r[v] <= 0.0) {
        o[v] = 0.0;
        continue;
      }
      if (!std::isfinite(s[v])) throw Error(fmt::format("non-finite score at [{}][{}]", i, v));
      o[v] = r[v] * std::exp(s[v]);
    }
  }
  out.finalize(z);
}

RateField twist_rate_field(const RateField& base, const ScoreTable& score, const LatentState& z) {
  RateField out(base.d(), base.V());
  twist_rate_field_into(base, score, z, out);
  return out;
}

double reset_residual(const TwistOracle& twist, const std::function<double(const LatentState&)>& log_g,
                      double t, const LatentState& z) {
  return twist.at_left(t)->log_h(z) - log_g(z) - twist.at(t)->log_h(z);
}

double incremental_ess(const std::vector<double>& q, const std::vector<double>& p) {
  if (q.size() != p.size()) throw DimensionError("incremental_ess: support sizes differ");
  double s = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] <= 0.0) continue;
    if (q[k] <= 0.0) return 0.0;
    s += p[k] * p[k] / q[k];
  }
  return 1.0 / s;
}

TwistedRateModel::TwistedRateModel(const RateModel& base, const TwistOracle& twist, double bound)
    : RateModel(base.spec()), base_(base), twist_(twist), bound_(bound) {}

void TwistedRateModel::fill_rates(double t, const LatentState& z, const Params& theta,
                                  RateField& out) const {
  RateField r(d(), V());
  base_.fill_rates(t, z, theta, r);
  ScoreTable s(d(), V());
  twist_.at(t)->scores(z, s, &r);
  twist_rate_field_into(r, s, z, out);
}

}  // namespace lips
