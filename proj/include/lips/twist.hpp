#ifndef LIPS_TWIST_HPP
#define LIPS_TWIST_HPP

#include <functional>
#include <memory>
#include <vector>

#include "lips/euler.hpp"
#include "lips/observations.hpp"
#include "lips/rate_model.hpp"

namespace lips {

// d x V table of log concrete scores log h(z^{i->v}) - log h(z).
using ScoreTable = RateField;

// A twist frozen at one time. Must be safe for concurrent const use.
class TwistEvaluator {
 public:
  virtual ~TwistEvaluator() = default;
  virtual double log_h(const LatentState& z) const = 0;
  // Fills out with log scores, [i][z^i] = 0. If base is given, entries whose
  // base rate is zero may be skipped (left at 0) since they never matter.
  virtual void scores(const LatentState& z, ScoreTable& out, const RateField* base = nullptr) const;
  // true when log_h is constant in z (scores vanish)
  virtual bool constant() const { return false; }
};

// Time-indexed twist log h_t. at(t) is the right limit, at_left(t) the left
// limit (they differ only at potential times).
class TwistOracle {
 public:
  virtual ~TwistOracle() = default;
  virtual std::unique_ptr<TwistEvaluator> at(double t) const = 0;
  virtual std::unique_ptr<TwistEvaluator> at_left(double t) const { return at(t); }

  double log_h(double t, const LatentState& z) const { return at(t)->log_h(z); }
  ScoreTable score_table(double t, const LatentState& z, int V) const;
};

// h == 1
class ConstantTwist : public TwistOracle {
 public:
  std::unique_ptr<TwistEvaluator> at(double t) const override;
};

// Twist given by a plain function of (t, z); scores use the naive
// d(V-1)+1 evaluations. Handy for tests.
class FunctionTwist : public TwistOracle {
 public:
  using Fn = std::function<double(double, const LatentState&)>;
  explicit FunctionTwist(Fn f, Fn f_left = nullptr) : f_(std::move(f)), fl_(std::move(f_left)) {}
  std::unique_ptr<TwistEvaluator> at(double t) const override;
  std::unique_ptr<TwistEvaluator> at_left(double t) const override;

 private:
  Fn f_, fl_;
};

// off-target r * exp(score); diagonal recomputed
RateField twist_rate_field(const RateField& base, const ScoreTable& score, const LatentState& z);
void twist_rate_field_into(const RateField& base, const ScoreTable& score, const LatentState& z,
                           RateField& out);

inline LatentState twisted_kernel_sample(const RateField& twisted, const LatentState& z, double dt,
                                         Rng& rng) {
  return euler_kernel_sample(twisted, z, dt, rng);
}
inline double twisted_kernel_log_pmf(const RateField& twisted, const LatentState& z,
                                     const LatentState& z_next, double dt) {
  return euler_kernel_log_pmf(twisted, z, z_next, dt);
}

// log h_{t^-}(z) - log G_t(z) - log h_t(z)
double reset_residual(const TwistOracle& twist, const std::function<double(const LatentState&)>& log_g,
                      double t, const LatentState& z);

// (E_q[(p/q)^2])^{-1}; 0 when q misses mass of p
double incremental_ess(const std::vector<double>& q, const std::vector<double>& p);

// Base model with rates tilted by a twist: r * h(z^{i->v}) / h(z).
class TwistedRateModel : public RateModel {
 public:
  TwistedRateModel(const RateModel& base, const TwistOracle& twist, double bound);
  int num_params() const override { return base_.num_params(); }
  std::vector<std::string> param_names() const override { return base_.param_names(); }
  bool time_homogeneous() const override { return false; }
  void fill_rates(double t, const LatentState& z, const Params& theta, RateField& out) const override;
  double rate_bound(const Params&) const override { return bound_; }

 private:
  const RateModel& base_;
  const TwistOracle& twist_;
  double bound_;
};

}  // namespace lips

#endif
