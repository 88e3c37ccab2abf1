#ifndef LIPS_RATE_MODEL_HPP
#define LIPS_RATE_MODEL_HPP

#include <string>
#include <vector>

#include "lips/state_space.hpp"

namespace lips {

using Params = std::vector<double>;

// Local-rate model r_{i,t}(v|z; theta). Implementations must be safe to call
// concurrently.
class RateModel {
 public:
  explicit RateModel(StateSpaceSpec spec) : spec_(std::move(spec)) {}
  virtual ~RateModel() = default;

  const StateSpaceSpec& spec() const { return spec_; }
  int d() const { return spec_.d(); }
  int V() const { return spec_.V(); }

  virtual int num_params() const = 0;
  virtual std::vector<std::string> param_names() const = 0;
  virtual bool time_homogeneous() const { return true; }

  // Writes off-target rates and finalizes the diagonal.
  virtual void fill_rates(double t, const LatentState& z, const Params& theta,
                          RateField& out) const = 0;
  RateField rates(double t, const LatentState& z, const Params& theta) const;

  // Upper bound on the total exit rate over all states and t (assumption A1).
  // Returns 0 when the model has no bound to offer.
  virtual double rate_bound(const Params& theta) const;
  // Upper bound on any single coordinate's exit rate (assumption A2).
  virtual double local_rate_bound(const Params& theta) const { return rate_bound(theta); }

  // d r_i(v|z) / d theta, written to grad[0..num_params). Default is a
  // central difference; models with closed forms override it.
  virtual void rate_gradient(double t, const LatentState& z, int i, int v,
                             const Params& theta, double* grad) const;
  // d (sum_i sum_{v != z^i} r_i(v|z)) / d theta
  virtual void exit_rate_gradient(double t, const LatentState& z,
                                  const Params& theta, double* grad) const;

 private:
  StateSpaceSpec spec_;
};

// Check that dt respects A2 for the declared bound.
void check_step_size(const RateModel& model, const Params& theta, double dt);

// SIRS epidemic (S=0, I=1, R=2) with feature-weighted infection pressure.
// theta = (alpha0, alpha1, beta, gamma).
class SirsModel : public RateModel {
 public:
  enum { S = 0, I = 1, R = 2 };
  explicit SirsModel(StateSpaceSpec spec);

  int num_params() const override { return 4; }
  std::vector<std::string> param_names() const override;
  void fill_rates(double t, const LatentState& z, const Params& theta,
                  RateField& out) const override;
  double rate_bound(const Params& theta) const override;
  double local_rate_bound(const Params& theta) const override;
  void rate_gradient(double t, const LatentState& z, int i, int v,
                     const Params& theta, double* grad) const override;
  void exit_rate_gradient(double t, const LatentState& z, const Params& theta,
                          double* grad) const override;

  // sum_j a_ij sigma(<xi_i, xi_j>) 1{z^j = I}
  double infection_pressure(int i, const LatentState& z) const;
  double edge_weight(int i, int k) const { return w_[i][k]; }
  double weight_sum(int i) const;

 private:
  std::vector<std::vector<double>> w_;  // aligned with spec().neighbors(i)
};

// Two-state contact process: 0 -> 1 at alpha0 + alpha1 * (#infected nbrs),
// 1 -> 0 at beta. theta = (alpha0, alpha1, beta).
class ContactModel : public RateModel {
 public:
  explicit ContactModel(StateSpaceSpec spec);
  int num_params() const override { return 3; }
  std::vector<std::string> param_names() const override;
  void fill_rates(double t, const LatentState& z, const Params& theta,
                  RateField& out) const override;
  double rate_bound(const Params& theta) const override;
  double local_rate_bound(const Params& theta) const override;
  void rate_gradient(double t, const LatentState& z, int i, int v,
                     const Params& theta, double* grad) const override;
};

// Every node flips u -> v at rate theta[u*V + v] regardless of the others.
// Diagonal entries of theta are ignored.
class IndependentFlipModel : public RateModel {
 public:
  explicit IndependentFlipModel(StateSpaceSpec spec);
  int num_params() const override { return V() * V(); }
  std::vector<std::string> param_names() const override;
  void fill_rates(double t, const LatentState& z, const Params& theta,
                  RateField& out) const override;
  double rate_bound(const Params& theta) const override;
  double local_rate_bound(const Params& theta) const override;
  void rate_gradient(double t, const LatentState& z, int i, int v,
                     const Params& theta, double* grad) const override;
};

// Wraps a model and multiplies every rate by a time-varying factor
// 1 + amp*sin(omega*t). Only used to exercise the inhomogeneous code paths.
class ModulatedModel : public RateModel {
 public:
  ModulatedModel(const RateModel& base, double amp, double omega);
  int num_params() const override { return base_.num_params(); }
  std::vector<std::string> param_names() const override { return base_.param_names(); }
  bool time_homogeneous() const override { return false; }
  void fill_rates(double t, const LatentState& z, const Params& theta,
                  RateField& out) const override;
  double rate_bound(const Params& theta) const override;
  double local_rate_bound(const Params& theta) const override;

 private:
  const RateModel& base_;
  double amp_, omega_;
};

}  // namespace lips

#endif
