#ifndef LIPS_SMC_HPP
#define LIPS_SMC_HPP

#include <cstdint>
#include <vector>

#include "lips/observations.hpp"
#include "lips/random.hpp"
#include "lips/rate_model.hpp"
#include "lips/twist.hpp"

namespace lips {

class InitialDistribution {
 public:
  virtual ~InitialDistribution() = default;
  virtual double log_pmf(const LatentState& z) const = 0;
  virtual LatentState sample(Rng& rng) const = 0;
};

// Independent categorical per node; probs is d x V row-major.
class ProductDistribution : public InitialDistribution {
 public:
  ProductDistribution(int d, int V, std::vector<double> probs);
  static ProductDistribution point_mass(const LatentState& z, int V);
  static ProductDistribution iid(int d, const std::vector<double>& p);
  // this distribution conditioned on the support of `other`, node by node
  ProductDistribution restricted_to(const ProductDistribution& other) const;
  double log_pmf(const LatentState& z) const override;
  LatentState sample(Rng& rng) const override;
  const std::vector<double>& probs() const { return p_; }
  int d() const { return d_; }
  int V() const { return V_; }

 private:
  int d_, V_;
  std::vector<double> p_;
  std::vector<double> logp_;
};

struct SMCConfig {
  int S = 25;
  double dt = 0.1;
  double ess_threshold = 1.0;  // resample when ESS < threshold * S
  bool store_paths = true;
  std::uint64_t seed = 0;
};

struct ResampleEvent {
  double time;
  std::vector<int> ancestors;
};

struct ParticleEnsemble {
  double horizon = 0.0;
  std::vector<double> grid;
  std::vector<LatentState> states;
  std::vector<double> log_weights;  // normalized
  std::vector<PathSample> paths;
  std::vector<ResampleEvent> ancestry;
  std::vector<std::pair<double, double>> ess_history;  // (t, ESS) after weighting
  double log_z = 0.0;
  long substeps = 0;  // extra Euler substeps forced by the step clamp

  int S() const { return static_cast<int>(states.size()); }
  double min_ess() const;
  double mean_ess() const;
};

double log_sum_exp(const std::vector<double>& x);
double effective_sample_size(const std::vector<double>& log_weights);
// ancestors for one uniform draw u in [0, 1); sorted nondecreasing
std::vector<int> systematic_resample(const std::vector<double>& log_weights, double u);
std::vector<int> systematic_resample(const std::vector<double>& log_weights, Rng& rng);

// Twisted SMC. Weights target p_theta(path) h_t(z_t) prod G; the proposal is
// the Euler kernel on twisted rates, q0 for the initial state.
ParticleEnsemble tsmc_run(const RateModel& prior, const Params& theta, const TwistOracle& twist,
                          const InitialDistribution& p0, const InitialDistribution& q0,
                          const ObservationSequence& obs, double T, const SMCConfig& cfg);

// Bootstrap filter: prior proposal, weights only at observation times.
ParticleEnsemble bpf_run(const RateModel& prior, const Params& theta, const InitialDistribution& p0,
                         const ObservationSequence& obs, double T, const SMCConfig& cfg);

// Weighted node-wise marginals at the given times, mixed with eps * uniform.
// Returns one d x V row-major table per time.
std::vector<std::vector<double>> posterior_marginals_from_ensemble(const ParticleEnsemble& ens,
                                                                   const std::vector<double>& times,
                                                                   int V, double eps = 1e-3);

// One path by importance resampling on the final weights.
const PathSample& draw_single_path(const ParticleEnsemble& ens, Rng& rng);

}  // namespace lips

#endif
