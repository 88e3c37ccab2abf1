#ifndef LIPS_ORACLE_HPP
#define LIPS_ORACLE_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cstdint>
#include <string>
#include <vector>

#include "lips/observations.hpp"
#include "lips/rate_model.hpp"
#include "lips/smc.hpp"
#include "lips/twist.hpp"

namespace lips {

// Exact computations on all V^d states, state index sum_i z^i V^i.
constexpr std::uint64_t kOracleMaxStates = std::uint64_t(1) << 20;

struct DenseGenerator {
  int d = 0, V = 0;
  std::size_t n = 0;
  Eigen::SparseMatrix<double, Eigen::RowMajor> Q;
  double max_exit = 0.0;  // max_z -Q[z][z]

  Eigen::MatrixXd dense() const { return Eigen::MatrixXd(Q); }
};

DenseGenerator build_dense_generator(const RateModel& model, const Params& theta, double t);

// exp(Q delta), dense; refuses n > 4096
Eigen::MatrixXd transition_matrix(const DenseGenerator& Q, double delta);
// exp(Q delta) h and exp(Q delta)^T p by uniformization
Eigen::VectorXd propagate_backward(const DenseGenerator& Q, const Eigen::VectorXd& h, double delta);
Eigen::VectorXd propagate_forward(const DenseGenerator& Q, const Eigen::VectorXd& p, double delta);
// log-space wrappers (rescale by the max entry)
Eigen::VectorXd log_propagate_backward(const DenseGenerator& Q, const Eigen::VectorXd& log_h, double delta);

struct Potential {
  double time;
  Eigen::VectorXd log_g;  // over all n states
};

std::vector<Potential> observation_potentials(const ObservationSequence& obs, int d, int V);
// product distribution from per-node probabilities (d x V, row-major)
Eigen::VectorXd product_distribution(const std::vector<double>& node_probs, int d, int V);

// Right-limit log h*_t at each grid time; left limits differ only at
// potential times where log_h_left = log_g + log_h.
struct LookaheadTable {
  std::vector<double> grid;
  std::vector<Eigen::VectorXd> log_h;
  std::vector<Eigen::VectorXd> log_h_left;
  std::vector<int> potential;  // index into the potential list or -1
};

// Uniform grid with lambda_max * dt <= 0.1 merged with potential times.
std::vector<double> oracle_grid(double T, double max_rate, const std::vector<double>& times);

LookaheadTable exact_lookahead(const RateModel& model, const Params& theta,
                               const std::vector<Potential>& pots, const std::vector<double>& grid);

// Posterior marginals over all states at each grid time (rows sum to 1).
std::vector<Eigen::VectorXd> exact_posterior_marginals(const RateModel& model, const Params& theta,
                                                       const Eigen::VectorXd& p0,
                                                       const ObservationSequence& obs,
                                                       const std::vector<double>& grid);

// log sum_z p0(z) h*_0(z); -inf (with diag) if the observations are impossible
double exact_log_marginal_likelihood(const RateModel& model, const Params& theta,
                                     const Eigen::VectorXd& p0, const ObservationSequence& obs,
                                     double T, std::string* diag = nullptr);

// Node-wise marginals d x V from a distribution over all states.
std::vector<double> node_marginals(const Eigen::VectorXd& p, int d, int V);

// Arbitrary distribution over all V^d states.
class EnumeratedDistribution : public InitialDistribution {
 public:
  EnumeratedDistribution(Eigen::VectorXd p, int d, int V);
  double log_pmf(const LatentState& z) const override;
  LatentState sample(Rng& rng) const override;
  const Eigen::VectorXd& probs() const { return p_; }

 private:
  Eigen::VectorXd p_;
  int d_, V_;
};

// p0 h*_0 normalized
Eigen::VectorXd exact_initial_posterior(const Eigen::VectorXd& p0, const Eigen::VectorXd& log_h0);

// The exact look-ahead as a twist. Off-grid times propagate from the next
// grid point.
class ExactTwist : public TwistOracle {
 public:
  ExactTwist(const RateModel& model, const Params& theta, const ObservationSequence& obs, double T,
             std::vector<double> extra_times = {});
  std::unique_ptr<TwistEvaluator> at(double t) const override;
  std::unique_ptr<TwistEvaluator> at_left(double t) const override;

  const LookaheadTable& table() const { return table_; }
  Eigen::VectorXd log_h_vector(double t, bool left = false) const;
  // 1.5 x max over a fine grid of the total Doob exit rate
  double doob_rate_bound(int points = 2000) const;

 private:
  const RateModel& model_;
  Params theta_;
  DenseGenerator gen_;
  LookaheadTable table_;
  double T_;
};

// Exact posterior path: z0 ~ p0 h*_0 / Z, then thinning under Doob rates.
class PosteriorSampler {
 public:
  PosteriorSampler(const RateModel& model, const Params& theta, const Eigen::VectorXd& p0,
                   const ObservationSequence& obs, double T);
  PathSample sample(Rng& rng) const;
  const ExactTwist& twist() const { return twist_; }
  const EnumeratedDistribution& initial() const { return p_star0_; }
  double bound() const { return bound_; }

 private:
  const RateModel& model_;
  Params theta_;
  ExactTwist twist_;
  EnumeratedDistribution p_star0_;
  double T_;
  double bound_;
};

// One twisted Euler step from z at t over all V^d successors: the proposal
// pmf q and the normalized target p ~ exp(Q dt)[z, .] * h_{t+dt} * G (G only
// when obs_k >= 0). Time-homogeneous models only.
struct StepPmfs {
  std::vector<double> q, p;
};
StepPmfs exact_step_pmfs(const RateModel& model, const Params& theta, const TwistOracle& twist,
                         const ObservationSequence& obs, int obs_k, double t, double dt,
                         const LatentState& z);

void write_marginals_csv(std::ostream& os, const std::vector<double>& grid,
                         const std::vector<Eigen::VectorXd>& marginals);

}  // namespace lips

#endif
