#ifndef LIPS_TWISTNET_HPP
#define LIPS_TWISTNET_HPP

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "lips/adam.hpp"
#include "lips/observations.hpp"
#include "lips/path.hpp"
#include "lips/rate_model.hpp"
#include "lips/smc.hpp"
#include "lips/twist.hpp"

namespace lips {

inline double silu(double x) { return x / (1.0 + std::exp(-x)); }
inline double silu_grad(double x) {
  double s = 1.0 / (1.0 + std::exp(-x));
  return s * (1.0 + x * (1.0 - s));
}

// Hand-crafted per-(i, v) context features. All of them depend only on the
// observations after t (or at/after t for left limits), the graph and t.
class FeatureBuilder {
 public:
  FeatureBuilder(const StateSpaceSpec& spec, double expected_degree = 5.0);
  int dim() const { return V_ * base_ + 2; }
  int d() const { return d_; }
  int V() const { return V_; }
  // d * V * dim() values, row-major in (i, v, feature)
  void build(const ObservationSequence& obs, double T, double t, bool inclusive,
             std::vector<double>& out) const;
  // true if some observation lies after t (at/after when inclusive)
  static bool has_future(const ObservationSequence& obs, double t, bool inclusive);

 private:
  int d_, V_, base_;
  double deg_scale_;
  std::vector<std::vector<int>> nbrs_;
  std::vector<std::vector<double>> w_;  // sigma(<xi_i, xi_j>)
  std::vector<double> wsum_, wmean_, wmax_;
};

// Flat parameter vector with named blocks:
// encoder We (m x F), be (m); rho W1 (m x m), b1 (m), w2 (m), b2 (1);
// q0 head wq (F).
struct TwistNetParams {
  int F = 0, m = 0;
  std::vector<double> p;

  TwistNetParams() = default;
  TwistNetParams(int F, int m);
  static TwistNetParams init(int F, int m, std::uint64_t seed);

  std::size_t size() const { return p.size(); }
  std::size_t off_We() const { return 0; }
  std::size_t off_be() const { return std::size_t(m) * F; }
  std::size_t off_W1() const { return off_be() + m; }
  std::size_t off_b1() const { return off_W1() + std::size_t(m) * m; }
  std::size_t off_w2() const { return off_b1() + m; }
  std::size_t off_b2() const { return off_w2() + m; }
  std::size_t off_wq() const { return off_b2() + 1; }

  const double* We() const { return p.data() + off_We(); }
  const double* be() const { return p.data() + off_be(); }
  const double* W1() const { return p.data() + off_W1(); }
  const double* b1() const { return p.data() + off_b1(); }
  const double* w2() const { return p.data() + off_w2(); }
  double b2() const { return p[off_b2()]; }
  const double* wq() const { return p.data() + off_wq(); }
};

// Phi_t in R^{d x V x m}
struct ContextEmbedding {
  int d = 0, V = 0, m = 0;
  std::vector<double> phi;
  const double* at(int i, int v) const { return phi.data() + (std::size_t(i) * V + v) * m; }
};

ContextEmbedding encode_features(const TwistNetParams& net, const std::vector<double>& feats, int d, int V);
ContextEmbedding encode_context(const TwistNetParams& net, const FeatureBuilder& fb,
                                const ObservationSequence& obs, double T, double t, bool inclusive = false);

// rho applied to an m-vector
double rho(const TwistNetParams& net, const double* s);
// rho(sum_i Phi[i][z^i])
double twist_log_value(const TwistNetParams& net, const ContextEmbedding& phi, const LatentState& z);
// S_t(z) trick: log h(z^{i->v}) = rho(S + Phi[i][v] - Phi[i][z^i])
ScoreTable twist_score_table(const TwistNetParams& net, const ContextEmbedding& phi, const LatentState& z);
// d(V-1)+1 separate evaluations of twist_log_value
ScoreTable twist_score_table_naive(const TwistNetParams& net, const ContextEmbedding& phi, const LatentState& z);

// q0 per node: softmax over v of wq . f(i, v, 0), observations at 0 included
ProductDistribution q0_distribution(const TwistNetParams& net, const FeatureBuilder& fb,
                                    const ObservationSequence& obs, double T);

// Learned twist for one observation sequence. log h = 0 once no observation
// remains ahead.
class NeuralTwist : public TwistOracle {
 public:
  NeuralTwist(const TwistNetParams& net, const FeatureBuilder& fb, const ObservationSequence& obs, double T);
  std::unique_ptr<TwistEvaluator> at(double t) const override;
  std::unique_ptr<TwistEvaluator> at_left(double t) const override;

 private:
  std::unique_ptr<TwistEvaluator> make(double t, bool inclusive) const;
  const TwistNetParams& net_;
  const FeatureBuilder& fb_;
  const ObservationSequence& obs_;
  double T_;
};

// One prior path on the grid with synthetic observations.
struct SleepSample {
  PathSample path;  // grid path (jumps stamped at step ends)
  ObservationSequence obs;
  std::vector<double> grid;
};

struct LossResult {
  double loss = 0.0;
  std::vector<double> grad;
};

// Forward-KL sleep loss averaged over the batch. If mc_steps > 0 only that
// many random grid steps per path are used, scaled by (#steps / mc_steps).
// Steps are drawn from rng; mc_steps = 0 uses the full sum.
LossResult sleep_loss_forward_kl(const TwistNetParams& net, const FeatureBuilder& fb, const RateModel& prior,
                                 const Params& theta, const std::vector<SleepSample>& batch, double T,
                                 int mc_steps, Rng* rng, bool with_q0 = true);
// Same loss with an explicit list of step indices per path (used by the
// unbiasedness check); each listed step is scaled by `scale`.
LossResult sleep_loss_steps(const TwistNetParams& net, const FeatureBuilder& fb, const RateModel& prior,
                            const Params& theta, const std::vector<SleepSample>& batch, double T,
                            const std::vector<std::vector<int>>& steps, double scale, bool with_q0);

// Density-ratio loss: path k's states at the chosen times with its own
// observations are positives, path (k+1) mod B's states with observations
// of k are negatives. Averaged over pairs and times.
LossResult dre_loss(const TwistNetParams& net, const FeatureBuilder& fb, const std::vector<SleepSample>& batch,
                    double T, const std::vector<std::vector<double>>& times);

// -log q0(z0) averaged over the batch
LossResult q0_nll(const TwistNetParams& net, const FeatureBuilder& fb, const std::vector<SleepSample>& batch, double T);

}  // namespace lips

#endif
