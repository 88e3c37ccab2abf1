#ifndef LIPS_WAKE_SLEEP_HPP
#define LIPS_WAKE_SLEEP_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lips/adam.hpp"
#include "lips/smc.hpp"
#include "lips/twistnet.hpp"

namespace lips {

struct TrainConfig {
  int global_iters = 25;
  int updates = 25;     // N, per phase
  int batch_sleep = 16;
  int batch_wake = 16;
  int particles = 10;
  std::vector<double> dt = {0.05};  // one is drawn per simulated batch
  bool mc_loss = true;
  int mc_steps = 1;     // grid steps per path when mc_loss is on
  int reuse = 25;       // optimizer steps per simulated batch
  std::string sleep_loss = "kl";  // or "dre"
  int dre_times = 4;    // time points per path for the DRE loss
  double lr_psi = 3e-4;
  double lr_theta = 5e-3;
  double ess_threshold = 1.0;
  int pretrain_steps = 2500;  // 0 disables pretraining
  int plateau_window = 100;
  double plateau_tol = 1e-3;
  int width = 64;             // m
  double max_skip_rate = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

// The fixed part of a training problem.
struct TrainProblem {
  const RateModel* model = nullptr;
  const InitialDistribution* p0 = nullptr;
  const FeatureBuilder* features = nullptr;
  std::vector<ObservationSequence> data;
  double T = 0.0;
  double p_mask = 0.5, delta = 0.0;
  std::optional<Params> truth;
};

struct TrainState {
  TwistNetParams psi;
  AdamState psi_opt;
  std::vector<double> log_theta;
  AdamState theta_opt;
  Params theta_bar;
  int global_iter = 0;     // completed global iterations
  int pretrain_done = 0;   // pretraining steps taken
  bool pretrain_finished = false;
  long wake_attempts = 0, wake_skips = 0;

  Params theta() const;
};

TrainState initial_state(const TrainProblem& pb, const TrainConfig& cfg, const Params& theta0);

struct TelemetryRow {
  int global_iter = 0;
  std::string phase;  // pretrain, sleep, wake
  int step = 0;
  double loss = 0.0;
  double mean_ess = NAN, min_ess = NAN;
  Params theta;
  double rpe = NAN;
};

std::string telemetry_header();
std::string telemetry_line(const TelemetryRow& row);

using RowSink = std::function<void(const TelemetryRow&)>;

// Prior paths on a grid with synthetic observations at the given tau.
SleepSample simulate_sleep_sample(const RateModel& model, const Params& theta, const InitialDistribution& p0,
                                  const std::vector<double>& tau, double T, double dt, double p_mask,
                                  double delta, Rng& rng);

// Continuous-time complete-data NLL of one path (initial, emission and
// rate terms) and its gradient with respect to theta (natural scale).
// Jumps sharing a time stamp use the rates of the state before the group.
struct WakeResult {
  double loss = 0.0;
  std::vector<double> grad;
  std::string diag;  // set when the loss is infinite
};
WakeResult wake_loss_and_grad(const RateModel& model, const Params& theta, const PathSample& path,
                              const InitialDistribution& p0, const ObservationSequence& obs,
                              double quad_dt = 1e-3);

// N * reuse optimizer steps on psi. `global_iter` only selects RNG streams.
void sleep_phase(const TrainProblem& pb, const TrainConfig& cfg, TrainState& st, int global_iter,
                 const RowSink& sink);
// N * reuse optimizer steps on log theta using tSMC under (theta_bar, psi).
void wake_phase(const TrainProblem& pb, const TrainConfig& cfg, TrainState& st, int global_iter,
                const RowSink& sink);
// Sleep-only pretraining until the cap or a loss plateau.
void pretrain(const TrainProblem& pb, const TrainConfig& cfg, TrainState& st, const RowSink& sink);

// Full loop from the given state; `on_checkpoint` runs after each global
// iteration.
void train(const TrainProblem& pb, const TrainConfig& cfg, TrainState& st, const RowSink& sink,
           const std::function<void(const TrainState&)>& on_checkpoint = {});

// JSON checkpoint text; doubles round-trip exactly.
std::string checkpoint_to_json(const TrainState& st, const std::string& config_hash);
TrainState checkpoint_from_json(const std::string& text, std::string* config_hash = nullptr);

}  // namespace lips

#endif
