#include "lips/wake_sleep.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "json.hpp"
#include "lips/error.hpp"
#include "lips/euler.hpp"
#include "lips/parallel.hpp"
#include "lips/sirs_bench.hpp"

namespace lips {

using nlohmann::json;

namespace {

// RNG stream tags
enum : std::uint64_t { kSleepBatch = 1, kSleepItem, kSleepMc, kWakeBatch, kWakeItem, kPretrain = 1000 };

std::uint64_t tag(std::uint64_t kind, int global_iter) {
  return (kind << 32) | static_cast<std::uint32_t>(global_iter);
}

std::uint64_t item(std::uint64_t a, std::uint64_t b) { return (a << 20) | b; }

}  // namespace

void TrainConfig::validate() const {
  auto bad = [](const std::string& m) { throw ConfigError(m); };
  if (global_iters < 0 || updates < 0 || pretrain_steps < 0) bad("iteration counts must be >= 0");
  if (batch_sleep < 1 || batch_wake < 1) bad("batch sizes must be >= 1");
  if (particles < 1) bad("particles must be >= 1");
  if (reuse < 1) bad("reuse must be >= 1");
  if (dt.empty()) bad("dt needs at least one value");
  for (double h : dt)
    if (!(h > 0.0)) bad("dt values must be positive");
  if (mc_loss && mc_steps < 1) bad("mc_steps must be >= 1");
  if (sleep_loss != "kl" && sleep_loss != "dre") bad("sleep_loss must be kl or dre");
  if (sleep_loss == "dre" && (batch_sleep < 2 || dre_times < 1)) bad("dre needs batch_sleep >= 2 and dre_times >= 1");
  if (!(lr_psi > 0.0) || !(lr_theta > 0.0)) bad("learning rates must be positive");
  if (!(ess_threshold >= 0.0 && ess_threshold <= 1.0)) bad("ess_threshold must be in [0, 1]");
  if (plateau_window < 1 || !(plateau_tol >= 0.0)) bad("bad plateau settings");
  if (width < 1) bad("width must be >= 1");
  if (!(max_skip_rate >= 0.0 && max_skip_rate <= 1.0)) bad("max_skip_rate must be in [0, 1]");
}

Params TrainState::theta() const {
  Params th(log_theta.size());
  for (std::size_t k = 0; k < th.size(); ++k) th[k] = std::exp(log_theta[k]);
  return th;
}

TrainState initial_state(const TrainProblem& pb, const TrainConfig& cfg, const Params& theta0) {
  cfg.validate();
  if (static_cast<int>(theta0.size()) != pb.model->num_params())
    throw ConfigError(fmt::format("expected {} rate parameters, got {}", pb.model->num_params(), theta0.size()));
  TrainState st;
  st.psi = TwistNetParams::init(pb.features->dim(), cfg.width, cfg.seed);
  st.psi_opt.lr = cfg.lr_psi;
  for (double x : theta0) {
    if (!(x > 0.0)) throw ConfigError("initial rate parameters must be positive");
    st.log_theta.push_back(std::log(x));
  }
  st.theta_opt.lr = cfg.lr_theta;
  st.theta_bar = theta0;
  return st;
}

std::string telemetry_header() {
  return "global_iter,phase,step,loss,mean_ess,min_ess,alpha0,alpha1,beta,gamma,rpe";
}

std::string telemetry_line(const TelemetryRow& r) {
  auto num = [](double x) { return std::isnan(x) ? std::string() : fmt::format("{}", x); };
  std::string s = fmt::format("{},{},{},{},{},{}", r.global_iter, r.phase, r.step, num(r.loss), num(r.mean_ess),
                              num(r.min_ess));
  // the SIRS columns; other models fill as many as they have
  for (std::size_t k = 0; k < 4; ++k) s += "," + (k < r.theta.size() ? num(r.theta[k]) : std::string());
  s += "," + num(r.rpe);
  return s;
}

SleepSample simulate_sleep_sample(const RateModel& model, const Params& theta, const InitialDistribution& p0,
                                  const std::vector<double>& tau, double T, double dt, double p_mask, double delta,
                                  Rng& rng) {
  SleepSample s;
  s.grid = make_grid(T, dt, tau);
  s.path = euler_simulate_grid(model, theta, p0.sample(rng), s.grid, rng);
  s.obs = sample_observations(s.path, tau, model.V(), p_mask, delta, rng);
  return s;
}

WakeResult wake_loss_and_grad(const RateModel& model, const Params& theta, const PathSample& path,
                              const InitialDistribution& p0, const ObservationSequence& obs, double quad_dt) {
  const int P = model.num_params();
  WakeResult out;
  out.grad.assign(P, 0.0);
  out.loss = -p0.log_pmf(path.initial);
  for (int k = 0; k < obs.K(); ++k) out.loss -= obs.log_potential(k, path.state_at(obs.times[k]));
  if (!std::isfinite(out.loss)) {
    out.diag = "initial state or observations impossible under the path";
    out.loss = INFINITY;
    return out;
  }
  LatentState z = path.initial;
  RateField r(model.d(), model.V());
  std::vector<double> g(P);
  const bool homog = model.time_homogeneous();

  auto hold = [&](double a, double b) {
    if (b <= a) return;
    long n = homog ? 1 : std::max(1L, static_cast<long>(std::ceil((b - a) / quad_dt)));
    double h = (b - a) / n;
    for (long q = 0; q < n; ++q) {
      double t = homog ? a : a + (q + 0.5) * h;
      model.fill_rates(t, z, theta, r);
      out.loss += total_exit_rate(r) * h;
      model.exit_rate_gradient(t, z, theta, g.data());
      for (int p = 0; p < P; ++p) out.grad[p] += g[p] * h;
    }
  };

  double t = 0.0;
  std::size_t j = 0;
  while (j < path.jumps.size()) {
    double tj = path.jumps[j].time;
    hold(t, tj);
    t = tj;
    model.fill_rates(t, z, theta, r);
    LatentState next = z;
    for (; j < path.jumps.size() && path.jumps[j].time == tj; ++j) {
      const Jump& jp = path.jumps[j];
      double rate = jp.value == z[jp.node] ? 0.0 : r(jp.node, jp.value);
      if (!(rate > 0.0)) {
        out.diag = fmt::format("jump to {} at node {} (t={}) has zero rate", jp.value, jp.node, jp.time);
        out.loss = INFINITY;
        return out;
      }
      out.loss -= std::log(rate);
      model.rate_gradient(t, z, jp.node, jp.value, theta, g.data());
      for (int p = 0; p < P; ++p) out.grad[p] -= g[p] / rate;
      next[jp.node] = jp.value;
    }
    z = next;
  }
  hold(t, path.horizon);
  return out;
}

namespace {

double draw_dt(const TrainConfig& cfg, Rng& rng) {
  if (cfg.dt.size() == 1) return cfg.dt[0];
  return cfg.dt[rng() % cfg.dt.size()];
}

std::vector<int> draw_indices(int n, int B, Rng& rng) {
  std::vector<int> idx(B);
  for (auto& k : idx) k = static_cast<int>(rng() % std::uint64_t(n));
  return idx;
}

std::vector<SleepSample> sleep_batch(const TrainProblem& pb, const TrainConfig& cfg, const Params& theta,
                                     std::uint64_t stream, int update) {
  Rng rng = make_stream(cfg.seed, tag(kSleepBatch, 0) ^ stream, update);
  double dt = draw_dt(cfg, rng);
  auto idx = draw_indices(static_cast<int>(pb.data.size()), cfg.batch_sleep, rng);
  std::vector<SleepSample> batch(cfg.batch_sleep);
  parallel_for(batch.size(), [&](std::size_t b) {
    Rng r = make_stream(cfg.seed, tag(kSleepItem, 0) ^ stream, item(update, b));
    batch[b] = simulate_sleep_sample(*pb.model, theta, *pb.p0, pb.data[idx[b]].times, pb.T, dt, pb.p_mask,
                                     pb.delta, r);
  });
  return batch;
}

// Loss and gradient of one optimizer step; per-path work runs in parallel
// and is reduced in a fixed order.
LossResult sleep_step_loss(const TrainProblem& pb, const TrainConfig& cfg, const TwistNetParams& psi,
                           const Params& theta, const std::vector<SleepSample>& batch, std::uint64_t stream,
                           long step) {
  const std::size_t B = batch.size();
  if (cfg.sleep_loss == "dre") {
    std::vector<std::vector<double>> times(B);
    Rng rng = make_stream(cfg.seed, tag(kSleepMc, 0) ^ stream, step);
    for (auto& ts : times)
      for (int q = 0; q < cfg.dre_times; ++q) ts.push_back(pb.T * uniform01(rng));
    LossResult r = dre_loss(psi, *pb.features, batch, pb.T, times);
    LossResult q = q0_nll(psi, *pb.features, batch, pb.T);
    r.loss += q.loss;
    for (std::size_t k = 0; k < r.grad.size(); ++k) r.grad[k] += q.grad[k];
    return r;
  }
  std::vector<LossResult> parts(B);
  parallel_for(B, [&](std::size_t b) {
    const int M = static_cast<int>(batch[b].grid.size()) - 1;
    std::vector<int> steps;
    double scale = 1.0;
    if (cfg.mc_loss) {
      Rng rng = make_stream(cfg.seed, tag(kSleepMc, 0) ^ stream, item(step, b));
      for (int q = 0; q < cfg.mc_steps; ++q) steps.push_back(static_cast<int>(rng() % std::uint64_t(M)));
      scale = double(M) / cfg.mc_steps;
    } else {
      steps.resize(M);
      std::iota(steps.begin(), steps.end(), 0);
    }
    parts[b] = sleep_loss_steps(psi, *pb.features, *pb.model, theta, {batch[b]}, pb.T, {steps}, scale, true);
  });
  LossResult out{0.0, std::vector<double>(psi.size(), 0.0)};
  for (const auto& p : parts) {
    out.loss += p.loss / B;
    for (std::size_t k = 0; k < out.grad.size(); ++k) out.grad[k] += p.grad[k] / B;
  }
  return out;
}

double rpe_or_nan(const TrainProblem& pb, const Params& th) {
  return pb.truth ? relative_parameter_error(th, *pb.truth) : NAN;
}

}  // namespace

void sleep_phase(const TrainProblem& pb, const TrainConfig& cfg, TrainState& st, int global_iter,
                 const RowSink& sink) {
  const Params theta = st.theta();
  const std::uint64_t stream = std::uint64_t(global_iter + 1) << 8;
  for (int n = 0; n < cfg.updates; ++n) {
    auto batch = sleep_batch(pb, cfg, theta, stream, n);
    double first = 0.0;
    for (int r = 0; r < cfg.reuse; ++r) {
      LossResult lr = sleep_step_loss(pb, cfg, st.psi, theta, batch, stream, long(n) * cfg.reuse + r);
      if (r == 0) first = lr.loss;
      adam_step(st.psi.p, lr.grad, st.psi_opt);
    }
    if (sink) {
      TelemetryRow row{global_iter, "sleep", n, first, NAN, NAN, theta, rpe_or_nan(pb, theta)};
      sink(row);
    }
  }
}

void pretrain(const TrainProblem& pb, const TrainConfig& cfg, TrainState& st, const RowSink& sink) {
  if (st.pretrain_finished) return;
  const Params theta = st.theta();
  const std::uint64_t stream = kPretrain << 8;
  std::vector<SleepSample> batch;
  std::vector<double> hist;
  const int W = cfg.plateau_window;
  while (st.pretrain_done < cfg.pretrain_steps) {
    const int step = st.pretrain_done;
    if (step % cfg.reuse == 0 || batch.empty()) batch = sleep_batch(pb, cfg, theta, stream, step / cfg.reuse);
    LossResult lr = sleep_step_loss(pb, cfg, st.psi, theta, batch, stream, step);
    adam_step(st.psi.p, lr.grad, st.psi_opt);
    ++st.pretrain_done;
    hist.push_back(lr.loss);
    if (sink) {
      TelemetryRow row{-1, "pretrain", step, lr.loss, NAN, NAN, theta, rpe_or_nan(pb, theta)};
      sink(row);
    }
    if (static_cast<int>(hist.size()) >= 2 * W && int(hist.size()) % W == 0) {
      double prev = std::accumulate(hist.end() - 2 * W, hist.end() - W, 0.0) / W;
      double cur = std::accumulate(hist.end() - W, hist.end(), 0.0) / W;
      if ((prev - cur) < cfg.plateau_tol * std::abs(prev)) break;
    }
  }
  st.pretrain_finished = true;
}

void wake_phase(const TrainProblem& pb, const TrainConfig& cfg, TrainState& st, int global_iter,
                const RowSink& sink) {
  const int B = cfg.batch_wake;
  for (int n = 0; n < cfg.updates; ++n) {
    Rng rng = make_stream(cfg.seed, tag(kWakeBatch, global_iter), n);
    const double dt = draw_dt(cfg, rng);
    auto idx = draw_indices(static_cast<int>(pb.data.size()), B, rng);
    std::vector<PathSample> paths(B);
    std::vector<char> ok(B, 0);
    std::vector<double> mean_ess(B, NAN), min_ess(B, NAN);
    parallel_for(B, [&](std::size_t b) {
      const ObservationSequence& obs = pb.data[idx[b]];
      NeuralTwist tw(st.psi, *pb.features, obs, pb.T);
      auto q0 = q0_distribution(st.psi, *pb.features, obs, pb.T);
      // an undertrained q0 can put mass where p0 has none
      if (auto* pp = dynamic_cast<const ProductDistribution*>(pb.p0)) q0 = q0.restricted_to(*pp);
      SMCConfig sc;
      sc.S = cfg.particles;
      sc.dt = dt;
      sc.ess_threshold = cfg.ess_threshold;
      sc.seed = make_stream(cfg.seed, tag(kWakeItem, global_iter), item(n, b))();
      try {
        auto ens = tsmc_run(*pb.model, st.theta_bar, tw, *pb.p0, q0, obs, pb.T, sc);
        Rng pick = make_stream(sc.seed, 7);
        paths[b] = draw_single_path(ens, pick);
        mean_ess[b] = ens.mean_ess();
        min_ess[b] = ens.min_ess();
        ok[b] = 1;
      } catch (const CollapseError&) {
      }
    });
    std::vector<int> kept;
    for (int b = 0; b < B; ++b) {
      if (!ok[b]) continue;
      auto w = wake_loss_and_grad(*pb.model, st.theta(), paths[b], *pb.p0, pb.data[idx[b]]);
      if (std::isfinite(w.loss)) kept.push_back(b);
    }
    st.wake_attempts += B;
    st.wake_skips += B - static_cast<long>(kept.size());
    if (kept.size() < std::size_t(B))
      fmt::print(stderr, "warning: wake update {}/{} skipped {} of {} paths (particle collapse)\n", global_iter, n,
                 B - kept.size(), B);

    double first = NAN;
    if (!kept.empty()) {
      for (int r = 0; r < cfg.reuse; ++r) {
        const Params th = st.theta();
        std::vector<WakeResult> parts(kept.size());
        parallel_for(kept.size(), [&](std::size_t q) {
          parts[q] = wake_loss_and_grad(*pb.model, th, paths[kept[q]], *pb.p0, pb.data[idx[kept[q]]]);
        });
        double loss = 0.0;
        std::vector<double> g(th.size(), 0.0);
        for (const auto& p : parts) {
          loss += p.loss / kept.size();
          for (std::size_t k = 0; k < g.size(); ++k) g[k] += th[k] * p.grad[k] / kept.size();
        }
        if (r == 0) first = loss;
        adam_step(st.log_theta, g, st.theta_opt);
      }
    }
    if (sink) {
      double me = 0.0, mn = INFINITY;
      int cnt = 0;
      for (int b = 0; b < B; ++b)
        if (ok[b]) {
          me += mean_ess[b];
          mn = std::min(mn, min_ess[b]);
          ++cnt;
        }
      TelemetryRow row{global_iter, "wake", n, first, cnt ? me / cnt : NAN, cnt ? mn : NAN, st.theta(),
                       rpe_or_nan(pb, st.theta())};
      sink(row);
    }
  }
  if (st.wake_attempts > 0 && double(st.wake_skips) / st.wake_attempts > cfg.max_skip_rate)
    throw CollapseError(fmt::format("wake phase skipped {} of {} paths, above the {} limit", st.wake_skips,
                                    st.wake_attempts, cfg.max_skip_rate));
}

void train(const TrainProblem& pb, const TrainConfig& cfg, TrainState& st, const RowSink& sink,
           const std::function<void(const TrainState&)>& on_checkpoint) {
  cfg.validate();
  if (pb.data.empty()) throw ConfigError("no training data");
  pretrain(pb, cfg, st, sink);
  for (int g = st.global_iter; g < cfg.global_iters; ++g) {
    sleep_phase(pb, cfg, st, g, sink);
    st.theta_bar = st.theta();
    wake_phase(pb, cfg, st, g, sink);
    st.global_iter = g + 1;
    if (on_checkpoint) on_checkpoint(st);
  }
}

// ---- checkpoints ----

namespace {

json adam_json(const AdamState& a) {
  return {{"step", a.step}, {"lr", a.lr}, {"beta1", a.beta1}, {"beta2", a.beta2},
          {"eps", a.eps},   {"m1", a.m1}, {"m2", a.m2}};
}

AdamState adam_from(const json& j) {
  AdamState a;
  a.step = j.at("step").get<long>();
  a.lr = j.at("lr").get<double>();
  a.beta1 = j.at("beta1").get<double>();
  a.beta2 = j.at("beta2").get<double>();
  a.eps = j.at("eps").get<double>();
  a.m1 = j.at("m1").get<std::vector<double>>();
  a.m2 = j.at("m2").get<std::vector<double>>();
  return a;
}

}  // namespace

std::string checkpoint_to_json(const TrainState& st, const std::string& config_hash) {
  json j;
  j["format"] = "lips-checkpoint";
  j["version"] = 1;
  j["config_hash"] = config_hash;
  j["twist"] = {{"F", st.psi.F}, {"m", st.psi.m}, {"params", st.psi.p}};
  j["twist_adam"] = adam_json(st.psi_opt);
  j["log_theta"] = st.log_theta;
  j["theta_adam"] = adam_json(st.theta_opt);
  j["theta_bar"] = st.theta_bar;
  j["global_iter"] = st.global_iter;
  j["pretrain_done"] = st.pretrain_done;
  j["pretrain_finished"] = st.pretrain_finished;
  j["wake_attempts"] = st.wake_attempts;
  j["wake_skips"] = st.wake_skips;
  return j.dump(1);
}

TrainState checkpoint_from_json(const std::string& text, std::string* config_hash) {
  try {
    json j = json::parse(text);
    if (j.at("format") != "lips-checkpoint" || j.at("version") != 1) throw IoError("not a version-1 checkpoint");
    TrainState st;
    st.psi = TwistNetParams(j.at("twist").at("F").get<int>(), j.at("twist").at("m").get<int>());
    auto p = j.at("twist").at("params").get<std::vector<double>>();
    if (p.size() != st.psi.size()) throw IoError("checkpoint twist parameters have the wrong size");
    st.psi.p = std::move(p);
    st.psi_opt = adam_from(j.at("twist_adam"));
    st.log_theta = j.at("log_theta").get<std::vector<double>>();
    st.theta_opt = adam_from(j.at("theta_adam"));
    st.theta_bar = j.at("theta_bar").get<std::vector<double>>();
    st.global_iter = j.at("global_iter").get<int>();
    st.pretrain_done = j.at("pretrain_done").get<int>();
    st.pretrain_finished = j.at("pretrain_finished").get<bool>();
    st.wake_attempts = j.at("wake_attempts").get<long>();
    st.wake_skips = j.at("wake_skips").get<long>();
    if (config_hash) *config_hash = j.at("config_hash").get<std::string>();
    return st;
  } catch (const json::exception& e) {
    throw IoError(fmt::format("bad checkpoint: {}", e.what()));
  }
}

}  // namespace lips
