#include "lips/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include <fmt/format.h>

#include "lips/error.hpp"
#include "lips/oracle.hpp"
#include "lips/parallel.hpp"
#include "lips/sirs_bench.hpp"
#include "lips/wake_sleep.hpp"

namespace lips {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(fmt::format("cannot create {}: {}", dir.string(), ec.message()));
}

void write_file(const fs::path& file, const std::string& text) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw IoError("cannot write " + file.string());
  os << text;
  if (!os) throw IoError("write failed: " + file.string());
}

std::string read_file(const fs::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw IoError("cannot read " + file.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string num(double x) { return std::isnan(x) ? std::string() : fmt::format("{}", x); }

std::string header_line(const RunConfig& rc) { return "# " + rc.provenance() + "\n"; }

Params theta_of(const RunConfig& rc, const std::string& key, std::size_t n) {
  auto th = rc.get<std::vector<double>>(key);
  if (th.size() != n) throw ConfigError(fmt::format("{} needs {} entries, got {}", key, n, th.size()));
  for (double v : th)
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError(key + " entries must be finite and non-negative");
  return th;
}

std::string required_path(const RunConfig& rc, const std::string& key) {
  if (!rc.has(key)) throw ConfigError(fmt::format("{} needs '{}'", rc.command, key));
  const auto& v = rc.values.at(key);
  if (!v.is_string()) throw ConfigError(key + " must be a string");
  return v.get<std::string>();
}

// ---- SVG line charts ----

struct Series {
  std::string name;
  std::vector<double> x, y;
};

void write_svg(const fs::path& file, const std::string& title, const std::string& xlabel,
               const std::vector<Series>& series) {
  const double W = 640, H = 400, L = 60, R = 20, Tp = 40, B = 50;
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series)
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) continue;
      x0 = std::min(x0, s.x[k]);
      x1 = std::max(x1, s.x[k]);
      y0 = std::min(y0, s.y[k]);
      y1 = std::max(y1, s.y[k]);
    }
  if (!(x0 <= x1)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - Tp - B); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  std::string s = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" font-family=\"sans-serif\" "
      "font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      "<text x=\"{}\" y=\"24\" font-size=\"14\">{}</text>\n",
      W, H, L, title);
  s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n", L, H - B, W - R);
  s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n", L, H - B, Tp);
  s += fmt::format("<text x=\"{}\" y=\"{}\">{:.4g}</text>\n", L, H - B + 16, x0);
  s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.4g}</text>\n", W - R, H - B + 16, x1);
  s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", (L + W - R) / 2, H - 12, xlabel);
  s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.4g}</text>\n", L - 4, H - B, y0);
  s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.4g}</text>\n", L - 4, Tp + 10, y1);
  for (std::size_t c = 0; c < series.size(); ++c) {
    const auto& sr = series[c];
    const char* col = colors[c % 6];
    std::string pts;
    for (std::size_t k = 0; k < sr.x.size(); ++k)
      if (std::isfinite(sr.x[k]) && std::isfinite(sr.y[k])) pts += fmt::format("{:.2f},{:.2f} ", px(sr.x[k]), py(sr.y[k]));
    s += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n", col, pts);
    s += fmt::format("<text x=\"{}\" y=\"{}\" fill=\"{}\" text-anchor=\"end\">{}</text>\n", W - R, Tp + 14 * (c + 1),
                     col, sr.name);
  }
  s += "</svg>\n";
  write_file(file, s);
}

// ---- shared training setup ----

struct Problem {
  BenchmarkDataset ds;
  SirsModel model;
  ProductDistribution p0;
  FeatureBuilder fb;
  TrainProblem pb;

  explicit Problem(const std::string& dir)
      : ds(load_dataset(dir)), model(ds.spec), p0(sirs_initial(ds.spec.d(), ds.p0_infected)), fb(ds.spec) {
    pb.model = &model;
    pb.p0 = &p0;
    pb.features = &fb;
    pb.data = ds.train_obs;
    pb.T = ds.T;
    pb.p_mask = ds.p_mask;
    pb.delta = ds.delta;
    pb.truth = ds.theta;
  }
};

TrainConfig train_config(const RunConfig& rc) {
  TrainConfig c;
  c.global_iters = rc.get<int>("global_iters");
  c.updates = rc.get<int>("updates");
  c.batch_sleep = rc.get<int>("batch_sleep");
  c.batch_wake = rc.get<int>("batch_wake");
  c.particles = rc.get<int>("particles");
  c.dt = rc.get<std::vector<double>>("dt");
  c.mc_loss = rc.get<bool>("mc_loss");
  c.mc_steps = rc.get<int>("mc_steps");
  c.reuse = rc.get<int>("reuse");
  c.sleep_loss = rc.get<std::string>("sleep_loss");
  c.dre_times = rc.get<int>("dre_times");
  c.lr_psi = rc.get<double>("lr_psi");
  c.lr_theta = rc.get<double>("lr_theta");
  c.ess_threshold = rc.get<double>("ess_threshold");
  c.pretrain_steps = rc.get<int>("pretrain_steps");
  c.plateau_window = rc.get<int>("plateau_window");
  c.plateau_tol = rc.get<double>("plateau_tol");
  c.width = rc.get<int>("width");
  c.max_skip_rate = rc.get<double>("max_skip_rate");
  c.seed = rc.seed;
  c.validate();
  return c;
}

void run_training(const RunConfig& rc, const CommandOptions& opt, bool pretrain_only) {
  Problem P(required_path(rc, "dataset"));
  TrainConfig cfg = train_config(rc);
  if (pretrain_only) cfg.global_iters = 0;
  const Params theta0 = rc.has("theta") ? theta_of(rc, "theta", 4) : P.ds.theta;

  TrainState st;
  bool resumed = false;
  if (rc.has("resume")) {
    std::string hash;
    st = checkpoint_from_json(read_file(required_path(rc, "resume")), &hash);
    if (hash != rc.hash)
      throw ConfigError(fmt::format("checkpoint was written under config {}, this run is {}", hash, rc.hash));
    resumed = true;
  } else {
    st = initial_state(P.pb, cfg, theta0);
  }

  const fs::path out(opt.out);
  ensure_dir(out / "checkpoints");
  const fs::path tfile = out / "telemetry.csv";
  const bool append = resumed && fs::exists(tfile);
  std::ofstream tel(tfile, append ? std::ios::app | std::ios::binary : std::ios::binary);
  if (!tel) throw IoError("cannot write " + tfile.string());
  if (!append) tel << header_line(rc) << telemetry_header() << "\n";

  std::vector<TelemetryRow> rows;
  auto sink = [&](const TelemetryRow& r) {
    tel << telemetry_line(r) << "\n";
    if (!tel) throw IoError("write failed: " + tfile.string());
    if (opt.svg) rows.push_back(r);
  };
  auto save = [&](const TrainState& s) {
    const std::string text = checkpoint_to_json(s, rc.hash);
    write_file(out / "checkpoints" / fmt::format("iter_{}.json", s.global_iter), text);
    write_file(out / "checkpoint.json", text);
  };
  train(P.pb, cfg, st, sink, save);
  tel.close();
  save(st);

  const auto names = P.model.param_names();
  const Params th = st.theta();
  std::string csv = header_line(rc);
  for (const auto& n : names) csv += n + ",";
  csv += "rpe\n";
  for (double v : th) csv += fmt::format("{},", v);
  csv += fmt::format("{}\n", relative_parameter_error(th, P.ds.theta));
  write_file(out / "theta.csv", csv);

  if (opt.svg) {
    std::vector<Series> loss;
    for (const char* ph : {"pretrain", "sleep", "wake"}) {
      Series s{ph, {}, {}};
      for (std::size_t k = 0; k < rows.size(); ++k)
        if (rows[k].phase == ph) {
          s.x.push_back(double(k));
          s.y.push_back(rows[k].loss);
        }
      if (!s.x.empty()) loss.push_back(std::move(s));
    }
    write_svg(out / "loss.svg", "training loss", "telemetry row", loss);
    Series rpe{"rpe", {}, {}};
    for (std::size_t k = 0; k < rows.size(); ++k)
      if (rows[k].phase == "wake" && std::isfinite(rows[k].rpe)) {
        rpe.x.push_back(double(k));
        rpe.y.push_back(rows[k].rpe);
      }
    write_svg(out / "rpe.svg", "relative parameter error", "telemetry row", {rpe});
  }
}

}  // namespace

// ---- generate ----

void cmd_generate(const RunConfig& rc, const CommandOptions& opt) {
  const int d = rc.get<int>("d"), F = rc.get<int>("F"), K = rc.get<int>("K");
  const int n_train = rc.get<int>("n_train"), n_test = rc.get<int>("n_test");
  const double deg = rc.get<double>("expected_degree"), T = rc.get<double>("T");
  const double p_mask = rc.get<double>("p_mask"), delta = rc.get<double>("delta");
  const double p0 = rc.get<double>("p0_infected");
  const Params theta = theta_of(rc, "theta", 4);
  if (d < 2) throw ConfigError("d must be at least 2");
  if (F < 0 || K < 0 || n_train < 0 || n_test < 0) throw ConfigError("F, K, n_train and n_test must be non-negative");
  if (!(deg >= 0.0)) throw ConfigError("expected_degree must be non-negative");
  if (!(T > 0.0)) throw ConfigError("T must be positive");
  if (!(p_mask >= 0.0 && p_mask <= 1.0)) throw ConfigError("p_mask must be in [0, 1]");
  if (!(delta >= 0.0 && delta <= 0.5)) throw ConfigError("delta must be in [0, 0.5]");
  if (!(p0 >= 0.0 && p0 <= 1.0)) throw ConfigError("p0_infected must be in [0, 1]");
  Rng g = make_stream(rc.seed, 1);
  auto spec = generate_graph(d, deg, F, g);
  auto ds = generate_dataset(spec, theta, T, K, p_mask, delta, n_train, n_test, p0, rc.seed);
  save_dataset(opt.out, ds, rc.provenance());
}

// ---- oracle ----

void cmd_oracle(const RunConfig& rc, const CommandOptions& opt) {
  auto spec = spec_from_json(read_file(required_path(rc, "spec")));
  if (spec.V() != 3) throw ConfigError("the oracle runs the SIRS model, which needs V = 3");
  const int d = spec.d();
  double states = std::pow(3.0, d);
  if (states > double(kOracleMaxStates))
    throw ConfigError(fmt::format("d = {} is too large for the oracle ({} states, limit {})", d, states,
                                  kOracleMaxStates));
  const double T = rc.get<double>("T"), dt = rc.get<double>("dt");
  if (!(T > 0.0) || !(dt > 0.0)) throw ConfigError("T and dt must be positive");
  const Params theta = theta_of(rc, "theta", 4);
  ObservationSequence obs;
  if (rc.has("obs")) {
    obs = load_observations(required_path(rc, "obs"));
    if (obs.d != d || obs.V != 3) throw ConfigError("observation file does not match the spec");
  } else {
    obs.d = d;
    obs.V = 3;
  }
  obs.validate(T);
  std::vector<double> probs;
  if (rc.has("p0")) {
    probs = rc.get<std::vector<double>>("p0");
    if (probs.size() != std::size_t(d) * 3) throw ConfigError("p0 must have d x 3 entries");
  } else {
    const double p = rc.get<double>("p0_infected");
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("p0_infected must be in [0, 1]");
    probs = sirs_initial(d, p).probs();
  }
  SirsModel model(spec);
  auto p0v = product_distribution(probs, d, 3);
  std::string diag;
  // without observations Z = 1 exactly
  const double log_z = obs.K() == 0 ? 0.0 : exact_log_marginal_likelihood(model, theta, p0v, obs, T, &diag);
  if (std::isinf(log_z)) throw InconsistentObservations("observations are impossible under the model: " + diag);
  auto grid = make_grid(T, dt, obs.times);
  auto marg = exact_posterior_marginals(model, theta, p0v, obs, grid);

  const fs::path out(opt.out);
  ensure_dir(out);
  std::string csv = header_line(rc) + "time,node,state,probability\n";
  for (std::size_t j = 0; j < grid.size(); ++j) {
    auto nm = node_marginals(marg[j], d, 3);
    for (int i = 0; i < d; ++i)
      for (int v = 0; v < 3; ++v) csv += fmt::format("{},{},{},{}\n", grid[j], i, v, nm[std::size_t(i) * 3 + v]);
  }
  write_file(out / "marginals.csv", csv);
  write_file(out / "logz.csv", header_line(rc) + fmt::format("log_z\n{}\n", log_z));
}

// ---- training ----

void cmd_train_twist(const RunConfig& rc, const CommandOptions& opt) { run_training(rc, opt, true); }
void cmd_train(const RunConfig& rc, const CommandOptions& opt) { run_training(rc, opt, false); }

// ---- infer ----

void cmd_infer(const RunConfig& rc, const CommandOptions& opt) {
  const std::string method = rc.get<std::string>("method");
  const bool bpf = method == "bpf";
  if (!bpf && method != "tsmc-kl" && method != "tsmc-dre")
    throw ConfigError("method must be tsmc-kl, tsmc-dre or bpf, got " + method);
  const std::string split = rc.get<std::string>("split");
  if (split != "train" && split != "test") throw ConfigError("split must be train or test");
  const BenchmarkDataset ds = load_dataset(required_path(rc, "dataset"));
  const auto& obs_all = split == "test" ? ds.test_obs : ds.train_obs;
  const auto& truth_all = split == "test" ? ds.test_paths : ds.train_paths;
  const Params theta = rc.has("theta") ? theta_of(rc, "theta", 4) : ds.theta;
  const int S = rc.has("particles") ? rc.get<int>("particles") : (bpf ? 250 : 25);
  const double dt = rc.get<double>("dt"), eps = rc.get<double>("eps");
  const double ess_threshold = rc.get<double>("ess_threshold");
  if (S < 1) throw ConfigError("particles must be positive");
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  if (!(eps >= 0.0 && eps < 1.0)) throw ConfigError("eps must be in [0, 1)");
  const int n_all = static_cast<int>(obs_all.size());
  const int first = rc.get<int>("first");
  const int count = rc.has("count") ? rc.get<int>("count") : n_all - first;
  if (first < 0 || count < 0 || first + count > n_all)
    throw ConfigError(fmt::format("paths [{}, {}) out of range for {} {} paths", first, first + count, n_all, split));

  SirsModel model(ds.spec);
  auto p0 = sirs_initial(ds.spec.d(), ds.p0_infected);
  FeatureBuilder fb(ds.spec);
  TwistNetParams psi;
  if (!bpf) {
    psi = checkpoint_from_json(read_file(required_path(rc, "checkpoint"))).psi;
    if (psi.F != fb.dim()) throw ConfigError("checkpoint twist does not match this dataset's feature size");
  }

  struct PathOut {
    double ce = NAN, brier = NAN, log_z = NAN, mean_ess = NAN, min_ess = NAN;
    std::vector<std::pair<double, double>> ess;
    std::vector<double> grid;
    std::vector<std::vector<double>> marg;
    PathSample sample;
  };
  std::vector<PathOut> res(count);
  parallel_for(count, [&](std::size_t q) {
    const int k = first + static_cast<int>(q);
    const ObservationSequence& obs = obs_all[k];
    SMCConfig sc;
    sc.S = S;
    sc.dt = dt;
    sc.ess_threshold = ess_threshold;
    sc.seed = make_stream(rc.seed, 200, k)();
    ParticleEnsemble ens;
    if (bpf) {
      ens = bpf_run(model, theta, p0, obs, ds.T, sc);
    } else {
      NeuralTwist tw(psi, fb, obs, ds.T);
      auto q0 = q0_distribution(psi, fb, obs, ds.T).restricted_to(p0);
      ens = tsmc_run(model, theta, tw, p0, q0, obs, ds.T, sc);
    }
    PathOut& r = res[q];
    r.grid = make_grid(ds.T, dt, obs.times);
    r.marg = posterior_marginals_from_ensemble(ens, r.grid, 3, eps);
    r.ce = cross_entropy_metric(r.marg, truth_all[k], r.grid, 3);
    r.brier = brier_metric(r.marg, truth_all[k], r.grid, 3);
    r.log_z = ens.log_z;
    r.mean_ess = ens.mean_ess();
    r.min_ess = ens.min_ess();
    r.ess = ens.ess_history;
    Rng pick = make_stream(sc.seed, 7);
    r.sample = draw_single_path(ens, pick);
  });

  const fs::path out(opt.out);
  const std::string head = header_line(rc);
  ensure_dir(out / "ess_history");
  ensure_dir(out / "marginals");
  const bool save_paths = rc.get<bool>("save_paths");
  if (save_paths) ensure_dir(out / "samples");
  std::string metrics = head + "path,ce,brier,log_z,mean_ess,min_ess\n";
  std::string logz = head + "path,log_z\n";
  for (int q = 0; q < count; ++q) {
    const int k = first + q;
    const PathOut& r = res[q];
    metrics += fmt::format("{},{},{},{},{},{}\n", k, num(r.ce), num(r.brier), num(r.log_z), num(r.mean_ess),
                           num(r.min_ess));
    logz += fmt::format("{},{}\n", k, num(r.log_z));
    std::string ess = head + "t,ess\n";
    for (auto [t, e] : r.ess) ess += fmt::format("{},{}\n", t, e);
    write_file(out / "ess_history" / fmt::format("{}.csv", k), ess);
    std::string mc = head + "time,node,state,probability\n";
    const int d = ds.spec.d();
    for (std::size_t j = 0; j < r.grid.size(); ++j)
      for (int i = 0; i < d; ++i)
        for (int v = 0; v < 3; ++v)
          mc += fmt::format("{},{},{},{}\n", r.grid[j], i, v, r.marg[j][std::size_t(i) * 3 + v]);
    write_file(out / "marginals" / fmt::format("{}.csv", k), mc);
    if (save_paths) save_path((out / "samples" / fmt::format("{}.path", k)).string(), r.sample, 3, rc.provenance());
  }
  write_file(out / "metrics.csv", metrics);
  write_file(out / "logz.csv", logz);

  if (opt.svg) {
    std::vector<Series> ss;
    for (int q = 0; q < std::min(count, 5); ++q) {
      Series s{fmt::format("path {}", first + q), {}, {}};
      for (auto [t, e] : res[q].ess) {
        s.x.push_back(t);
        s.y.push_back(e);
      }
      ss.push_back(std::move(s));
    }
    write_svg(out / "ess_history.svg", "ESS (" + method + ")", "t", ss);
  }
}

// ---- evaluate ----

std::vector<double> CsvTable::column(const std::string& name) const {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw IoError("no column " + name);
  const std::size_t c = it - header.begin();
  std::vector<double> out;
  for (const auto& r : rows) out.push_back(r[c]);
  return out;
}

CsvTable read_csv(const std::string& file) {
  std::istringstream is(read_file(file));
  CsvTable t;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> f;
    std::stringstream ss(s);
    std::string x;
    while (std::getline(ss, x, ',')) f.push_back(x);
    if (!s.empty() && s.back() == ',') f.push_back("");
    return f;
  };
  bool have_header = false;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto f = split(line);
    if (!have_header) {
      t.header = f;
      have_header = true;
      continue;
    }
    if (f.size() != t.header.size()) throw IoError(fmt::format("{}: row has {} fields, header {}", file, f.size(), t.header.size()));
    std::vector<double> row;
    for (const auto& x : f) {
      if (x.empty()) {
        row.push_back(NAN);
        continue;
      }
      try {
        std::size_t used = 0;
        row.push_back(std::stod(x, &used));
        if (used != x.size()) throw std::invalid_argument(x);
      } catch (const std::logic_error&) {
        throw IoError(fmt::format("{}: not a number: '{}'", file, x));
      }
    }
    t.rows.push_back(std::move(row));
  }
  if (!have_header) throw IoError(file + " has no header");
  return t;
}

Summary summarize(const std::vector<double>& x) {
  if (x.empty()) throw Error("nothing to summarize");
  Summary s;
  s.n = static_cast<long>(x.size());
  for (double v : x) s.mean += v;
  s.mean /= s.n;
  if (s.n < 2) {
    s.two_se = NAN;
    return s;
  }
  double ss = 0.0;
  for (double v : x) ss += (v - s.mean) * (v - s.mean);
  s.two_se = 2.0 * std::sqrt(ss / (s.n - 1) / s.n);
  return s;
}

void cmd_evaluate(const RunConfig& rc, const CommandOptions& opt) {
  auto inputs = rc.get<std::vector<std::string>>("inputs");
  if (inputs.empty()) throw ConfigError("evaluate needs at least one metrics file");
  std::string csv = header_line(rc) + "input,metric,mean,two_se,n\n";
  for (const auto& in : inputs) {
    auto t = read_csv(in);
    if (t.rows.empty()) throw Error(in + " has no rows");
    for (const auto& name : t.header) {
      if (name == "path") continue;
      auto s = summarize(t.column(name));
      csv += fmt::format("{},{},{},{},{}\n", in, name, num(s.mean), num(s.two_se), s.n);
    }
  }
  ensure_dir(opt.out);
  write_file(fs::path(opt.out) / "summary.csv", csv);
}

// ---- dispatch ----

int exit_code_for_current_exception() {
  try {
    throw;
  } catch (const ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kExitConfig;
  } catch (const CollapseError& e) {
    fmt::print(stderr, "numerical collapse: {}\n", e.what());
    return kExitCollapse;
  } catch (const IoError& e) {
    fmt::print(stderr, "i/o error: {}\n", e.what());
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    fmt::print(stderr, "i/o error: {}\n", e.what());
    return kExitIo;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitOther;
  } catch (...) {
    fmt::print(stderr, "error: unknown exception\n");
    return kExitOther;
  }
}

int run_command(const std::string& command, const RunConfig& rc, const CommandOptions& opt) {
  try {
    if (command == "generate") cmd_generate(rc, opt);
    else if (command == "oracle") cmd_oracle(rc, opt);
    else if (command == "train-twist") cmd_train_twist(rc, opt);
    else if (command == "train") cmd_train(rc, opt);
    else if (command == "infer") cmd_infer(rc, opt);
    else if (command == "evaluate") cmd_evaluate(rc, opt);
    else throw ConfigError("unknown command " + command);
    return kExitOk;
  } catch (...) {
    return exit_code_for_current_exception();
  }
}

}  // namespace lips
