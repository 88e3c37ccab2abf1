#include "lips/sirs_bench.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"
#include "lips/error.hpp"
#include "lips/gillespie.hpp"
#include "lips/parallel.hpp"

namespace lips {

namespace fs = std::filesystem;
using nlohmann::json;

StateSpaceSpec generate_graph(int d, double expected_degree, int F, Rng& rng) {
  if (d < 2) throw DimensionError("graph needs d >= 2");
  if (expected_degree < 0.0 || F < 0) throw Error("negative degree or feature dimension");
  std::vector<std::uint8_t> a(std::size_t(d) * d, 0);
  // w_i = expected_degree for all i: p_ij = w_i w_j / sum w
  const double p = std::min(1.0, expected_degree / d);
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j)
      if (uniform01(rng) < p) a[std::size_t(i) * d + j] = a[std::size_t(j) * d + i] = 1;
  std::vector<double> xi(std::size_t(d) * F);
  for (int i = 0; i < d; ++i) {
    double* row = xi.data() + std::size_t(i) * F;
    double n2 = 0.0;
    do {
      n2 = 0.0;
      for (int f = 0; f < F; ++f) {
        row[f] = standard_normal(rng);
        n2 += row[f] * row[f];
      }
    } while (F > 0 && n2 == 0.0);
    double inv = F > 0 ? 1.0 / std::sqrt(n2) : 0.0;
    for (int f = 0; f < F; ++f) row[f] *= inv;
  }
  return StateSpaceSpec(d, 3, a, xi, F);
}

ProductDistribution sirs_initial(int d, double p_infected) {
  if (!(p_infected >= 0.0 && p_infected <= 1.0)) throw Error("p_infected must be in [0, 1]");
  return ProductDistribution::iid(d, {1.0 - p_infected, p_infected, 0.0});
}

BenchmarkDataset generate_dataset(const StateSpaceSpec& spec, const Params& theta, double T, int K, double p_mask,
                                  double delta, int n_train, int n_test, double p0_infected, std::uint64_t seed) {
  if (spec.V() != 3) throw DimensionError("the SIRS benchmark needs V = 3");
  if (!(T > 0.0) || K < 0 || n_train < 0 || n_test < 0) throw Error("bad dataset sizes");
  SirsModel model(spec);
  auto p0 = sirs_initial(spec.d(), p0_infected);
  BenchmarkDataset ds;
  ds.spec = spec;
  ds.theta = theta;
  ds.T = T;
  ds.K = K;
  ds.p_mask = p_mask;
  ds.delta = delta;
  ds.p0_infected = p0_infected;
  ds.seed = seed;
  auto make = [&](int split, int n, std::vector<PathSample>& paths, std::vector<ObservationSequence>& obs) {
    paths.resize(n);
    obs.resize(n);
    parallel_for(n, [&](std::size_t k) {
      Rng rng = make_stream(seed, 100 + split, k);
      std::vector<double> tau(K);
      for (auto& t : tau) t = T * uniform01(rng);
      std::sort(tau.begin(), tau.end());
      paths[k] = gillespie_simulate(model, theta, p0.sample(rng), T, rng);
      obs[k] = sample_observations(paths[k], tau, 3, p_mask, delta, rng);
    });
  };
  make(0, n_train, ds.train_paths, ds.train_obs);
  make(1, n_test, ds.test_paths, ds.test_obs);
  return ds;
}

std::string spec_to_json(const StateSpaceSpec& spec) {
  json j;
  j["d"] = spec.d();
  j["V"] = spec.V();
  j["F"] = spec.F();
  json edges = json::array();
  for (int i = 0; i < spec.d(); ++i)
    for (int k : spec.neighbors(i))
      if (k > i) edges.push_back({i, k});
  j["edges"] = edges;
  j["features"] = spec.features();
  return j.dump(1);
}

StateSpaceSpec spec_from_json(const std::string& text) {
  try {
    json j = json::parse(text);
    int d = j.at("d").get<int>(), V = j.at("V").get<int>(), F = j.at("F").get<int>();
    if (d < 1 || V < 2 || F < 0) throw IoError("bad spec dimensions");
    std::vector<std::uint8_t> a(std::size_t(d) * d, 0);
    for (const auto& e : j.at("edges")) {
      int u = e.at(0).get<int>(), v = e.at(1).get<int>();
      if (u < 0 || v < 0 || u >= d || v >= d) throw IoError("edge out of range");
      a[std::size_t(u) * d + v] = a[std::size_t(v) * d + u] = 1;
    }
    auto xi = j.at("features").get<std::vector<double>>();
    if (xi.size() != std::size_t(d) * F) throw IoError("feature array has the wrong size");
    return StateSpaceSpec(d, V, a, xi, F);
  } catch (const json::exception& e) {
    throw IoError(fmt::format("bad spec.json: {}", e.what()));
  }
}

namespace {

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream os(file);
  if (!os) throw IoError("cannot write " + file.string());
  os << text << "\n";
  if (!os) throw IoError("write failed: " + file.string());
}

std::string read_text(const fs::path& file) {
  std::ifstream is(file);
  if (!is) throw IoError("cannot read " + file.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

void save_dataset(const std::string& dir, const BenchmarkDataset& ds, const std::string& provenance) {
  std::error_code ec;
  fs::path root(dir);
  for (const char* sub : {"paths/train", "paths/test", "obs/train", "obs/test"}) {
    fs::create_directories(root / sub, ec);
    if (ec) throw IoError(fmt::format("cannot create {}: {}", (root / sub).string(), ec.message()));
  }
  json spec = json::parse(spec_to_json(ds.spec));
  if (!provenance.empty()) spec["provenance"] = provenance;
  write_text(root / "spec.json", spec.dump(1));
  json params = {{"alpha0", ds.theta.at(0)},
                 {"alpha1", ds.theta.at(1)},
                 {"beta", ds.theta.at(2)},
                 {"gamma", ds.theta.at(3)},
                 {"T", ds.T},
                 {"K", ds.K},
                 {"p_mask", ds.p_mask},
                 {"delta", ds.delta},
                 {"p0_infected", ds.p0_infected},
                 {"n_train", ds.train_paths.size()},
                 {"n_test", ds.test_paths.size()},
                 {"seed", ds.seed}};
  if (!provenance.empty()) params["provenance"] = provenance;
  write_text(root / "params.json", params.dump(1));
  auto dump = [&](const char* split, const std::vector<PathSample>& paths, const std::vector<ObservationSequence>& obs) {
    for (std::size_t k = 0; k < paths.size(); ++k) {
      save_path((root / "paths" / split / fmt::format("{}.path", k)).string(), paths[k], 3, provenance);
      save_observations((root / "obs" / split / fmt::format("{}.obs", k)).string(), obs[k], provenance);
    }
  };
  dump("train", ds.train_paths, ds.train_obs);
  dump("test", ds.test_paths, ds.test_obs);
}

BenchmarkDataset load_dataset(const std::string& dir) {
  fs::path root(dir);
  BenchmarkDataset ds;
  ds.spec = spec_from_json(read_text(root / "spec.json"));
  try {
    json p = json::parse(read_text(root / "params.json"));
    ds.theta = {p.at("alpha0").get<double>(), p.at("alpha1").get<double>(), p.at("beta").get<double>(),
                p.at("gamma").get<double>()};
    ds.T = p.at("T").get<double>();
    ds.K = p.at("K").get<int>();
    ds.p_mask = p.at("p_mask").get<double>();
    ds.delta = p.at("delta").get<double>();
    ds.p0_infected = p.at("p0_infected").get<double>();
    ds.seed = p.at("seed").get<std::uint64_t>();
    int n_train = p.at("n_train").get<int>(), n_test = p.at("n_test").get<int>();
    for (int k = 0; k < n_train; ++k) {
      ds.train_paths.push_back(load_path((root / "paths/train" / fmt::format("{}.path", k)).string()));
      ds.train_obs.push_back(load_observations((root / "obs/train" / fmt::format("{}.obs", k)).string()));
    }
    for (int k = 0; k < n_test; ++k) {
      ds.test_paths.push_back(load_path((root / "paths/test" / fmt::format("{}.path", k)).string()));
      ds.test_obs.push_back(load_observations((root / "obs/test" / fmt::format("{}.obs", k)).string()));
    }
  } catch (const json::exception& e) {
    throw IoError(fmt::format("bad params.json: {}", e.what()));
  }
  return ds;
}

std::vector<double> smooth_marginals(const std::vector<double>& p, int V, double eps) {
  std::vector<double> out(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) out[k] = (1.0 - eps) * p[k] + eps / V;
  return out;
}

namespace {

void check_shapes(const std::vector<std::vector<double>>& marginals, const PathSample& truth,
                  const std::vector<double>& times, int V) {
  if (marginals.size() != times.size() || times.empty())
    throw DimensionError(fmt::format("{} marginal tables for {} times", marginals.size(), times.size()));
  const std::size_t dv = truth.initial.size() * V;
  for (const auto& m : marginals)
    if (m.size() != dv) throw DimensionError("marginal table does not match d x V");
}

}  // namespace

double cross_entropy_metric(const std::vector<std::vector<double>>& marginals, const PathSample& truth,
                            const std::vector<double>& times, int V) {
  check_shapes(marginals, truth, times, V);
  auto zs = truth.states_at(times);
  const int d = static_cast<int>(truth.initial.size());
  double s = 0.0;
  for (std::size_t m = 0; m < times.size(); ++m)
    for (int i = 0; i < d; ++i) s -= std::log(marginals[m][std::size_t(i) * V + zs[m][i]]);
  return s / (double(times.size()) * d);
}

double brier_metric(const std::vector<std::vector<double>>& marginals, const PathSample& truth,
                    const std::vector<double>& times, int V) {
  check_shapes(marginals, truth, times, V);
  auto zs = truth.states_at(times);
  const int d = static_cast<int>(truth.initial.size());
  double s = 0.0;
  for (std::size_t m = 0; m < times.size(); ++m)
    for (int i = 0; i < d; ++i)
      for (int v = 0; v < V; ++v) {
        double e = marginals[m][std::size_t(i) * V + v] - (v == zs[m][i] ? 1.0 : 0.0);
        s += e * e;
      }
  return s / (double(times.size()) * d);
}

double relative_parameter_error(const Params& estimate, const Params& truth) {
  if (estimate.size() != truth.size()) throw DimensionError("parameter vectors differ in length");
  double s = 0.0;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    if (truth[k] == 0.0) throw Error(fmt::format("true parameter {} is zero", k));
    s += std::abs(estimate[k] - truth[k]) / std::abs(truth[k]);
  }
  return s;
}

}  // namespace lips
