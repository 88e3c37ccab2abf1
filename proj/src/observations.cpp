#include "lips/observations.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "lips/error.hpp"

namespace lips {

double ObservationSequence::log_emission(int c, int zi) const {
  if (c == V) return std::log(p_mask);
  double p = c == zi ? 1.0 - delta * (V - 1) : delta;
  return std::log((1.0 - p_mask) * p);
}

double ObservationSequence::log_potential(int k, const LatentState& z) const {
  const auto& y = values[k];
  double s = 0.0;
  for (int i = 0; i < d; ++i) s += log_emission(y[i], z[i]);
  return s;
}

int ObservationSequence::index_at(double t, double tol) const {
  auto it = std::lower_bound(times.begin(), times.end(), t - tol);
  if (it != times.end() && std::abs(*it - t) <= tol) return static_cast<int>(it - times.begin());
  return -1;
}

int ObservationSequence::next_after(double t) const {
  return static_cast<int>(std::upper_bound(times.begin(), times.end(), t) - times.begin());
}

void ObservationSequence::validate(double horizon) const {
  if (d < 1 || V < 2) throw Error("observation sequence has bad d or V");
  if (p_mask < 0.0 || p_mask > 1.0) throw Error("p_mask outside [0,1]");
  if (delta < 0.0 || delta * (V - 1) > 1.0) throw Error("label noise out of range");
  if (values.size() != times.size()) throw Error("observation times/values length mismatch");
  for (int k = 0; k < K(); ++k) {
    if (!(times[k] > 0.0) || times[k] > horizon) throw Error(fmt::format("tau_{} = {} outside (0,T]", k, times[k]));
    if (k > 0 && !(times[k] > times[k - 1])) throw Error("observation times not strictly increasing");
    if (static_cast<int>(values[k].size()) != d) throw Error("observation row has wrong length");
    for (int c : values[k])
      if (c < 0 || c > V) throw Error(fmt::format("observed value {} outside [0,{}]", c, V));
  }
}

ObservationSequence sample_observations(const PathSample& path, const std::vector<double>& times,
                                        int V, double p_mask, double delta, Rng& rng) {
  ObservationSequence obs;
  obs.d = static_cast<int>(path.initial.size());
  obs.V = V;
  obs.p_mask = p_mask;
  obs.delta = delta;
  obs.times = times;
  auto states = path.states_at(times);
  for (const LatentState& z : states) {
    std::vector<int> y(obs.d);
    for (int i = 0; i < obs.d; ++i) {
      if (uniform01(rng) < p_mask) {
        y[i] = V;
        continue;
      }
      // correct label with prob 1 - delta(V-1), else a uniform wrong one
      double u = uniform01(rng);
      double wrong = delta * (V - 1);
      if (u >= wrong) {
        y[i] = z[i];
      } else {
        int w = std::min(V - 2, static_cast<int>(u / delta));
        y[i] = w < z[i] ? w : w + 1;
      }
    }
    obs.values.push_back(std::move(y));
  }
  return obs;
}

void write_observations(std::ostream& os, const ObservationSequence& obs) {
  os << fmt::format("K={} d={} V={} p_mask={} delta={}\n", obs.K(), obs.d, obs.V, obs.p_mask,
                    obs.delta);
  for (int k = 0; k < obs.K(); ++k)
    os << fmt::format("{},{}\n", obs.times[k], fmt::join(obs.values[k], ","));
}

ObservationSequence read_observations(std::istream& is) {
  ObservationSequence obs;
  std::string line;
  bool have_header = false;
  int K = -1;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!have_header) {
      std::istringstream ss(line);
      std::string tok;
      while (ss >> tok) {
        auto eq = tok.find('=');
        if (eq == std::string::npos) throw IoError("bad observation header: " + line);
        std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
        if (key == "K") K = std::stoi(val);
        else if (key == "d") obs.d = std::stoi(val);
        else if (key == "V") obs.V = std::stoi(val);
        else if (key == "p_mask") obs.p_mask = std::stod(val);
        else if (key == "delta") obs.delta = std::stod(val);
        else throw IoError("unknown observation header key " + key);
      }
      have_header = true;
      continue;
    }
    std::istringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    obs.times.push_back(std::stod(cell));
    std::vector<int> y;
    while (std::getline(ss, cell, ',')) y.push_back(std::stoi(cell));
    obs.values.push_back(std::move(y));
  }
  if (!have_header) throw IoError("observation file has no header");
  if (K != obs.K()) throw IoError(fmt::format("header says K={} but found {} rows", K, obs.K()));
  try {
    obs.validate(INFINITY);
  } catch (const Error& e) {
    throw IoError(std::string("invalid observations: ") + e.what());
  }
  return obs;
}

void save_observations(const std::string& file, const ObservationSequence& obs,
                       const std::string& provenance) {
  std::ofstream os(file);
  if (!os) throw IoError("cannot write " + file);
  if (!provenance.empty()) os << "# " << provenance << "\n";
  write_observations(os, obs);
  if (!os) throw IoError("write failed: " + file);
}

ObservationSequence load_observations(const std::string& file) {
  std::ifstream is(file);
  if (!is) throw IoError("cannot read " + file);
  return read_observations(is);
}

std::vector<double> make_grid(double T, double dt, const std::vector<double>& extra) {
  std::vector<double> g;
  long n = std::max(1L, static_cast<long>(std::ceil(T / dt - 1e-9)));
  for (long k = 0; k < n; ++k) g.push_back(k * dt);
  g.push_back(T);
  for (double t : extra)
    if (t >= 0.0 && t <= T) g.push_back(t);
  std::sort(g.begin(), g.end());
  std::vector<double> out;
  for (double t : g) {
    if (!out.empty() && t - out.back() <= 1e-9) {
      // keep the exact observation time over the uniform point
      if (std::find(extra.begin(), extra.end(), t) != extra.end()) out.back() = t;
      continue;
    }
    out.push_back(t);
  }
  out.front() = 0.0;
  return out;
}

}  // namespace lips
