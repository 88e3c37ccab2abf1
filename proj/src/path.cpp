#include "lips/path.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "lips/error.hpp"

namespace lips {

LatentState PathSample::state_at(double t) const {
  LatentState z = initial;
  for (const Jump& j : jumps) {
    if (j.time > t) break;
    z[j.node] = j.value;
  }
  return z;
}

std::vector<LatentState> PathSample::states_at(const std::vector<double>& ts) const {
  std::vector<LatentState> out;
  out.reserve(ts.size());
  LatentState z = initial;
  std::size_t k = 0;
  for (double t : ts) {
    while (k < jumps.size() && jumps[k].time <= t) {
      z[jumps[k].node] = jumps[k].value;
      ++k;
    }
    out.push_back(z);
  }
  return out;
}

LatentState PathSample::final_state() const {
  LatentState z = initial;
  for (const Jump& j : jumps) z[j.node] = j.value;
  return z;
}

void PathSample::validate(int V) const {
  if (!(horizon > 0.0)) throw Error("path horizon must be positive");
  LatentState z = initial;
  for (int v : z)
    if (v < 0 || v >= V) throw Error("path initial state out of range");
  for (std::size_t k = 0; k < jumps.size(); ++k) {
    const Jump& j = jumps[k];
    if (!(j.time > 0.0 && j.time <= horizon)) throw Error(fmt::format("jump {} time {} outside (0,T]", k, j.time));
    if (j.node < 0 || j.node >= static_cast<int>(z.size())) throw Error("jump node out of range");
    if (j.value < 0 || j.value >= V) throw Error("jump value out of range");
    if (z[j.node] == j.value) throw Error(fmt::format("jump {} does not change node {}", k, j.node));
    if (k > 0) {
      const Jump& p = jumps[k - 1];
      if (j.time < p.time || (j.time == p.time && j.node <= p.node))
        throw Error(fmt::format("jump {} out of order", k));
    }
    z[j.node] = j.value;
  }
}

void write_path(std::ostream& os, const PathSample& p, int V) {
  os << fmt::format("T={} d={} V={} z0={}\n", p.horizon, p.initial.size(), V,
                    fmt::join(p.initial, ","));
  for (const Jump& j : p.jumps) os << fmt::format("{},{},{}\n", j.time, j.node, j.value);
}

namespace {

bool skip_line(const std::string& line) {
  return line.empty() || line[0] == '#';
}

}  // namespace

PathSample read_path(std::istream& is) {
  PathSample p;
  std::string line;
  bool have_header = false;
  int d = 0, V = 0;
  while (std::getline(is, line)) {
    if (skip_line(line)) continue;
    if (!have_header) {
      std::istringstream ss(line);
      std::string tok;
      std::string z0;
      while (ss >> tok) {
        auto eq = tok.find('=');
        if (eq == std::string::npos) throw IoError("bad path header: " + line);
        std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
        if (key == "T") p.horizon = std::stod(val);
        else if (key == "d") d = std::stoi(val);
        else if (key == "V") V = std::stoi(val);
        else if (key == "z0") z0 = val;
        else throw IoError("unknown path header key " + key);
      }
      std::istringstream zs(z0);
      std::string cell;
      while (std::getline(zs, cell, ',')) p.initial.push_back(std::stoi(cell));
      if (static_cast<int>(p.initial.size()) != d) throw IoError("z0 length does not match d");
      have_header = true;
      continue;
    }
    Jump j{};
    if (std::sscanf(line.c_str(), "%lf,%d,%d", &j.time, &j.node, &j.value) != 3)
      throw IoError("bad path record: " + line);
    p.jumps.push_back(j);
  }
  if (!have_header) throw IoError("path file has no header");
  try {
    p.validate(V);
  } catch (const Error& e) {
    throw IoError(std::string("invalid path: ") + e.what());
  }
  return p;
}

void save_path(const std::string& file, const PathSample& p, int V, const std::string& provenance) {
  std::ofstream os(file);
  if (!os) throw IoError("cannot write " + file);
  if (!provenance.empty()) os << "# " << provenance << "\n";
  write_path(os, p, V);
  if (!os) throw IoError("write failed: " + file);
}

PathSample load_path(const std::string& file) {
  std::ifstream is(file);
  if (!is) throw IoError("cannot read " + file);
  return read_path(is);
}

}  // namespace lips
