#include "lips/state_space.hpp"

#include <cmath>

#include <fmt/format.h>

#include "lips/error.hpp"

namespace lips {

StateSpaceSpec::StateSpaceSpec(int d, int V, std::vector<std::uint8_t> adjacency,
                               std::vector<double> features, int F)
    : d_(d), V_(V), F_(F), adj_(std::move(adjacency)), feat_(std::move(features)) {
  if (d < 1) throw DimensionError("state space needs d >= 1");
  if (V < 2) throw DimensionError("state space needs V >= 2");
  if (adj_.empty()) adj_.assign(std::size_t(d) * d, 0);
  if (adj_.size() != std::size_t(d) * d)
    throw DimensionError(fmt::format("adjacency has {} entries, expected {}", adj_.size(),
                                     std::size_t(d) * d));
  if (F < 0 || feat_.size() != std::size_t(d) * F)
    throw DimensionError("feature matrix does not match d x F");
  nbrs_.assign(d, {});
  for (int i = 0; i < d; ++i) {
    if (adjacent(i, i)) throw DimensionError(fmt::format("self loop at node {}", i));
    for (int j = 0; j < d; ++j) {
      if (adjacent(i, j) != adjacent(j, i)) throw DimensionError("adjacency not symmetric");
      if (adjacent(i, j)) nbrs_[i].push_back(j);
    }
  }
}

StateSpaceSpec StateSpaceSpec::empty_graph(int d, int V) { return StateSpaceSpec(d, V, {}); }

double StateSpaceSpec::feature_dot(int i, int j) const {
  double s = 0.0;
  const double* a = feature(i);
  const double* b = feature(j);
  for (int f = 0; f < F_; ++f) s += a[f] * b[f];
  return s;
}

void StateSpaceSpec::check_state(const LatentState& z) const {
  if (static_cast<int>(z.size()) != d_)
    throw DimensionError(fmt::format("state has {} entries, expected d={}", z.size(), d_));
  for (int v : z)
    if (v < 0 || v >= V_) throw DimensionError(fmt::format("state value {} outside [0,{})", v, V_));
}

void RateField::resize(int d, int V) {
  d_ = d;
  V_ = V;
  r_.assign(std::size_t(d) * V, 0.0);
}

void RateField::zero() { std::fill(r_.begin(), r_.end(), 0.0); }

void RateField::finalize(const LatentState& z) {
  for (int i = 0; i < d_; ++i) {
    double* r = row(i);
    double s = 0.0;
    for (int v = 0; v < V_; ++v)
      if (v != z[i]) s += r[v];
    r[z[i]] = -s;
  }
}

double RateField::max_exit_rate(const LatentState& z) const {
  double m = 0.0;
  for (int i = 0; i < d_; ++i) m = std::max(m, exit_rate(i, z));
  return m;
}

void RateField::validate(const LatentState& z) const {
  for (int i = 0; i < d_; ++i) {
    double s = 0.0;
    for (int v = 0; v < V_; ++v) {
      double x = (*this)(i, v);
      if (!std::isfinite(x)) throw Error(fmt::format("rate [{}][{}] not finite", i, v));
      if (v == z[i]) continue;
      if (x < 0.0) throw Error(fmt::format("negative rate [{}][{}] = {}", i, v, x));
      s += x;
    }
    if (std::abs((*this)(i, z[i]) + s) > 1e-12 * std::max(1.0, s))
      throw Error(fmt::format("row {} diagonal does not balance", i));
  }
}

double total_exit_rate(const RateField& rates) {
  double s = 0.0;
  for (int i = 0; i < rates.d(); ++i)
    for (int v = 0; v < rates.V(); ++v) s += std::max(rates(i, v), 0.0);
  return s;
}

std::uint64_t state_index(const LatentState& z, int V) {
  std::uint64_t idx = 0;
  for (std::size_t i = z.size(); i-- > 0;) idx = idx * V + z[i];
  return idx;
}

LatentState state_from_index(std::uint64_t idx, int d, int V) {
  LatentState z(d);
  for (int i = 0; i < d; ++i) {
    z[i] = static_cast<int>(idx % V);
    idx /= V;
  }
  return z;
}

}  // namespace lips
