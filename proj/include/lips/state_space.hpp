#ifndef LIPS_STATE_SPACE_HPP
#define LIPS_STATE_SPACE_HPP

#include <cstdint>
#include <vector>

namespace lips {

using LatentState = std::vector<int>;

// Graph, vocabulary and node features of an IPS.
class StateSpaceSpec {
 public:
  StateSpaceSpec() = default;
  // adjacency is row-major d*d, features row-major d*F
  StateSpaceSpec(int d, int V, std::vector<std::uint8_t> adjacency,
                 std::vector<double> features = {}, int F = 0);
  // graph with no edges and no features
  static StateSpaceSpec empty_graph(int d, int V);

  int d() const { return d_; }
  int V() const { return V_; }
  int F() const { return F_; }
  bool adjacent(int i, int j) const { return adj_[std::size_t(i) * d_ + j] != 0; }
  const std::vector<int>& neighbors(int i) const { return nbrs_[i]; }
  const std::vector<std::uint8_t>& adjacency() const { return adj_; }
  const std::vector<double>& features() const { return feat_; }
  const double* feature(int i) const { return feat_.data() + std::size_t(i) * F_; }
  double feature_dot(int i, int j) const;

  void check_state(const LatentState& z) const;

 private:
  int d_ = 0, V_ = 0, F_ = 0;
  std::vector<std::uint8_t> adj_;
  std::vector<double> feat_;
  std::vector<std::vector<int>> nbrs_;
};

// d x V table of local rates r_i(v|z); entry [i][z^i] holds minus the row's
// exit rate once finalize() has run.
class RateField {
 public:
  RateField() = default;
  RateField(int d, int V) : d_(d), V_(V), r_(std::size_t(d) * V, 0.0) {}

  int d() const { return d_; }
  int V() const { return V_; }
  double& operator()(int i, int v) { return r_[std::size_t(i) * V_ + v]; }
  double operator()(int i, int v) const { return r_[std::size_t(i) * V_ + v]; }
  double* row(int i) { return r_.data() + std::size_t(i) * V_; }
  const double* row(int i) const { return r_.data() + std::size_t(i) * V_; }

  void resize(int d, int V);
  void zero();
  // sets each diagonal to minus the sum of the row's off-target entries
  void finalize(const LatentState& z);
  double exit_rate(int i, const LatentState& z) const { return -(*this)(i, z[i]); }
  double max_exit_rate(const LatentState& z) const;
  // throws if an off-target entry is negative/non-finite or a diagonal is off
  void validate(const LatentState& z) const;

 private:
  int d_ = 0, V_ = 0;
  std::vector<double> r_;
};

// sum of all off-target entries (the diagonals are the only negatives)
double total_exit_rate(const RateField& rates);

// z^{i->v}
inline LatentState flipped(LatentState z, int i, int v) {
  z[i] = v;
  return z;
}

// mixed-radix index sum_i z^i V^i, and its inverse
std::uint64_t state_index(const LatentState& z, int V);
LatentState state_from_index(std::uint64_t idx, int d, int V);

}  // namespace lips

#endif
