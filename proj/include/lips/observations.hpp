#ifndef LIPS_OBSERVATIONS_HPP
#define LIPS_OBSERVATIONS_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "lips/path.hpp"
#include "lips/random.hpp"

namespace lips {

// Masked, noisy snapshots of all nodes. Value V is the mask token.
struct ObservationSequence {
  int d = 0;
  int V = 0;
  double p_mask = 0.0;
  double delta = 0.0;  // label noise per wrong class
  std::vector<double> times;
  std::vector<std::vector<int>> values;  // K x d

  int K() const { return static_cast<int>(times.size()); }
  int mask() const { return V; }

  // log g(c | z^i) for one node
  double log_emission(int c, int zi) const;
  // log G_{tau_k}(z), summed over nodes
  double log_potential(int k, const LatentState& z) const;
  // index k with |times[k] - t| <= tol, else -1
  int index_at(double t, double tol = 1e-9) const;
  // first k with times[k] > t (K if none)
  int next_after(double t) const;

  void validate(double horizon) const;
};

// y_k ~ g(. | z_{tau_k}) node by node
ObservationSequence sample_observations(const PathSample& path, const std::vector<double>& times,
                                        int V, double p_mask, double delta, Rng& rng);

void write_observations(std::ostream& os, const ObservationSequence& obs);
ObservationSequence read_observations(std::istream& is);
void save_observations(const std::string& file, const ObservationSequence& obs,
                       const std::string& provenance = "");
ObservationSequence load_observations(const std::string& file);

// Simulation grid: uniform steps of dt on [0, T] merged with the observation
// times (points closer than 1e-9 are identified).
std::vector<double> make_grid(double T, double dt, const std::vector<double>& extra);

}  // namespace lips

#endif
