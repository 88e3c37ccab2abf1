#ifndef LIPS_PATH_HPP
#define LIPS_PATH_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "lips/state_space.hpp"

namespace lips {

struct Jump {
  double time;
  int node;
  int value;
};

// Piecewise-constant trajectory on [0, T]. Jumps are ordered by time, ties by
// node index (several coordinates can move in one Euler step).
struct PathSample {
  double horizon = 0.0;
  LatentState initial;
  std::vector<Jump> jumps;

  // state with all jumps at times <= t applied
  LatentState state_at(double t) const;
  // states at each of the sorted times in ts
  std::vector<LatentState> states_at(const std::vector<double>& ts) const;
  LatentState final_state() const;
  void validate(int V) const;
};

void write_path(std::ostream& os, const PathSample& p, int V);
PathSample read_path(std::istream& is);
void save_path(const std::string& file, const PathSample& p, int V,
               const std::string& provenance = "");
PathSample load_path(const std::string& file);

}  // namespace lips

#endif
