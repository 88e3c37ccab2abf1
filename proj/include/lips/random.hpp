#ifndef LIPS_RANDOM_HPP
#define LIPS_RANDOM_HPP

#include <cstdint>
#include <random>
#include <vector>

namespace lips {

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

// Independent stream for (seed, a, b). Used to give each path/particle its
// own generator so results do not depend on how work is scheduled.
Rng make_stream(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0);

// uniform on [0, 1) with 53 random bits
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// uniform on (0, 1]
inline double uniform_pos(Rng& rng) { return 1.0 - uniform01(rng); }

double exponential(Rng& rng, double rate);
double standard_normal(Rng& rng);

// index drawn from unnormalized nonnegative weights
int categorical(Rng& rng, const double* w, int n);

}  // namespace lips

#endif
