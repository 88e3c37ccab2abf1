#include "lips/random.hpp"

#include <cmath>

#include "lips/parallel.hpp"

namespace lips {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng make_stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ splitmix64(a + 0x632be59bd9b4e019ULL));
  h = splitmix64(h ^ splitmix64(b + 0x8cb92ba72f3d8dd7ULL));
  std::seed_seq seq{static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
  return Rng(seq);
}

double exponential(Rng& rng, double rate) { return -std::log(uniform_pos(rng)) / rate; }

double standard_normal(Rng& rng) {
  // Box-Muller, one output per call so the stream position stays simple
  double u1 = uniform_pos(rng), u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

int categorical(Rng& rng, const double* w, int n) {
  double tot = 0.0;
  for (int k = 0; k < n; ++k) tot += w[k];
  double u = uniform01(rng) * tot;
  int last = -1;
  for (int k = 0; k < n; ++k) {
    if (w[k] <= 0.0) continue;
    last = k;
    if (u < w[k]) return k;
    u -= w[k];
  }
  return last;
}

namespace {
int g_threads = 1;
}

int num_threads() { return g_threads; }
void set_num_threads(int n) { g_threads = n < 1 ? 1 : n; }

}  // namespace lips
