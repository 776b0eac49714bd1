#pragma once
// Deterministic random number generation.
//
// Every stochastic choice in the project flows through Rng so that a run is a
// pure function of its seeds.  std::mt19937 plus the standard <random>
// distributions are avoided on purpose: the distribution algorithms are
// implementation-defined, so the same seed can produce different streams on
// different standard libraries.  SplitMix64 and Box-Muller below are fully
// specified here and produce identical streams everywhere.

#include <cmath>
#include <cstdint>
#include <string_view>

namespace auda {

// SplitMix64 step (public domain construction, Steele et al.).
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Collapses (seed, tag, index) into a fresh seed for an independent stream.
// Tags keep unrelated consumers (init, batching, data gen, ...) decorrelated
// even when they share a master seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag,
                                 std::uint64_t index = 0) {
  std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a over the tag bytes
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  std::uint64_t s = seed;
  std::uint64_t mixed = splitmix64(s) ^ h;
  mixed ^= 0x632be59bd9b4e019ull * (index + 1);
  std::uint64_t s2 = mixed;
  return splitmix64(s2);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() { return splitmix64(state_); }

  // Uniform in [0, 1).  53-bit mantissa so doubles round-trip exactly.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).  Rejection-free modulo is fine here: n is
  // always tiny relative to 2^64 so the bias is far below any tolerance used
  // in the project.
  std::uint64_t uniform_index(std::uint64_t n) { return next_u64() % n; }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller; caches the second variate.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Cheap stateless hash used for per-pixel render noise: depends only on the
// inputs, so a pixel's noise never depends on evaluation order.
inline std::uint64_t hash_coords(std::uint64_t seed, std::uint64_t a,
                                 std::uint64_t b) {
  std::uint64_t s = seed ^ (a * 0x9e3779b97f4a7c15ull) ^
                    (b * 0xc2b2ae3d27d4eb4full);
  return splitmix64(s);
}

inline double hash_unit(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return static_cast<double>(hash_coords(seed, a, b) >> 11) * 0x1.0p-53;
}

}  // namespace auda
