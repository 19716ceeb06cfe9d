#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace flowtwin {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from (master, stream, salt).
inline uint64_t seed_stream(uint64_t master, uint64_t stream, uint64_t salt = 0) {
  return splitmix64(splitmix64(master ^ splitmix64(stream)) ^ splitmix64(~salt));
}

// Deterministic RNG. std::mt19937_64 output is pinned by the standard, but the
// std:: distributions are not, so every distribution here is hand-rolled to
// keep generated artifacts byte-identical across platforms.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(splitmix64(seed)) {}

  static Rng stream(uint64_t master, uint64_t stream, uint64_t salt = 0) {
    return Rng(seed_stream(master, stream, salt));
  }

  uint64_t next_u64() { return gen_(); }

  /// Uniform double in [0,1) with 53 random bits.
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + uniform01() * (hi - lo); }

  /// Uniform integer in [lo, hi], inclusive, unbiased.
  int64_t uniform_int(int64_t lo, int64_t hi) {
    const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    const uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return lo + static_cast<int64_t>(x % span);
  }

 private:
  std::mt19937_64 gen_;
};

/// Exponential with the given rate; strictly positive. Works with any source
/// exposing uniform01() so tests can pin the draw.
template <class R>
double exponential_draw(R& rng, double rate) {
  double u;
  do {
    u = rng.uniform01();
  } while (u == 0.0);  // -log(1-u) would be 0 at u == 0
  return -std::log1p(-u) / rate;
}

}  // namespace flowtwin
