#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "ddm/error.hpp"

namespace ddm {

// Seed derivation for independent streams (per robot, per trial, ...).
// splitmix64 is the usual finalizer; good avalanche, cheap.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t salt) {
  return splitmix64(base ^ splitmix64(salt + 0x632be59bd9b4e019ull));
}

inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  return mix_seed(mix_seed(base, a), b);
}

// mt19937_64 output is pinned by the standard, so traces are reproducible
// across platforms. Bounded draws are done by masked rejection instead of
// std::uniform_int_distribution, whose mapping is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next() { return gen_(); }

  // Uniform in [0, n).
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) fail(ErrorCode::InvalidParameter, "rng bound must be positive");
    if (n == 1) return 0;
    std::uint64_t mask = ~0ull >> __builtin_clzll(n - 1);
    for (;;) {
      std::uint64_t v = gen_() & mask;
      if (v < n) return v;
    }
  }

  // Uniform in [0, 1), 53-bit resolution.
  double unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  bool chance(double p) { return unit() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t k = v.size(); k > 1; --k) {
      std::size_t r = static_cast<std::size_t>(below(k));
      std::swap(v[k - 1], v[r]);
    }
  }

  // Fisher-Yates prefix: after the call the first n elements are a uniform
  // sample without replacement.
  template <typename T>
  void partial_shuffle(std::vector<T>& v, std::size_t n) {
    if (n > v.size()) fail(ErrorCode::InvalidParameter, "sample larger than population");
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t r = k + static_cast<std::size_t>(below(v.size() - k));
      std::swap(v[k], v[r]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace ddm
