#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

#include "cftc/hash.hpp"

namespace cftc {

// splitmix64 finalizer; used to derive independent sub-stream seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Every random stream in the project is keyed by (root seed, tag, a, b) so
// that adding or removing one consumer never perturbs another.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view tag,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t h = mix64(root ^ fnv1a(tag));
  h = mix64(h ^ mix64(a + 0x9e3779b97f4a7c15ull));
  h = mix64(h ^ mix64(b + 0x517cc1b727220a95ull));
  return h;
}

// mt19937_64 with hand-rolled variate transforms. The standard specifies the
// engine output exactly but not the <random> distributions, so conversions
// are done here to keep runs byte-reproducible across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t raw() { return engine_(); }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  // Standard Gumbel(0,1) via inverse transform: g = -log(-log(u)), u in (0,1).
  double gumbel() {
    double u;
    do {
      u = uniform();
    } while (u <= 0.0);
    return -std::log(-std::log(u));
  }

  // Uniform integer in [0, n).
  std::size_t index(std::size_t n) { return engine_() % n; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[index(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace cftc
