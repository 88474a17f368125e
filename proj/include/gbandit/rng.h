#pragma once

#include <cstdint>
#include <random>

namespace gbandit {

/// Portable random source. The engine is std::mt19937_64 (its output
/// sequence is fixed by the standard); every derived quantity is computed
/// here from raw 64-bit draws instead of through <random> distributions,
/// whose algorithms differ between standard libraries.
///
/// Stream splitting: the engine for (seed, role) is seeded with
/// splitmix64(seed ^ (role * 0x9e3779b97f4a7c15)). Each role gets its own
/// stream so that, e.g., changing the noise model leaves the context
/// sequence untouched.
class Rng {
 public:
  static constexpr const char *kScheme = "mt19937_64/splitmix64-role-streams/v1";

  enum class Role : std::uint64_t { kModel = 1, kContexts = 2, kNoise = 3, kQueries = 4, kAnalysis = 5 };

  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t seed, Role role);

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n), unbiased.
  std::uint64_t below(std::uint64_t n);
  int index(int n) { return static_cast<int>(below(static_cast<std::uint64_t>(n))); }
  bool bernoulli(double p) { return uniform() < p; }

  template <class It>
  void shuffle(It first, It last) {
    for (auto n = last - first; n > 1; --n) std::swap(first[n - 1], first[static_cast<std::ptrdiff_t>(below(static_cast<std::uint64_t>(n)))]);
  }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace gbandit
