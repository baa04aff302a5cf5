#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace zseg {

/// Seedable random stream: std::mt19937_64 plus distribution code written
/// here, so sequences do not depend on a standard library's distribution
/// implementations.
///
///   uniform01   = (next() >> 11) * 2^-53
///   uniform_int = floor(uniform01 * n)
///   normal      = Box-Muller on two uniform01 draws (cosine branch only)
///   shuffle     = Fisher-Yates from the back
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  /// Integer in [0, n).
  std::size_t uniform_int(std::size_t n) {
    const auto v = static_cast<std::size_t>(uniform01() * static_cast<double>(n));
    return v < n ? v : n - 1;
  }
  bool bernoulli(double p) { return uniform01() < p; }
  double normal(double mean = 0.0, double stddev = 1.0);

  template <class T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[uniform_int(i)]);
    }
  }

  std::string state() const;
  void restore(const std::string& state);

private:
  std::mt19937_64 engine_;
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Independent stream seed for a key path, e.g. (seed, patient, slice, epoch).
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> keys);

}  // namespace zseg
