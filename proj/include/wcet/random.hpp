#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace wcet {

/// splitmix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream);

/// Seeded generator with fully specified derived distributions.
///
/// The standard library's distribution objects are implementation-defined,
/// so everything above the raw mt19937_64 engine is written out here:
///   uniform01   = (bits >> 11) * 2^-53
///   uniform_int = rejection sampling on the top of the 64-bit range
///   normal      = Box-Muller, cosine branch only (no cached second value)
///   shuffle     = Fisher-Yates from the back
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  double uniform01();
  double uniform(double lo, double hi);
  /// Inclusive range lo..hi.
  std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi);
  double normal(double mean, double stddev);

  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(0, i - 1));
      std::swap(values[i - 1], values[j]);
    }
  }

  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::mt19937_64 engine_;
};

}  // namespace wcet
