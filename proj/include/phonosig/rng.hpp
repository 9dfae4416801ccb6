#pragma once

// Seedable, splittable random streams.
//
// The engine is std::mt19937_64 (fully specified by the standard). Distributions
// are implemented here rather than taken from <random> because the standard
// leaves their algorithms to the library vendor, and simulation output must be
// identical across toolchains.

#include <cstdint>
#include <initializer_list>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace phonosig {

// FNV-1a; used to derive per-character streams from their keys.
std::uint64_t stable_hash(std::string_view text);

class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  // Stream for a job identified by `path` under a master seed. Distinct paths
  // give unrelated streams; the same path always gives the same stream.
  static Rng derive(std::uint64_t master, std::initializer_list<std::uint64_t> path);

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform();

  // Standard normal deviate (Marsaglia polar method).
  double normal();

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);

  template <class T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      using std::swap;
      swap(items[i - 1], items[j]);
    }
  }

 private:
  explicit Rng(std::mt19937_64 engine) : engine_(engine) {}

  std::mt19937_64 engine_;
  std::optional<double> spare_normal_;
};

}  // namespace phonosig
