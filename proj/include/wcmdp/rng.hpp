#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>

namespace wcmdp {

/// Mixes a base seed with a stream index (splitmix64 finalizer). Used to give
/// every replication / probe its own independent, reproducible stream.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Portable random source. The engine is std::mt19937_64, whose output
/// sequence is fixed by the standard; the conversions below are written out
/// explicitly because the std distributions are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);

  /// Exp(1) variate.
  double exponential();

  /// Inverse-CDF draw from a cumulative table whose last entry is ~1.
  std::size_t sample_cdf(std::span<const double> cdf) {
    const double u = uniform();
    const std::size_t last = cdf.size() - 1;
    for (std::size_t j = 0; j < last; ++j) {
      if (u < cdf[j]) return j;
    }
    return last;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace wcmdp
