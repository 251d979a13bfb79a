#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace gatesim {

/// Deterministic random source used everywhere randomness is needed.
///
/// The generator is std::mt19937_64, whose output sequence is pinned by the
/// C++ standard. The uniform and Gaussian mappings below are implemented by
/// hand because the standard library distribution objects are allowed to
/// differ between implementations; with this class a given seed produces the
/// same stream on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 bits of mantissa.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller. Two uniforms are consumed per draw; no
  /// value is cached, so the stream position is a pure function of the number
  /// of calls.
  double gaussian() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double gaussian(double mean, double sigma) { return mean + sigma * gaussian(); }

  /// Bernoulli with probability p.
  bool chance(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace gatesim
