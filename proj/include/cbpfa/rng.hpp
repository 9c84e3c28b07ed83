#pragma once

#include <cstdint>
#include <cfloat>
#include <cmath>

namespace cbpfa {

// PCG32 (Melissa O'Neill's pcg32_random_r). One generator per logical
// stream; the stream id selects the increment, so per-patch substreams
// stay independent and runs are reproducible regardless of thread count.
class Rng {
 public:
  Rng() : Rng(0x853c49e6748fea9bULL, 0) {}
  Rng(std::uint64_t seed, std::uint64_t stream) {
    state_ = 0u;
    inc_ = (stream << 1u) | 1u;
    next_u32();
    state_ += seed;
    next_u32();
  }

  std::uint32_t next_u32() {
    std::uint64_t old = state_;
    state_ = old * 6364136223846793005ULL + inc_;
    std::uint32_t xorshifted =
        static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
    std::uint32_t rot = static_cast<std::uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((~rot + 1u) & 31u));
  }

  std::uint64_t next_u64() {
    std::uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in (0, 1]; safe as a log() argument.
  double uniform_pos() { return 1.0 - uniform(); }

  double normal() {
    // Box-Muller, cosine branch only; two uniforms per draw.
    double u1 = uniform_pos();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  double normal(double mean, double variance) {
    return mean + std::sqrt(variance) * normal();
  }

  // Gamma(shape, rate), mean shape/rate. Marsaglia-Tsang for shape >= 1,
  // boosted by U^(1/shape) below 1. Underflow clamps to DBL_MIN so the
  // positivity invariant survives extreme shapes.
  double gamma(double shape, double rate) {
    double boost = 1.0;
    if (shape < 1.0) {
      boost = std::pow(uniform_pos(), 1.0 / shape);
      shape += 1.0;
    }
    double d = shape - 1.0 / 3.0;
    double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      double u = uniform_pos();
      if (u < 1.0 - 0.0331 * x * x * x * x ||
          std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) {
        double g = boost * d * v / rate;
        return g > 0.0 ? g : DBL_MIN;
      }
    }
  }

  double beta(double a, double b) {
    double x = gamma(a, 1.0);
    double y = gamma(b, 1.0);
    double r = x / (x + y);
    if (r <= 0.0) return DBL_MIN;
    if (r >= 1.0) return 1.0 - DBL_EPSILON;
    return r;
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Bernoulli from unnormalized log weights; overflow-safe.
  bool bernoulli_log_odds(double log_odds) {
    if (log_odds > 36.0) return true;
    if (log_odds < -36.0) return false;
    double p = 1.0 / (1.0 + std::exp(-log_odds));
    return bernoulli(p);
  }

 private:
  std::uint64_t state_;
  std::uint64_t inc_;
};

inline const char* rng_algorithm_name() { return "pcg32"; }

}  // namespace cbpfa
