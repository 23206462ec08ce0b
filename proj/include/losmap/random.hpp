#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "losmap/geometry.hpp"

namespace losmap {

/// Deterministic stream of doubles on top of mt19937_64. All transforms are
/// spelled out here (rather than using std::*_distribution) so the same seed
/// produces identical draws on every platform and standard library.
class RandomStream {
  public:
    explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Poisson draw by chunked exponential products. Chunking keeps
    /// exp(-mean) away from underflow for large means; the chunk sum is
    /// still exactly Poisson.
    long poisson(double mean) {
        long total = 0;
        while (mean > 0.0) {
            const double chunk = std::min(mean, 64.0);
            mean -= chunk;
            const double limit = std::exp(-chunk);
            double prod = uniform();
            while (prod >= limit) {
                ++total;
                prod *= uniform();
            }
        }
        return total;
    }

    /// Uniform over the closed disk of the given radius centered on the origin.
    Point2D point_in_disk(double radius) {
        const double r = radius * std::sqrt(uniform());
        const double a = 2.0 * kPi * uniform();
        return {r * std::cos(a), r * std::sin(a)};
    }

  private:
    std::mt19937_64 engine_;
};

/// Stateless 64-bit mix, used to derive independent sub-streams from one seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

}  // namespace losmap
