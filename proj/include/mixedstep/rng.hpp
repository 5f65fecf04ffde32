#pragma once

#include <cmath>
#include <cstdint>

namespace mixedstep {

/// Counter-based deterministic generator (splitmix64: Weyl sequence plus a
/// 64-bit finalizer). Campaign tests seed it with their test id; `stream`
/// separates independent draws (parameters vs. initial conditions) under the
/// same seed. Uniforms take the top 53 bits of the output word, normals come
/// from Box-Muller.
class SplitMix64 {
  public:
    explicit SplitMix64(std::uint64_t seed, std::uint64_t stream = 0) noexcept
        : state_(seed + stream * 0xD1342543DE82EF95ull) {}

    std::uint64_t next() noexcept {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    /// Uniform draw in [0, 1) with a full 53-bit mantissa.
    double uniform01() noexcept { return static_cast<double>(next() >> 11) * 0x1p-53; }

    double uniform(double lo, double hi) noexcept {
        return lo + (hi - lo) * uniform01();
    }

    /// Standard normal via Box-Muller; the paired sine draw is cached.
    double normal() noexcept {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = uniform01();
        if (u1 <= 0.0) u1 = 0x1p-53;
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        has_cached_ = true;
        return r * std::cos(a);
    }

  private:
    std::uint64_t state_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

}  // namespace mixedstep
