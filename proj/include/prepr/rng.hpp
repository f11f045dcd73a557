#pragma once

#include <cstdint>
#include <random>

#include "prepr/normal.hpp"

// Deterministic randomness for the simulation harness.
//
// Every random object in a campaign is seeded by hashing
// (master seed, stream tag, index) through the splitmix64 finalizer, so a
// replicate's draws depend only on those three numbers and never on thread
// scheduling or evaluation order. The generator behind each stream is
// std::mt19937_64, whose output sequence is pinned bit-for-bit by the C++
// standard; normals go through our own quantile function rather than
// std::normal_distribution, whose algorithm is implementation-defined.

namespace prepr {

inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                 std::uint64_t index) {
    return mix64(mix64(mix64(master) ^ stream) ^ index);
}

// Maps a pair of (0,1) uniforms to a centered, standardized Gamma(2,1)
// variate: -ln u1 - ln u2 is Gamma(2,1) with mean 2 and variance 2.
inline double centered_gamma2(double u1, double u2) {
    return (-std::log(u1) - std::log(u2) - 2.0) * 0.7071067811865475244008443621048490;
}

class Stream {
  public:
    explicit Stream(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t bits() { return gen_(); }

    // Uniform on the open interval (0,1): 53-bit midpoint grid, never 0 or 1,
    // so quantile transforms stay finite.
    double uniform() {
        return (static_cast<double>(bits() >> 11) + 0.5) * 0x1.0p-53;
    }

    double normal() { return std_normal_quantile(uniform()); }

    double gamma_centered() {
        const double u1 = uniform();
        const double u2 = uniform();
        return centered_gamma2(u1, u2);
    }

    // Uniform integer in [0, n), rejection-sampled so every value has equal
    // probability (used by Fisher-Yates shuffles).
    std::uint64_t bounded(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v;
        do {
            v = bits();
        } while (v >= limit);
        return v % n;
    }

  private:
    std::mt19937_64 gen_;
};

}  // namespace prepr
