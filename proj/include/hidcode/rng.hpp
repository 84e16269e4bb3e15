#pragma once

#include <cstdint>
#include <random>

namespace hidcode {

// All randomness in the library flows through these helpers so that results
// are reproducible for a given seed independent of the standard library's
// distribution implementations.

using Rng = std::mt19937_64;

inline double next_unit(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n). n must be > 0.
inline std::uint64_t next_below(Rng& rng, std::uint64_t n) {
    return rng() % n;
}

inline double next_range(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * next_unit(rng);
}

// Box-Muller; one draw per call, the spare is discarded to keep call
// sequences position-independent.
inline double next_gaussian(Rng& rng) {
    double u1 = next_unit(rng);
    double u2 = next_unit(rng);
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
}

// SplitMix64 finalizer; used where a stateless keyed hash is needed.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace hidcode
