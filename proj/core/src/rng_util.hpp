#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace gradal::detail {

// splitmix64; used to derive independent streams from (seed, index) pairs.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    return mix64(mix64(seed ^ 0x6a09e667f3bcc908ULL) + mix64(a) + 3 * mix64(b));
}

inline std::mt19937_64 engine(std::uint64_t seed) { return std::mt19937_64(mix64(seed)); }

inline double uniform01(std::mt19937_64& eng) {
    return (eng() >> 11) * 0x1.0p-53;
}

// Box-Muller with fixed consumption, deterministic across library versions.
inline double standard_normal(std::mt19937_64& eng) {
    double u1 = uniform01(eng);
    double u2 = uniform01(eng);
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
}

}  // namespace gradal::detail
