#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace srpl {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; used to derive independent stream seeds from
// (base seed, stream index) pairs.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t stream_seed(std::uint64_t base, std::uint64_t stream) {
    return mix_seed(mix_seed(base) ^ (stream * 0xD1B54A32D192ED03ULL + 1));
}

inline Rng make_stream(std::uint64_t base, std::uint64_t stream) {
    return Rng(stream_seed(base, stream));
}

// Uniform real in [0, 1) built from raw engine bits so results do not depend
// on the standard library's distribution implementation.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

// Box-Muller; one draw per call, second value discarded.
inline double standard_normal(Rng& rng) {
    double u1 = uniform01(rng);
    while (u1 <= 0.0) u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    return static_cast<std::uint64_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

// Knuth's multiplicative method; fine for the small means used here.
inline int poisson(Rng& rng, double mean) {
    const double limit = std::exp(-mean);
    int k = 0;
    double p = uniform01(rng);
    while (p > limit) {
        ++k;
        p *= uniform01(rng);
    }
    return k;
}

}  // namespace srpl
