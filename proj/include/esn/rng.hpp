#pragma once

// Seeded randomness helpers. Everything draws raw 64-bit words from
// std::mt19937_64 (whose output sequence is fixed by the standard) and maps
// them to doubles by hand, so identical seeds give identical streams on every
// platform and standard library.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace esn {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; decorrelates nearby integer seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derives an independent stream seed from a master seed and stream indices.
inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) {
    return mix_seed(master ^ mix_seed(a ^ mix_seed(b)));
}

/// Uniform in [0, 1) with 53-bit resolution.
inline double unit_real(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform in [-1, 1).
inline double symmetric_real(Rng& rng) {
    return 2.0 * unit_real(rng) - 1.0;
}

/// Uniform integer in [0, n). Rejection sampling, no modulo bias.
inline std::uint64_t bounded_uint(Rng& rng, std::uint64_t n) {
    if (n == 0) return 0;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x = rng();
    while (x >= limit) x = rng();
    return x % n;
}

/// Standard normal via Box-Muller. Consumes two draws per value.
inline double gaussian(Rng& rng) {
    const double u1 = unit_real(rng);
    const double u2 = unit_real(rng);
    return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Fisher-Yates shuffle driven by bounded_uint, seed-stable across platforms.
template <typename T>
void seeded_shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(bounded_uint(rng, i));
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace esn
