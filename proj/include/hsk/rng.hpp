#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "hsk/vec3.hpp"

namespace hsk {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; the mixing step behind every derived seed.
constexpr std::uint64_t mix64(std::uint64_t z)
{
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Counter-based stream seed: a pure function of (master, a, b, c), so a
/// stream for (replica 7, step 12) is the same no matter who asks for it or
/// in which order.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0,
                                    std::uint64_t c = 0)
{
    std::uint64_t h = mix64(master);
    h = mix64(h ^ mix64(a + 0x1000));
    h = mix64(h ^ mix64(b + 0x2000));
    h = mix64(h ^ mix64(c + 0x3000));
    return h;
}

inline Rng make_rng(std::uint64_t master, std::uint64_t a = 0, std::uint64_t b = 0,
                    std::uint64_t c = 0)
{
    return Rng{derive_seed(master, a, b, c)};
}

/// Uniform in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng)
{
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

inline std::size_t uniform_index(Rng& rng, std::size_t n)
{
    return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

inline double normal(Rng& rng)
{
    // Box-Muller, one value per call; keeps the stream position a simple
    // function of the call count.
    double u1 = uniform01(rng);
    while (u1 <= 0.0)
        u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline Vec3 normal_vec(Rng& rng, double sigma = 1.0)
{
    const double a = normal(rng);
    const double b = normal(rng);
    const double c = normal(rng);
    return {sigma * a, sigma * b, sigma * c};
}

/// Uniform direction on the unit sphere.
inline Vec3 unit_vector(Rng& rng)
{
    const double z = uniform(rng, -1.0, 1.0);
    const double phi = 2.0 * std::numbers::pi * uniform01(rng);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    return {r * std::cos(phi), r * std::sin(phi), z};
}

} // namespace hsk
