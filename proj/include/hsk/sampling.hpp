#pragma once

// Importance-sampling domain and chunked Monte Carlo drivers. Samples are
// drawn in fixed-size chunks whose RNG streams depend only on (seed, stream,
// chunk); per-chunk accumulators are merged in chunk order, so the serial and
// OpenMP drivers return bit-identical results at any thread count.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <vector>

#include "hsk/dynamics.hpp"
#include "hsk/errors.hpp"
#include "hsk/rng.hpp"

namespace hsk {

enum class Execution { serial, parallel };

/// Positions uniform in [lo, hi]^3, momenta Gaussian N(mean, sigma^2 I).
struct SampleDomain {
    Vec3 lo{-1, -1, -1};
    Vec3 hi{1, 1, 1};
    double momentum_sigma = 1.0;
    Vec3 momentum_mean{};

    double volume() const { return (hi.x - lo.x) * (hi.y - lo.y) * (hi.z - lo.z); }
    Particle draw(Rng& rng) const
    {
        Particle pt;
        pt.q = {uniform(rng, lo.x, hi.x), uniform(rng, lo.y, hi.y), uniform(rng, lo.z, hi.z)};
        pt.p = momentum_mean + normal_vec(rng, momentum_sigma);
        return pt;
    }
    double momentum_density(const Vec3& p) const
    {
        const double s2 = momentum_sigma * momentum_sigma;
        return std::exp(-norm2(p - momentum_mean) / (2.0 * s2)) /
               std::pow(2.0 * std::numbers::pi * s2, 1.5);
    }
    /// Sampling density of one particle (inside the box).
    double density(const Particle& pt) const { return momentum_density(pt.p) / volume(); }
    void validate() const
    {
        if (!(hi.x > lo.x && hi.y > lo.y && hi.z > lo.z))
            throw ValidationError("sample domain: empty position box");
        if (!(momentum_sigma > 0.0))
            throw ValidationError("sample domain: momentum_sigma must be positive");
    }
};

struct Estimate {
    double value = 0.0;
    double std_error = 0.0;
    std::size_t samples = 0;
};

inline Estimate operator+(const Estimate& a, const Estimate& b)
{
    return {a.value + b.value, std::hypot(a.std_error, b.std_error), a.samples + b.samples};
}

/// Welford mean / variance with Chan's pairwise merge.
struct MeanAccumulator {
    std::size_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x)
    {
        ++n;
        const double d = x - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (x - mean);
    }
    void merge(const MeanAccumulator& o)
    {
        if (o.n == 0)
            return;
        if (n == 0) {
            *this = o;
            return;
        }
        const double na = static_cast<double>(n), nb = static_cast<double>(o.n);
        const double d = o.mean - mean;
        mean += d * nb / (na + nb);
        m2 += o.m2 + d * d * na * nb / (na + nb);
        n += o.n;
    }
    double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
    Estimate estimate() const
    {
        return {mean, n > 0 ? std::sqrt(variance() / static_cast<double>(n)) : 0.0, n};
    }
};

inline constexpr std::size_t mc_chunk_size = 1024;

/// Estimates E[g(rng)] for K simultaneous outputs from `samples` draws.
/// g: std::array<double, K>(Rng&). Chunk c of stream `stream` uses
/// make_rng(seed, stream, c).
template <std::size_t K, class G>
std::array<MeanAccumulator, K> mc_accumulate(std::size_t samples, std::uint64_t seed,
                                             std::uint64_t stream, Execution exec, G&& g)
{
    const std::size_t chunks = (samples + mc_chunk_size - 1) / mc_chunk_size;
    std::vector<std::array<MeanAccumulator, K>> parts(chunks);
    auto run_chunk = [&](std::size_t c) {
        auto rng = make_rng(seed, stream, c);
        const std::size_t begin = c * mc_chunk_size;
        const std::size_t end = std::min(samples, begin + mc_chunk_size);
        for (std::size_t k = begin; k < end; ++k) {
            const std::array<double, K> v = g(rng);
            for (std::size_t j = 0; j < K; ++j)
                parts[c][j].add(v[j]);
        }
    };
    if (exec == Execution::parallel) {
        const long long nc = static_cast<long long>(chunks);
#pragma omp parallel for schedule(dynamic)
        for (long long c = 0; c < nc; ++c)
            run_chunk(static_cast<std::size_t>(c));
    } else {
        for (std::size_t c = 0; c < chunks; ++c)
            run_chunk(c);
    }
    std::array<MeanAccumulator, K> total{};
    for (const auto& part : parts)
        for (std::size_t j = 0; j < K; ++j)
            total[j].merge(part[j]);
    return total;
}

template <class G>
Estimate mc_mean(std::size_t samples, std::uint64_t seed, std::uint64_t stream, Execution exec,
                 G&& g)
{
    auto acc = mc_accumulate<1>(samples, seed, stream, exec,
                                [&](Rng& rng) { return std::array<double, 1>{g(rng)}; });
    return acc[0].estimate();
}

/// Uniform direction on the hemisphere <eta, axis> >= 0 (axis need not be
/// normalized; a zero axis gives the upper z hemisphere).
inline Vec3 hemisphere_vector(Rng& rng, const Vec3& axis)
{
    Vec3 eta = unit_vector(rng);
    const Vec3 ref = norm2(axis) > 0.0 ? axis : Vec3{0, 0, 1};
    return dot(eta, ref) < 0.0 ? -eta : eta;
}

} // namespace hsk
