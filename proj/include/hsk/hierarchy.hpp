#pragma once

// Truncated cumulant series for the marginals of the hard-sphere hierarchy
// and its dual, the mean-value pairing between them, and the low-order
// Boltzmann-Grad limit expansions with collision deltas integrated out.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "hsk/cluster.hpp"
#include "hsk/sampling.hpp"

namespace hsk {

/// Initial marginals F_1, ..., F_N (F[s-1] has arity s); F_s = 0 for s > N.
struct MarginalSequence {
    std::vector<StateFunction> F;
    double epsilon = 0.0;
    Boundary boundary;

    std::size_t support() const { return F.size(); }
    /// F_{|x|}(x), zero above the support.
    double operator()(std::span<const Particle> x) const;
};

/// Chaos data F_s = prod f1(x_i) X_allowed(x), for s up to `support`.
struct ProductState {
    StateFunction f1;
    double epsilon = 0.0;
    Boundary boundary;
    std::size_t support = 3;

    MarginalSequence marginals() const;
};

struct MarginalSeriesSpec {
    std::size_t s = 1;
    std::size_t max_n = 1;             ///< at most 3
    std::size_t mc_samples = 10'000;   ///< per added-particle integral, at least 1e3
    SampleDomain domain;
    std::uint64_t seed = 1;
    Execution execution = Execution::parallel;
    FlowOptions flow;

    void validate() const;
};

/// F_s(t, x) = sum_{n <= max_n} 1/n! int dx_{s+1..s+n} A_{1+n}(-t, {Y}, X\Y) F_{s+n}(0).
Estimate bbgky_marginal(const MarginalSeriesSpec& spec, double t, const MarginalSequence& init,
                        std::span<const Particle> x);

enum class ObservableKind { additive, k_ary };

struct ObservableSpec {
    ObservableKind kind = ObservableKind::additive;
    std::size_t k = 1;
    StateFunction b; ///< arity k

    void validate() const;
};

/// B_s(t, x) for the single-component initial observable b_k:
///   sum over Z subset of Y with |Z| = s - k of A_{1+s-k}(t, {Y\Z}, Z) b_k(x_{Y\Z}).
double dual_marginal_observable(const ObservableSpec& obs, std::size_t s, double t,
                                std::span<const Particle> x, const DynamicsContext& ctx);

struct PairingSpec {
    std::size_t mc_samples = 100'000;
    SampleDomain domain;
    std::uint64_t seed = 1;
    Execution execution = Execution::parallel;
    FlowOptions flow;
};

/// <B(t) | F(0)> = sum_s 1/s! int B_s(t) F_s(0), through the support of `state`.
Estimate mean_value(const ObservableSpec& obs, double t, const MarginalSequence& state,
                    const PairingSpec& spec);

struct DualityReport {
    Estimate observable_picture; ///< <B(t) | F(0)>
    Estimate state_picture;      ///< <B(0) | F(t)>
    double residual = 0.0;       ///< |difference|
    double sigma = 0.0;          ///< standard error of the paired difference
    bool within_3_sigma() const { return residual <= 3.0 * sigma; }
};

/// Both pictures evaluated on shared phase points, dimension by dimension.
DualityReport duality_residual(const ObservableSpec& obs, const MarginalSequence& init, double t,
                               const PairingSpec& spec);

struct LimitQuadratureSpec {
    std::size_t mc_samples = 100'000;
    SampleDomain domain; ///< positions for the collision point, momentum envelope
    std::uint64_t seed = 1;
    Execution execution = Execution::parallel;
};

/// <b_s^{(1)}(t), f1^{(x)s}> for s in {1, 2}; the s = 2 term carries a single
/// L_int(1, 2) insertion, without the 1/2! of the mean-value pairing.
Estimate limit_additive_observable_functional(const StateFunction& b1, std::size_t s, double t,
                                              const StateFunction& f1,
                                              const LimitQuadratureSpec& spec);

/// I_1 + I_2 / 2: limit mean of the additive observable through one collision.
Estimate limit_additive_mean(const StateFunction& b1, double t, const StateFunction& f1,
                             const LimitQuadratureSpec& spec);

/// Pointwise terms of the limit series for f_1(t, x), orders 0..max_n (max_n <= 2).
class BoltzmannLimitSeries {
public:
    BoltzmannLimitSeries(StateFunction f0, double t, std::size_t max_n, LimitQuadratureSpec spec);

    /// Term n at x (n = 0 is exact).
    Estimate term(std::size_t n, const Particle& x) const;
    /// Sum of terms 0..max_n at x.
    Estimate value(const Particle& x) const;
    std::size_t max_order() const { return max_n_; }

private:
    StateFunction f0_;
    double t_;
    std::size_t max_n_;
    LimitQuadratureSpec spec_;
};

BoltzmannLimitSeries boltzmann_limit_series_f1(const StateFunction& f1_0, double t,
                                               std::size_t max_n,
                                               const LimitQuadratureSpec& spec);

/// Spatially homogeneous moments int phi(p) f_1(t, p) dp, term by term (orders
/// 0..max_n, max_n <= 2). f0 is a momentum density (arity-1 function read at
/// its momentum only), normalized to the number density.
std::vector<Estimate> limit_series_moments(const StateFunction& f0, const StateFunction& phi,
                                           double t, std::size_t max_n,
                                           const LimitQuadratureSpec& spec);

} // namespace hsk
