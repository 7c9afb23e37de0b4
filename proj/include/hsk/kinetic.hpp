#pragma once

// Stochastic particle solvers: DSMC for the hard-sphere Boltzmann equation
// (homogeneous and 1D slab), the displaced-collision Enskog step, the 1D
// hard-rod collision integral, and the H diagnostic.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hsk/dynamics.hpp"
#include "hsk/rng.hpp"
#include "hsk/sampling.hpp"

namespace hsk {

struct VelocityEnsemble {
    std::vector<Vec3> samples;
    double weight = 1.0;             ///< physical density carried by one sample
    std::optional<std::size_t> cell; ///< spatial cell for inhomogeneous runs

    double density() const { return weight * static_cast<double>(samples.size()); }
    void validate(std::size_t min_samples = 1000) const;
};

Vec3 mean_momentum(std::span<const Vec3> samples);
/// (1/3N) sum |p - mean|^2.
double temperature(std::span<const Vec3> samples);
/// Raw moment (1/N) sum prod_a p_a^{k_a}.
double raw_moment(std::span<const Vec3> samples, int kx, int ky, int kz);

/// Relative-speed bound used when none is configured:
/// 2 max(1.25 max|p - mean|, sqrt(T) sqrt(2 ln N + 20)).
double default_majorant(std::span<const Vec3> samples);

struct DsmcStats {
    std::size_t candidates = 0;
    std::size_t collisions = 0;

    DsmcStats& operator+=(const DsmcStats& o)
    {
        candidates += o.candidates;
        collisions += o.collisions;
        return *this;
    }
};

/// Homogeneous majorant step. Candidates: 1/2 N(N-1) w 2 pi g_max dt with
/// stochastic rounding, pairs uniform, eta uniform on the hemisphere of
/// p_i - p_j, accepted with probability <eta, p_i - p_j> / g_max.
/// Throws NumericalError when a candidate's relative speed exceeds g_max.
DsmcStats dsmc_collision_step(VelocityEnsemble& ens, double dt, double g_max, Rng& rng);

/// Periodic slab [0, length) cut into equal cells; transverse directions are
/// homogeneous with unit cross-section.
struct SlabEnsemble {
    double length = 1.0;
    std::size_t cells = 1;
    std::vector<double> x;
    std::vector<Vec3> p;
    double weight = 1.0; ///< density per unit length carried by one sample

    std::size_t size() const { return x.size(); }
    double cell_width() const { return length / static_cast<double>(cells); }
    std::size_t cell_of(double xx) const;
    double wrap(double xx) const;
    /// Sample indices per cell, ascending.
    std::vector<std::vector<std::size_t>> members() const;
    void validate() const;
};

/// x += p_x dt, wrapped into [0, length).
void transport_step(SlabEnsemble& ens, double dt);

/// Local DSMC in every cell; cell c at step k draws from make_rng(seed, c, k, 1).
DsmcStats slab_dsmc_collision_step(SlabEnsemble& ens, double dt, double g_max,
                                   std::uint64_t seed, std::uint64_t step,
                                   Execution exec = Execution::parallel);

struct EnskogOptions {
    int functional_order = 0;
    double g_max = 0.0;
    double time = 0.0; ///< elapsed time, the argument of the V_2 correction
    FlowOptions flow;
};

struct EnskogStats {
    std::size_t candidates = 0;
    std::size_t collisions = 0;
    std::size_t corrections = 0; ///< V_2 weights evaluated
    std::size_t clamped = 0;     ///< weights clipped to [0, 2]
    double virial = 0.0;         ///< sum over collisions of (x_i - x_partner) dp_{i,x}
};

/// Enskog step: particle i meets a partner from the cell at x_i + eps eta_x
/// (eta uniform on the sphere), candidates N 2 pi n_max g_max dt. Order 1
/// multiplies the pair rate by 1 + C / (F1 F1), C a one-sample estimate of
/// int dx3 V_2(t, {1,2}, 3) F1 F1 F1 with F1 the cell-wise local Maxwellian.
EnskogStats enskog_collision_step(SlabEnsemble& ens, double dt, double epsilon, Rng& rng,
                                  const EnskogOptions& options);

struct HistogramSpec {
    std::size_t bins = 24;   ///< per axis
    double half_width = 5.0; ///< cube [mean - w s, mean + w s]^3, s = sqrt(temperature)
};

/// Histogram estimate of int f log f for the normalized momentum density,
/// [1 2 1]/4 smoothing along each axis, log regularized by 1e-12.
double h_functional(std::span<const Vec3> samples, const HistogramSpec& spec = {});
double h_functional(const VelocityEnsemble& ens, const HistogramSpec& spec = {});
/// Split-half noise of h_functional: |H(first half) - H(second half)| / 2,
/// both halves on the grid of the full sample.
double h_functional_noise(std::span<const Vec3> samples, const HistogramSpec& spec = {});

// --- initial states ---
std::vector<Vec3> maxwellian_samples(std::size_t n, double temperature, const Vec3& drift,
                                     Rng& rng);
std::vector<Vec3> two_beam_samples(std::size_t n, double speed);
/// Positions drawn from density profile(x) / max_profile by rejection,
/// momenta Maxwellian; weight = mean_density * length / n.
SlabEnsemble slab_state(std::size_t n, double length, std::size_t cells, double mean_density,
                        const std::function<double(double)>& profile, double max_profile,
                        double temperature, Rng& rng);
/// 1 + a (1 - 4 |x/L - 1/2|): periodic piecewise-linear profile with mean 1.
std::function<double(double)> triangle_profile(double length, double amplitude);

// --- runners ---
enum class CollisionModel { boltzmann_local, enskog_displaced };

struct SolverConfig {
    double dt = 0.01;
    double t_end = 1.0;
    CollisionModel model = CollisionModel::boltzmann_local;
    double epsilon = 0.0;
    int functional_order = 0;
    bool homogeneous = true;
    std::size_t cells = 1;
    double length = 1.0;
    std::uint64_t seed = 1;
    double g_max = 0.0; ///< 0 picks default_majorant of the initial state
    HistogramSpec histogram;
    Execution execution = Execution::parallel;

    std::size_t steps() const;
    /// Cross-field problems, empty when valid.
    std::vector<std::string> diagnostics() const;
    void validate() const;
};

struct RunResult {
    std::vector<Vec3> p;      ///< final momenta
    std::vector<double> x;    ///< final positions (slab runs)
    std::size_t steps = 0;
    DsmcStats stats;
    std::vector<double> h_series; ///< whole-ensemble H after each step (and t = 0)
    double h_noise = 0.0;         ///< rms split-half noise of one H value
    double collisional_flux = 0.0; ///< time-averaged collisional xx momentum flux
    double g_max = 0.0;
};

void write_kinetic_csv_header(std::ostream& os);

RunResult run_homogeneous(VelocityEnsemble ens, const SolverConfig& cfg,
                          std::ostream* csv = nullptr);
/// Strang splitting: half transport, collisions, half transport.
RunResult run_slab(SlabEnsemble ens, const SolverConfig& cfg, std::ostream* csv = nullptr);

// --- 1D hard rods ---
using RodPairDensity = std::function<double(double q1, double p1, double q2, double p2)>;

struct RodIntegralOptions {
    double cutoff = 12.0;
    double tolerance = 1e-12;
    unsigned max_depth = 15;
};

struct RodIntegral {
    double value = 0.0;
    double error_estimate = 0.0;
    double tail_fraction = 0.0; ///< envelope mass on [cutoff, 2 cutoff] relative to [0, 2 cutoff]
    bool tail_warning = false;  ///< tail_fraction > 1%
};

/// int_0^cutoff dP P [F2(q1,p1-P,q1-e,p1) - F2(q1,p1,q1-e,p1+P)
///                  + F2(q1,p1+P,q1+e,p1) - F2(q1,p1,q1+e,p1-P)]
/// by adaptive Gauss-Kronrod; the first and fourth, second and third terms
/// are subtracted pairwise before summing.
RodIntegral hard_rod_collision_integral_1d(const RodPairDensity& f2, double q1, double p1,
                                           double epsilon, const RodIntegralOptions& options = {});

} // namespace hsk
