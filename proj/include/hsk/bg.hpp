#pragma once

// Boltzmann-Grad scaling harness: chaos-state sampling in a periodic box,
// replica ensembles of hard-sphere dynamics, marginal histograms with the
// eps^{2s} prefactor, comparison against a DSMC reference at matched rate,
// the pair-correlation (chaos) metric, and the factorization functional.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "hsk/cluster.hpp"
#include "hsk/dynamics.hpp"
#include "hsk/rng.hpp"
#include "hsk/sampling.hpp"
#include "hsk/stats.hpp"

namespace hsk {

/// One-particle law of a homogeneous state: positions uniform in the box,
/// momenta from `momentum`.
struct MomentumLaw {
    std::function<Vec3(Rng&)> momentum;
    std::string name = "custom";
};

/// Counter-streaming warm beams: p = +-drift e_x + N(0, spread^2 I).
MomentumLaw counter_streaming_law(double drift = 1.2, double spread = 0.6);
MomentumLaw maxwellian_law(double temperature = 1.0);

enum class ChaosSampling {
    incremental,  ///< redraw only the particle that overlaps
    whole_config  ///< redraw the whole configuration on any overlap
};

struct ChaosSampleStats {
    std::size_t draws = 0;
    std::size_t rejections = 0;
    double acceptance() const
    {
        return draws ? 1.0 - static_cast<double>(rejections) / static_cast<double>(draws) : 1.0;
    }
};

/// N i.i.d. draws conditioned on the allowed set of the periodic box.
/// incremental: draws and rejections count single-particle insertions;
/// whole_config: they count whole configurations.
/// Throws ValidationError when the rejection rate exceeds 99%.
PhaseState sample_chaos_state(const MomentumLaw& f1, std::size_t n, double epsilon,
                              const Boundary& box, Rng& rng,
                              ChaosSampling mode = ChaosSampling::incremental,
                              ChaosSampleStats* stats = nullptr);

/// Probability that N uniform centers in volume V have no pair closer than
/// eps: exp(-N(N-1)/2 * (4/3) pi eps^3 / V) (independent-pair approximation).
double whole_config_acceptance_estimate(std::size_t n, double epsilon, double volume);

struct HistogramAxes {
    std::size_t momentum_bins = 32;
    double momentum_range = 4.0; ///< +- this many thermal widths around the mean
    double thermal_width = 0.0;  ///< sqrt(T) of the initial law; 0: estimated by the report
    Vec3 center{};               ///< mean momentum of the initial law (set with thermal_width)
    std::size_t shells = 3;      ///< r-shells of the pair histogram
    double shell_width = 0.3;    ///< total radial extent beyond the contact cut
    double contact_factor = 2.0; ///< pair distances below contact_factor * eps are excluded
    /// coarse p_x edges (in thermal widths) of the pair histogram
    std::vector<double> pair_momentum_edges{-0.6745, 0.0, 0.6745};

    bool same_as(const HistogramAxes& o) const;
    void validate() const;
};

/// Histogram estimate of eps^{2s} F_s. Order 1: three 1D projections (p_x,
/// p_y, p_z) of momentum_bins each, positions integrated. Order 2: ordered
/// pairs binned by (r-shell, p_x class of i, p_x class of j).
struct MarginalHistogram {
    std::size_t order = 1;
    double epsilon = 0.0;
    double volume = 0.0;
    HistogramAxes axes;
    std::vector<double> counts;  ///< flat bins
    double overflow = 0.0;       ///< tuples outside every bin (order 1: per projection, summed)
    std::vector<double> class_counts; ///< order 2: one-particle p_x class counts
    std::size_t replicas = 0;
    std::size_t particles = 0;   ///< N per replica

    /// eps^{2s} / replicas
    double prefactor() const;
    /// eps^{2s} (counts + overflow) / replicas, per projection for order 1.
    double mass() const;
    /// Expected mass eps^2 N (order 1) or eps^4 N (N - 1) (order 2).
    double expected_mass() const;
    /// Density on momentum axis a (order 1), bin k: prefactor counts / width.
    double density(std::size_t axis, std::size_t bin) const;
    void merge(const MarginalHistogram& other);
};

MarginalHistogram make_marginal_histogram(std::size_t order, double epsilon, double volume,
                                          std::size_t particles, const HistogramAxes& axes);
/// Adds one replica's configuration.
void accumulate(MarginalHistogram& h, const PhaseState& state);

MarginalHistogram estimate_marginal(std::span<const PhaseState> ensemble, std::size_t s,
                                    const HistogramAxes& axes);

/// Normalized L1 distance between the momentum projections of an order-1
/// histogram and a reference sample, averaged over the three axes; both
/// sides are normalized to unit mass.
double projection_l1(const MarginalHistogram& h1, std::span<const Vec3> reference);

/// mean over pair bins of |F2 / (F1 x F1) - 1|; F1 x F1 for a homogeneous
/// state is N(N-1) (shell volume / V) P_a P_b with P the one-particle p_x
/// class frequencies recorded alongside the pairs.
double chaos_metric(const MarginalHistogram& h2);

struct ScalingPlan {
    std::vector<double> epsilons{0.2, 0.1, 0.05};
    double density_constant = 1.0; ///< c = N eps^2 / V
    double box_side = 2.15;
    std::size_t replicas = 64;
    std::vector<double> t_grid{0.0, 0.25, 0.5}; ///< in mean free times
    HistogramAxes axes;
    std::size_t particle_cap = 10'000;
    std::size_t reference_samples = 1'000'000;
    std::size_t reference_steps_per_unit = 40; ///< DSMC steps per mean free time
    std::size_t jackknife_groups = 16;
    bool collisions = true; ///< false: free transport on both sides
    ChaosSampling sampling = ChaosSampling::incremental;
    std::uint64_t seed = 1;
    Execution execution = Execution::parallel;

    std::size_t particles(double epsilon) const;
    double volume() const { return box_side * box_side * box_side; }
    std::vector<std::string> diagnostics() const;
    void validate() const;
};

struct BgRow {
    double epsilon = 0.0;
    double t = 0.0; ///< absolute time
    double t_mft = 0.0; ///< in mean free times
    double l1 = 0.0, l1_err = 0.0;
    double chi = 0.0, chi_err = 0.0;
    std::size_t n = 0;
    std::size_t replicas = 0;
    double md_energy = 0.0, md_energy_err = 0.0; ///< per particle
    double ref_energy = 0.0;
    std::size_t collisions = 0; ///< MD collisions per replica, averaged
};

struct BgReport {
    std::vector<BgRow> rows;  ///< ordered by epsilon (plan order), then t
    double mean_free_time = 0.0;
    double mean_relative_speed = 0.0;
    std::vector<TrendResult> l1_trend;  ///< one per t_grid entry
    std::vector<TrendResult> chi_trend; ///< one per t_grid entry
};

/// <|p1 - p2|> under the law, by Monte Carlo. The mean free time of the
/// plan is 1 / (pi c <|p1 - p2|>).
double mean_relative_speed(const MomentumLaw& f1, std::size_t samples, std::uint64_t seed);

BgReport bg_convergence_report(const ScalingPlan& plan, const MomentumLaw& f1);
void write_bg_csv(std::ostream& os, const BgReport& report);

struct FactorizationSpec {
    double t = 0.5;
    std::vector<double> epsilons{0.2, 0.1, 0.05};
    std::size_t samples = 100'000;
    std::uint64_t seed = 1;
    Execution execution = Execution::parallel;
    FlowOptions flow;
};

struct FactorizationRow {
    double epsilon = 0.0;
    Estimate difference; ///< E[b(S_s(t) x) - b(prod S_1(t) x)]
};

/// x ~ (prod f1) X_allowed by rejection from `draw` (a one-particle sampler
/// with positions included), b an arity-s observable, unbounded space.
std::vector<FactorizationRow> factorization_test(const std::function<Particle(Rng&)>& draw,
                                                 const StateFunction& b,
                                                 const FactorizationSpec& spec);

} // namespace hsk
