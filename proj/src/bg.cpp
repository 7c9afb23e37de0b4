#include "hsk/bg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <numbers>
#include <ostream>

#include "hsk/errors.hpp"
#include "hsk/kinetic.hpp"

namespace hsk {

namespace {

constexpr double pi = std::numbers::pi;

bool allowed_against(const std::vector<Particle>& ps, std::size_t count, const Vec3& q,
                     double epsilon, const Boundary& box)
{
    const double lim = epsilon * epsilon * (1.0 - contact_slack) * (1.0 - contact_slack);
    for (std::size_t k = 0; k < count; ++k)
        if (norm2(box.separation(q, ps[k].q)) < lim)
            return false;
    return true;
}

std::size_t pair_classes(const HistogramAxes& a) { return a.pair_momentum_edges.size() + 1; }

std::size_t class_of(const HistogramAxes& a, double px)
{
    const double v = (px - a.center.x) / a.thermal_width;
    std::size_t c = 0;
    for (double e : a.pair_momentum_edges)
        if (v >= e)
            ++c;
    return c;
}

double shell_radius(const HistogramAxes& a, double epsilon, std::size_t k)
{
    return a.contact_factor * epsilon +
           a.shell_width * static_cast<double>(k) / static_cast<double>(a.shells);
}

double shell_volume(const HistogramAxes& a, double epsilon, std::size_t k)
{
    const double r0 = shell_radius(a, epsilon, k), r1 = shell_radius(a, epsilon, k + 1);
    return 4.0 / 3.0 * pi * (r1 * r1 * r1 - r0 * r0 * r0);
}

/// Per axis: momentum_bins counts followed by one overflow slot.
std::vector<double> reference_projection(std::span<const Vec3> samples, const HistogramAxes& a)
{
    const std::size_t b = a.momentum_bins;
    std::vector<double> out(3 * (b + 1), 0.0);
    const double width = 2.0 * a.momentum_range / static_cast<double>(b);
    for (const auto& p : samples)
        for (std::size_t ax = 0; ax < 3; ++ax) {
            const double v = (p[ax] - a.center[ax]) / a.thermal_width;
            const double k = std::floor((v + a.momentum_range) / width);
            const std::size_t slot = (k >= 0 && k < static_cast<double>(b))
                                         ? static_cast<std::size_t>(k)
                                         : b;
            out[ax * (b + 1) + slot] += 1.0;
        }
    return out;
}

double l1_against(const MarginalHistogram& h1, const std::vector<double>& ref)
{
    if (h1.order != 1)
        throw ValidationError("projection_l1: needs an order-1 histogram");
    const std::size_t b = h1.axes.momentum_bins;
    if (ref.size() != 3 * (b + 1))
        throw ValidationError("projection_l1: mismatched histogram specs");
    double total = 0.0;
    for (std::size_t ax = 0; ax < 3; ++ax) {
        double md_mass = 0.0, ref_mass = 0.0;
        for (std::size_t k = 0; k < b; ++k) {
            md_mass += h1.counts[ax * b + k];
            ref_mass += ref[ax * (b + 1) + k];
        }
        const double md_over =
            static_cast<double>(h1.replicas) * static_cast<double>(h1.particles) - md_mass;
        md_mass += md_over;
        ref_mass += ref[ax * (b + 1) + b];
        double l1 = std::abs(md_over / md_mass - ref[ax * (b + 1) + b] / ref_mass);
        for (std::size_t k = 0; k < b; ++k)
            l1 += std::abs(h1.counts[ax * b + k] / md_mass - ref[ax * (b + 1) + k] / ref_mass);
        total += l1;
    }
    return total / 3.0;
}

MarginalHistogram minus(const MarginalHistogram& a, const MarginalHistogram& b)
{
    MarginalHistogram out = a;
    for (std::size_t i = 0; i < out.counts.size(); ++i)
        out.counts[i] -= b.counts[i];
    for (std::size_t i = 0; i < out.class_counts.size(); ++i)
        out.class_counts[i] -= b.class_counts[i];
    out.overflow -= b.overflow;
    out.replicas -= b.replicas;
    return out;
}

template <class F>
void for_each_index(std::size_t n, Execution exec, F&& f)
{
    if (exec == Execution::parallel) {
        std::exception_ptr error;
        const long long nn = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic)
        for (long long i = 0; i < nn; ++i) {
            try {
                f(static_cast<std::size_t>(i));
            } catch (...) {
#pragma omp critical
                if (!error)
                    error = std::current_exception();
            }
        }
        if (error)
            std::rethrow_exception(error);
    } else {
        for (std::size_t i = 0; i < n; ++i)
            f(i);
    }
}

std::string num(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12e", v);
    return buf;
}

} // namespace

MomentumLaw counter_streaming_law(double drift, double spread)
{
    if (!(spread > 0.0))
        throw ValidationError("counter_streaming_law: spread must be positive");
    MomentumLaw law;
    law.name = "counter_streaming";
    law.momentum = [drift, spread](Rng& rng) {
        const double sign = uniform01(rng) < 0.5 ? -1.0 : 1.0;
        return Vec3{sign * drift, 0.0, 0.0} + normal_vec(rng, spread);
    };
    return law;
}

MomentumLaw maxwellian_law(double temp)
{
    if (!(temp > 0.0))
        throw ValidationError("maxwellian_law: temperature must be positive");
    MomentumLaw law;
    law.name = "maxwellian";
    const double s = std::sqrt(temp);
    law.momentum = [s](Rng& rng) { return normal_vec(rng, s); };
    return law;
}

PhaseState sample_chaos_state(const MomentumLaw& f1, std::size_t n, double epsilon,
                              const Boundary& box, Rng& rng, ChaosSampling mode,
                              ChaosSampleStats* stats)
{
    if (!box.periodic() || !(box.side > 0.0))
        throw ValidationError("sample_chaos_state: needs a periodic box");
    if (!(epsilon >= 0.0) || !(box.side > 2.0 * epsilon))
        throw ValidationError("sample_chaos_state: need 0 <= eps < L/2");
    if (!f1.momentum)
        throw ValidationError("sample_chaos_state: empty momentum law");
    ChaosSampleStats local;
    ChaosSampleStats& st = stats ? *stats : local;
    st = {};
    auto check_rate = [&] {
        if (st.draws >= 100 && static_cast<double>(st.rejections) > 0.99 * st.draws)
            throw ValidationError("sample_chaos_state: rejection rate above 99% (packing too dense)");
    };
    auto draw_q = [&] {
        return Vec3{uniform(rng, 0.0, box.side), uniform(rng, 0.0, box.side),
                    uniform(rng, 0.0, box.side)};
    };
    PhaseState state;
    state.epsilon = epsilon;
    state.boundary = box;
    state.particles.resize(n);
    if (mode == ChaosSampling::incremental) {
        for (std::size_t i = 0; i < n; ++i) {
            for (;;) {
                const Vec3 q = draw_q();
                ++st.draws;
                if (allowed_against(state.particles, i, q, epsilon, box)) {
                    state.particles[i].q = q;
                    break;
                }
                ++st.rejections;
                check_rate();
            }
        }
    } else {
        for (;;) {
            ++st.draws;
            for (auto& pt : state.particles)
                pt.q = draw_q();
            bool ok = true;
            for (std::size_t i = 1; i < n && ok; ++i)
                ok = allowed_against(state.particles, i, state.particles[i].q, epsilon, box);
            if (ok)
                break;
            ++st.rejections;
            check_rate();
        }
    }
    for (auto& pt : state.particles)
        pt.p = f1.momentum(rng);
    return state;
}

double whole_config_acceptance_estimate(std::size_t n, double epsilon, double volume)
{
    const double pairs = 0.5 * static_cast<double>(n) * (static_cast<double>(n) - 1.0);
    return std::exp(-pairs * 4.0 / 3.0 * pi * epsilon * epsilon * epsilon / volume);
}

// --- histograms ---

bool HistogramAxes::same_as(const HistogramAxes& o) const
{
    return momentum_bins == o.momentum_bins && momentum_range == o.momentum_range &&
           thermal_width == o.thermal_width && center == o.center && shells == o.shells &&
           shell_width == o.shell_width && contact_factor == o.contact_factor &&
           pair_momentum_edges == o.pair_momentum_edges;
}

void HistogramAxes::validate() const
{
    if (momentum_bins == 0 || !(momentum_range > 0.0))
        throw ValidationError("histogram: need momentum_bins > 0 and momentum_range > 0");
    if (!(thermal_width > 0.0))
        throw ValidationError("histogram: thermal_width must be positive");
    if (shells == 0 || !(shell_width > 0.0) || !(contact_factor >= 0.0))
        throw ValidationError("histogram: need shells > 0, shell_width > 0, contact_factor >= 0");
    if (!std::is_sorted(pair_momentum_edges.begin(), pair_momentum_edges.end()))
        throw ValidationError("histogram: pair_momentum_edges must be ascending");
}

double MarginalHistogram::prefactor() const
{
    const double e2 = epsilon * epsilon;
    return (order == 1 ? e2 : e2 * e2) / static_cast<double>(std::max<std::size_t>(replicas, 1));
}

double MarginalHistogram::mass() const
{
    double sum = overflow;
    for (double c : counts)
        sum += c;
    return prefactor() * (order == 1 ? sum / 3.0 : sum);
}

double MarginalHistogram::expected_mass() const
{
    const double n = static_cast<double>(particles), e2 = epsilon * epsilon;
    return order == 1 ? e2 * n : e2 * e2 * n * (n - 1.0);
}

double MarginalHistogram::density(std::size_t axis, std::size_t bin) const
{
    if (order != 1 || axis > 2 || bin >= axes.momentum_bins)
        throw ValidationError("MarginalHistogram::density: order-1 axis/bin out of range");
    const double width =
        2.0 * axes.momentum_range * axes.thermal_width / static_cast<double>(axes.momentum_bins);
    return prefactor() * counts[axis * axes.momentum_bins + bin] / width;
}

void MarginalHistogram::merge(const MarginalHistogram& o)
{
    if (o.order != order || o.epsilon != epsilon || o.volume != volume ||
        o.particles != particles || !axes.same_as(o.axes) || o.counts.size() != counts.size())
        throw ValidationError("MarginalHistogram::merge: mismatched histogram specs");
    for (std::size_t i = 0; i < counts.size(); ++i)
        counts[i] += o.counts[i];
    for (std::size_t i = 0; i < class_counts.size(); ++i)
        class_counts[i] += o.class_counts[i];
    overflow += o.overflow;
    replicas += o.replicas;
}

MarginalHistogram make_marginal_histogram(std::size_t order, double epsilon, double volume,
                                          std::size_t particles, const HistogramAxes& axes)
{
    axes.validate();
    if (order != 1 && order != 2)
        throw ValidationError("marginal histogram: order must be 1 or 2");
    MarginalHistogram h;
    h.order = order;
    h.epsilon = epsilon;
    h.volume = volume;
    h.axes = axes;
    h.particles = particles;
    if (order == 1) {
        h.counts.assign(3 * axes.momentum_bins, 0.0);
    } else {
        const std::size_t k = pair_classes(axes);
        h.counts.assign(axes.shells * k * k, 0.0);
        h.class_counts.assign(k, 0.0);
    }
    return h;
}

void accumulate(MarginalHistogram& h, const PhaseState& state)
{
    if (state.size() != h.particles)
        throw ValidationError("accumulate: particle count differs from the histogram");
    const auto& a = h.axes;
    if (h.order == 1) {
        const std::size_t b = a.momentum_bins;
        const double width = 2.0 * a.momentum_range / static_cast<double>(b);
        for (const auto& pt : state.particles)
            for (std::size_t ax = 0; ax < 3; ++ax) {
                const double v = (pt.p[ax] - a.center[ax]) / a.thermal_width;
                const double k = std::floor((v + a.momentum_range) / width);
                if (k >= 0 && k < static_cast<double>(b))
                    h.counts[ax * b + static_cast<std::size_t>(k)] += 1.0;
                else
                    h.overflow += 1.0;
            }
    } else {
        if (!state.boundary.periodic() ||
            !(shell_radius(a, h.epsilon, a.shells) < 0.5 * state.boundary.side))
            throw ValidationError("accumulate: pair shells must fit inside half the periodic box");
        const std::size_t kc = pair_classes(a);
        std::vector<std::size_t> cls(state.size());
        for (std::size_t i = 0; i < state.size(); ++i) {
            cls[i] = class_of(a, state.particles[i].p.x);
            h.class_counts[cls[i]] += 1.0;
        }
        const double r_lo = shell_radius(a, h.epsilon, 0);
        const double r_hi = shell_radius(a, h.epsilon, a.shells);
        const double r_lo2 = r_lo * r_lo, r_hi2 = r_hi * r_hi;
        const double dr = a.shell_width / static_cast<double>(a.shells);
        double inside = 0.0;
        for (std::size_t i = 0; i < state.size(); ++i)
            for (std::size_t j = i + 1; j < state.size(); ++j) {
                const double r2 =
                    norm2(state.boundary.separation(state.particles[i].q, state.particles[j].q));
                if (r2 < r_lo2 || r2 >= r_hi2)
                    continue;
                const auto shell = std::min(
                    a.shells - 1, static_cast<std::size_t>((std::sqrt(r2) - r_lo) / dr));
                h.counts[(shell * kc + cls[i]) * kc + cls[j]] += 1.0;
                h.counts[(shell * kc + cls[j]) * kc + cls[i]] += 1.0;
                inside += 2.0;
            }
        const double n = static_cast<double>(state.size());
        h.overflow += n * (n - 1.0) - inside;
    }
    h.replicas += 1;
}

MarginalHistogram estimate_marginal(std::span<const PhaseState> ensemble, std::size_t s,
                                    const HistogramAxes& axes)
{
    if (ensemble.empty())
        throw ValidationError("estimate_marginal: empty ensemble");
    const auto& first = ensemble.front();
    const double volume = first.boundary.periodic() ? std::pow(first.boundary.side, 3) : 0.0;
    auto h = make_marginal_histogram(s, first.epsilon, volume, first.size(), axes);
    for (const auto& st : ensemble)
        accumulate(h, st);
    return h;
}

double projection_l1(const MarginalHistogram& h1, std::span<const Vec3> reference)
{
    if (reference.empty())
        throw ValidationError("projection_l1: empty reference");
    return l1_against(h1, reference_projection(reference, h1.axes));
}

double chaos_metric(const MarginalHistogram& h2)
{
    if (h2.order != 2 || h2.replicas == 0)
        throw ValidationError("chaos_metric: needs a non-empty order-2 histogram");
    const auto& a = h2.axes;
    const std::size_t kc = pair_classes(a);
    double ctot = 0.0;
    for (double c : h2.class_counts)
        ctot += c;
    const double n = static_cast<double>(h2.particles);
    const double pairs = static_cast<double>(h2.replicas) * n * (n - 1.0);
    double sum = 0.0;
    std::size_t bins = 0;
    for (std::size_t s = 0; s < a.shells; ++s) {
        const double frac = shell_volume(a, h2.epsilon, s) / h2.volume;
        for (std::size_t i = 0; i < kc; ++i)
            for (std::size_t j = 0; j < kc; ++j) {
                const double expected =
                    pairs * frac * (h2.class_counts[i] / ctot) * (h2.class_counts[j] / ctot);
                if (!(expected > 0.0))
                    continue;
                sum += std::abs(h2.counts[(s * kc + i) * kc + j] / expected - 1.0);
                ++bins;
            }
    }
    return bins ? sum / static_cast<double>(bins) : 0.0;
}

// --- plan and report ---

std::size_t ScalingPlan::particles(double epsilon) const
{
    return static_cast<std::size_t>(std::llround(density_constant * volume() / (epsilon * epsilon)));
}

std::vector<std::string> ScalingPlan::diagnostics() const
{
    std::vector<std::string> d;
    if (epsilons.empty())
        d.push_back("epsilons: need at least one value");
    for (std::size_t i = 0; i < epsilons.size(); ++i) {
        if (!(epsilons[i] > 0.0))
            d.push_back("epsilons: every value must be positive");
        if (i > 0 && !(epsilons[i] < epsilons[i - 1]))
            d.push_back("epsilons: must be strictly descending");
    }
    if (!(density_constant > 0.0))
        d.push_back("density_constant must be positive");
    if (!(box_side > 0.0))
        d.push_back("box_side must be positive");
    if (replicas < 2)
        d.push_back("replicas must be at least 2");
    if (jackknife_groups < 2 || jackknife_groups > replicas)
        d.push_back("jackknife_groups must lie in [2, replicas]");
    if (reference_samples < 1000)
        d.push_back("reference_samples must be at least 1000");
    if (reference_steps_per_unit == 0)
        d.push_back("reference_steps_per_unit must be positive");
    for (double t : t_grid) {
        if (!(t >= 0.0))
            d.push_back("t_grid: times must be non-negative");
        const double k = t * static_cast<double>(reference_steps_per_unit);
        if (std::abs(k - std::round(k)) > 1e-9)
            d.push_back("t_grid: every time must be a multiple of 1/reference_steps_per_unit");
    }
    if (!std::is_sorted(t_grid.begin(), t_grid.end()) || t_grid.empty())
        d.push_back("t_grid: need ascending, non-empty times");
    if (box_side > 0.0)
        for (double e : epsilons) {
            if (!(e > 0.0))
                continue;
            if (particles(e) > particle_cap)
                d.push_back("N = " + std::to_string(particles(e)) + " at eps = " +
                            std::to_string(e) + " exceeds the particle cap " +
                            std::to_string(particle_cap));
            if (!(axes.contact_factor * e + axes.shell_width < 0.5 * box_side))
                d.push_back("pair shells at eps = " + std::to_string(e) +
                            " do not fit inside half the box");
        }
    try {
        HistogramAxes probe = axes;
        if (!(probe.thermal_width > 0.0))
            probe.thermal_width = 1.0;
        probe.validate();
    } catch (const ValidationError& e) {
        d.push_back(e.what());
    }
    return d;
}

void ScalingPlan::validate() const
{
    const auto d = diagnostics();
    if (!d.empty())
        throw ValidationError("scaling plan: " + d.front());
}

double mean_relative_speed(const MomentumLaw& f1, std::size_t samples, std::uint64_t seed)
{
    return mc_mean(samples, seed, 0, Execution::serial, [&](Rng& rng) {
               const Vec3 a = f1.momentum(rng);
               const Vec3 b = f1.momentum(rng);
               return norm(a - b);
           })
        .value;
}

BgReport bg_convergence_report(const ScalingPlan& plan, const MomentumLaw& f1)
{
    plan.validate();
    if (!f1.momentum)
        throw ValidationError("bg report: empty momentum law");
    BgReport report;
    HistogramAxes axes = plan.axes;
    if (!(axes.thermal_width > 0.0)) {
        auto rng = make_rng(plan.seed, 0xA1);
        std::vector<Vec3> probe(200'000);
        for (auto& v : probe)
            v = f1.momentum(rng);
        axes.center = mean_momentum(probe);
        axes.thermal_width = std::sqrt(temperature(probe));
    }
    report.mean_relative_speed = mean_relative_speed(f1, 200'000, derive_seed(plan.seed, 0xA2));
    const double tau = 1.0 / (pi * plan.density_constant * report.mean_relative_speed);
    report.mean_free_time = tau;
    const std::size_t ng = plan.t_grid.size();
    std::vector<double> times(ng);
    for (std::size_t g = 0; g < ng; ++g)
        times[g] = plan.t_grid[g] * tau;

    // DSMC reference at matched rate c
    std::vector<std::vector<double>> ref_proj(ng);
    std::vector<double> ref_energy(ng);
    {
        auto rng = make_rng(plan.seed, 0xA3);
        VelocityEnsemble ens;
        ens.samples.resize(plan.reference_samples);
        for (auto& v : ens.samples)
            v = f1.momentum(rng);
        ens.weight = plan.density_constant / static_cast<double>(plan.reference_samples);
        const double dt = tau / static_cast<double>(plan.reference_steps_per_unit);
        const double g_max = default_majorant(ens.samples);
        std::size_t step = 0;
        for (std::size_t g = 0; g < ng; ++g) {
            const auto target = static_cast<std::size_t>(
                std::llround(plan.t_grid[g] * static_cast<double>(plan.reference_steps_per_unit)));
            for (; step < target; ++step) {
                if (!plan.collisions)
                    continue;
                auto srng = make_rng(plan.seed, 0xA4, step);
                dsmc_collision_step(ens, dt, g_max, srng);
            }
            ref_proj[g] = reference_projection(ens.samples, axes);
            double e = 0.0;
            for (const auto& v : ens.samples)
                e += 0.5 * norm2(v);
            ref_energy[g] = e / static_cast<double>(ens.samples.size());
        }
    }

    const Boundary box = Boundary::periodic_box(plan.box_side);
    const std::size_t reps = plan.replicas;
    std::vector<std::vector<double>> l1_by_g(ng), l1_err_by_g(ng), chi_by_g(ng), chi_err_by_g(ng);
    for (std::size_t ei = 0; ei < plan.epsilons.size(); ++ei) {
        const double eps = plan.epsilons[ei];
        const std::size_t n = plan.particles(eps);
        std::vector<MarginalHistogram> h1(ng * reps), h2(ng * reps);
        std::vector<double> energy(ng * reps), coll(ng * reps);
        for_each_index(reps, plan.execution, [&](std::size_t r) {
            auto rng = make_rng(plan.seed, 0x100 + ei, r);
            PhaseState st = sample_chaos_state(f1, n, eps, box, rng, plan.sampling);
            double now = 0.0;
            std::size_t collisions = 0;
            for (std::size_t g = 0; g < ng; ++g) {
                const double dt = times[g] - now;
                if (dt > 0.0) {
                    if (plan.collisions) {
                        FlowStats fs;
                        st = hard_sphere_flow(std::move(st), dt, FlowOptions{}, &fs);
                        collisions += fs.collisions;
                    } else {
                        st = free_flow(std::move(st), dt);
                    }
                    now = times[g];
                }
                auto& a = h1[g * reps + r];
                a = make_marginal_histogram(1, eps, plan.volume(), n, axes);
                accumulate(a, st);
                auto& b = h2[g * reps + r];
                b = make_marginal_histogram(2, eps, plan.volume(), n, axes);
                accumulate(b, st);
                double e = 0.0;
                for (const auto& pt : st.particles)
                    e += 0.5 * norm2(pt.p);
                energy[g * reps + r] = e / static_cast<double>(n);
                coll[g * reps + r] = static_cast<double>(collisions);
            }
        });
        const std::size_t groups = plan.jackknife_groups;
        for (std::size_t g = 0; g < ng; ++g) {
            MarginalHistogram t1 = make_marginal_histogram(1, eps, plan.volume(), n, axes);
            MarginalHistogram t2 = make_marginal_histogram(2, eps, plan.volume(), n, axes);
            std::vector<MarginalHistogram> g1(groups, t1), g2(groups, t2);
            MeanAccumulator en, co;
            for (std::size_t r = 0; r < reps; ++r) {
                t1.merge(h1[g * reps + r]);
                t2.merge(h2[g * reps + r]);
                g1[r % groups].merge(h1[g * reps + r]);
                g2[r % groups].merge(h2[g * reps + r]);
                en.add(energy[g * reps + r]);
                co.add(coll[g * reps + r]);
            }
            BgRow row;
            row.epsilon = eps;
            row.t = times[g];
            row.t_mft = plan.t_grid[g];
            row.n = n;
            row.replicas = reps;
            row.l1 = l1_against(t1, ref_proj[g]);
            row.chi = chaos_metric(t2);
            std::vector<double> jl(groups), jc(groups);
            for (std::size_t k = 0; k < groups; ++k) {
                jl[k] = l1_against(minus(t1, g1[k]), ref_proj[g]);
                jc[k] = chaos_metric(minus(t2, g2[k]));
            }
            auto jk = [groups](const std::vector<double>& v) {
                double m = 0.0;
                for (double x : v)
                    m += x;
                m /= static_cast<double>(groups);
                double s = 0.0;
                for (double x : v)
                    s += (x - m) * (x - m);
                return std::sqrt(static_cast<double>(groups - 1) / static_cast<double>(groups) * s);
            };
            row.l1_err = jk(jl);
            row.chi_err = jk(jc);
            row.md_energy = en.mean;
            row.md_energy_err = en.estimate().std_error;
            row.ref_energy = ref_energy[g];
            row.collisions = static_cast<std::size_t>(std::llround(co.mean));
            report.rows.push_back(row);
            l1_by_g[g].push_back(row.l1);
            l1_err_by_g[g].push_back(row.l1_err);
            chi_by_g[g].push_back(row.chi);
            chi_err_by_g[g].push_back(row.chi_err);
        }
    }
    if (plan.epsilons.size() >= 2)
        for (std::size_t g = 0; g < ng; ++g) {
            report.l1_trend.push_back(decreasing_trend(l1_by_g[g], l1_err_by_g[g], 0.95));
            report.chi_trend.push_back(decreasing_trend(chi_by_g[g], chi_err_by_g[g], 0.95));
        }
    return report;
}

void write_bg_csv(std::ostream& os, const BgReport& report)
{
    os << "epsilon,t,L1,L1_err,chi,chi_err,N,replicas\n";
    for (const auto& r : report.rows) {
        char t[40];
        std::snprintf(t, sizeof t, "%.10g", r.t);
        os << num(r.epsilon) << ',' << t << ',' << num(r.l1) << ',' << num(r.l1_err) << ','
           << num(r.chi) << ',' << num(r.chi_err) << ',' << r.n << ',' << r.replicas << '\n';
    }
}

// --- factorization ---

std::vector<FactorizationRow> factorization_test(const std::function<Particle(Rng&)>& draw,
                                                 const StateFunction& b,
                                                 const FactorizationSpec& spec)
{
    if (!draw || !b.eval || b.arity == 0)
        throw ValidationError("factorization_test: need a sampler and an observable");
    if (spec.samples == 0)
        throw ValidationError("factorization_test: samples must be positive");
    std::vector<FactorizationRow> out;
    for (std::size_t ei = 0; ei < spec.epsilons.size(); ++ei) {
        const double eps = spec.epsilons[ei];
        if (!(eps > 0.0))
            throw ValidationError("factorization_test: epsilons must be positive");
        const std::size_t s = b.arity;
        auto est = mc_mean(spec.samples, spec.seed, ei, spec.execution, [&](Rng& rng) {
            PhaseState st;
            st.epsilon = eps;
            st.particles.resize(s);
            for (int attempt = 0;; ++attempt) {
                if (attempt == 10'000)
                    throw ValidationError("factorization_test: cannot draw an allowed configuration");
                for (auto& pt : st.particles)
                    pt = draw(rng);
                if (allowed_indicator(std::span<const Particle>(st.particles), eps))
                    break;
            }
            const PhaseState inter = hard_sphere_flow(st, spec.t, spec.flow);
            const PhaseState free = free_flow(st, spec.t);
            return b(inter.particles) - b(free.particles);
        });
        out.push_back({eps, est});
    }
    return out;
}

} // namespace hsk
