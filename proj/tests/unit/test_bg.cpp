#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <sstream>

#include "hsk/bg.hpp"
#include "hsk/errors.hpp"
#include "hsk/kinetic.hpp"

using namespace hsk;
using Catch::Approx;

namespace {

constexpr double pi = std::numbers::pi;

HistogramAxes unit_axes()
{
    HistogramAxes a;
    a.thermal_width = 1.0;
    return a;
}

double min_pair_distance(const PhaseState& s)
{
    double best = 1e300;
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = i + 1; j < s.size(); ++j)
            best = std::min(best, norm(s.boundary.separation(s.particles[i].q, s.particles[j].q)));
    return best;
}

ScalingPlan small_plan()
{
    ScalingPlan plan;
    plan.epsilons = {0.2, 0.14};
    plan.box_side = 1.6;
    plan.replicas = 8;
    plan.jackknife_groups = 4;
    plan.reference_samples = 20'000;
    plan.reference_steps_per_unit = 8;
    plan.t_grid = {0.0, 0.25};
    plan.axes.momentum_bins = 12;
    plan.axes.shell_width = 0.2;
    plan.seed = 5;
    return plan;
}

} // namespace

TEST_CASE("chaos sampler: trivial cases")
{
    const auto box = Boundary::periodic_box(1.0);
    auto rng = make_rng(1);
    ChaosSampleStats st;
    const auto one = sample_chaos_state(maxwellian_law(), 1, 0.3, box, rng,
                                        ChaosSampling::whole_config, &st);
    CHECK(one.size() == 1);
    CHECK(st.rejections == 0);
    CHECK(st.draws == 1);

    sample_chaos_state(maxwellian_law(), 50, 0.0, box, rng, ChaosSampling::incremental, &st);
    CHECK(st.rejections == 0);
    CHECK(st.draws == 50);

    CHECK_THROWS_AS(sample_chaos_state(maxwellian_law(), 5, 0.6, box, rng), ValidationError);
    CHECK_THROWS_AS(sample_chaos_state(maxwellian_law(), 3, 0.1, Boundary{}, rng),
                    ValidationError);
}

TEST_CASE("chaos sampler: acceptance matches the pair-exclusion oracle")
{
    // N = 100, N eps^3 / V = 1e-3
    const double side = 1.0, eps = std::cbrt(1e-5);
    const auto box = Boundary::periodic_box(side);
    const double oracle = whole_config_acceptance_estimate(100, eps, 1.0);
    CHECK(oracle == Approx(std::exp(-4950.0 * 4.0 / 3.0 * pi * 1e-5)));
    CHECK(oracle == Approx(0.813).margin(0.01));

    ChaosSampleStats whole;
    std::size_t draws = 0, accepted = 0;
    for (int k = 0; k < 2000; ++k) {
        auto rng = make_rng(7, k);
        const auto s = sample_chaos_state(maxwellian_law(), 100, eps, box, rng,
                                          ChaosSampling::whole_config, &whole);
        draws += whole.draws;
        ++accepted;
        CHECK(min_pair_distance(s) >= eps * (1 - 1e-9));
    }
    const double rate = static_cast<double>(accepted) / static_cast<double>(draws);
    const double se = std::sqrt(oracle * (1 - oracle) / static_cast<double>(draws));
    CHECK(std::abs(rate - oracle) < 4 * se + 0.005);

    ChaosSampleStats inc;
    auto rng = make_rng(8);
    const auto s = sample_chaos_state(maxwellian_law(), 100, eps, box, rng,
                                      ChaosSampling::incremental, &inc);
    CHECK(inc.acceptance() > 0.9);
    CHECK(min_pair_distance(s) >= eps * (1 - 1e-9));
}

TEST_CASE("chaos sampler: aborts on hopeless packing")
{
    const auto box = Boundary::periodic_box(1.0);
    auto rng = make_rng(3);
    // packing fraction well above random close packing
    CHECK_THROWS_AS(sample_chaos_state(maxwellian_law(), 2000, 0.15, box, rng), ValidationError);
}

TEST_CASE("order-1 histogram at t = 0 recovers f1 and has the expected mass")
{
    const auto box = Boundary::periodic_box(2.0);
    const double eps = 0.1;
    const std::size_t n = 200;
    auto axes = unit_axes();
    std::vector<PhaseState> ens;
    for (int r = 0; r < 100; ++r) {
        auto rng = make_rng(11, r);
        ens.push_back(sample_chaos_state(maxwellian_law(), n, eps, box, rng));
    }
    const auto h1 = estimate_marginal(ens, 1, axes);
    CHECK(h1.mass() == Approx(h1.expected_mass()).epsilon(1e-6));
    CHECK(h1.expected_mass() == Approx(eps * eps * n));
    // density at the centre bin vs eps^2 N phi(p)
    const std::size_t mid = axes.momentum_bins / 2;
    const double width = 2 * axes.momentum_range / static_cast<double>(axes.momentum_bins);
    const double centre = -axes.momentum_range + (static_cast<double>(mid) + 0.5) * width;
    const double phi = std::exp(-0.5 * centre * centre) / std::sqrt(2 * pi);
    CHECK(h1.density(0, mid) == Approx(eps * eps * n * phi).epsilon(0.05));

    // reference drawn from the same law: small L1
    auto rng = make_rng(12);
    std::vector<Vec3> ref(200'000);
    for (auto& v : ref)
        v = normal_vec(rng, 1.0);
    CHECK(projection_l1(h1, ref) < 0.05);

    const auto h2 = estimate_marginal(ens, 2, axes);
    CHECK(h2.mass() == Approx(h2.expected_mass()).epsilon(1e-6));
    // chaos holds at t = 0 up to sampling noise
    CHECK(chaos_metric(h2) < 0.1);
}

TEST_CASE("collisionless order-1 marginal equals free transport")
{
    const auto box = Boundary::periodic_box(1.5);
    auto rng = make_rng(21);
    const auto s0 = sample_chaos_state(counter_streaming_law(), 60, 0.1, box, rng);
    const auto s1 = free_flow(s0, 0.7);
    auto a = make_marginal_histogram(1, 0.1, 1.5 * 1.5 * 1.5, 60, unit_axes());
    auto b = a;
    accumulate(a, s0);
    accumulate(b, s1);
    CHECK(a.counts == b.counts);
    CHECK(a.overflow == b.overflow);
}

TEST_CASE("histogram merge rejects mismatched specs")
{
    auto a = make_marginal_histogram(1, 0.1, 1.0, 10, unit_axes());
    auto other_axes = unit_axes();
    other_axes.momentum_bins = 10;
    const auto b = make_marginal_histogram(1, 0.1, 1.0, 10, other_axes);
    CHECK_THROWS_AS(a.merge(b), ValidationError);
    const auto c = make_marginal_histogram(2, 0.1, 1.0, 10, unit_axes());
    CHECK_THROWS_AS(a.merge(c), ValidationError);
    CHECK_THROWS_AS(make_marginal_histogram(3, 0.1, 1.0, 10, unit_axes()), ValidationError);
    CHECK_THROWS_AS(make_marginal_histogram(1, 0.1, 1.0, 10, HistogramAxes{}), ValidationError);
}

TEST_CASE("pair histogram: shells beyond half the box are rejected")
{
    auto axes = unit_axes();
    axes.shell_width = 0.5;
    auto h = make_marginal_histogram(2, 0.1, 1.0, 4, axes);
    auto rng = make_rng(1);
    const auto s = sample_chaos_state(maxwellian_law(), 4, 0.1, Boundary::periodic_box(1.0), rng);
    CHECK_THROWS_AS(accumulate(h, s), ValidationError);
}

TEST_CASE("chaos metric detects built-in correlations")
{
    // pairs glued at distance 2.1 eps with equal p_x: strongly non-factorized
    const double eps = 0.1, side = 2.0;
    const auto box = Boundary::periodic_box(side);
    auto h = make_marginal_histogram(2, eps, side * side * side, 200, unit_axes());
    for (int r = 0; r < 20; ++r) {
        auto rng = make_rng(31, r);
        auto s = sample_chaos_state(maxwellian_law(), 100, 2.5 * eps, box, rng);
        PhaseState g;
        g.epsilon = eps;
        g.boundary = box;
        for (const auto& pt : s.particles) {
            g.particles.push_back(pt);
            Particle twin = pt;
            twin.q = box.wrap(pt.q + Vec3{2.1 * eps, 0, 0});
            g.particles.push_back(twin);
        }
        accumulate(h, g);
    }
    auto control = make_marginal_histogram(2, eps, side * side * side, 200, unit_axes());
    for (int r = 0; r < 20; ++r) {
        auto rng = make_rng(32, r);
        accumulate(control, sample_chaos_state(maxwellian_law(), 200, eps, box, rng));
    }
    // glued pairs triple the diagonal classes of the innermost shell: 4 of 48 bins
    CHECK(chaos_metric(h) > chaos_metric(control) + 0.1);
}

TEST_CASE("mean relative speed of a Maxwellian")
{
    // |p1 - p2| for unit Maxwellians: 4 / sqrt(pi)
    CHECK(mean_relative_speed(maxwellian_law(), 400'000, 3) ==
          Approx(4 / std::sqrt(pi)).epsilon(0.005));
}

TEST_CASE("scaling plan diagnostics")
{
    ScalingPlan plan;
    CHECK(plan.diagnostics().empty());
    // V = 2.15^3 = 9.938375
    CHECK(plan.particles(0.2) == 248);
    CHECK(plan.particles(0.1) == 994);
    CHECK(plan.particles(0.05) == 3975);
    plan.epsilons = {0.1, 0.2};
    CHECK_FALSE(plan.diagnostics().empty());
    plan.epsilons = {0.2, 0.01};
    CHECK_FALSE(plan.diagnostics().empty()); // particle cap
    plan = ScalingPlan{};
    plan.t_grid = {0.0, 0.013};
    CHECK_FALSE(plan.diagnostics().empty());
    plan = ScalingPlan{};
    plan.jackknife_groups = 100;
    CHECK_THROWS_AS(plan.validate(), ValidationError);
}

TEST_CASE("bg report: structure, energy check and reproducibility")
{
    auto plan = small_plan();
    const auto law = counter_streaming_law();
    const auto rep = bg_convergence_report(plan, law);
    REQUIRE(rep.rows.size() == 4);
    CHECK(rep.mean_free_time == Approx(1 / (pi * rep.mean_relative_speed)));
    for (const auto& r : rep.rows) {
        CHECK(r.n == plan.particles(r.epsilon));
        CHECK(r.replicas == 8);
        CHECK(r.l1 >= 0);
        CHECK(r.chi >= 0);
        CHECK(r.l1_err > 0);
        // energy per particle is conserved by the flow and matches DSMC
        CHECK(std::abs(r.md_energy - r.ref_energy) <
              3 * std::hypot(r.md_energy_err, 0.01 * r.ref_energy));
    }
    CHECK(rep.rows[0].collisions == 0);
    CHECK(rep.rows[1].collisions > 0);
    REQUIRE(rep.l1_trend.size() == 2);

    std::ostringstream a, b;
    write_bg_csv(a, rep);
    plan.execution = Execution::serial;
    write_bg_csv(b, bg_convergence_report(plan, law));
    CHECK(a.str() == b.str());
    CHECK(a.str().rfind("epsilon,t,L1,L1_err,chi,chi_err,N,replicas\n", 0) == 0);
}

TEST_CASE("bg report without collisions: L1 stays at the t = 0 value")
{
    auto plan = small_plan();
    plan.collisions = false;
    const auto rep = bg_convergence_report(plan, counter_streaming_law());
    for (std::size_t i = 0; i < rep.rows.size(); i += 2)
        CHECK(rep.rows[i].l1 == rep.rows[i + 1].l1);
}

TEST_CASE("factorization functional")
{
    auto draw = [](Rng& rng) {
        return Particle{normal_vec(rng, 0.5), normal_vec(rng, 1.0)};
    };
    // s = 1: no partner, the flows coincide
    const StateFunction one{[](std::span<const Particle> x) { return x[0].p.x * x[0].p.x; }, 1};
    FactorizationSpec spec;
    spec.samples = 2000;
    spec.epsilons = {0.2};
    for (const auto& row : factorization_test(draw, one, spec))
        CHECK(row.difference.value == 0.0);

    // separated, diverging pairs never interact
    auto apart = [](Rng& rng) {
        const double side = uniform01(rng) < 0.5 ? -1.0 : 1.0;
        return Particle{{side * 5.0, 0, 0}, {side * (1.0 + uniform01(rng)), 0, 0}};
    };
    const StateFunction two{
        [](std::span<const Particle> x) { return x[0].p.x * x[1].p.x + x[0].q.y; }, 2};
    for (const auto& row : factorization_test(apart, two, spec))
        CHECK(row.difference.value == 0.0);

    // counter-streaming pairs: collisions move x energy into y, z
    auto beams = [](Rng& rng) {
        const double sign = uniform01(rng) < 0.5 ? -1.0 : 1.0;
        return Particle{normal_vec(rng, 0.5), Vec3{1.2 * sign, 0, 0} + normal_vec(rng, 0.6)};
    };
    const StateFunction xx{
        [](std::span<const Particle> x) { return x[0].p.x * x[0].p.x + x[1].p.x * x[1].p.x; }, 2};
    spec.samples = 40'000;
    spec.epsilons = {0.4, 0.2, 0.1};
    const auto rows = factorization_test(beams, xx, spec);
    REQUIRE(rows.size() == 3);
    for (const auto& r : rows)
        CHECK(r.difference.value < 0);
    CHECK(rows[0].difference.value <
          rows[2].difference.value - 3 * std::hypot(rows[0].difference.std_error,
                                                    rows[2].difference.std_error));
    CHECK_THROWS_AS(factorization_test(draw, StateFunction{}, spec), ValidationError);
}
