#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <set>

#include "hsk/cluster.hpp"
#include "hsk/errors.hpp"
#include "hsk/rng.hpp"

using namespace hsk;

namespace {

// Deliberately asymmetric smooth test function of all coordinates.
StateFunction probe(std::size_t arity)
{
    return {[](std::span<const Particle> x) {
                double e = 0.0, mix = 0.0;
                for (std::size_t i = 0; i < x.size(); ++i) {
                    const double w = 1.0 + 0.25 * static_cast<double>(i);
                    e += w * norm2(x[i].q) / 4.0 + norm2(x[i].p) / 8.0;
                    mix += (0.3 + 0.1 * static_cast<double>(i)) * x[i].q.x * x[(i + 1) % x.size()].p.y;
                }
                return std::exp(-e) * (1.0 + mix);
            },
            arity};
}

std::vector<Particle> flow_block(std::span<const Particle> x, std::vector<std::size_t> idx,
                                 double t, double eps)
{
    PhaseState s;
    s.epsilon = eps;
    for (auto i : idx)
        s.particles.push_back(x[i]);
    auto out = hard_sphere_flow(s, t);
    std::vector<Particle> y(x.begin(), x.end());
    for (std::size_t k = 0; k < idx.size(); ++k)
        y[idx[k]] = out.particles[k];
    return y;
}

std::vector<Particle> random_point(Rng& rng, std::size_t n, double box, double eps)
{
    std::vector<Particle> x;
    while (x.size() < n) {
        x.push_back({{uniform(rng, -box, box), uniform(rng, -box, box), uniform(rng, -box, box)},
                     normal_vec(rng)});
        if (!allowed_indicator(x, eps))
            x.pop_back();
    }
    return x;
}

} // namespace

TEST_CASE("partition counts are Bell numbers")
{
    const std::size_t bell[] = {1, 1, 2, 5, 15, 52, 203, 877, 4140};
    for (std::size_t n = 0; n <= 8; ++n) {
        CHECK(bell_number(n) == bell[n]);
        if (n >= 1)
            CHECK(enumerate_partitions(n).size() == bell[n]);
    }
    CHECK_THROWS_AS(enumerate_partitions(9), ValidationError);
    CHECK(enumerate_partitions(ClusterIndexSet{{0, 1}, {2}}).size() == 2);
    CHECK(enumerate_partitions(ClusterIndexSet{{}, {0, 1, 2}}).size() == 5);
}

TEST_CASE("partitions are distinct and cover the ground set")
{
    for (std::size_t n = 1; n <= 6; ++n) {
        std::set<std::vector<std::vector<std::size_t>>> seen;
        for (auto part : enumerate_partitions(n)) {
            std::vector<std::size_t> all;
            for (auto& b : part.blocks) {
                REQUIRE_FALSE(b.empty());
                std::sort(b.begin(), b.end());
                all.insert(all.end(), b.begin(), b.end());
            }
            std::sort(all.begin(), all.end());
            for (std::size_t i = 0; i < n; ++i)
                REQUIRE(all[i] == i);
            REQUIRE(all.size() == n);
            std::sort(part.blocks.begin(), part.blocks.end());
            seen.insert(part.blocks);
        }
        CHECK(seen.size() == bell_number(n));
    }
}

TEST_CASE("first-order cumulant is the plain flow")
{
    const double eps = 0.3, t = 0.9;
    DynamicsContext ctx{eps, Boundary::unbounded(), {}};
    auto f = probe(2);
    auto a1 = cumulant_apply(0, t, ClusterIndexSet{{0, 1}, {}}, f, FlowSign::adjoint, ctx);
    auto rng = make_rng(3);
    for (int k = 0; k < 200; ++k) {
        auto x = random_point(rng, 2, 0.8, eps);
        const auto y = flow_block(x, {0, 1}, -t, eps);
        CHECK(a1(x) == Catch::Approx(f(y)).margin(1e-14));
    }
}

TEST_CASE("second-order cumulant matches its two-term expansion")
{
    const double eps = 0.3, t = 0.9;
    DynamicsContext ctx{eps, Boundary::unbounded(), {}};
    auto f = probe(3);
    auto a2 = cumulant_apply(1, t, ClusterIndexSet{{0, 1}, {2}}, f, FlowSign::adjoint, ctx);
    auto rng = make_rng(4);
    int nonzero = 0;
    for (int k = 0; k < 300; ++k) {
        auto x = random_point(rng, 3, 0.8, eps);
        const double whole = f(flow_block(x, {0, 1, 2}, -t, eps));
        auto y = flow_block(x, {0, 1}, -t, eps);
        y[2].q = y[2].q - y[2].p * t;
        const double split = f(y);
        const double got = a2(x);
        CHECK(got == Catch::Approx(whole - split).margin(1e-13));
        nonzero += std::abs(got) > 1e-6;
    }
    CHECK(nonzero > 10);
}

TEST_CASE("cumulant inversion reassembles the full group")
{
    const double eps = 0.3, t = 1.0;
    DynamicsContext ctx{eps, Boundary::unbounded(), {}};
    auto f = probe(3);
    for (auto sign : {FlowSign::forward, FlowSign::adjoint}) {
        const double st = sign == FlowSign::forward ? t : -t;
        auto a2 = cumulant_apply(1, t, ClusterIndexSet{{0, 1}, {2}}, f, sign, ctx);
        auto inner = detail::cumulant_on(t, ClusterIndexSet{{}, {2}}, f, sign, ctx);
        auto a1 = detail::cumulant_on(t, ClusterIndexSet{{0, 1}, {}}, inner, sign, ctx);
        auto rng = make_rng(17);
        for (int k = 0; k < 1000; ++k) {
            auto x = random_point(rng, 3, 0.8, eps);
            const double full = f(flow_block(x, {0, 1, 2}, st, eps));
            CHECK(std::abs(a1(x) + a2(x) - full) <= 1e-10);
        }
    }
}

TEST_CASE("higher cumulants vanish on dynamically separated clusters")
{
    const double eps = 0.2, t = 0.5;
    DynamicsContext ctx{eps, Boundary::unbounded(), {}};
    auto f = probe(4);
    auto a3 = cumulant_apply(2, t, ClusterIndexSet{{0, 1}, {2, 3}}, f, FlowSign::adjoint, ctx);
    auto a2 = cumulant_apply(1, t, ClusterIndexSet{{0, 1}, {2}},
                             StateFunction{[&](std::span<const Particle> x) {
                                               std::vector<Particle> y(x.begin(), x.end());
                                               y.push_back({{0, 0, 40}, {0, 0, 0}});
                                               return f(y);
                                           },
                                           3},
                             FlowSign::adjoint, ctx);
    auto rng = make_rng(8);
    for (int k = 0; k < 200; ++k) {
        // capped speeds and a gap larger than eps + t * (max relative speed)
        std::vector<Particle> x(4);
        for (std::size_t i = 0; i < 4; ++i) {
            x[i].p = {uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1)};
            x[i].q = {uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5),
                      uniform(rng, -0.5, 0.5) + 10.0 * static_cast<double>(i)};
        }
        CHECK(std::abs(a3(x)) <= 1e-12);
        CHECK(std::abs(a2(std::span<const Particle>(x).first(3))) <= 1e-12);
    }
}

TEST_CASE("cumulant argument checks")
{
    DynamicsContext ctx{0.1, Boundary::unbounded(), {}};
    auto f = probe(3);
    CHECK_THROWS_AS(cumulant_apply(1, 1.0, ClusterIndexSet{{0, 1}, {}}, f, FlowSign::adjoint, ctx),
                    ValidationError);
    CHECK_THROWS_AS(cumulant_apply(1, 1.0, ClusterIndexSet{{0}, {1}}, f, FlowSign::adjoint, ctx),
                    ValidationError);
    CHECK_THROWS_AS(cumulant_apply(1, 1.0, ClusterIndexSet{{0, 1}, {1}}, f, FlowSign::adjoint, ctx),
                    ValidationError);
    CHECK_THROWS_AS(generating_operator_V(2, 1.0, ClusterIndexSet{{0}, {1, 2}}, f, ctx),
                    ValidationError);
}

TEST_CASE("permutation equivariance of singles")
{
    const double eps = 0.3, t = 0.8;
    DynamicsContext ctx{eps, Boundary::unbounded(), {}};
    auto f = probe(4);
    auto a = cumulant_apply(2, t, ClusterIndexSet{{0, 1}, {2, 3}}, f, FlowSign::adjoint, ctx);
    StateFunction g{[&](std::span<const Particle> x) {
                        std::vector<Particle> y{x[0], x[1], x[3], x[2]};
                        return f(y);
                    },
                    4};
    auto b = cumulant_apply(2, t, ClusterIndexSet{{0, 1}, {3, 2}}, g, FlowSign::adjoint, ctx);
    auto rng = make_rng(21);
    for (int k = 0; k < 100; ++k) {
        auto x = random_point(rng, 4, 0.7, eps);
        std::vector<Particle> xs{x[0], x[1], x[3], x[2]};
        CHECK(a(x) == Catch::Approx(b(xs)).margin(1e-12));
    }
}

TEST_CASE("scattering cumulant of first order")
{
    DynamicsContext ctx{0.3, Boundary::unbounded(), {}};
    auto f1 = probe(1);
    auto v = scattering_cumulant(0, 1.3, ClusterIndexSet{{0}, {}}, f1, ctx);
    auto rng = make_rng(2);
    for (int k = 0; k < 50; ++k) {
        auto x = random_point(rng, 1, 1.0, 0.3);
        CHECK(v(x) == Catch::Approx(f1(x)).margin(1e-14));
    }

    auto f2 = probe(2);
    auto v0 = generating_operator_V(0, 0.0, ClusterIndexSet{{0, 1}, {}}, f2, ctx);
    std::vector<Particle> apart{{{0, 0, 0}, {1, 0, 0}}, {{1, 0, 0}, {0, 1, 0}}};
    std::vector<Particle> close{{{0, 0, 0}, {1, 0, 0}}, {{0.1, 0, 0}, {0, 1, 0}}};
    CHECK(v0(apart) == f2(apart));
    CHECK(v0(close) == 0.0);
}

TEST_CASE("second generating operator")
{
    const double eps = 0.3;
    DynamicsContext ctx{eps, Boundary::unbounded(), {}};
    auto f = probe(3);
    // t = 0: every flow is the identity and the two scattering terms coincide
    auto v0 = generating_operator_V(1, 0.0, ClusterIndexSet{{0, 1}, {2}}, f, ctx);
    auto rng = make_rng(12);
    for (int k = 0; k < 100; ++k) {
        auto x = random_point(rng, 3, 1.0, eps);
        CHECK(v0(x) == 0.0);
    }

    auto vt = generating_operator_V(1, 0.4, ClusterIndexSet{{0, 1}, {2}}, f, ctx);
    for (int k = 0; k < 100; ++k) {
        std::vector<Particle> x(3);
        for (std::size_t i = 0; i < 3; ++i) {
            x[i].p = {uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1)};
            x[i].q = {0, 0, 5.0 * static_cast<double>(i)};
        }
        CHECK(std::abs(vt(x)) <= 1e-10);
    }

    // somewhere in a dense region the operator is genuinely nonzero
    int nonzero = 0;
    for (int k = 0; k < 200; ++k) {
        auto x = random_point(rng, 3, 0.5, eps);
        nonzero += std::abs(vt(x)) > 1e-8;
    }
    CHECK(nonzero > 0);
}
