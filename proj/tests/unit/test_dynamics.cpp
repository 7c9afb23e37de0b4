#include <catch_amalgamated.hpp>

#include <cmath>

#include "hsk/dynamics.hpp"
#include "hsk/errors.hpp"
#include "hsk/rng.hpp"

using namespace hsk;
using Catch::Matchers::WithinAbs;

namespace {

// Brute-force two-body solution in the relative frame: the contact time is
// located by bisection on |r + s u| - eps and the relative momentum is
// reflected about the contact normal.
std::pair<Particle, Particle> two_body_oracle(Particle a, Particle b, double eps, double t)
{
    const Vec3 cm_q = (a.q + b.q) * 0.5;
    const Vec3 cm_p = (a.p + b.p) * 0.5;
    Vec3 r = a.q - b.q;
    Vec3 u = a.p - b.p;
    auto gap = [&](double s) { return norm(r + u * s) - eps; };
    // closest approach time
    const double s_min = norm2(u) > 0 ? std::clamp(-dot(r, u) / norm2(u), 0.0, t) : 0.0;
    Vec3 r_t;
    if (dot(r, u) < 0 && gap(s_min) < 0) {
        double lo = 0.0, hi = s_min;
        for (int k = 0; k < 200; ++k) {
            const double mid = 0.5 * (lo + hi);
            (gap(mid) > 0 ? lo : hi) = mid;
        }
        const double tc = 0.5 * (lo + hi);
        const Vec3 rc = r + u * tc;
        const Vec3 n = rc * (1.0 / norm(rc));
        const Vec3 u2 = u - n * (2.0 * dot(n, u));
        r_t = rc + u2 * (t - tc);
        u = u2;
    } else {
        r_t = r + u * t;
    }
    const Vec3 cq = cm_q + cm_p * t;
    return {Particle{cq + r_t * 0.5, cm_p + u * 0.5}, Particle{cq - r_t * 0.5, cm_p - u * 0.5}};
}

PhaseState random_gas(std::size_t n, double eps, double side, std::uint64_t seed)
{
    auto rng = make_rng(seed);
    PhaseState s;
    s.epsilon = eps;
    s.boundary = Boundary::periodic_box(side);
    while (s.particles.size() < n) {
        Particle pt{{uniform(rng, 0, side), uniform(rng, 0, side), uniform(rng, 0, side)},
                    normal_vec(rng)};
        s.particles.push_back(pt);
        if (!allowed_indicator(s.particles, eps, s.boundary))
            s.particles.pop_back();
    }
    return s;
}

double max_phase_diff(const PhaseState& a, const PhaseState& b)
{
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const Vec3 dq = a.boundary.separation(a.particles[i].q, b.particles[i].q);
        d = std::max({d, norm(dq), norm(a.particles[i].p - b.particles[i].p)});
    }
    return d;
}

} // namespace

TEST_CASE("collide examples")
{
    auto [a, b] = collide({1, 0, 0}, {-1, 0, 0}, {1, 0, 0});
    CHECK(a == Vec3{-1, 0, 0});
    CHECK(b == Vec3{1, 0, 0});

    auto [c, d] = collide({1, 0, 0}, {0, 0, 0}, {0, 1, 0});
    CHECK(c == Vec3{1, 0, 0});
    CHECK(d == Vec3{0, 0, 0});

    const double h = 1.0 / std::sqrt(2.0);
    auto [e, f] = collide({2, 0, 0}, {0, 0, 0}, {h, h, 0});
    CHECK_THAT(e.x, WithinAbs(1.0, 1e-14));
    CHECK_THAT(e.y, WithinAbs(-1.0, 1e-14));
    CHECK_THAT(f.x, WithinAbs(1.0, 1e-14));
    CHECK_THAT(f.y, WithinAbs(1.0, 1e-14));
    CHECK_THAT(norm2(e) + norm2(f), WithinAbs(4.0, 1e-14));
}

TEST_CASE("collide rejects bad input")
{
    CHECK_THROWS_AS(collide({1, 0, 0}, {0, 0, 0}, {2, 0, 0}), ValidationError);
    CHECK_THROWS_AS(collide({1, 0, 0}, {0, 0, 0}, {-1, 0, 0}), ValidationError);
}

TEST_CASE("collide properties on random input")
{
    auto rng = make_rng(11);
    for (int k = 0; k < 20000; ++k) {
        const Vec3 p1 = normal_vec(rng), p2 = normal_vec(rng);
        Vec3 eta = unit_vector(rng);
        if (dot(eta, p1 - p2) < 0)
            eta = -eta;
        auto [a, b] = collide(p1, p2, eta);
        const double e0 = norm2(p1) + norm2(p2);
        CHECK(norm((a + b) - (p1 + p2)) <= 1e-12 * std::sqrt(e0));
        CHECK(std::abs(norm2(a) + norm2(b) - e0) <= 1e-12 * e0);
        CHECK(dot(eta, a - b) == Catch::Approx(-dot(eta, p1 - p2)).margin(1e-12));
        auto [c, d] = collide(a, b, -eta);
        CHECK(norm(c - p1) <= 1e-12 * (1 + norm(p1)));
        CHECK(norm(d - p2) <= 1e-12 * (1 + norm(p2)));
    }
}

TEST_CASE("allowed indicator")
{
    const double eps = 0.3;
    std::vector<Vec3> two{{0, 0, 0}, {2 * eps, 0, 0}};
    CHECK(allowed_indicator(two, eps) == 1);
    two[1] = {eps / 2, 0, 0};
    CHECK(allowed_indicator(two, eps) == 0);
    std::vector<Vec3> three{{0, 0, 0}, {5, 0, 0}, {5, 0.99 * eps, 0}};
    CHECK(allowed_indicator(three, eps) == 0);
    // minimum image across a periodic face
    std::vector<Vec3> wrap{{0.05, 0, 0}, {1.95, 0, 0}};
    CHECK(allowed_indicator(wrap, eps, Boundary::periodic_box(2.0)) == 0);
    CHECK(allowed_indicator(wrap, eps) == 1);
}

TEST_CASE("next_collision examples")
{
    PhaseState s;
    s.epsilon = 0.1;
    s.particles = {{{0, 0, 0}, {1, 0, 0}}, {{1, 0, 0}, {-1, 0, 0}}};
    auto ev = next_collision(s);
    REQUIRE(ev);
    CHECK_THAT(ev->time, WithinAbs(0.45, 1e-14));
    CHECK(ev->i == 0);
    CHECK(ev->j == 1);
    CHECK_THAT(ev->eta.x, WithinAbs(-1.0, 1e-14));

    PhaseState one;
    one.epsilon = 0.1;
    one.particles = {{{0, 0, 0}, {1, 0, 0}}};
    CHECK_FALSE(next_collision(one));

    s.particles = {{{0, 0, 0}, {-1, 0, 0}}, {{1, 0, 0}, {1, 0, 0}}};
    CHECK_FALSE(next_collision(s));
}

TEST_CASE("next_collision sees periodic images")
{
    PhaseState s;
    s.epsilon = 0.1;
    s.boundary = Boundary::periodic_box(2.0);
    // receding in the minimum image, approaching through the face
    s.particles = {{{0.2, 1, 1}, {-1, 0, 0}}, {{1.8, 1, 1}, {1, 0, 0}}};
    auto ev = next_collision(s);
    REQUIRE(ev);
    CHECK_THAT(ev->time, WithinAbs((0.4 - 0.1) / 2, 1e-12));
}

TEST_CASE("hard_sphere_flow head-on and free flight")
{
    PhaseState one;
    one.epsilon = 0.1;
    one.particles = {{{0, 0, 0}, {1, 2, 3}}};
    auto r = hard_sphere_flow(one, 2.0);
    CHECK(r.particles[0].q == Vec3{2, 4, 6});
    CHECK(r.particles[0].p == Vec3{1, 2, 3});

    PhaseState s;
    s.epsilon = 0.1;
    s.particles = {{{0, 0, 0}, {1, 0, 0}}, {{1, 0, 0}, {-1, 0, 0}}};
    auto out = hard_sphere_flow(s, 1.0);
    CHECK_THAT(out.particles[0].q.x, WithinAbs(-0.1, 1e-13));
    CHECK_THAT(out.particles[1].q.x, WithinAbs(1.1, 1e-13));
    CHECK(out.particles[0].p == Vec3{-1, 0, 0});
    CHECK(out.particles[1].p == Vec3{1, 0, 0});
}

TEST_CASE("two-body flow matches the relative-frame oracle")
{
    auto rng = make_rng(5);
    int hits = 0;
    for (int k = 0; k < 2000; ++k) {
        const double eps = 0.2;
        PhaseState s;
        s.epsilon = eps;
        Particle a{{0, 0, 0}, normal_vec(rng)};
        Particle b{{uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1)}, {}};
        // mostly aimed at particle a so that a good share of pairs collide
        b.p = a.p - b.q * uniform(rng, 0.5, 2.0) + normal_vec(rng, 0.3);
        if (norm(a.q - b.q) < eps)
            continue;
        s.particles = {a, b};
        const double t = uniform(rng, -2, 2);
        FlowStats st;
        auto got = hard_sphere_flow(s, t, {}, &st);
        hits += static_cast<int>(st.collisions);
        // oracle in forward time on the reversed state for negative t
        auto flip = [](Particle p) { p.p = -p.p; return p; };
        auto [oa, ob] = t >= 0 ? two_body_oracle(a, b, eps, t)
                               : two_body_oracle(flip(a), flip(b), eps, -t);
        if (t < 0) {
            oa = flip(oa);
            ob = flip(ob);
        }
        CHECK(norm(got.particles[0].q - oa.q) < 1e-9);
        CHECK(norm(got.particles[1].q - ob.q) < 1e-9);
        CHECK(norm(got.particles[0].p - oa.p) < 1e-9);
        CHECK(norm(got.particles[1].p - ob.p) < 1e-9);
    }
    CHECK(hits > 200);
}

TEST_CASE("conservation, no overlap and reversibility in a periodic box")
{
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        auto s = random_gas(10, 0.7, 2.0, seed);
        FlowStats st;
        auto fwd = hard_sphere_flow(s, 2.5, {}, &st);
        CHECK(st.collisions >= 50);
        CHECK(st.min_contact_ratio >= 1.0 - 1e-9);
        CHECK(allowed_indicator(fwd.particles, fwd.epsilon, fwd.boundary) == 1);
        const double e0 = total_energy(s.particles);
        CHECK(std::abs(total_energy(fwd.particles) - e0) <= 1e-9 * e0);
        CHECK(norm(total_momentum(fwd.particles) - total_momentum(s.particles)) <=
              1e-10 * std::sqrt(2 * e0));
        auto back = hard_sphere_flow(fwd, -2.5);
        CHECK(max_phase_diff(back, s) <= 1e-6);
    }
}

TEST_CASE("group property")
{
    auto s = random_gas(8, 0.3, 2.0, 42);
    auto whole = hard_sphere_flow(s, 1.0);
    auto split = hard_sphere_flow(hard_sphere_flow(s, 0.35), 0.65);
    CHECK(max_phase_diff(whole, split) <= 1e-8);
}

TEST_CASE("priority queue scheduler agrees with full rescans")
{
    auto s = random_gas(80, 0.2, 3.0, 9);
    FlowOptions queue;
    FlowOptions full;
    full.queue_threshold = 1000;
    FlowStats sq, sf;
    auto a = hard_sphere_flow(s, 1.0, queue, &sq);
    auto b = hard_sphere_flow(s, 1.0, full, &sf);
    CHECK(sq.collisions == sf.collisions);
    CHECK(sq.collisions > 20);
    CHECK(max_phase_diff(a, b) <= 1e-8);
}

TEST_CASE("flow errors")
{
    auto s = random_gas(10, 0.5, 2.0, 1);
    FlowOptions tight;
    tight.max_events = 3;
    CHECK_THROWS_AS(hard_sphere_flow(s, 3.0, tight), NumericalError);

    PhaseState bad;
    bad.epsilon = 0.5;
    bad.particles = {{{0, 0, 0}, {0, 0, 0}}, {{0.1, 0, 0}, {0, 0, 0}}};
    CHECK_THROWS_AS(hard_sphere_flow(bad, 1.0), ValidationError);
    bad.epsilon = -1;
    CHECK_THROWS_AS(validate_state(bad), ValidationError);
}

TEST_CASE("grazing contact is a no-op")
{
    PhaseState s;
    s.epsilon = 1.0;
    // tangent trajectories: relative path touches the sphere at one point
    s.particles = {{{-2, 1, 0}, {1, 0, 0}}, {{0, 0, 0}, {0, 0, 0}}};
    FlowStats st;
    auto out = hard_sphere_flow(s, 4.0, {}, &st);
    CHECK(out.particles[0].p == Vec3{1, 0, 0});
    CHECK(out.particles[1].p == Vec3{0, 0, 0});
}
