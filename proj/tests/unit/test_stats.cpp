#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "hsk/errors.hpp"
#include "hsk/rng.hpp"
#include "hsk/stats.hpp"

using namespace hsk;
using Catch::Approx;

TEST_CASE("Kolmogorov survival function at tabulated points")
{
    CHECK(kolmogorov_survival(0.0) == 1.0);
    CHECK(kolmogorov_survival(1.0) == Approx(0.26999967).epsilon(1e-6));
    CHECK(kolmogorov_survival(1.3581) == Approx(0.05).margin(1e-4));
    CHECK(kolmogorov_survival(1.6276) == Approx(0.01).margin(1e-4));
    CHECK(kolmogorov_survival(3.0) < 1e-6);
}

TEST_CASE("two-sample KS statistic by hand")
{
    // F_a jumps at 1,2,3; F_b at 2.5,3.5,4.5 -> sup difference 2/3 at x in [2, 2.5)
    auto r = ks_two_sample({1, 2, 3}, {2.5, 3.5, 4.5});
    CHECK(r.statistic == Approx(2.0 / 3.0));
    auto same = ks_two_sample({1, 2, 3}, {3, 2, 1});
    CHECK(same.statistic == 0.0);
    CHECK(same.p_value == 1.0);
    CHECK_THROWS_AS(ks_two_sample({}, {1.0}), ValidationError);
}

TEST_CASE("KS separates shifted samples and accepts equal laws")
{
    auto rng = make_rng(5);
    std::vector<double> a(4000), b(4000), c(4000);
    for (auto& v : a)
        v = normal(rng);
    for (auto& v : b)
        v = normal(rng);
    for (auto& v : c)
        v = normal(rng) + 0.2;
    CHECK(ks_two_sample(a, b).p_value > 0.01);
    CHECK(ks_two_sample(a, c).p_value < 1e-6);
}

TEST_CASE("line fits")
{
    std::vector<double> x{0, 1, 2, 3}, y{1, 3, 5, 7};
    auto f = fit_line(x, y);
    CHECK(f.slope == Approx(2.0));
    CHECK(f.intercept == Approx(1.0));
    CHECK(f.slope_se == Approx(0.0).margin(1e-12));
    std::vector<double> w{1, 1, 1, 1e-12};
    std::vector<double> y2{1, 3, 5, 100};
    CHECK(fit_line(x, y2, w).slope == Approx(2.0).epsilon(1e-6));
    CHECK_THROWS_AS(fit_line(std::vector<double>{1, 1}, std::vector<double>{0, 1}),
                    ValidationError);
}

TEST_CASE("decreasing trend test")
{
    std::vector<double> v{1.0, 0.7, 0.5, 0.3}, e{0.02, 0.02, 0.02, 0.02};
    CHECK(decreasing_trend(v, e).passed());
    std::vector<double> flat{1.0, 0.99, 0.98, 0.97}, big{0.5, 0.5, 0.5, 0.5};
    auto r = decreasing_trend(flat, big);
    CHECK(r.consecutive_decrease);
    CHECK_FALSE(r.significant);
    std::vector<double> bump{1.0, 0.7, 0.8, 0.3};
    CHECK_FALSE(decreasing_trend(bump, e).passed());
}

TEST_CASE("window monotonicity fraction")
{
    std::vector<double> s;
    for (int i = 0; i < 100; ++i)
        s.push_back(-0.01 * i);
    CHECK(nonincreasing_window_fraction(s, 10) == 1.0);
    std::vector<double> up;
    for (int i = 0; i < 100; ++i)
        up.push_back(0.01 * i);
    CHECK(nonincreasing_window_fraction(up, 10) == 0.0);
}
