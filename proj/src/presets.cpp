#include "hsk/presets.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numbers>

namespace hsk {

namespace {
constexpr double pi = std::numbers::pi;
}

double maxwell_density(const Vec3& p, double temperature)
{
    return std::exp(-norm2(p) / (2.0 * temperature)) / std::pow(2.0 * pi * temperature, 1.5);
}

double bump(double x, double half)
{
    const double r = x / half;
    return std::abs(r) < 1.0 ? std::exp(-1.0 / (1.0 - r * r)) : 0.0;
}

StateFunction compact_chaos_f1(double half, double mass)
{
    const double z = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        [half](double x) { return bump(x, half); }, -half, half, 15, 1e-13);
    const double norm = mass / (z * z * z);
    return {[half, norm](std::span<const Particle> x) {
                const auto& q = x[0].q;
                return norm * bump(q.x, half) * bump(q.y, half) * bump(q.z, half) *
                       maxwell_density(x[0].p);
            },
            1};
}

StateFunction compact_additive_observable()
{
    return {[](std::span<const Particle> x) {
                const auto& q = x[0].q;
                return bump(q.x - 0.2, 0.8) * bump(q.y, 0.8) * bump(q.z + 0.1, 0.8) *
                       (1.0 + x[0].p.x);
            },
            1};
}

StateFunction compact_binary_observable()
{
    return {[](std::span<const Particle> x) {
                const Vec3 a = x[0].q - Vec3{0.1, 0.0, 0.0}, b = x[1].q + Vec3{0.1, 0.0, 0.0};
                return bump(a.x, 0.8) * bump(a.y, 0.8) * bump(a.z, 0.8) * bump(b.x, 0.8) *
                       bump(b.y, 0.8) * bump(b.z, 0.8) * (1.0 + 0.5 * x[1].p.y + 0.3 * x[0].p.x);
            },
            2};
}

RodPairDensity rod_gradient_state(double amplitude, double correlation, double temperature)
{
    return [=](double q1, double p1, double q2, double p2) {
        auto g = [temperature](double p) {
            return std::exp(-p * p / (2.0 * temperature)) / std::sqrt(2.0 * pi * temperature);
        };
        auto rho = [amplitude](double q) { return 1.0 + amplitude * std::sin(q); };
        return rho(q1) * rho(q2) * g(p1) * g(p2) * (1.0 + correlation * (p1 * q2 + p2 * q1));
    };
}

} // namespace hsk
