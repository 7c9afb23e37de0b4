#include "hsk/hierarchy.hpp"

#include <bit>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "hsk/errors.hpp"

namespace hsk {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

double factorial(std::size_t n)
{
    double f = 1.0;
    for (std::size_t k = 2; k <= n; ++k)
        f *= static_cast<double>(k);
    return f;
}

std::vector<std::size_t> iota_indices(std::size_t begin, std::size_t end)
{
    std::vector<std::size_t> v(end - begin);
    std::iota(v.begin(), v.end(), begin);
    return v;
}

double eval1(const StateFunction& f, const Vec3& q, const Vec3& p)
{
    const Particle pt{q, p};
    return f(std::span<const Particle>(&pt, 1));
}

} // namespace

double MarginalSequence::operator()(std::span<const Particle> x) const
{
    if (x.empty() || x.size() > F.size())
        return 0.0;
    return F[x.size() - 1](x);
}

MarginalSequence ProductState::marginals() const
{
    if (f1.arity != 1)
        throw ValidationError("product state: f1 must have arity 1");
    MarginalSequence seq;
    seq.epsilon = epsilon;
    seq.boundary = boundary;
    for (std::size_t s = 1; s <= support; ++s) {
        auto prod = product_state(f1, s);
        const double eps = epsilon;
        const Boundary bnd = boundary;
        seq.F.push_back({[prod, eps, bnd](std::span<const Particle> x) {
                             if (!allowed_indicator(x, eps, bnd))
                                 return 0.0;
                             return prod(x);
                         },
                         s});
    }
    return seq;
}

void MarginalSeriesSpec::validate() const
{
    if (s < 1)
        throw ValidationError("marginal series: s must be at least 1");
    if (max_n > 3)
        throw ValidationError("marginal series: max_n must be at most 3");
    if (mc_samples < 1000)
        throw ValidationError("marginal series: mc_samples must be at least 1000");
    domain.validate();
}

Estimate bbgky_marginal(const MarginalSeriesSpec& spec, double t, const MarginalSequence& init,
                        std::span<const Particle> x)
{
    spec.validate();
    if (x.size() != spec.s)
        throw ValidationError("bbgky_marginal: phase point has " + std::to_string(x.size()) +
                              " particles, expected s = " + std::to_string(spec.s));
    if (!allowed_indicator(x, init.epsilon, init.boundary))
        throw ValidationError("bbgky_marginal: phase point is a forbidden configuration");

    const DynamicsContext ctx{init.epsilon, init.boundary, spec.flow};
    const std::size_t s = spec.s;
    const ClusterIndexSet Y{iota_indices(0, s), {}};

    Estimate total;
    if (s <= init.support()) {
        auto a1 = detail::cumulant_on(t, Y, init.F[s - 1], FlowSign::adjoint, ctx);
        total.value = a1(x);
    }
    for (std::size_t n = 1; n <= spec.max_n && s + n <= init.support(); ++n) {
        auto op = detail::cumulant_on(t, ClusterIndexSet{Y.cluster, iota_indices(s, s + n)},
                                      init.F[s + n - 1], FlowSign::adjoint, ctx);
        const double inv_fact = 1.0 / factorial(n);
        const std::vector<Particle> base(x.begin(), x.end());
        auto term = mc_mean(spec.mc_samples, spec.seed, n, spec.execution, [&](Rng& rng) {
            std::vector<Particle> point(base);
            double g = 1.0;
            for (std::size_t k = 0; k < n; ++k) {
                point.push_back(spec.domain.draw(rng));
                g *= spec.domain.density(point.back());
            }
            return inv_fact * op(point) / g;
        });
        total = total + term;
    }
    return total;
}

void ObservableSpec::validate() const
{
    if (k < 1)
        throw ValidationError("observable: k must be at least 1");
    if (kind == ObservableKind::additive && k != 1)
        throw ValidationError("observable: additive observables have k = 1");
    if (b.arity != k)
        throw ValidationError("observable: b has arity " + std::to_string(b.arity) +
                              ", expected k = " + std::to_string(k));
}

namespace {

/// B_s(t) as a lazily evaluated function of s particles.
StateFunction dual_operator(const ObservableSpec& obs, std::size_t s, double t,
                            const DynamicsContext& ctx)
{
    obs.validate();
    if (s < obs.k)
        throw ValidationError("dual observable: s must be at least k");
    if (obs.kind == ObservableKind::additive) {
        const StateFunction b = obs.b;
        StateFunction sum{[b](std::span<const Particle> x) {
                              double v = 0.0;
                              for (const auto& pt : x)
                                  v += b(std::span<const Particle>(&pt, 1));
                              return v;
                          },
                          s};
        return detail::cumulant_on(t, ClusterIndexSet{{}, iota_indices(0, s)}, sum,
                                   FlowSign::forward, ctx);
    }
    // Subsets Z of size s - k; the remaining k coordinates form the cluster.
    std::vector<StateFunction> terms;
    const std::size_t k = obs.k;
    for (unsigned mask = 0; mask < (1u << s); ++mask) {
        if (static_cast<std::size_t>(std::popcount(mask)) != s - k)
            continue;
        std::vector<std::size_t> cluster, singles;
        for (std::size_t i = 0; i < s; ++i)
            ((mask >> i) & 1u ? singles : cluster).push_back(i);
        const StateFunction b = obs.b;
        StateFunction lifted{[b, cluster](std::span<const Particle> x) {
                                 std::vector<Particle> sub;
                                 sub.reserve(cluster.size());
                                 for (auto c : cluster)
                                     sub.push_back(x[c]);
                                 return b(sub);
                             },
                             s};
        terms.push_back(detail::cumulant_on(t, ClusterIndexSet{cluster, singles}, lifted,
                                            FlowSign::forward, ctx));
    }
    return {[terms](std::span<const Particle> x) {
                double v = 0.0;
                for (const auto& term : terms)
                    v += term(x);
                return v;
            },
            s};
}

std::vector<Particle> draw_point(const SampleDomain& domain, std::size_t d, Rng& rng, double& g)
{
    std::vector<Particle> point;
    point.reserve(d);
    g = 1.0;
    for (std::size_t k = 0; k < d; ++k) {
        point.push_back(domain.draw(rng));
        g *= domain.density(point.back());
    }
    return point;
}

} // namespace

double dual_marginal_observable(const ObservableSpec& obs, std::size_t s, double t,
                                std::span<const Particle> x, const DynamicsContext& ctx)
{
    if (x.size() != s)
        throw ValidationError("dual observable: phase point has " + std::to_string(x.size()) +
                              " particles, expected " + std::to_string(s));
    return dual_operator(obs, s, t, ctx)(x);
}

Estimate mean_value(const ObservableSpec& obs, double t, const MarginalSequence& state,
                    const PairingSpec& spec)
{
    obs.validate();
    spec.domain.validate();
    if (spec.mc_samples < 2)
        throw ValidationError("mean_value: need at least two samples");
    const DynamicsContext ctx{state.epsilon, state.boundary, spec.flow};
    Estimate total;
    for (std::size_t d = obs.k; d <= state.support(); ++d) {
        auto B = dual_operator(obs, d, t, ctx);
        const StateFunction& F = state.F[d - 1];
        const double inv_fact = 1.0 / factorial(d);
        auto term = mc_mean(spec.mc_samples, spec.seed, d, spec.execution, [&](Rng& rng) {
            double g = 0.0;
            auto x = draw_point(spec.domain, d, rng, g);
            const double f = F(x);
            return f == 0.0 ? 0.0 : inv_fact * B(x) * f / g;
        });
        if (!std::isfinite(term.value))
            throw NumericalError("mean_value: non-normalizable state (non-finite estimate)");
        total = total + term;
    }
    return total;
}

DualityReport duality_residual(const ObservableSpec& obs, const MarginalSequence& init, double t,
                               const PairingSpec& spec)
{
    obs.validate();
    spec.domain.validate();
    const DynamicsContext ctx{init.epsilon, init.boundary, spec.flow};
    const std::size_t k = obs.k;
    DualityReport report;
    double diff_mean = 0.0, diff_var = 0.0;
    for (std::size_t d = k; d <= init.support(); ++d) {
        auto B = dual_operator(obs, d, t, ctx);
        auto Ft = detail::cumulant_on(t, ClusterIndexSet{iota_indices(0, k), iota_indices(k, d)},
                                      init.F[d - 1], FlowSign::adjoint, ctx);
        const StateFunction& F0 = init.F[d - 1];
        const StateFunction& b = obs.b;
        const double lhs_w = 1.0 / factorial(d);
        const double rhs_w = 1.0 / (factorial(k) * factorial(d - k));
        auto acc = mc_accumulate<3>(spec.mc_samples, spec.seed, d, spec.execution, [&](Rng& rng) {
            double g = 0.0;
            auto x = draw_point(spec.domain, d, rng, g);
            const double f = F0(x);
            const double lhs = f == 0.0 ? 0.0 : lhs_w * B(x) * f / g;
            const double bk = b(std::span<const Particle>(x).first(k));
            const double rhs = bk == 0.0 ? 0.0 : rhs_w * bk * Ft(x) / g;
            return std::array<double, 3>{lhs, rhs, lhs - rhs};
        });
        report.observable_picture = report.observable_picture + acc[0].estimate();
        report.state_picture = report.state_picture + acc[1].estimate();
        const auto diff = acc[2].estimate();
        diff_mean += diff.value;
        diff_var += diff.std_error * diff.std_error;
    }
    report.residual = std::abs(diff_mean);
    report.sigma = std::sqrt(diff_var);
    return report;
}

Estimate limit_additive_observable_functional(const StateFunction& b1, std::size_t s, double t,
                                              const StateFunction& f1,
                                              const LimitQuadratureSpec& spec)
{
    if (s < 1 || s > 2)
        throw ValidationError("limit functional: s must be 1 or 2");
    if (b1.arity != 1 || f1.arity != 1)
        throw ValidationError("limit functional: b1 and f1 must have arity 1");
    spec.domain.validate();
    const SampleDomain& dom = spec.domain;
    if (s == 1) {
        return mc_mean(spec.mc_samples, spec.seed, 1, spec.execution, [&](Rng& rng) {
            const Particle x = dom.draw(rng);
            const double f = eval1(f1, x.q, x.p);
            return f == 0.0 ? 0.0 : eval1(b1, x.q + x.p * t, x.p) * f / dom.density(x);
        });
    }
    if (t == 0.0)
        return {0.0, 0.0, 0};
    const double volume = dom.volume();
    return mc_mean(spec.mc_samples, spec.seed, 2, spec.execution, [&](Rng& rng) {
        const double t1 = t * uniform01(rng);
        const double tau = t - t1;
        const Vec3 Q = dom.draw(rng).q;
        const Vec3 p1 = dom.momentum_mean + normal_vec(rng, dom.momentum_sigma);
        const Vec3 p2 = dom.momentum_mean + normal_vec(rng, dom.momentum_sigma);
        const Vec3 eta = hemisphere_vector(rng, p1 - p2);
        const double ff = eval1(f1, Q - p1 * tau, p1) * eval1(f1, Q - p2 * tau, p2);
        if (ff == 0.0)
            return 0.0;
        const double normal = dot(eta, p1 - p2);
        auto [a, b] = collide(p1, p2, eta);
        auto H = [&](const Vec3& pa, const Vec3& pb) {
            return eval1(b1, Q + pa * t1, pa) + eval1(b1, Q + pb * t1, pb);
        };
        const double w = t * volume * two_pi /
                         (dom.momentum_density(p1) * dom.momentum_density(p2));
        return w * ff * normal * (H(a, b) - H(p1, p2));
    });
}

Estimate limit_additive_mean(const StateFunction& b1, double t, const StateFunction& f1,
                             const LimitQuadratureSpec& spec)
{
    auto i1 = limit_additive_observable_functional(b1, 1, t, f1, spec);
    auto i2 = limit_additive_observable_functional(b1, 2, t, f1, spec);
    i2.value *= 0.5;
    i2.std_error *= 0.5;
    return i1 + i2;
}

BoltzmannLimitSeries::BoltzmannLimitSeries(StateFunction f0, double t, std::size_t max_n,
                                           LimitQuadratureSpec spec)
    : f0_(std::move(f0)), t_(t), max_n_(max_n), spec_(std::move(spec))
{
    if (f0_.arity != 1)
        throw ValidationError("limit series: f1_0 must have arity 1");
    if (max_n_ > 2)
        throw ValidationError("limit series: max_n must be at most 2");
    if (!(t_ >= 0.0))
        throw ValidationError("limit series: t must be nonnegative");
    spec_.domain.validate();
}

Estimate BoltzmannLimitSeries::term(std::size_t n, const Particle& x) const
{
    if (n > max_n_)
        throw ValidationError("limit series: term order above max_n");
    const double t = t_;
    const auto& f = f0_;
    const SampleDomain& dom = spec_.domain;
    if (n == 0)
        return {eval1(f, x.q - x.p * t, x.p), 0.0, 1};
    if (t == 0.0)
        return {0.0, 0.0, 0};
    auto draw_p = [&](Rng& rng) { return dom.momentum_mean + normal_vec(rng, dom.momentum_sigma); };

    if (n == 1) {
        return mc_mean(spec_.mc_samples, spec_.seed, 1, spec_.execution, [&](Rng& rng) {
            const double t1 = uniform(rng, 0.0, t);
            const Vec3 q1 = x.q - x.p * (t - t1);
            const Vec3 p1 = x.p;
            const Vec3 p2 = draw_p(rng);
            const Vec3 eta = hemisphere_vector(rng, p1 - p2);
            auto [a, b] = collide(p1, p2, eta);
            const double gain = eval1(f, q1 - a * t1, a) * eval1(f, q1 - b * t1, b);
            const double loss = eval1(f, q1 - p1 * t1, p1) * eval1(f, q1 - p2 * t1, p2);
            return t * two_pi / dom.momentum_density(p2) * dot(eta, p1 - p2) * (gain - loss);
        });
    }

    // n == 2: nested insertions L(1,2) then L(1,3) + L(2,3).
    return mc_mean(spec_.mc_samples, spec_.seed, 2, spec_.execution, [&](Rng& rng) {
        double t1 = uniform(rng, 0.0, t), t2 = uniform(rng, 0.0, t);
        if (t2 > t1)
            std::swap(t1, t2);
        const Vec3 q1 = x.q - x.p * (t - t1);
        const Vec3 p1 = x.p;
        const Vec3 p2 = draw_p(rng);
        const Vec3 eta_out = hemisphere_vector(rng, p1 - p2);
        const Vec3 p3 = draw_p(rng);
        const Vec3 raw = unit_vector(rng);
        const double gp3 = dom.momentum_density(p3);

        // inner operator at time t2 on the pair (z1, z2) after backward flight by t1 - t2
        auto inner = [&](Particle z1, Particle z2) {
            z1.q = z1.q - z1.p * (t1 - t2);
            z2.q = z2.q - z2.p * (t1 - t2);
            auto g3 = [&](const Particle& a, const Particle& b, const Particle& c) {
                return eval1(f, a.q - a.p * t2, a.p) * eval1(f, b.q - b.p * t2, b.p) *
                       eval1(f, c.q - c.p * t2, c.p);
            };
            double h = 0.0;
            for (int k = 0; k < 2; ++k) {
                const Particle& zk = k == 0 ? z1 : z2;
                const Vec3 axis = zk.p - p3;
                const Vec3 eta = dot(raw, axis) < 0.0 ? -raw : raw;
                const double normal = dot(eta, axis);
                auto [a, b] = collide(zk.p, p3, eta);
                const Particle third{zk.q, p3};
                const Particle third_star{zk.q, b};
                const Particle zk_star{zk.q, a};
                const double gain = k == 0 ? g3(zk_star, z2, third_star) : g3(z1, zk_star, third_star);
                const double loss = g3(z1, z2, third);
                h += two_pi / gp3 * normal * (gain - loss);
            }
            return h;
        };
        auto [a, b] = collide(p1, p2, eta_out);
        const double gain = inner({q1, a}, {q1, b});
        const double loss = inner({q1, p1}, {q1, p2});
        return 0.5 * t * t * two_pi / dom.momentum_density(p2) * dot(eta_out, p1 - p2) *
               (gain - loss);
    });
}

Estimate BoltzmannLimitSeries::value(const Particle& x) const
{
    Estimate total;
    for (std::size_t n = 0; n <= max_n_; ++n)
        total = total + term(n, x);
    return total;
}

BoltzmannLimitSeries boltzmann_limit_series_f1(const StateFunction& f1_0, double t,
                                               std::size_t max_n,
                                               const LimitQuadratureSpec& spec)
{
    return BoltzmannLimitSeries(f1_0, t, max_n, spec);
}

std::vector<Estimate> limit_series_moments(const StateFunction& f0, const StateFunction& phi,
                                           double t, std::size_t max_n,
                                           const LimitQuadratureSpec& spec)
{
    if (max_n > 2)
        throw ValidationError("limit moments: max_n must be at most 2");
    if (f0.arity != 1 || phi.arity != 1)
        throw ValidationError("limit moments: f0 and phi must have arity 1");
    spec.domain.validate();
    const SampleDomain& dom = spec.domain;
    const Vec3 origin{};
    auto fp = [&](const Vec3& p) { return eval1(f0, origin, p); };
    auto ph = [&](const Vec3& p) { return eval1(phi, origin, p); };
    auto draw_p = [&](Rng& rng) { return dom.momentum_mean + normal_vec(rng, dom.momentum_sigma); };
    // Psi(a, b) = int_{S+} d eta <eta, a - b> [phi(a*) - phi(a)], one-sample estimate
    auto psi = [&](const Vec3& a, const Vec3& b, const Vec3& raw) {
        const Vec3 axis = a - b;
        const Vec3 eta = dot(raw, axis) < 0.0 ? -raw : raw;
        auto [as, bs] = collide(a, b, eta);
        return two_pi * dot(eta, axis) * (ph(as) - ph(a));
    };

    std::vector<Estimate> out;
    out.push_back(mc_mean(spec.mc_samples, spec.seed, 0, spec.execution, [&](Rng& rng) {
        const Vec3 p = draw_p(rng);
        return ph(p) * fp(p) / dom.momentum_density(p);
    }));
    if (max_n >= 1)
        out.push_back(mc_mean(spec.mc_samples, spec.seed, 1, spec.execution, [&](Rng& rng) {
            const Vec3 p1 = draw_p(rng), p2 = draw_p(rng);
            const Vec3 raw = unit_vector(rng);
            const double w = fp(p1) * fp(p2) / (dom.momentum_density(p1) * dom.momentum_density(p2));
            return t * w * psi(p1, p2, raw);
        }));
    if (max_n >= 2)
        out.push_back(mc_mean(spec.mc_samples, spec.seed, 2, spec.execution, [&](Rng& rng) {
            const Vec3 p1 = draw_p(rng), p2 = draw_p(rng), p3 = draw_p(rng);
            const Vec3 raw_in = unit_vector(rng);
            const Vec3 raw_out = unit_vector(rng);
            const double w = fp(p1) * fp(p2) * fp(p3) /
                             (dom.momentum_density(p1) * dom.momentum_density(p2) *
                              dom.momentum_density(p3));
            const double base = psi(p1, p2, raw_out);
            double acc = 0.0;
            for (int k = 0; k < 2; ++k) {
                const Vec3 pk = k == 0 ? p1 : p2;
                const Vec3 axis = pk - p3;
                const Vec3 eta = dot(raw_in, axis) < 0.0 ? -raw_in : raw_in;
                auto [ks, ts] = collide(pk, p3, eta);
                (void)ts;
                const double after = k == 0 ? psi(ks, p2, raw_out) : psi(p1, ks, raw_out);
                acc += two_pi * dot(eta, axis) * (after - base);
            }
            return 0.5 * t * t * w * acc;
        }));
    return out;
}

} // namespace hsk
