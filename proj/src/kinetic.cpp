#include "hsk/kinetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <exception>
#include <memory>
#include <numbers>
#include <ostream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "hsk/cluster.hpp"
#include "hsk/errors.hpp"

namespace hsk {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;
constexpr std::uint64_t homogeneous_stream = 2;
constexpr std::uint64_t slab_stream = 1;
constexpr std::uint64_t enskog_stream = 3;

std::size_t stochastic_round(double expected, Rng& rng)
{
    const double whole = std::floor(expected);
    std::size_t m = static_cast<std::size_t>(whole);
    if (uniform01(rng) < expected - whole)
        ++m;
    return m;
}

void check_relative_speed(double g, double g_max)
{
    if (g > g_max)
        throw NumericalError("majorant overflow: relative speed " + std::to_string(g) +
                             " exceeds bound g_max = " + std::to_string(g_max));
}

/// Majorant DSMC over the samples idx(0..n-1) of p; pair_density is the
/// physical density one sample contributes in the collision volume.
template <class Index>
DsmcStats collide_group(std::vector<Vec3>& p, std::size_t n, Index idx, double pair_density,
                        double dt, double g_max, Rng& rng)
{
    DsmcStats st;
    if (n < 2)
        return st;
    const double nn = static_cast<double>(n);
    const double expected = 0.5 * nn * (nn - 1.0) * pair_density * two_pi * g_max * dt;
    st.candidates = stochastic_round(expected, rng);
    for (std::size_t k = 0; k < st.candidates; ++k) {
        const std::size_t a = uniform_index(rng, n);
        std::size_t b = uniform_index(rng, n - 1);
        if (b >= a)
            ++b;
        Vec3& pa = p[idx(a)];
        Vec3& pb = p[idx(b)];
        const Vec3 u = pa - pb;
        check_relative_speed(norm(u), g_max);
        const Vec3 eta = hemisphere_vector(rng, u);
        const double d = dot(eta, u);
        if (uniform01(rng) * g_max < d) {
            auto [qa, qb] = collide(pa, pb, eta);
            pa = qa;
            pb = qb;
            ++st.collisions;
        }
    }
    return st;
}

void check_step_probability(double density, double temp, double dt)
{
    const double prob = density * std::numbers::pi * std::sqrt(6.0 * temp) * dt;
    if (!(prob < 0.5))
        throw ValidationError("dt too large: per-particle collision probability estimate " +
                              std::to_string(prob) + " >= 0.5");
}

std::string fmt(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12e", v);
    return buf;
}

void write_row(std::ostream& os, double t, std::size_t cell, double density,
               std::span<const Vec3> p, const HistogramSpec& hs)
{
    const Vec3 m = p.empty() ? Vec3{} : mean_momentum(p);
    const double temp = p.size() > 1 ? temperature(p) : 0.0;
    const double h = p.size() >= 10'000 ? h_functional(p, hs) : std::nan("");
    char tb[40];
    std::snprintf(tb, sizeof tb, "%.10g", t);
    os << tb << ',' << cell << ',' << fmt(density) << ',' << fmt(m.x) << ',' << fmt(m.y) << ','
       << fmt(m.z) << ',' << fmt(temp) << ',' << fmt(h) << '\n';
}

struct LocalField {
    double length = 1.0;
    std::size_t cells = 1;
    std::vector<double> n, temp;
    std::vector<Vec3> u;

    std::size_t cell_of(double x) const
    {
        double r = std::fmod(x, length);
        if (r < 0)
            r += length;
        auto c = static_cast<std::size_t>(r / length * static_cast<double>(cells));
        return std::min(c, cells - 1);
    }
    double operator()(const Particle& pt) const
    {
        const std::size_t c = cell_of(pt.q.x);
        const double t = temp[c];
        if (!(n[c] > 0.0) || !(t > 0.0))
            return 0.0;
        return n[c] * std::exp(-norm2(pt.p - u[c]) / (2.0 * t)) / std::pow(two_pi * t, 1.5);
    }
};

} // namespace

void VelocityEnsemble::validate(std::size_t min_samples) const
{
    if (samples.size() < min_samples)
        throw ValidationError("velocity ensemble: need at least " + std::to_string(min_samples) +
                              " samples, got " + std::to_string(samples.size()));
    if (!(weight > 0.0))
        throw ValidationError("velocity ensemble: weight must be positive");
    for (const auto& v : samples)
        if (!is_finite(v))
            throw ValidationError("velocity ensemble: non-finite momentum");
}

Vec3 mean_momentum(std::span<const Vec3> samples)
{
    Vec3 s{};
    for (const auto& v : samples)
        s = s + v;
    return s * (1.0 / static_cast<double>(samples.size()));
}

double temperature(std::span<const Vec3> samples)
{
    const Vec3 m = mean_momentum(samples);
    double s = 0.0;
    for (const auto& v : samples)
        s += norm2(v - m);
    return s / (3.0 * static_cast<double>(samples.size()));
}

double raw_moment(std::span<const Vec3> samples, int kx, int ky, int kz)
{
    double s = 0.0;
    for (const auto& v : samples)
        s += std::pow(v.x, kx) * std::pow(v.y, ky) * std::pow(v.z, kz);
    return s / static_cast<double>(samples.size());
}

double default_majorant(std::span<const Vec3> samples)
{
    if (samples.empty())
        return 1.0;
    const Vec3 m = mean_momentum(samples);
    double dev = 0.0;
    for (const auto& v : samples)
        dev = std::max(dev, norm(v - m));
    const double n = static_cast<double>(samples.size());
    const double tail = std::sqrt(temperature(samples)) * std::sqrt(2.0 * std::log(n) + 20.0);
    return 2.0 * std::max(1.25 * dev, tail);
}

DsmcStats dsmc_collision_step(VelocityEnsemble& ens, double dt, double g_max, Rng& rng)
{
    if (!(dt > 0.0))
        throw ValidationError("dsmc step: dt must be positive");
    if (!(g_max > 0.0))
        throw ValidationError("dsmc step: g_max must be positive");
    if (!(ens.weight > 0.0))
        throw ValidationError("dsmc step: weight must be positive");
    return collide_group(ens.samples, ens.samples.size(), [](std::size_t i) { return i; },
                         ens.weight, dt, g_max, rng);
}

// --- slab ---

double SlabEnsemble::wrap(double xx) const
{
    double r = std::fmod(xx, length);
    if (r < 0.0)
        r += length;
    if (r >= length)
        r = 0.0;
    return r;
}

std::size_t SlabEnsemble::cell_of(double xx) const
{
    auto c = static_cast<std::size_t>(wrap(xx) / length * static_cast<double>(cells));
    return std::min(c, cells - 1);
}

std::vector<std::vector<std::size_t>> SlabEnsemble::members() const
{
    std::vector<std::vector<std::size_t>> m(cells);
    for (std::size_t i = 0; i < x.size(); ++i)
        m[cell_of(x[i])].push_back(i);
    return m;
}

void SlabEnsemble::validate() const
{
    if (!(length > 0.0) || cells == 0)
        throw ValidationError("slab: need length > 0 and at least one cell");
    if (x.size() != p.size())
        throw ValidationError("slab: position and momentum counts differ");
    if (!(weight > 0.0))
        throw ValidationError("slab: weight must be positive");
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!std::isfinite(x[i]) || !is_finite(p[i]))
            throw ValidationError("slab: non-finite sample");
}

void transport_step(SlabEnsemble& ens, double dt)
{
    for (std::size_t i = 0; i < ens.x.size(); ++i)
        ens.x[i] = ens.wrap(ens.x[i] + ens.p[i].x * dt);
}

DsmcStats slab_dsmc_collision_step(SlabEnsemble& ens, double dt, double g_max,
                                   std::uint64_t seed, std::uint64_t step, Execution exec)
{
    if (!(dt > 0.0) || !(g_max > 0.0))
        throw ValidationError("slab dsmc step: dt and g_max must be positive");
    const auto members = ens.members();
    const double pair_density = ens.weight / ens.cell_width();
    std::vector<DsmcStats> per_cell(ens.cells);
    auto run_cell = [&](std::size_t c) {
        auto rng = make_rng(seed, c, step, slab_stream);
        const auto& idx = members[c];
        per_cell[c] = collide_group(ens.p, idx.size(), [&](std::size_t k) { return idx[k]; },
                                    pair_density, dt, g_max, rng);
    };
    if (exec == Execution::parallel) {
        const long long nc = static_cast<long long>(ens.cells);
        std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
        for (long long c = 0; c < nc; ++c) {
            try {
                run_cell(static_cast<std::size_t>(c));
            } catch (...) {
#pragma omp critical
                if (!error)
                    error = std::current_exception();
            }
        }
        if (error)
            std::rethrow_exception(error);
    } else {
        for (std::size_t c = 0; c < ens.cells; ++c)
            run_cell(c);
    }
    DsmcStats total;
    for (const auto& s : per_cell)
        total += s;
    return total;
}

EnskogStats enskog_collision_step(SlabEnsemble& ens, double dt, double epsilon, Rng& rng,
                                  const EnskogOptions& options)
{
    if (!(dt > 0.0) || !(options.g_max > 0.0))
        throw ValidationError("enskog step: dt and g_max must be positive");
    if (!(epsilon >= 0.0) || epsilon > ens.length)
        throw ValidationError("enskog step: epsilon must lie in [0, slab length]");
    if (options.functional_order != 0 && options.functional_order != 1)
        throw ValidationError("enskog step: functional_order must be 0 or 1");
    if (options.functional_order == 1 && !(epsilon > 0.0))
        throw ValidationError("enskog step: the order-1 closure needs epsilon > 0");

    EnskogStats st;
    const std::size_t n = ens.size();
    if (n < 2)
        return st;
    const auto members = ens.members();
    const double width = ens.cell_width();
    std::vector<double> dens(ens.cells);
    double n_max = 0.0;
    for (std::size_t c = 0; c < ens.cells; ++c) {
        dens[c] = static_cast<double>(members[c].size()) * ens.weight / width;
        n_max = std::max(n_max, dens[c]);
    }
    const bool order1 = options.functional_order == 1;
    const double w_cap = order1 ? 2.0 : 1.0;

    // Order-1 machinery: local Maxwellian field and the V_2 operator on it.
    std::shared_ptr<LocalField> field;
    StateFunction v2;
    std::optional<Rng> crng;
    double reach = 0.0;
    if (order1) {
        field = std::make_shared<LocalField>();
        field->length = ens.length;
        field->cells = ens.cells;
        field->n = dens;
        field->temp.assign(ens.cells, 0.0);
        field->u.assign(ens.cells, Vec3{});
        std::vector<Vec3> buf;
        for (std::size_t c = 0; c < ens.cells; ++c) {
            buf.clear();
            for (auto i : members[c])
                buf.push_back(ens.p[i]);
            if (buf.size() > 1) {
                field->u[c] = mean_momentum(buf);
                field->temp[c] = temperature(buf);
            }
        }
        StateFunction f1{[field](std::span<const Particle> xs) { return (*field)(xs[0]); }, 1};
        DynamicsContext ctx{epsilon, Boundary::unbounded(), options.flow};
        v2 = generating_operator_V(1, options.time, ClusterIndexSet{{0, 1}, {2}},
                                   product_state(f1, 3), ctx);
        crng.emplace(rng());
        reach = epsilon + std::abs(options.time) * options.g_max;
    }

    const double expected = static_cast<double>(n) * two_pi * n_max * options.g_max * dt * w_cap;
    st.candidates = stochastic_round(expected, rng);
    for (std::size_t k = 0; k < st.candidates; ++k) {
        const std::size_t i = uniform_index(rng, n);
        const Vec3 eta = unit_vector(rng);
        const std::size_t c = ens.cell_of(ens.x[i] + epsilon * eta.x);
        if (!(uniform01(rng) * n_max < dens[c]))
            continue;
        const auto& cell = members[c];
        const std::size_t j = cell[uniform_index(rng, cell.size())];
        if (j == i)
            continue;
        const Vec3 u = ens.p[i] - ens.p[j];
        check_relative_speed(norm(u), options.g_max);
        const double d = dot(eta, u);
        if (!(d > 0.0))
            continue;
        const double r = uniform01(rng) * options.g_max * w_cap;
        if (!(r < d * w_cap))
            continue;
        if (order1) {
            // one-sample estimate of the V_2 correction at the pre-collision pair
            std::array<Particle, 3> xs;
            xs[0] = {{ens.x[i], 0.0, 0.0}, ens.p[i]};
            xs[1] = {xs[0].q + epsilon * eta, ens.p[j]};
            const std::size_t ci = ens.cell_of(ens.x[i]);
            const double sig = 1.2 * std::sqrt(std::max(field->temp[ci], 1e-12));
            const Vec3 off{uniform(*crng, -reach, reach), uniform(*crng, -reach, reach),
                           uniform(*crng, -reach, reach)};
            const Vec3 dp = normal_vec(*crng, sig);
            xs[2] = {xs[0].q + off, field->u[ci] + dp};
            const double g3 =
                std::exp(-norm2(dp) / (2.0 * sig * sig)) / std::pow(two_pi * sig * sig, 1.5);
            const double vol = std::pow(2.0 * reach, 3);
            const double base = (*field)(xs[0]) * (*field)(xs[1]);
            double w = 1.0;
            if (base > 0.0 && g3 > 0.0)
                w = 1.0 + v2(xs) * vol / g3 / base;
            ++st.corrections;
            if (w < 0.0 || w > 2.0 || !std::isfinite(w)) {
                ++st.clamped;
                w = std::isfinite(w) ? std::clamp(w, 0.0, 2.0) : 1.0;
            }
            if (!(r < d * w))
                continue;
        }
        auto [pi, pj] = collide(ens.p[i], ens.p[j], eta);
        // nominal partner offset +eps eta: (x_i - x_j) dp_{i,x} = eps eta_x^2 d
        st.virial += (-epsilon * eta.x) * (pi.x - ens.p[i].x);
        ens.p[i] = pi;
        ens.p[j] = pj;
        ++st.collisions;
    }
    return st;
}

// --- H ---

namespace {

double h_on_grid(std::span<const Vec3> samples, const HistogramSpec& spec, const Vec3& m,
                 double temp)
{
    const std::size_t b = spec.bins;
    const double half = spec.half_width * std::sqrt(temp);
    const double delta = 2.0 * half / static_cast<double>(b);
    std::vector<double> h(b * b * b, 0.0);
    auto at = [b](std::size_t i, std::size_t j, std::size_t k) { return (i * b + j) * b + k; };
    auto bin = [&](double v) -> long {
        return static_cast<long>(std::floor((v + half) / delta));
    };
    for (const auto& v : samples) {
        const Vec3 d = v - m;
        const long i = bin(d.x), j = bin(d.y), k = bin(d.z);
        const long lb = static_cast<long>(b);
        if (i < 0 || j < 0 || k < 0 || i >= lb || j >= lb || k >= lb)
            continue;
        h[at(i, j, k)] += 1.0;
    }
    std::vector<double> tmp(h.size());
    for (int axis = 0; axis < 3; ++axis) {
        for (std::size_t i = 0; i < b; ++i)
            for (std::size_t j = 0; j < b; ++j)
                for (std::size_t k = 0; k < b; ++k) {
                    std::size_t idx[3] = {i, j, k};
                    const double c = h[at(i, j, k)];
                    double lo = 0.0, hi = 0.0;
                    if (idx[axis] > 0) {
                        --idx[axis];
                        lo = h[at(idx[0], idx[1], idx[2])];
                        ++idx[axis];
                    }
                    if (idx[axis] + 1 < b) {
                        ++idx[axis];
                        hi = h[at(idx[0], idx[1], idx[2])];
                    }
                    tmp[at(i, j, k)] = 0.25 * lo + 0.5 * c + 0.25 * hi;
                }
        h.swap(tmp);
    }
    const double cell = delta * delta * delta;
    const double norm_c = 1.0 / (static_cast<double>(samples.size()) * cell);
    double sum = 0.0;
    for (double c : h) {
        const double f = c * norm_c;
        sum += cell * f * std::log(f + 1e-12);
    }
    return sum;
}

void check_h_input(std::span<const Vec3> samples, const HistogramSpec& spec)
{
    if (samples.size() < 2)
        throw ValidationError("h_functional: need at least two samples");
    if (spec.bins < 3 || !(spec.half_width > 0.0))
        throw ValidationError("h_functional: need bins >= 3 and half_width > 0");
}

} // namespace

double h_functional(std::span<const Vec3> samples, const HistogramSpec& spec)
{
    check_h_input(samples, spec);
    const double temp = temperature(samples);
    if (!(temp > 0.0))
        throw ValidationError("h_functional: zero temperature");
    return h_on_grid(samples, spec, mean_momentum(samples), temp);
}

double h_functional_noise(std::span<const Vec3> samples, const HistogramSpec& spec)
{
    check_h_input(samples, spec);
    const double temp = temperature(samples);
    if (!(temp > 0.0))
        throw ValidationError("h_functional: zero temperature");
    const Vec3 m = mean_momentum(samples);
    const std::size_t half = samples.size() / 2;
    return 0.5 * std::abs(h_on_grid(samples.first(half), spec, m, temp) -
                          h_on_grid(samples.subspan(half), spec, m, temp));
}

double h_functional(const VelocityEnsemble& ens, const HistogramSpec& spec)
{
    ens.validate(10'000);
    return h_functional(ens.samples, spec);
}

// --- initial states ---

std::vector<Vec3> maxwellian_samples(std::size_t n, double temp, const Vec3& drift, Rng& rng)
{
    if (!(temp > 0.0))
        throw ValidationError("maxwellian: temperature must be positive");
    std::vector<Vec3> out(n);
    const double s = std::sqrt(temp);
    for (auto& v : out)
        v = drift + normal_vec(rng, s);
    return out;
}

std::vector<Vec3> two_beam_samples(std::size_t n, double speed)
{
    std::vector<Vec3> out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = {i % 2 == 0 ? speed : -speed, 0.0, 0.0};
    return out;
}

SlabEnsemble slab_state(std::size_t n, double length, std::size_t cells, double mean_density,
                        const std::function<double(double)>& profile, double max_profile,
                        double temp, Rng& rng)
{
    if (!(max_profile > 0.0) || !(mean_density > 0.0) || n == 0)
        throw ValidationError("slab_state: need n > 0, positive density and profile bound");
    SlabEnsemble ens;
    ens.length = length;
    ens.cells = cells;
    ens.weight = mean_density * length / static_cast<double>(n);
    ens.x.reserve(n);
    while (ens.x.size() < n) {
        const double x = uniform(rng, 0.0, length);
        const double v = profile(x);
        if (v > max_profile * (1.0 + 1e-12))
            throw ValidationError("slab_state: profile exceeds its stated bound");
        if (uniform01(rng) * max_profile < v)
            ens.x.push_back(x);
    }
    ens.p = maxwellian_samples(n, temp, {}, rng);
    ens.validate();
    return ens;
}

std::function<double(double)> triangle_profile(double length, double amplitude)
{
    return [length, amplitude](double x) {
        double r = std::fmod(x, length);
        if (r < 0)
            r += length;
        return 1.0 + amplitude * (1.0 - 4.0 * std::abs(r / length - 0.5));
    };
}

// --- runners ---

std::size_t SolverConfig::steps() const
{
    return static_cast<std::size_t>(std::llround(t_end / dt));
}

std::vector<std::string> SolverConfig::diagnostics() const
{
    std::vector<std::string> d;
    if (!(dt > 0.0))
        d.push_back("dt must be positive");
    if (!(t_end >= 0.0))
        d.push_back("t_end must be non-negative");
    else if (dt > 0.0 && std::abs(t_end / dt - std::round(t_end / dt)) > 1e-9 * (t_end / dt + 1))
        d.push_back("t_end must be an integer multiple of dt");
    if (!(g_max >= 0.0))
        d.push_back("g_max must be non-negative (0 selects the default bound)");
    if (histogram.bins < 3 || !(histogram.half_width > 0.0))
        d.push_back("histogram needs bins >= 3 and half_width > 0");
    if (!homogeneous && (!(length > 0.0) || cells == 0))
        d.push_back("slab needs length > 0 and cells >= 1");
    if (model == CollisionModel::enskog_displaced) {
        if (homogeneous)
            d.push_back("enskog_displaced requires a slab geometry");
        if (!(epsilon >= 0.0))
            d.push_back("epsilon must be non-negative");
        if (cells > 0 && length > 0.0 && epsilon >= length / static_cast<double>(cells))
            d.push_back("epsilon " + std::to_string(epsilon) + " is not below the slab cell size " +
                        std::to_string(length / static_cast<double>(cells)));
        if (functional_order != 0 && functional_order != 1)
            d.push_back("functional_order must be 0 or 1");
        if (functional_order == 1 && !(epsilon > 0.0))
            d.push_back("functional_order 1 needs epsilon > 0");
    }
    return d;
}

void SolverConfig::validate() const
{
    const auto d = diagnostics();
    if (!d.empty())
        throw ValidationError("solver config: " + d.front());
}

void write_kinetic_csv_header(std::ostream& os)
{
    os << "t,cell,density,px,py,pz,temperature,H\n";
}

RunResult run_homogeneous(VelocityEnsemble ens, const SolverConfig& cfg, std::ostream* csv)
{
    cfg.validate();
    ens.validate();
    RunResult res;
    res.g_max = cfg.g_max > 0.0 ? cfg.g_max : default_majorant(ens.samples);
    check_step_probability(ens.density(), temperature(ens.samples), cfg.dt);
    const std::size_t steps = cfg.steps();
    const bool track_h = ens.samples.size() >= 10'000;
    if (csv) {
        write_kinetic_csv_header(*csv);
        write_row(*csv, 0.0, 0, ens.density(), ens.samples, cfg.histogram);
    }
    double noise2 = 0.0;
    auto track = [&](std::span<const Vec3> p) {
        res.h_series.push_back(h_functional(p, cfg.histogram));
        const double e = h_functional_noise(p, cfg.histogram);
        noise2 += e * e;
    };
    if (track_h)
        track(ens.samples);
    for (std::size_t k = 0; k < steps; ++k) {
        auto rng = make_rng(cfg.seed, 0, k, homogeneous_stream);
        res.stats += dsmc_collision_step(ens, cfg.dt, res.g_max, rng);
        const double t = static_cast<double>(k + 1) * cfg.dt;
        if (csv)
            write_row(*csv, t, 0, ens.density(), ens.samples, cfg.histogram);
        if (track_h)
            track(ens.samples);
    }
    if (track_h)
        res.h_noise = std::sqrt(noise2 / static_cast<double>(res.h_series.size()));
    res.steps = steps;
    res.p = std::move(ens.samples);
    return res;
}

RunResult run_slab(SlabEnsemble ens, const SolverConfig& cfg, std::ostream* csv)
{
    cfg.validate();
    ens.validate();
    if (ens.cells != cfg.cells || std::abs(ens.length - cfg.length) > 1e-12 * cfg.length)
        throw ValidationError("run_slab: ensemble geometry differs from the config");
    RunResult res;
    res.g_max = cfg.g_max > 0.0 ? cfg.g_max : default_majorant(ens.p);
    {
        const auto members = ens.members();
        std::size_t most = 0;
        for (const auto& m : members)
            most = std::max(most, m.size());
        check_step_probability(static_cast<double>(most) * ens.weight / ens.cell_width(),
                               temperature(ens.p), cfg.dt);
    }
    const bool enskog = cfg.model == CollisionModel::enskog_displaced;
    auto emit = [&](double t) {
        if (!csv)
            return;
        const auto members = ens.members();
        std::vector<Vec3> buf;
        for (std::size_t c = 0; c < ens.cells; ++c) {
            buf.clear();
            for (auto i : members[c])
                buf.push_back(ens.p[i]);
            write_row(*csv, t, c, static_cast<double>(buf.size()) * ens.weight / ens.cell_width(),
                      buf, cfg.histogram);
        }
    };
    const bool track_h = ens.size() >= 10'000;
    if (csv)
        write_kinetic_csv_header(*csv);
    emit(0.0);
    double noise2 = 0.0;
    auto track = [&](std::span<const Vec3> p) {
        res.h_series.push_back(h_functional(p, cfg.histogram));
        const double e = h_functional_noise(p, cfg.histogram);
        noise2 += e * e;
    };
    if (track_h)
        track(ens.p);
    double virial = 0.0;
    const std::size_t steps = cfg.steps();
    for (std::size_t k = 0; k < steps; ++k) {
        transport_step(ens, 0.5 * cfg.dt);
        if (enskog) {
            auto rng = make_rng(cfg.seed, 0, k, enskog_stream);
            EnskogOptions opt;
            opt.functional_order = cfg.functional_order;
            opt.g_max = res.g_max;
            opt.time = (static_cast<double>(k) + 0.5) * cfg.dt;
            const auto st = enskog_collision_step(ens, cfg.dt, cfg.epsilon, rng, opt);
            res.stats += DsmcStats{st.candidates, st.collisions};
            virial += st.virial;
        } else {
            res.stats += slab_dsmc_collision_step(ens, cfg.dt, res.g_max, cfg.seed, k,
                                                  cfg.execution);
        }
        transport_step(ens, 0.5 * cfg.dt);
        emit(static_cast<double>(k + 1) * cfg.dt);
        if (track_h)
            track(ens.p);
    }
    if (track_h)
        res.h_noise = std::sqrt(noise2 / static_cast<double>(res.h_series.size()));
    res.steps = steps;
    if (steps > 0)
        res.collisional_flux = ens.weight * virial / (ens.length * cfg.t_end);
    res.p = std::move(ens.p);
    res.x = std::move(ens.x);
    return res;
}

// --- rods ---

RodIntegral hard_rod_collision_integral_1d(const RodPairDensity& f2, double q1, double p1,
                                           double epsilon, const RodIntegralOptions& options)
{
    if (!f2)
        throw ValidationError("rod integral: empty pair density");
    if (!(options.cutoff > 0.0) || !(epsilon >= 0.0))
        throw ValidationError("rod integral: need cutoff > 0 and epsilon >= 0");
    auto terms = [&](double P, double& envelope) {
        const double t1 = f2(q1, p1 - P, q1 - epsilon, p1);
        const double t2 = f2(q1, p1, q1 - epsilon, p1 + P);
        const double t3 = f2(q1, p1 + P, q1 + epsilon, p1);
        const double t4 = f2(q1, p1, q1 + epsilon, p1 - P);
        envelope = P * (std::abs(t1) + std::abs(t2) + std::abs(t3) + std::abs(t4));
        return P * ((t1 - t4) + (t3 - t2));
    };
    using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
    RodIntegral out;
    out.value = GK::integrate(
        [&](double P) {
            double e;
            return terms(P, e);
        },
        0.0, options.cutoff, options.max_depth, options.tolerance, &out.error_estimate);
    auto env = [&](double P) {
        double e;
        terms(P, e);
        return e;
    };
    const double head = GK::integrate(env, 0.0, options.cutoff, options.max_depth, 1e-8);
    const double tail =
        GK::integrate(env, options.cutoff, 2.0 * options.cutoff, options.max_depth, 1e-8);
    out.tail_fraction = head + tail > 0.0 ? tail / (head + tail) : 0.0;
    out.tail_warning = out.tail_fraction > 0.01;
    return out;
}

} // namespace hsk
