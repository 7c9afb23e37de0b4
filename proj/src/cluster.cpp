#include "hsk/cluster.hpp"

#include <algorithm>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>

#include "hsk/errors.hpp"

namespace hsk {

std::vector<std::size_t> ClusterIndexSet::element_indices(std::size_t e) const
{
    if (has_cluster()) {
        if (e == 0)
            return cluster;
        return {singles.at(e - 1)};
    }
    return {singles.at(e)};
}

std::vector<std::size_t> ClusterIndexSet::declusterized() const
{
    std::vector<std::size_t> all(cluster);
    all.insert(all.end(), singles.begin(), singles.end());
    return all;
}

std::vector<SetPartition> enumerate_partitions(std::size_t n)
{
    if (n > max_partition_elements)
        throw ValidationError("enumerate_partitions: ground set of " + std::to_string(n) +
                              " elements exceeds the cap of " +
                              std::to_string(max_partition_elements));
    std::vector<SetPartition> out;
    if (n == 0) {
        out.push_back({});
        return out;
    }
    // Restricted growth strings: a[0] = 0, a[i] <= 1 + max(a[0..i-1]).
    std::vector<std::size_t> a(n, 0);
    std::vector<std::size_t> runmax(n, 0);
    while (true) {
        SetPartition part;
        part.blocks.resize(runmax[n - 1] + 1);
        for (std::size_t i = 0; i < n; ++i)
            part.blocks[a[i]].push_back(i);
        out.push_back(std::move(part));

        std::size_t i = n - 1;
        while (i > 0 && a[i] == runmax[i - 1] + 1)
            --i;
        if (i == 0)
            break;
        ++a[i];
        runmax[i] = std::max(runmax[i - 1], a[i]);
        for (std::size_t k = i + 1; k < n; ++k) {
            a[k] = 0;
            runmax[k] = runmax[i];
        }
    }
    return out;
}

std::vector<SetPartition> enumerate_partitions(const ClusterIndexSet& ground)
{
    return enumerate_partitions(ground.element_count());
}

std::size_t bell_number(std::size_t n)
{
    // Bell triangle.
    std::vector<std::size_t> row{1};
    for (std::size_t k = 0; k < n; ++k) {
        std::vector<std::size_t> next{row.back()};
        for (std::size_t v : row)
            next.push_back(next.back() + v);
        row = std::move(next);
    }
    return row.front();
}

StateFunction product_state(const StateFunction& f1, std::size_t arity)
{
    if (f1.arity != 1)
        throw ValidationError("product_state: factor must have arity 1");
    return {[f1](std::span<const Particle> x) {
                double v = 1.0;
                for (const auto& pt : x) {
                    v *= f1(std::span<const Particle>(&pt, 1));
                    if (v == 0.0)
                        break;
                }
                return v;
            },
            arity};
}

StateFunction operator-(const StateFunction& a, const StateFunction& b)
{
    if (a.arity != b.arity)
        throw ValidationError("StateFunction difference: arity mismatch");
    return {[a, b](std::span<const Particle> x) { return a(x) - b(x); }, a.arity};
}

namespace {

double factorial(std::size_t n)
{
    double f = 1.0;
    for (std::size_t k = 2; k <= n; ++k)
        f *= static_cast<double>(k);
    return f;
}

void check_ground(const ClusterIndexSet& ground, std::size_t arity, const char* who)
{
    auto idx = ground.declusterized();
    if (idx.empty())
        throw ValidationError(std::string(who) + ": empty ground set");
    if (arity > 64)
        throw ValidationError(std::string(who) + ": arity above 64 is not supported");
    std::vector<bool> seen(arity, false);
    for (auto i : idx) {
        if (i >= arity)
            throw ValidationError(std::string(who) + ": arity mismatch (index " +
                                  std::to_string(i) + " outside arity " +
                                  std::to_string(arity) + ")");
        if (seen[i])
            throw ValidationError(std::string(who) + ": repeated index in ground set");
        seen[i] = true;
    }
}

struct Term {
    double coefficient;
    std::vector<std::vector<std::size_t>> blocks; // coordinate indices per block
    std::vector<std::uint64_t> masks;
};

std::vector<Term> expand_terms(const ClusterIndexSet& ground)
{
    std::vector<Term> terms;
    for (const auto& part : enumerate_partitions(ground)) {
        Term term;
        const std::size_t m = part.blocks.size();
        term.coefficient = ((m - 1) % 2 == 0 ? 1.0 : -1.0) * factorial(m - 1);
        for (const auto& block : part.blocks) {
            std::vector<std::size_t> coords;
            std::uint64_t mask = 0;
            for (auto e : block)
                for (auto c : ground.element_indices(e)) {
                    coords.push_back(c);
                    mask |= std::uint64_t{1} << c;
                }
            term.blocks.push_back(std::move(coords));
            term.masks.push_back(mask);
        }
        terms.push_back(std::move(term));
    }
    return terms;
}

} // namespace

namespace detail {

StateFunction cumulant_on(double t, const ClusterIndexSet& ground, const StateFunction& f,
                          FlowSign sign, const DynamicsContext& ctx)
{
    check_ground(ground, f.arity, "cumulant");
    auto terms = std::make_shared<const std::vector<Term>>(expand_terms(ground));
    const double shift = sign == FlowSign::forward ? t : -t;
    return {[terms, f, shift, ctx](std::span<const Particle> x) {
                std::unordered_map<std::uint64_t, std::optional<std::vector<Particle>>> flowed;
                std::vector<Particle> y(x.begin(), x.end());
                double total = 0.0;
                for (const auto& term : *terms) {
                    std::copy(x.begin(), x.end(), y.begin());
                    bool vanishes = false;
                    for (std::size_t b = 0; b < term.blocks.size(); ++b) {
                        const auto& coords = term.blocks[b];
                        if (coords.size() == 1) {
                            auto& pt = y[coords[0]];
                            pt.q = ctx.boundary.wrap(pt.q + pt.p * shift);
                            continue;
                        }
                        auto it = flowed.find(term.masks[b]);
                        if (it == flowed.end()) {
                            PhaseState sub;
                            sub.epsilon = ctx.epsilon;
                            sub.boundary = ctx.boundary;
                            for (auto c : coords)
                                sub.particles.push_back(x[c]);
                            std::optional<std::vector<Particle>> result;
                            if (allowed_indicator(sub.particles, ctx.epsilon, ctx.boundary))
                                result = hard_sphere_flow(std::move(sub), shift, ctx.options).particles;
                            it = flowed.emplace(term.masks[b], std::move(result)).first;
                        }
                        if (!it->second) {
                            vanishes = true;
                            break;
                        }
                        for (std::size_t k = 0; k < coords.size(); ++k)
                            y[coords[k]] = (*it->second)[k];
                    }
                    if (!vanishes)
                        total += term.coefficient * f(y);
                }
                return total;
            },
            f.arity};
}

StateFunction scattering_on(double t, const ClusterIndexSet& ground, const StateFunction& f,
                            const DynamicsContext& ctx)
{
    check_ground(ground, f.arity, "scattering cumulant");
    const auto coords = ground.declusterized();
    StateFunction inner{[f, coords, t, ctx](std::span<const Particle> y) {
                            std::vector<Particle> z(y.begin(), y.end());
                            std::vector<Vec3> positions;
                            positions.reserve(coords.size());
                            for (auto c : coords)
                                positions.push_back(z[c].q);
                            if (!allowed_indicator(positions, ctx.epsilon, ctx.boundary))
                                return 0.0;
                            for (auto c : coords)
                                z[c].q = ctx.boundary.wrap(z[c].q + z[c].p * t);
                            return f(z);
                        },
                        f.arity};
    return cumulant_on(t, ground, inner, FlowSign::adjoint, ctx);
}

} // namespace detail

namespace {

void check_top_level(std::size_t order, const ClusterIndexSet& ground, const StateFunction& f,
                     const char* who)
{
    if (order != ground.singles.size())
        throw ValidationError(std::string(who) + ": order " + std::to_string(order) +
                              " does not match " + std::to_string(ground.singles.size()) +
                              " single elements");
    if (ground.declusterized().size() != f.arity)
        throw ValidationError(std::string(who) + ": arity mismatch (function arity " +
                              std::to_string(f.arity) + ", ground covers " +
                              std::to_string(ground.declusterized().size()) + ")");
    check_ground(ground, f.arity, who);
}

} // namespace

StateFunction cumulant_apply(std::size_t order, double t, const ClusterIndexSet& ground,
                             const StateFunction& f, FlowSign sign, const DynamicsContext& ctx)
{
    check_top_level(order, ground, f, "cumulant_apply");
    return detail::cumulant_on(t, ground, f, sign, ctx);
}

StateFunction scattering_cumulant(std::size_t order, double t, const ClusterIndexSet& ground,
                                  const StateFunction& f, const DynamicsContext& ctx)
{
    if (order > 1)
        throw ValidationError("scattering_cumulant: only orders 0 and 1 are implemented");
    check_top_level(order, ground, f, "scattering_cumulant");
    return detail::scattering_on(t, ground, f, ctx);
}

StateFunction generating_operator_V(std::size_t order, double t, const ClusterIndexSet& ground,
                                    const StateFunction& f, const DynamicsContext& ctx)
{
    if (order > 1)
        throw ValidationError("generating_operator_V: orders above 1 are not implemented");
    check_top_level(order, ground, f, "generating_operator_V");
    if (order == 0)
        return detail::scattering_on(t, ground, f, ctx);
    if (!ground.has_cluster())
        throw ValidationError("generating_operator_V: order 1 needs a cluster element {Y}");

    const std::size_t k = ground.singles.front();
    StateFunction sum{[](std::span<const Particle>) { return 0.0; }, f.arity};
    std::vector<StateFunction> pair_terms;
    for (auto i : ground.cluster)
        pair_terms.push_back(detail::scattering_on(t, ClusterIndexSet{{i}, {k}}, f, ctx));
    sum.eval = [pair_terms](std::span<const Particle> x) {
        double v = 0.0;
        for (const auto& term : pair_terms)
            v += term(x);
        return v;
    };
    auto first = detail::scattering_on(t, ground, f, ctx);
    auto second = detail::scattering_on(t, ClusterIndexSet{ground.cluster, {}}, sum, ctx);
    return first - second;
}

} // namespace hsk
