#pragma once

// Set partitions of a clustered index set, the signed cumulants of groups of
// hard-sphere flows built from them, and the scattering cumulants / generating
// operators of the first two orders. Operators are lazy: applying one to a
// StateFunction yields another StateFunction evaluated pointwise.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "hsk/dynamics.hpp"

namespace hsk {

/// Ground set ({Y}, s+1, ..., s+n): the cluster Y is one atomic element,
/// singles are ordinary elements. Entries are coordinate indices into the
/// phase point the operator acts on.
struct ClusterIndexSet {
    std::vector<std::size_t> cluster;
    std::vector<std::size_t> singles;

    bool has_cluster() const { return !cluster.empty(); }
    std::size_t element_count() const { return (has_cluster() ? 1 : 0) + singles.size(); }
    /// Coordinates covered by element e (element 0 is {Y} when present).
    std::vector<std::size_t> element_indices(std::size_t e) const;
    /// theta: all coordinates of the ground set, cluster first.
    std::vector<std::size_t> declusterized() const;
};

/// Blocks hold element numbers of the ground set, not coordinates.
struct SetPartition {
    std::vector<std::vector<std::size_t>> blocks;
};

inline constexpr std::size_t max_partition_elements = 8;

/// All partitions of {0, ..., n-1}, in restricted-growth-string order.
std::vector<SetPartition> enumerate_partitions(std::size_t n);
/// All partitions of the ground set's elements; {Y} is never split.
std::vector<SetPartition> enumerate_partitions(const ClusterIndexSet& ground);

/// Real function on an arity-particle phase point.
struct StateFunction {
    std::function<double(std::span<const Particle>)> eval;
    std::size_t arity = 0;

    double operator()(std::span<const Particle> x) const { return eval(x); }
};

/// prod_i f1(x_i) over arity particles; pointwise difference.
StateFunction product_state(const StateFunction& f1, std::size_t arity);
StateFunction operator-(const StateFunction& a, const StateFunction& b);

/// Geometry shared by every flow an operator triggers.
struct DynamicsContext {
    double epsilon = 0.0;
    Boundary boundary;
    FlowOptions options;
};

enum class FlowSign {
    forward, ///< groups S(t): observables, dual hierarchy
    adjoint  ///< groups S(-t): states, BBGKY hierarchy
};

/// (1+n)th-order cumulant of hard-sphere groups applied to f:
///   sum_P (-1)^{|P|-1} (|P|-1)! prod_{X_i in P} S_{|theta(X_i)|}(+-t, theta(X_i)) f.
/// Each block evolves under its own isolated dynamics. A block whose
/// sub-configuration overlaps contributes zero (functions live on allowed
/// configurations). Requires n == |singles| and arity == |theta(ground)|.
StateFunction cumulant_apply(std::size_t order, double t, const ClusterIndexSet& ground,
                             const StateFunction& f, FlowSign sign, const DynamicsContext& ctx);

/// Scattering cumulant A^_{1+n}(t) = A_{1+n}(-t) X_allowed prod_i S_1(t, i), n <= 1.
StateFunction scattering_cumulant(std::size_t order, double t, const ClusterIndexSet& ground,
                                  const StateFunction& f, const DynamicsContext& ctx);

/// Generating operators V_1 = A^_1 and
///   V_2(t, {Y}, k) = A^_2(t, {Y}, k) - A^_1(t, {Y}) sum_{i in Y} A^_2(t, i, k).
StateFunction generating_operator_V(std::size_t order, double t, const ClusterIndexSet& ground,
                                    const StateFunction& f, const DynamicsContext& ctx);

namespace detail {
// Same operators, acting on a subset of f's coordinates; the remaining
// coordinates are frozen parameters. Used to compose nested operators.
StateFunction cumulant_on(double t, const ClusterIndexSet& ground, const StateFunction& f,
                          FlowSign sign, const DynamicsContext& ctx);
StateFunction scattering_on(double t, const ClusterIndexSet& ground, const StateFunction& f,
                            const DynamicsContext& ctx);
} // namespace detail

/// Bell numbers B_0..B_8, for cross-checks.
std::size_t bell_number(std::size_t n);

} // namespace hsk
