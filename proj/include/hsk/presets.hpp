#pragma once

// Named test states and observables shared by the command-line front end
// and the acceptance checks.

#include "hsk/cluster.hpp"
#include "hsk/kinetic.hpp"

namespace hsk {

double maxwell_density(const Vec3& p, double temperature = 1.0);
/// Smooth bump exp(-1 / (1 - (x/half)^2)), zero for |x| >= half.
double bump(double x, double half);

/// mass * b(q_x) b(q_y) b(q_z) M(p) / (normalization of the bump cube), all
/// bumps of half-width `half`.
StateFunction compact_chaos_f1(double half = 0.8, double mass = 3.0);
/// b(q_x - 0.2) b(q_y) b(q_z + 0.1) (1 + p_x), half-width 0.8.
StateFunction compact_additive_observable();
/// B(q1 - 0.1 e_x) B(q2 + 0.1 e_x) (1 + p2_y / 2 + 0.3 p1_x), B the product of
/// half-width 0.8 bumps over the three axes.
StateFunction compact_binary_observable();

/// rho(q1) rho(q2) g(p1) g(p2) (1 + c (p1 q2 + p2 q1)), rho = 1 + a sin q,
/// g the 1D Maxwellian of the given temperature.
RodPairDensity rod_gradient_state(double amplitude = 0.5, double correlation = 0.3,
                                  double temperature = 1.0);

} // namespace hsk
