#pragma once

// Event-driven dynamics of n hard spheres of diameter epsilon: free flight
// between pair contacts, elastic collision map at contact. This is the
// phase-space shift S_n(t) every other module is built on.

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "hsk/vec3.hpp"

namespace hsk {

struct Particle {
    Vec3 q; ///< position
    Vec3 p; ///< momentum (unit mass)
};

enum class BoundaryKind { unbounded, periodic };

struct Boundary {
    BoundaryKind kind = BoundaryKind::unbounded;
    double side = 0.0; ///< box side L for periodic boxes

    static Boundary unbounded() { return {}; }
    static Boundary periodic_box(double side) { return {BoundaryKind::periodic, side}; }
    bool periodic() const { return kind == BoundaryKind::periodic; }

    /// a - b, minimum-image for periodic boxes.
    Vec3 separation(const Vec3& a, const Vec3& b) const;
    /// Maps a position into [0, L)^3 (identity when unbounded).
    Vec3 wrap(const Vec3& q) const;
};

struct PhaseState {
    std::vector<Particle> particles;
    double epsilon = 0.0;
    Boundary boundary;

    std::size_t size() const { return particles.size(); }
};

struct CollisionEvent {
    double time = 0.0;  ///< time from the state's current instant
    std::size_t i = 0;  ///< i < j
    std::size_t j = 0;
    Vec3 eta;           ///< unit vector from q_j to q_i at contact
};

struct FlowOptions {
    std::size_t max_events = 50'000'000;  ///< event backlog cap per flow call
    double overlap_tolerance = 1e-9;      ///< relative, checked after each event
    std::size_t queue_threshold = 64;     ///< n above this uses the priority queue
};

struct FlowStats {
    std::size_t collisions = 0;
    std::size_t grazing = 0;
    double min_contact_ratio = 1.0e300; ///< min |q_i - q_j| / epsilon at events
};

/// Relative tolerance of the allowed-configuration test: |q_i - q_j| >= eps (1 - 1e-12).
inline constexpr double contact_slack = 1e-12;

/// Elastic collision map. Requires |eta| = 1 and <eta, p1 - p2> >= 0; returns
/// (p1 - eta <eta, p1 - p2>, p2 + eta <eta, p1 - p2>).
std::pair<Vec3, Vec3> collide(const Vec3& p1, const Vec3& p2, const Vec3& eta);

/// 1 if every pair is at distance >= epsilon, else 0.
int allowed_indicator(std::span<const Vec3> positions, double epsilon,
                      const Boundary& boundary = Boundary::unbounded());
int allowed_indicator(std::span<const Particle> particles, double epsilon,
                      const Boundary& boundary = Boundary::unbounded());

/// Throws ValidationError if the state breaks a PhaseState invariant.
void validate_state(const PhaseState& state);

/// Earliest future pair contact, or nothing if no approaching pair ever
/// touches. Periodic boxes scan the 27 nearest image offsets.
std::optional<CollisionEvent> next_collision(const PhaseState& state);

/// Hard-sphere flow by signed time t. Negative t runs the time-reversed
/// dynamics (flip momenta, evolve |t|, flip back).
PhaseState hard_sphere_flow(PhaseState state, double t, const FlowOptions& options = {},
                            FlowStats* stats = nullptr);

/// Free flight of every particle by t (no interaction).
PhaseState free_flow(PhaseState state, double t);

Vec3 total_momentum(std::span<const Particle> particles);
double total_energy(std::span<const Particle> particles); ///< sum |p|^2 / 2

} // namespace hsk
