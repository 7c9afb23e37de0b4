#include "hsk/dynamics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <queue>
#include <set>
#include <sstream>
#include <string>

#include "hsk/errors.hpp"

namespace hsk {

namespace {

constexpr double infinity = std::numeric_limits<double>::infinity();

// Normal relative speed below this fraction of |p_i - p_j| counts as grazing.
constexpr double grazing_fraction = 1e-12;

// Smallest positive root of |dq + t dp| = eps for an approaching pair, using
// the cancellation-free form t = c / (-b + sqrt(b^2 - a c)).
std::optional<double> contact_time(const Vec3& dq, const Vec3& dp, double eps)
{
    const double b = dot(dq, dp);
    if (b >= 0.0)
        return std::nullopt;
    const double a = norm2(dp);
    const double c = norm2(dq) - eps * eps;
    const double disc = b * b - a * c;
    if (disc < 0.0)
        return std::nullopt;
    if (c <= 0.0)
        return 0.0;
    return c / (-b + std::sqrt(disc));
}

std::optional<double> earliest_image_contact(const Boundary& boundary, const Vec3& dq_min,
                                             const Vec3& dp, double eps)
{
    if (!boundary.periodic())
        return contact_time(dq_min, dp, eps);
    std::optional<double> best;
    const double L = boundary.side;
    for (int ox = -1; ox <= 1; ++ox)
        for (int oy = -1; oy <= 1; ++oy)
            for (int oz = -1; oz <= 1; ++oz) {
                const Vec3 dq = dq_min + Vec3{ox * L, oy * L, oz * L};
                if (auto t = contact_time(dq, dp, eps); t && (!best || *t < *best))
                    best = t;
            }
    return best;
}

// Drives one flow call. Two schedulers share the event handling: a full
// O(n^2) rescan per event for small n, and a stamped priority queue for
// large n. Periodic boxes advance in epochs short enough that no pair can
// travel more than L/2 - eps relative to each other, which makes the
// minimum image the only image that can touch within the epoch.
class FlowEngine {
public:
    FlowEngine(PhaseState& state, const FlowOptions& options, FlowStats* stats)
        : s_(state), opt_(options), stats_(stats), stamp_(state.size(), 0)
    {
    }

    void run(double duration)
    {
        if (duration <= 0.0)
            return;
        if (s_.size() < 2) {
            advance(duration);
            return;
        }
        if (s_.size() > opt_.queue_threshold)
            run_queue(duration);
        else
            run_full(duration);
    }

private:
    struct Entry {
        double time;
        std::size_t i;
        std::size_t j;
        std::uint64_t stamp_i;
        std::uint64_t stamp_j;
    };
    struct Later {
        bool operator()(const Entry& a, const Entry& b) const
        {
            if (a.time != b.time)
                return a.time > b.time;
            if (a.i != b.i)
                return a.i > b.i;
            return a.j > b.j;
        }
    };

    double horizon() const
    {
        if (!s_.boundary.periodic())
            return infinity;
        double vmax = 0.0;
        for (const auto& pt : s_.particles)
            vmax = std::max(vmax, norm(pt.p));
        return vmax > 0.0 ? window_length() / (2.0 * vmax) : infinity;
    }

    double window_length() const { return 0.5 * s_.boundary.side - s_.epsilon; }

    void advance(double dt)
    {
        if (dt <= 0.0)
            return;
        for (auto& pt : s_.particles) {
            pt.q += pt.p * dt;
            pt.q = s_.boundary.wrap(pt.q);
        }
        now_ += dt;
    }

    bool is_excluded(std::size_t i, std::size_t j)
    {
        auto it = excluded_.find({i, j});
        if (it == excluded_.end())
            return false;
        const double d = norm(s_.boundary.separation(s_.particles[i].q, s_.particles[j].q));
        if (d > s_.epsilon * (1.0 + 1e-9)) {
            excluded_.erase(it);
            return false;
        }
        return true;
    }

    std::optional<double> pair_time(std::size_t i, std::size_t j, bool all_images)
    {
        if (is_excluded(i, j))
            return std::nullopt;
        const auto& a = s_.particles[i];
        const auto& b = s_.particles[j];
        const Vec3 dq = s_.boundary.separation(a.q, b.q);
        const Vec3 dp = a.p - b.p;
        if (all_images)
            return earliest_image_contact(s_.boundary, dq, dp, s_.epsilon);
        return contact_time(dq, dp, s_.epsilon);
    }

    // Returns true if the event changed momenta.
    bool handle_event(std::size_t i, std::size_t j)
    {
        auto& a = s_.particles[i];
        auto& b = s_.particles[j];
        const Vec3 dq = s_.boundary.separation(a.q, b.q);
        const double d = norm(dq);
        const double ratio = d / s_.epsilon;
        if (ratio < 1.0 - opt_.overlap_tolerance) {
            std::ostringstream msg;
            msg << "hard-sphere overlap after event: pair (" << i << ", " << j
                << ") at distance " << d << " for diameter " << s_.epsilon;
            throw NumericalError(msg.str());
        }
        if (++events_ > opt_.max_events)
            throw NumericalError("event backlog exceeded " + std::to_string(opt_.max_events) +
                                 " events (pathological grazing chain?)");
        if (stats_)
            stats_->min_contact_ratio = std::min(stats_->min_contact_ratio, ratio);

        const Vec3 eta = dq * (1.0 / d);
        const Vec3 dp = a.p - b.p;
        const double normal_speed = dot(eta, dp);
        if (normal_speed > -grazing_fraction * norm(dp)) {
            excluded_.insert({i, j});
            if (stats_)
                ++stats_->grazing;
            return false;
        }
        auto [pa, pb] = collide(a.p, b.p, -eta);
        a.p = pa;
        b.p = pb;
        if (stats_)
            ++stats_->collisions;
        return true;
    }

    void run_full(double duration)
    {
        double remaining = duration;
        while (remaining > 0.0) {
            const double window = std::min(remaining, horizon());
            const std::size_t n = s_.size();
            double best = infinity;
            std::size_t bi = 0;
            std::size_t bj = 0;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = i + 1; j < n; ++j)
                    if (auto t = pair_time(i, j, true); t && *t <= window && *t < best) {
                        best = *t;
                        bi = i;
                        bj = j;
                    }
            if (best == infinity) {
                advance(window);
                remaining -= window;
                continue;
            }
            advance(best);
            remaining -= best;
            handle_event(bi, bj);
        }
    }

    void push_pair(std::size_t i, std::size_t j)
    {
        if (i > j)
            std::swap(i, j);
        if (auto t = pair_time(i, j, false); t) {
            const double at = now_ + *t;
            if (at <= epoch_end_)
                queue_.push({at, i, j, stamp_[i], stamp_[j]});
        }
    }

    void rebuild()
    {
        queue_ = {};
        epoch_end_ = now_ + horizon();
        const std::size_t n = s_.size();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                push_pair(i, j);
    }

    void run_queue(double duration)
    {
        const double end = now_ + duration;
        rebuild();
        while (true) {
            while (!queue_.empty()) {
                const auto& top = queue_.top();
                if (top.stamp_i == stamp_[top.i] && top.stamp_j == stamp_[top.j])
                    break;
                queue_.pop();
            }
            const double next = queue_.empty() ? infinity : queue_.top().time;
            const double target = std::min(end, epoch_end_);
            if (next > target) {
                advance(target - now_);
                if (target >= end)
                    return;
                rebuild();
                continue;
            }
            const Entry e = queue_.top();
            queue_.pop();
            advance(e.time - now_);
            if (!handle_event(e.i, e.j))
                continue;
            ++stamp_[e.i];
            ++stamp_[e.j];
            if (s_.boundary.periodic()) {
                const double v = std::max(norm(s_.particles[e.i].p), norm(s_.particles[e.j].p));
                if (v > 0.0)
                    epoch_end_ = std::min(epoch_end_, now_ + window_length() / (2.0 * v));
            }
            for (std::size_t k = 0; k < s_.size(); ++k) {
                if (k != e.i)
                    push_pair(e.i, k);
                if (k != e.j && k != e.i)
                    push_pair(e.j, k);
            }
        }
    }

    PhaseState& s_;
    const FlowOptions& opt_;
    FlowStats* stats_;
    double now_ = 0.0;
    std::size_t events_ = 0;
    std::set<std::pair<std::size_t, std::size_t>> excluded_;
    std::vector<std::uint64_t> stamp_;
    std::priority_queue<Entry, std::vector<Entry>, Later> queue_;
    double epoch_end_ = infinity;
};

} // namespace

Vec3 Boundary::separation(const Vec3& a, const Vec3& b) const
{
    Vec3 d = a - b;
    if (periodic()) {
        for (int c = 0; c < 3; ++c)
            d[c] -= side * std::nearbyint(d[c] / side);
    }
    return d;
}

Vec3 Boundary::wrap(const Vec3& q) const
{
    if (!periodic())
        return q;
    Vec3 w = q;
    for (int c = 0; c < 3; ++c) {
        w[c] -= side * std::floor(w[c] / side);
        if (w[c] >= side)
            w[c] -= side;
    }
    return w;
}

std::pair<Vec3, Vec3> collide(const Vec3& p1, const Vec3& p2, const Vec3& eta)
{
    const double n2 = norm2(eta);
    if (!(std::abs(std::sqrt(n2) - 1.0) <= 1e-9))
        throw ValidationError("collide: eta must be a unit vector");
    const double normal = dot(eta, p1 - p2);
    if (normal < 0.0)
        throw ValidationError("collide: <eta, p1 - p2> < 0 (eta outside the collision hemisphere)");
    const Vec3 transfer = eta * normal;
    return {p1 - transfer, p2 + transfer};
}

int allowed_indicator(std::span<const Vec3> positions, double epsilon, const Boundary& boundary)
{
    const double min2 = epsilon * epsilon * (1.0 - contact_slack) * (1.0 - contact_slack);
    for (std::size_t i = 0; i < positions.size(); ++i)
        for (std::size_t j = i + 1; j < positions.size(); ++j)
            if (norm2(boundary.separation(positions[i], positions[j])) < min2)
                return 0;
    return 1;
}

int allowed_indicator(std::span<const Particle> particles, double epsilon, const Boundary& boundary)
{
    const double min2 = epsilon * epsilon * (1.0 - contact_slack) * (1.0 - contact_slack);
    for (std::size_t i = 0; i < particles.size(); ++i)
        for (std::size_t j = i + 1; j < particles.size(); ++j)
            if (norm2(boundary.separation(particles[i].q, particles[j].q)) < min2)
                return 0;
    return 1;
}

void validate_state(const PhaseState& state)
{
    if (!(state.epsilon > 0.0) || !std::isfinite(state.epsilon))
        throw ValidationError("phase state: epsilon must be positive and finite");
    if (state.boundary.periodic() && !(state.boundary.side > 2.0 * state.epsilon))
        throw ValidationError("phase state: periodic box side must exceed 2 epsilon");
    for (const auto& pt : state.particles)
        if (!is_finite(pt.q) || !is_finite(pt.p))
            throw ValidationError("phase state: non-finite coordinate");
    if (!allowed_indicator(state.particles, state.epsilon, state.boundary))
        throw ValidationError("phase state: forbidden configuration (overlapping spheres)");
}

std::optional<CollisionEvent> next_collision(const PhaseState& state)
{
    std::optional<CollisionEvent> best;
    const std::size_t n = state.size();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const auto& a = state.particles[i];
            const auto& b = state.particles[j];
            const Vec3 dq_min = state.boundary.separation(a.q, b.q);
            const Vec3 dp = a.p - b.p;
            // Track the image that realizes the root so eta is exact.
            const double L = state.boundary.side;
            const int reach = state.boundary.periodic() ? 1 : 0;
            for (int ox = -reach; ox <= reach; ++ox)
                for (int oy = -reach; oy <= reach; ++oy)
                    for (int oz = -reach; oz <= reach; ++oz) {
                        const Vec3 dq = dq_min + Vec3{ox * L, oy * L, oz * L};
                        auto t = contact_time(dq, dp, state.epsilon);
                        if (!t || (best && *t >= best->time))
                            continue;
                        const Vec3 at = dq + dp * *t;
                        best = CollisionEvent{*t, i, j, at * (1.0 / norm(at))};
                    }
        }
    return best;
}

PhaseState hard_sphere_flow(PhaseState state, double t, const FlowOptions& options, FlowStats* stats)
{
    validate_state(state);
    if (!std::isfinite(t))
        throw ValidationError("hard_sphere_flow: time must be finite");
    const bool reversed = t < 0.0;
    if (reversed)
        for (auto& pt : state.particles)
            pt.p = -pt.p;
    FlowEngine engine(state, options, stats);
    engine.run(std::abs(t));
    if (reversed)
        for (auto& pt : state.particles)
            pt.p = -pt.p;
    return state;
}

PhaseState free_flow(PhaseState state, double t)
{
    for (auto& pt : state.particles)
        pt.q = state.boundary.wrap(pt.q + pt.p * t);
    return state;
}

Vec3 total_momentum(std::span<const Particle> particles)
{
    Vec3 sum;
    for (const auto& pt : particles)
        sum += pt.p;
    return sum;
}

double total_energy(std::span<const Particle> particles)
{
    double e = 0.0;
    for (const auto& pt : particles)
        e += 0.5 * norm2(pt.p);
    return e;
}

} // namespace hsk
