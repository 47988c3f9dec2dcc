#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "pushrl/check/physics_cases.hpp"
#include "pushrl/core/rng.hpp"
#include "pushrl/physics/quasi_static.hpp"

namespace pushrl::check {

struct InvariantCount {
    long checked = 0;
    long violations = 0;

    void record(bool ok) {
        ++checked;
        violations += ok ? 0 : 1;
    }
};

struct PhysicsInvariantReport {
    InvariantCount sticking_velocity;  ///< sticking: object and pusher contact points move together
    InvariantCount friction_cone;      ///< force inside the cone (sticking) or on its edge (sliding)
    InvariantCount mirror;             ///< reflected case gives the reflected twist
    InvariantCount no_pull;            ///< force never pulls; withdrawing never moves the object
    InvariantCount symmetric_push;     ///< push through the centre of a symmetric face does not rotate

    bool ok() const {
        return sticking_velocity.violations == 0 && friction_cone.violations == 0 && mirror.violations == 0 &&
               no_pull.violations == 0 && symmetric_push.violations == 0;
    }
};

/// Tip centred on an edge midpoint of a library shape (all are symmetric
/// about their edge bisectors), pushing straight along the inward normal.
inline PhysicsCase symmetric_push_case(Rng& rng) {
    for (;;) {
        PhysicsCase c{random_object(rng, false), {rng.uniform(0.005, 0.03)}, {}, {}, {}, {}};
        c.object_pose = Pose2(rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), rng.uniform(-3.2, 3.2));
        const auto& s = c.object.shape;
        const std::size_t e = rng.below(s.size());
        const Vec2 mid = s.vertex(e) + 0.5 * s.edge(e);
        const Vec2 n = s.outward_normal(e);
        const double depth = rng.uniform(0.0, 0.003);
        c.pusher_pose = Pose2(c.object_pose.transform(mid + (c.pusher.tip_radius - depth) * n),
                              c.object_pose.theta + std::atan2(-n.y(), -n.x()));
        auto contact = detect_contact(c.pusher_pose, c.pusher, s, c.object_pose);
        if (!contact || !contact->touching()) continue;
        c.contact = *contact;
        c.motion = {rng.uniform(1e-5, kMaxStepTranslation), 0.0, 0.0};
        return c;
    }
}

/// Randomized invariant sweep, `cases` configurations per property.
inline PhysicsInvariantReport run_physics_invariants(long cases, std::uint64_t seed, double tol = 1e-9) {
    PhysicsInvariantReport rep;
    Rng rng(seed, 0x70687973);
    long sticking = 0, sliding = 0, withdrawing = 0;
    // Keep drawing until every mode-specific property has `cases` samples.
    for (long iter = 0; sticking < cases || sliding < cases || withdrawing < cases || rep.mirror.checked < cases; ++iter) {
        const PhysicsCase c = random_case(rng);
        const auto sol = solve_contact(c.object_pose, c.object.slider, c.contact, c.pusher_pose, c.motion);
        const Vec2 n_in = -c.contact.normal;
        if (sol.mode == ContactMode::Separated) {
            if (withdrawing < cases) {
                const auto step = quasi_static_step(c.object_pose, c.object.slider, c.contact, c.pusher_pose, c.motion);
                rep.no_pull.record(step.first == c.object_pose && sol.pusher_velocity.dot(n_in) <= tol);
                ++withdrawing;
            }
            continue;
        }
        const double angle = std::atan2(std::abs(cross2(n_in, sol.force)), sol.force.dot(n_in));
        const double cone = std::atan(c.object.slider.mu_contact);
        if (sol.mode == ContactMode::Sticking && sticking < cases) {
            ++sticking;
            rep.sticking_velocity.record((sol.object_velocity - sol.pusher_velocity).norm() <= tol);
            rep.friction_cone.record(angle <= cone + tol);
            rep.no_pull.record(sol.force.dot(n_in) >= 0.0);
        } else if (sol.mode != ContactMode::Sticking && sliding < cases) {
            ++sliding;
            rep.friction_cone.record(std::abs(angle - cone) <= tol);
            rep.no_pull.record(sol.force.dot(n_in) >= 0.0);
        }
        if (rep.mirror.checked < cases) {
            const PhysicsCase m = mirror_case(c);
            const auto ms = solve_contact(m.object_pose, m.object.slider, m.contact, m.pusher_pose, m.motion);
            rep.mirror.record(std::abs(ms.twist.v_cof.x() - sol.twist.v_cof.x()) <= tol &&
                              std::abs(ms.twist.v_cof.y() + sol.twist.v_cof.y()) <= tol &&
                              std::abs(ms.twist.omega + sol.twist.omega) <= tol);
        }
        if (iter > 100 * cases) break;  // defensive: generator stopped producing a mode
    }
    for (long i = 0; i < cases; ++i) {
        const PhysicsCase c = symmetric_push_case(rng);
        const auto sol = solve_contact(c.object_pose, c.object.slider, c.contact, c.pusher_pose, c.motion);
        const Vec2 along = -c.contact.normal;
        rep.symmetric_push.record(sol.mode == ContactMode::Sticking && std::abs(sol.twist.omega) <= tol &&
                                  std::abs(cross2(along, sol.twist.v_cof)) <= tol);
    }
    return rep;
}

}  // namespace pushrl::check
