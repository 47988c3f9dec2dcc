#pragma once

#include <cmath>
#include <numbers>
#include <optional>

#include "pushrl/core/rng.hpp"
#include "pushrl/physics/contact.hpp"
#include "pushrl/physics/object_library.hpp"
#include "pushrl/physics/quasi_static.hpp"

namespace pushrl::check {

struct PhysicsCase {
    ObjectSpec object;
    PusherParams pusher;
    Pose2 object_pose;
    Pose2 pusher_pose;
    Contact contact;
    PusherMotion motion;
};

inline const ObjectLibrary& case_library() {
    static const ObjectLibrary lib = default_object_library();
    return lib;
}

inline ObjectSpec random_object(Rng& rng, bool with_offset = true) {
    const auto names = case_library().names();
    ObjectSpec spec = case_library().at(names[rng.below(names.size())]);
    const double R = spec.shape.circumradius();
    spec.slider.mu_contact = rng.uniform(0.1, 1.0);
    spec.slider.c_ls = rng.uniform(0.4, 1.0) * R;
    if (with_offset) {
        const double a = rng.uniform(-std::numbers::pi, std::numbers::pi);
        const double r = rng.uniform(0.0, 0.5) * spec.shape.inradius();
        spec.slider.cof_offset = {r * std::cos(a), r * std::sin(a)};
    }
    return spec;
}

/// Tip placed against a random point of a random edge with a random
/// indentation, a random heading within 80 degrees of the inward normal and a
/// random small motion. Configurations without a consistent sliding solution
/// are redrawn.
inline PhysicsCase random_case(Rng& rng) {
    for (;;) {
        PhysicsCase c{random_object(rng), {rng.uniform(0.005, 0.03)}, {}, {}, {}, {}};
        c.object_pose = Pose2(rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), rng.uniform(-3.2, 3.2));
        const auto& s = c.object.shape;
        const std::size_t e = rng.below(s.size());
        const Vec2 pt = s.vertex(e) + rng.uniform(0.05, 0.95) * s.edge(e);
        const Vec2 n = s.outward_normal(e);
        const double depth = rng.uniform(0.0, 0.003);
        const Vec2 center_body = pt + (c.pusher.tip_radius - depth) * n;
        const double heading = std::atan2(-n.y(), -n.x()) + rng.uniform(-1.4, 1.4);
        c.pusher_pose = Pose2(c.object_pose.transform(center_body), c.object_pose.theta + heading);
        auto contact = detect_contact(c.pusher_pose, c.pusher, s, c.object_pose);
        if (!contact || !contact->touching()) continue;
        c.contact = *contact;
        const double mag = rng.uniform(1e-5, kMaxStepTranslation);
        const double dir = rng.uniform(-std::numbers::pi, std::numbers::pi);
        c.motion = {mag * std::cos(dir), mag * std::sin(dir), rng.uniform(-0.035, 0.035)};
        if (std::hypot(c.motion.dx, c.motion.dy) > kMaxStepTranslation) continue;
        try {
            solve_contact(c.object_pose, c.object.slider, c.contact, c.pusher_pose, c.motion);
        } catch (const Error&) {
            continue;  // friction too high for this limit surface: no consistent sliding solution
        }
        return c;
    }
}

/// Reflection of a whole case about the world x-axis.
inline PhysicsCase mirror_case(const PhysicsCase& c) {
    PhysicsCase m{{c.object.shape.mirrored_y(), c.object.slider}, c.pusher, {}, {}, {}, {}};
    m.object.slider.cof_offset.y() = -c.object.slider.cof_offset.y();
    m.object_pose = Pose2(c.object_pose.x, -c.object_pose.y, -c.object_pose.theta);
    m.pusher_pose = Pose2(c.pusher_pose.x, -c.pusher_pose.y, -c.pusher_pose.theta);
    m.contact = c.contact;
    m.contact.point.y() = -c.contact.point.y();
    m.contact.normal.y() = -c.contact.normal.y();
    m.motion = {c.motion.dx, -c.motion.dy, -c.motion.dtheta};
    return m;
}

}  // namespace pushrl::check
