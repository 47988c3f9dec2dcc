#pragma once

#include <cmath>
#include <utility>

#include <Eigen/Dense>

#include "pushrl/core/error.hpp"
#include "pushrl/core/pose.hpp"
#include "pushrl/physics/contact.hpp"
#include "pushrl/physics/shape.hpp"

namespace pushrl {

/// Incremental pusher motion expressed in the pusher frame (forward, left, turn).
struct PusherMotion {
    double dx = 0.0;
    double dy = 0.0;
    double dtheta = 0.0;

    bool finite() const { return std::isfinite(dx) && std::isfinite(dy) && std::isfinite(dtheta); }
};

/// Largest translation accepted by a single quasi-static step.
inline constexpr double kMaxStepTranslation = 0.002;

/// Planar twist of the slider about its center of friction, per step.
struct Twist {
    Vec2 v_cof = Vec2::Zero();
    double omega = 0.0;
};

/// Full result of the contact solve; the extra fields exist so callers (and
/// tests) can check the friction and kinematic conditions directly.
struct ContactSolution {
    ContactMode mode = ContactMode::Sticking;
    Twist twist;
    Vec2 force = Vec2::Zero();             ///< force on the object, arbitrary scale
    Vec2 pusher_velocity = Vec2::Zero();   ///< pusher material point at the contact
    Vec2 object_velocity = Vec2::Zero();   ///< object material point at the contact
    Vec2 cof = Vec2::Zero();               ///< world position of the center of friction
    double slip = 0.0;                     ///< tangential slip of pusher over object
};

inline Pose2 pusher_after(const Pose2& pusher_pose, const PusherMotion& m) {
    return {pusher_pose.transform({m.dx, m.dy}), pusher_pose.theta + m.dtheta};
}

/// Ellipsoidal limit-surface solve for a point pusher with Coulomb friction.
///
/// With H = diag(1, 1, 1/c^2), a force f at lever arm r about the COF gives
/// the twist (f, (r x f) / c^2); the contact-point velocity is then M f with
/// M = I + perp(r) perp(r)^T / c^2. The two friction-cone edges map to the
/// motion-cone edges; a pusher velocity inside the motion cone sticks, one
/// outside slides along the nearer edge.
inline ContactSolution solve_contact(const Pose2& object_pose, const SliderParams& slider, const Contact& contact,
                                     const Pose2& pusher_pose, const PusherMotion& motion) {
    require_finite(object_pose, "object");
    require_finite(pusher_pose, "pusher");
    if (!motion.finite()) throw Error("non-finite pusher motion");
    if (!contact.point.allFinite() || !contact.normal.allFinite() || !std::isfinite(contact.depth))
        throw Error("non-finite contact");
    if (!contact.touching()) throw Error("quasi-static step needs a touching contact");

    ContactSolution sol;
    sol.cof = object_pose.transform(slider.cof_offset);
    const Vec2 r = contact.point - sol.cof;
    sol.pusher_velocity =
        rotate({motion.dx, motion.dy}, pusher_pose.theta) + motion.dtheta * perp(contact.point - pusher_pose.position());

    if (sol.pusher_velocity.x() == 0.0 && sol.pusher_velocity.y() == 0.0) return sol;

    const Vec2 n_in = -contact.normal;
    const Vec2 tangent = perp(n_in);
    if (sol.pusher_velocity.dot(n_in) <= 0.0) {
        sol.mode = ContactMode::Separated;
        return sol;
    }

    const double inv_c2 = 1.0 / (slider.c_ls * slider.c_ls);
    const Vec2 pr = perp(r);
    Eigen::Matrix2d m = Eigen::Matrix2d::Identity() + inv_c2 * pr * pr.transpose();

    const Vec2 f_left = n_in + slider.mu_contact * tangent;
    const Vec2 f_right = n_in - slider.mu_contact * tangent;
    const Vec2 v_left = m * f_left;
    const Vec2 v_right = m * f_right;
    const Vec2& v = sol.pusher_velocity;

    const bool inside_right = cross2(v_right, v) >= 0.0;
    const bool inside_left = cross2(v, v_left) >= 0.0;
    if (inside_right && inside_left) {
        sol.force = m.ldlt().solve(v);
        sol.mode = ContactMode::Sticking;
    } else {
        const bool slide_left = !inside_left;
        const Vec2 f_edge = slide_left ? f_left : f_right;
        const Vec2 v_edge = slide_left ? v_left : v_right;
        Eigen::Matrix2d a;
        a.col(0) = v_edge;
        a.col(1) = tangent;
        const Vec2 sol_ls = a.partialPivLu().solve(v);
        if (!(sol_ls(0) > 0.0)) throw Error("ill-posed sliding contact (limit surface too flat for this friction)");
        sol.force = sol_ls(0) * f_edge;
        sol.slip = sol_ls(1);
        sol.mode = slide_left ? ContactMode::SlidingLeft : ContactMode::SlidingRight;
    }
    sol.twist.v_cof = sol.force;
    sol.twist.omega = cross2(r, sol.force) * inv_c2;
    sol.object_velocity = sol.twist.v_cof + sol.twist.omega * pr;
    return sol;
}

/// Applies a twist about the world-frame COF to the object pose.
inline Pose2 apply_twist(const Pose2& object_pose, const SliderParams& slider, const Twist& twist) {
    const Vec2 cof = object_pose.transform(slider.cof_offset);
    const double theta = object_pose.theta + twist.omega;
    const Vec2 cof_next = cof + twist.v_cof;
    return {cof_next - rotate(slider.cof_offset, theta), theta};
}

/// One quasi-static step of the slider under a pusher motion.
inline std::pair<Pose2, ContactMode> quasi_static_step(const Pose2& object_pose, const SliderParams& slider,
                                                       const Contact& contact, const Pose2& pusher_pose,
                                                       const PusherMotion& motion) {
    if (std::hypot(motion.dx, motion.dy) > kMaxStepTranslation)
        throw Error("pusher translation per quasi-static step exceeds 2 mm");
    const ContactSolution sol = solve_contact(object_pose, slider, contact, pusher_pose, motion);
    if (sol.mode == ContactMode::Separated) return {object_pose, sol.mode};
    return {apply_twist(object_pose, slider, sol.twist), sol.mode};
}

}  // namespace pushrl
