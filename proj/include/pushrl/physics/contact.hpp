#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>

#include "pushrl/core/error.hpp"
#include "pushrl/core/pose.hpp"
#include "pushrl/physics/shape.hpp"

namespace pushrl {

enum class ContactMode { Sticking, SlidingLeft, SlidingRight, Separated };

inline std::string_view to_string(ContactMode m) {
    switch (m) {
        case ContactMode::Sticking: return "sticking";
        case ContactMode::SlidingLeft: return "sliding_left";
        case ContactMode::SlidingRight: return "sliding_right";
        case ContactMode::Separated: return "separated";
    }
    return "unknown";
}

inline ContactMode contact_mode_from_string(std::string_view s) {
    if (s == "sticking") return ContactMode::Sticking;
    if (s == "sliding_left") return ContactMode::SlidingLeft;
    if (s == "sliding_right") return ContactMode::SlidingRight;
    if (s == "separated") return ContactMode::Separated;
    throw Error("unknown contact mode '" + std::string(s) + "'");
}

/// Gap up to which a non-touching pusher is still reported (as Separated).
inline constexpr double kProximityThreshold = 0.005;

/// Pusher-object contact in world coordinates. `normal` points from the object
/// surface into the pusher. Touching contacts come back as Sticking; the
/// stepping code overwrites the mode with the one the motion produced.
struct Contact {
    Vec2 point = Vec2::Zero();
    Vec2 normal = Vec2::UnitX();
    double depth = 0.0;
    int edge_index = 0;
    ContactMode mode = ContactMode::Sticking;

    bool touching() const { return mode != ContactMode::Separated; }
};

namespace detail {

struct ClosestFeature {
    Vec2 point;         // body frame, on the boundary
    Vec2 normal;        // body frame, outward
    double distance;    // signed: negative when the query is inside
    int edge_index;
};

inline ClosestFeature closest_boundary_point(const ConvexShape& shape, const Vec2& q) {
    const std::size_t n = shape.size();
    // Inside test via the largest signed edge distance.
    double max_sd = -std::numeric_limits<double>::infinity();
    std::size_t max_edge = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double sd = shape.outward_normal(i).dot(q - shape.vertex(i));
        if (sd > max_sd) {
            max_sd = sd;
            max_edge = i;
        }
    }
    if (max_sd <= 0.0) {
        const Vec2 nrm = shape.outward_normal(max_edge);
        return {q - max_sd * nrm, nrm, max_sd, static_cast<int>(max_edge)};
    }

    ClosestFeature best{Vec2::Zero(), Vec2::UnitX(), std::numeric_limits<double>::infinity(), 0};
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 a = shape.vertex(i);
        const Vec2 e = shape.edge(i);
        const double t = std::clamp((q - a).dot(e) / e.squaredNorm(), 0.0, 1.0);
        const Vec2 c = a + t * e;
        const double d = (q - c).norm();
        if (d < best.distance) {
            Vec2 nrm;
            if (t > 0.0 && t < 1.0) {
                nrm = shape.outward_normal(i);
            } else {
                nrm = d > 0.0 ? Vec2((q - c) / d) : shape.outward_normal(i);
            }
            best = {c, nrm, d, static_cast<int>(i)};
        }
    }
    return best;
}

}  // namespace detail

/// Circle-vs-convex-polygon proximity query.
///
/// Returns a touching contact when the tip overlaps or is tangent to the
/// polygon, a Separated contact when the gap is in (0, 5 mm], and nothing
/// beyond that.
inline std::optional<Contact> detect_contact(const Pose2& pusher_pose, const PusherParams& pusher,
                                             const ConvexShape& shape, const Pose2& object_pose) {
    require_finite(pusher_pose, "pusher");
    require_finite(object_pose, "object");
    const Vec2 q = object_pose.inverse_transform(pusher_pose.position());
    const auto f = detail::closest_boundary_point(shape, q);
    const double gap = f.distance - pusher.tip_radius;
    if (gap > kProximityThreshold) return std::nullopt;

    Contact c;
    c.point = object_pose.transform(f.point);
    c.normal = rotate(f.normal, object_pose.theta).normalized();
    c.depth = std::max(0.0, -gap);
    c.edge_index = f.edge_index;
    c.mode = gap > 0.0 ? ContactMode::Separated : ContactMode::Sticking;
    return c;
}

/// World pose of the contact frame: origin at the contact point, x-axis along
/// the inward surface normal (the direction a normal push travels).
inline Pose2 contact_frame(const Contact& contact) {
    return {contact.point, std::atan2(-contact.normal.y(), -contact.normal.x())};
}

/// Contact-surface pose expressed in the pusher frame. Zero angle means the
/// pusher heading is anti-parallel to the surface normal.
inline Pose2 surface_pose(const Contact& contact, const Pose2& /*object_pose*/, const Pose2& pusher_pose) {
    if (!contact.touching()) throw Error("no surface pose without contact");
    return pusher_pose.relative(contact_frame(contact));
}

}  // namespace pushrl
