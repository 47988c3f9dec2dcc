#pragma once

#include <cmath>
#include <numbers>

#include <Eigen/Core>

#include "pushrl/core/error.hpp"

namespace pushrl {

using Vec2 = Eigen::Vector2d;

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
    constexpr double kPi = std::numbers::pi;
    constexpr double kTwoPi = 2.0 * std::numbers::pi;
    if (a > -kPi && a <= kPi) return a;
    double w = std::fmod(a + kPi, kTwoPi);
    if (w <= 0.0) w += kTwoPi;
    return w - kPi;
}

inline double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

inline double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

/// Rotates by +90 degrees.
inline Vec2 perp(const Vec2& v) { return {-v.y(), v.x()}; }

inline Vec2 rotate(const Vec2& v, double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    return {c * v.x() - s * v.y(), s * v.x() + c * v.y()};
}

/// Planar pose. theta is kept in (-pi, pi] by every operation that builds one.
struct Pose2 {
    double x = 0.0;
    double y = 0.0;
    double theta = 0.0;

    Pose2() = default;
    Pose2(double x_, double y_, double theta_) : x(x_), y(y_), theta(wrap_angle(theta_)) {}
    Pose2(const Vec2& p, double theta_) : Pose2(p.x(), p.y(), theta_) {}

    Vec2 position() const { return {x, y}; }
    Vec2 heading() const { return {std::cos(theta), std::sin(theta)}; }

    bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(theta); }

    /// Maps a point from this frame into the parent frame.
    Vec2 transform(const Vec2& local) const { return position() + rotate(local, theta); }

    /// Maps a parent-frame point into this frame.
    Vec2 inverse_transform(const Vec2& world) const { return rotate(world - position(), -theta); }

    /// this * other: `other` is expressed in this frame.
    Pose2 compose(const Pose2& other) const { return {transform(other.position()), theta + other.theta}; }

    Pose2 inverse() const { return {rotate(-position(), -theta), -theta}; }

    /// Pose of `other` (given in the parent frame) relative to this frame.
    Pose2 relative(const Pose2& other) const { return inverse().compose(other); }

    friend bool operator==(const Pose2&, const Pose2&) = default;
};

inline void require_finite(const Pose2& p, const char* what) {
    if (!p.finite()) throw Error(std::string("non-finite pose: ") + what);
}

}  // namespace pushrl
