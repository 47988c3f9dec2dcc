#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "pushrl/core/error.hpp"
#include "pushrl/core/pose.hpp"

namespace pushrl {

/// Strictly convex polygon in body coordinates, vertices counter-clockwise.
/// Validated at construction, so every live instance satisfies the invariants.
class ConvexShape {
public:
    ConvexShape(std::string name, std::vector<Vec2> vertices)
        : name_(std::move(name)), vertices_(std::move(vertices)) {
        validate();
    }

    const std::string& name() const { return name_; }
    const std::vector<Vec2>& vertices() const { return vertices_; }
    std::size_t size() const { return vertices_.size(); }

    const Vec2& vertex(std::size_t i) const { return vertices_[i % vertices_.size()]; }
    Vec2 edge(std::size_t i) const { return vertex(i + 1) - vertex(i); }

    /// Outward unit normal of edge i (edge i runs from vertex i to vertex i+1).
    Vec2 outward_normal(std::size_t i) const {
        const Vec2 e = edge(i).normalized();
        return {e.y(), -e.x()};
    }

    double circumradius() const {
        double r = 0.0;
        for (const auto& v : vertices_) r = std::max(r, v.norm());
        return r;
    }

    /// Distance from the body origin to the nearest edge line.
    double inradius() const {
        double r = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < size(); ++i) r = std::min(r, outward_normal(i).dot(vertex(i)));
        return r;
    }

    Vec2 area_centroid() const {
        double a = 0.0;
        Vec2 c = Vec2::Zero();
        for (std::size_t i = 0; i < size(); ++i) {
            const double w = cross2(vertex(i), vertex(i + 1));
            a += w;
            c += w * (vertex(i) + vertex(i + 1));
        }
        return c / (3.0 * a);
    }

    /// Mirror image about the body x-axis (y -> -y); order is reversed to stay CCW.
    ConvexShape mirrored_y() const {
        std::vector<Vec2> v;
        v.reserve(size());
        for (auto it = vertices_.rbegin(); it != vertices_.rend(); ++it) v.emplace_back(it->x(), -it->y());
        return ConvexShape(name_ + "-mirror", std::move(v));
    }

private:
    void validate() const {
        if (vertices_.size() < 3) throw Error("shape '" + name_ + "': need at least 3 vertices");
        for (const auto& v : vertices_)
            if (!std::isfinite(v.x()) || !std::isfinite(v.y()))
                throw Error("shape '" + name_ + "': non-finite vertex");
        for (std::size_t i = 0; i < size(); ++i) {
            if (edge(i).norm() <= 0.0) throw Error("shape '" + name_ + "': repeated vertex");
            if (cross2(edge(i), edge(i + 1)) <= 0.0)
                throw Error("shape '" + name_ + "': not strictly convex and counter-clockwise at vertex " +
                            std::to_string((i + 1) % size()));
        }
        const Vec2 c = area_centroid();
        if (c.norm() > 1e-9 * std::max(1.0, circumradius()))
            throw Error("shape '" + name_ + "': centroid must sit at the body origin");
    }

    std::string name_;
    std::vector<Vec2> vertices_;
};

/// Axis-aligned box with the given extents along body x and y.
inline ConvexShape make_box(std::string name, double size_x, double size_y) {
    const double hx = 0.5 * size_x, hy = 0.5 * size_y;
    return ConvexShape(std::move(name), {{-hx, -hy}, {hx, -hy}, {hx, hy}, {-hx, hy}});
}

/// Regular n-gon with the given circumradius. A flat edge faces -x so a pusher
/// approaching along +x starts on a face, not a corner.
inline ConvexShape make_regular_polygon(std::string name, int n, double circumradius) {
    if (n < 3) throw Error("regular polygon needs n >= 3");
    std::vector<Vec2> v;
    v.reserve(static_cast<std::size_t>(n));
    const double step = 2.0 * std::numbers::pi / n;
    for (int k = 0; k < n; ++k) {
        const double a = std::numbers::pi + (k - 0.5) * step;
        v.emplace_back(circumradius * std::cos(a), circumradius * std::sin(a));
    }
    return ConvexShape(std::move(name), std::move(v));
}

/// Friction parameters of the object on the support plane and at the pusher.
struct SliderParams {
    double mu_contact = 0.3;
    double c_ls = 0.0;  ///< limit-surface ratio tau_max / f_max [m]
    Vec2 cof_offset = Vec2::Zero();

    static SliderParams defaults_for(const ConvexShape& shape) {
        SliderParams p;
        p.c_ls = 0.6 * shape.circumradius();
        return p;
    }

    void validate(const ConvexShape& shape) const {
        if (!(mu_contact > 0.0) || !std::isfinite(mu_contact)) throw Error("mu_contact must be > 0");
        if (!(c_ls > 0.0) || !std::isfinite(c_ls)) throw Error("c_ls must be > 0");
        if (!(cof_offset.norm() < shape.inradius()))
            throw Error("cof_offset must lie strictly inside the inscribed circle of '" + shape.name() + "'");
    }
};

struct PusherParams {
    double tip_radius = 0.02;

    void validate() const {
        if (!(tip_radius > 0.0) || !std::isfinite(tip_radius)) throw Error("tip_radius must be > 0");
    }
};

/// Shape plus friction parameters: one entry of the object library.
struct ObjectSpec {
    ConvexShape shape;
    SliderParams slider;
};

}  // namespace pushrl
