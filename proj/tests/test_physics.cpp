#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "pushrl/physics/contact.hpp"
#include "pushrl/physics/object_library.hpp"
#include "pushrl/physics/quasi_static.hpp"
#include "pushrl/check/physics_cases.hpp"

using namespace pushrl;
using pushrl::check::PhysicsCase;

namespace {

constexpr double kPi = std::numbers::pi;

ConvexShape square() { return make_box("square", 0.075, 0.075); }

// Distance from q to the polygon boundary by dense sampling of every edge.
double sampled_boundary_distance(const ConvexShape& s, const Pose2& pose, const Vec2& q) {
    double best = std::numeric_limits<double>::infinity();
    constexpr int kSamples = 20000;
    for (std::size_t e = 0; e < s.size(); ++e) {
        const Vec2 a = pose.transform(s.vertex(e));
        const Vec2 b = pose.transform(s.vertex(e + 1));
        for (int k = 0; k <= kSamples; ++k) {
            const double t = static_cast<double>(k) / kSamples;
            best = std::min(best, (a + t * (b - a) - q).norm());
        }
    }
    return best;
}

Eigen::Matrix3d homogeneous(double x, double y, double th) {
    Eigen::Matrix3d m;
    m << std::cos(th), -std::sin(th), x, std::sin(th), std::cos(th), y, 0, 0, 1;
    return m;
}

// Support friction of a rigid slider with uniform pressure over its area,
// discretized on a grid. The pusher touches at p and moves with velocity v;
// for a sticking contact the object's angular rate is the one for which the
// support friction has no moment about p (a point pusher transmits no torque).
struct SupportOracle {
    std::vector<Vec2> points;  // world coordinates of support cells

    SupportOracle(const ConvexShape& s, const Pose2& pose, int n = 80) {
        const double R = s.circumradius();
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                const Vec2 b(-R + (i + 0.5) * 2 * R / n, -R + (j + 0.5) * 2 * R / n);
                bool inside = true;
                for (std::size_t e = 0; e < s.size(); ++e)
                    if (s.outward_normal(e).dot(b - s.vertex(e)) > 0) inside = false;
                if (inside) points.push_back(pose.transform(b));
            }
        }
    }

    // Net friction wrench (force, moment about p) for the rigid motion whose
    // velocity at p is v and angular rate omega.
    std::pair<Vec2, double> wrench(const Vec2& p, const Vec2& v, double omega) const {
        Vec2 f = Vec2::Zero();
        double m = 0.0;
        for (const auto& x : points) {
            const Vec2 vel = v + omega * perp(x - p);
            const double n = vel.norm();
            if (n == 0.0) continue;
            const Vec2 df = -vel / n;
            f += df;
            m += cross2(x - p, df);
        }
        return {f, m};
    }

    double sticking_omega(const Vec2& p, const Vec2& v) const {
        double lo = -50.0, hi = 50.0;
        // moment about p decreases in omega
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (wrench(p, v, mid).second > 0) lo = mid;
            else hi = mid;
        }
        return 0.5 * (lo + hi);
    }

    double dissipation(const Vec2& p, const Vec2& v, double omega) const {
        double d = 0.0;
        for (const auto& x : points) d += (v + omega * perp(x - p)).norm();
        return d;
    }

    // Motion under a pure force f applied at p: the rigid motion of unit power
    // f . v_p = 1 that dissipates least (maximum-work principle). Returns the
    // velocity of the material point at p and the angular rate.
    std::pair<Vec2, double> motion_for_force(const Vec2& p, const Vec2& f, double length) const {
        const Vec2 base = f / f.squaredNorm();
        const Vec2 side = perp(f).normalized() / f.norm();
        auto eval = [&](double a, double b) { return dissipation(p, base + a * side, b / length); };
        double a = 0.0, b = 0.0;
        auto golden = [](auto&& fn, double lo, double hi) {
            const double g = 0.5 * (std::sqrt(5.0) - 1.0);
            double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
            double f1 = fn(x1), f2 = fn(x2);
            for (int i = 0; i < 60; ++i) {
                if (f1 < f2) {
                    hi = x2; x2 = x1; f2 = f1; x1 = hi - g * (hi - lo); f1 = fn(x1);
                } else {
                    lo = x1; x1 = x2; f1 = f2; x2 = lo + g * (hi - lo); f2 = fn(x2);
                }
            }
            return 0.5 * (lo + hi);
        };
        for (int round = 0; round < 30; ++round) {
            a = golden([&](double t) { return eval(t, b); }, a - 5.0, a + 5.0);
            b = golden([&](double t) { return eval(a, t); }, b - 5.0, b + 5.0);
        }
        return {base + a * side, b / length};
    }
};

PhysicsCase normal_push_case(double offset_along_edge, double mu = 0.3) {
    // Square at the origin, pusher on the left face pushing along +x.
    ObjectSpec obj{square(), SliderParams::defaults_for(square())};
    obj.slider.mu_contact = mu;
    PusherParams pusher{0.02};
    const Pose2 object_pose(0, 0, 0);
    const Pose2 pusher_pose(-0.0375 - 0.02 + 0.001, offset_along_edge, 0);
    auto c = detect_contact(pusher_pose, pusher, obj.shape, object_pose);
    return {obj, pusher, object_pose, pusher_pose, *c, {0.001, 0, 0}};
}

}  // namespace

TEST(ConvexShape, RejectsDegenerateAndClockwise) {
    EXPECT_THROW(ConvexShape("two", {{0, 0}, {1, 0}}), Error);
    EXPECT_THROW(ConvexShape("collinear", {{-1, 0}, {0, 0}, {1, 0}, {0, 1}}), Error);
    EXPECT_THROW(ConvexShape("cw", {{-1, -1}, {-1, 1}, {1, 1}, {1, -1}}), Error);
    EXPECT_THROW(ConvexShape("offcenter", {{0, 0}, {1, 0}, {1, 1}, {0, 1}}), Error);
    EXPECT_NO_THROW(make_regular_polygon("hex", 6, 0.04));
}

TEST(ConvexShape, RegularPolygonFacesMinusX) {
    const auto hex = make_regular_polygon("hex", 6, 0.04);
    bool found = false;
    for (std::size_t i = 0; i < hex.size(); ++i)
        if (hex.outward_normal(i).isApprox(Vec2(-1, 0), 1e-12)) found = true;
    EXPECT_TRUE(found);
    EXPECT_NEAR(hex.inradius(), 0.04 * std::cos(kPi / 6), 1e-12);
}

TEST(SliderParams, Validation) {
    const auto s = square();
    SliderParams p = SliderParams::defaults_for(s);
    EXPECT_NEAR(p.c_ls, 0.6 * s.circumradius(), 1e-15);
    EXPECT_NO_THROW(p.validate(s));
    p.cof_offset = {0.04, 0};
    EXPECT_THROW(p.validate(s), Error);
    p = SliderParams::defaults_for(s);
    p.mu_contact = 0;
    EXPECT_THROW(p.validate(s), Error);
}

TEST(DetectContact, TangencyGivesZeroDepthAndOutwardNormal) {
    const auto s = square();
    const Pose2 obj(0, 0, 0);
    auto c = detect_contact(Pose2(-0.0375 - 0.02, 0.01, 0), {0.02}, s, obj);
    ASSERT_TRUE(c.has_value());
    EXPECT_TRUE(c->touching());
    EXPECT_NEAR(c->depth, 0.0, 1e-15);
    EXPECT_NEAR(c->normal.x(), -1.0, 1e-12);
    EXPECT_NEAR(c->normal.y(), 0.0, 1e-12);
    EXPECT_NEAR(c->normal.norm(), 1.0, 1e-9);
    EXPECT_NEAR(c->point.x(), -0.0375, 1e-15);
    EXPECT_NEAR(c->point.y(), 0.01, 1e-15);
}

TEST(DetectContact, FarPusherHasNoContact) {
    EXPECT_FALSE(detect_contact(Pose2(-0.0375 - 0.1, 0, 0), {0.02}, square(), Pose2(0, 0, 0)).has_value());
}

TEST(DetectContact, ProximityBandIsSeparated) {
    auto c = detect_contact(Pose2(-0.0375 - 0.02 - 0.003, 0, 0), {0.02}, square(), Pose2(0, 0, 0));
    ASSERT_TRUE(c.has_value());
    EXPECT_EQ(c->mode, ContactMode::Separated);
    EXPECT_FALSE(detect_contact(Pose2(-0.0375 - 0.02 - 0.0051, 0, 0), {0.02}, square(), Pose2(0, 0, 0)));
}

TEST(DetectContact, DepthMatchesSampledDistance) {
    const auto s = square();
    const Pose2 obj(0.05, -0.02, 0.3);
    // center 0.018 m outside the left edge, measured along its outward normal
    const Vec2 q = obj.transform(Vec2(-0.0375 - 0.018, 0.005));
    auto c = detect_contact(Pose2(q, 0.3), {0.02}, s, obj);
    ASSERT_TRUE(c.has_value());
    EXPECT_NEAR(c->depth, 0.002, 1e-12);
    EXPECT_NEAR(c->depth, 0.02 - sampled_boundary_distance(s, obj, q), 1e-6);
}

TEST(DetectContact, RandomQueriesAgreeWithSampledDistance) {
    Rng rng(11);
    const auto& lib = pushrl::check::case_library();
    for (int trial = 0; trial < 60; ++trial) {
        const auto names = lib.names();
        const auto& spec = lib.at(names[rng.below(names.size())]);
        const Pose2 obj(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(-kPi, kPi));
        const double R = spec.shape.circumradius();
        const double a = rng.uniform(-kPi, kPi);
        const double rad = rng.uniform(0.5 * spec.shape.inradius(), R + 0.03);
        const Vec2 q = obj.position() + rad * Vec2(std::cos(a), std::sin(a));
        const double r_tip = 0.02;
        const double dist = sampled_boundary_distance(spec.shape, obj, q);
        const auto c = detect_contact(Pose2(q, 0), {r_tip}, spec.shape, obj);
        const auto f = detail::closest_boundary_point(spec.shape, obj.inverse_transform(q));
        const double gap = f.distance - r_tip;
        if (gap > kProximityThreshold + 1e-6) {
            EXPECT_FALSE(c.has_value());
            continue;
        }
        if (!c) continue;  // within sampling error of the threshold
        if (f.distance > 0) EXPECT_NEAR(f.distance, dist, 1e-6);
        else EXPECT_NEAR(-f.distance, dist, 1e-6);
        EXPECT_NEAR(c->normal.norm(), 1.0, 1e-9);
        EXPECT_GE(c->depth, 0.0);
        EXPECT_GE(c->edge_index, 0);
        EXPECT_LT(static_cast<std::size_t>(c->edge_index), spec.shape.size());
    }
}

TEST(SurfacePose, NormalContactIsIdentity) {
    const auto s = square();
    const Pose2 obj(0, 0, 0);
    const Pose2 pusher(-0.0375 - 0.018, 0, 0);
    auto c = detect_contact(pusher, {0.02}, s, obj);
    ASSERT_TRUE(c);
    // tip center sits 18 mm behind the contact point along the heading
    const Pose2 sp = surface_pose(*c, obj, pusher);
    EXPECT_NEAR(sp.x, 0.018, 1e-15);
    EXPECT_EQ(sp.y, 0.0);
    EXPECT_EQ(sp.theta, 0.0);
}

TEST(SurfacePose, RotationAndTangentialOffsetAgainstHomogeneousTransforms) {
    const auto s = square();
    const Pose2 obj(0.02, 0.01, 0.4);
    const Vec2 cp = obj.transform(Vec2(-0.0375, 0));
    const double heading = obj.theta;  // anti-parallel to the outward normal
    for (double rot_deg : {10.0, -10.0, 25.0}) {
        for (double slide : {0.0, 0.005}) {
            // tip center 18 mm behind the contact point, then rotated about it
            const double h = heading + deg2rad(rot_deg);
            const Vec2 tangent = rotate(Vec2(0, 1), obj.theta);
            const Vec2 contact_pt = cp + slide * tangent;
            const Vec2 center = contact_pt - 0.018 * Vec2(std::cos(h), std::sin(h));
            const Pose2 pusher(center, h);
            Contact c;
            c.point = contact_pt;
            c.normal = rotate(Vec2(-1, 0), obj.theta);
            c.depth = 0.002;
            const Pose2 sp = surface_pose(c, obj, pusher);

            const Eigen::Matrix3d t_wp = homogeneous(center.x(), center.y(), h);
            const Eigen::Matrix3d t_wc = homogeneous(contact_pt.x(), contact_pt.y(), obj.theta);
            const Eigen::Matrix3d t_pc = t_wp.inverse() * t_wc;
            EXPECT_NEAR(sp.x, t_pc(0, 2), 1e-12);
            EXPECT_NEAR(sp.y, t_pc(1, 2), 1e-12);
            EXPECT_NEAR(sp.theta, std::atan2(t_pc(1, 0), t_pc(0, 0)), 1e-12);
            EXPECT_NEAR(sp.theta, deg2rad(-rot_deg), 1e-12);
        }
    }
    // pure tangential displacement of the tip
    Contact c;
    c.point = cp;
    c.normal = rotate(Vec2(-1, 0), obj.theta);
    const Vec2 tangent = rotate(Vec2(0, 1), obj.theta);
    const Pose2 pusher(cp - 0.018 * obj.heading() + 0.005 * tangent, heading);
    const Pose2 sp = surface_pose(c, obj, pusher);
    EXPECT_NEAR(std::abs(sp.y), 0.005, 1e-12);
    EXPECT_NEAR(sp.theta, 0.0, 1e-12);
}

TEST(SurfacePose, SeparatedContactThrows) {
    Contact c;
    c.mode = ContactMode::Separated;
    try {
        surface_pose(c, Pose2(), Pose2());
        FAIL();
    } catch (const Error& e) {
        EXPECT_STREQ(e.what(), "no surface pose without contact");
    }
}

TEST(QuasiStatic, NormalPushThroughCofTranslates) {
    const auto pc = normal_push_case(0.0);
    const auto [pose, mode] = quasi_static_step(pc.object_pose, pc.object.slider, pc.contact, pc.pusher_pose, pc.motion);
    EXPECT_EQ(mode, ContactMode::Sticking);
    EXPECT_NEAR(pose.x, 0.001, 1e-15);
    EXPECT_NEAR(pose.y, 0.0, 1e-15);
    EXPECT_EQ(pose.theta, 0.0);
}

TEST(QuasiStatic, OffsetPushRotationSignMatchesSupportFrictionOracle) {
    for (double offset : {0.02, 0.01, -0.01, -0.02}) {
        const auto pc = normal_push_case(offset, 0.8);
        const auto sol = solve_contact(pc.object_pose, pc.object.slider, pc.contact, pc.pusher_pose, pc.motion);
        ASSERT_EQ(sol.mode, ContactMode::Sticking) << offset;
        const SupportOracle oracle(pc.object.shape, pc.object_pose);
        const double omega_ref = oracle.sticking_omega(pc.contact.point, Vec2(0.001, 0));
        EXPECT_NE(sol.twist.omega, 0.0);
        EXPECT_EQ(std::signbit(sol.twist.omega), std::signbit(omega_ref)) << offset;
        // pushing left of the COF (positive y) turns the object clockwise
        EXPECT_EQ(sol.twist.omega < 0, offset > 0);
    }
}

TEST(QuasiStatic, SlidingModeAndRotationSenseAgreeWithOracle) {
    // Tangential component far outside the friction cone.
    const Vec2 n_in(1, 0), t(0, 1);
    for (double side : {1.0, -1.0}) {
        for (double offset : {0.015, -0.015, 0.0}) {
            auto pc = normal_push_case(offset, 0.3);
            pc.motion = {0.0003, side * 0.0015, 0.0};
            const auto sol = solve_contact(pc.object_pose, pc.object.slider, pc.contact, pc.pusher_pose, pc.motion);
            const SupportOracle oracle(pc.object.shape, pc.object_pose, 50);
            const Vec2 p = pc.contact.point;
            const Vec2 v = sol.pusher_velocity;
            // For each cone edge: the object motion that edge force produces,
            // scaled to match the pusher's normal velocity. The consistent edge
            // is the one whose friction opposes the resulting slip.
            int consistent = 0;
            ContactMode oracle_mode = ContactMode::Sticking;
            double oracle_omega = 0.0;
            for (double s : {1.0, -1.0}) {
                const auto [vp, w] = oracle.motion_for_force(p, n_in + s * 0.3 * t, 0.05);
                const double k = v.dot(n_in) / vp.dot(n_in);
                const double slip = (v - k * vp).dot(t);
                if (slip * s > 0) {
                    ++consistent;
                    oracle_mode = s > 0 ? ContactMode::SlidingLeft : ContactMode::SlidingRight;
                    oracle_omega = k * w;
                }
            }
            ASSERT_EQ(consistent, 1) << side << " " << offset;
            EXPECT_EQ(sol.mode, oracle_mode) << side << " " << offset;
            if (offset != 0.0) EXPECT_EQ(std::signbit(sol.twist.omega), std::signbit(oracle_omega));
            // sliding towards +y means the pusher slips left over the object
            EXPECT_EQ(sol.mode, side > 0 ? ContactMode::SlidingLeft : ContactMode::SlidingRight);
            // rotation sense follows the moment of the cone-edge force about the COF
            const Vec2 f_edge = n_in + (sol.mode == ContactMode::SlidingLeft ? 0.3 : -0.3) * t;
            const double moment = cross2(p - sol.cof, f_edge);
            EXPECT_EQ(std::signbit(sol.twist.omega), std::signbit(moment));
            EXPECT_NEAR(std::atan2(std::abs(cross2(n_in, sol.force)), sol.force.dot(n_in)), std::atan(0.3), 1e-12);
        }
    }
}

TEST(QuasiStatic, ZeroMotionWithdrawAndNonFinite) {
    auto pc = normal_push_case(0.01);
    auto r = quasi_static_step(pc.object_pose, pc.object.slider, pc.contact, pc.pusher_pose, {0, 0, 0});
    EXPECT_EQ(r.first, pc.object_pose);
    EXPECT_EQ(r.second, ContactMode::Sticking);
    r = quasi_static_step(pc.object_pose, pc.object.slider, pc.contact, pc.pusher_pose, {-0.001, 0.0005, 0});
    EXPECT_EQ(r.first, pc.object_pose);
    EXPECT_EQ(r.second, ContactMode::Separated);
    EXPECT_THROW(quasi_static_step(pc.object_pose, pc.object.slider, pc.contact, pc.pusher_pose,
                                   {std::nan(""), 0, 0}),
                 Error);
    EXPECT_THROW(quasi_static_step(Pose2(std::numeric_limits<double>::infinity(), 0, 0), pc.object.slider,
                                   pc.contact, pc.pusher_pose, pc.motion),
                 Error);
    EXPECT_THROW(quasi_static_step(pc.object_pose, pc.object.slider, pc.contact, pc.pusher_pose, {0.003, 0, 0}),
                 Error);
    Contact sep = pc.contact;
    sep.mode = ContactMode::Separated;
    EXPECT_THROW(quasi_static_step(pc.object_pose, pc.object.slider, sep, pc.pusher_pose, pc.motion), Error);
}

TEST(QuasiStatic, RandomizedInvariants) {
    Rng rng(2024);
    int sticking = 0, sliding = 0;
    for (int i = 0; i < 2000; ++i) {
        const PhysicsCase c = pushrl::check::random_case(rng);
        const auto sol = solve_contact(c.object_pose, c.object.slider, c.contact, c.pusher_pose, c.motion);
        const auto [pose, mode] = quasi_static_step(c.object_pose, c.object.slider, c.contact, c.pusher_pose, c.motion);
        ASSERT_EQ(mode, sol.mode);
        EXPECT_GT(pose.theta, -kPi);
        EXPECT_LE(pose.theta, kPi);
        if (mode == ContactMode::Separated) {
            EXPECT_EQ(pose, c.object_pose);
            continue;
        }
        const Vec2 n_in = -c.contact.normal;
        const double angle = std::atan2(std::abs(cross2(n_in, sol.force)), sol.force.dot(n_in));
        const double cone = std::atan(c.object.slider.mu_contact);
        if (mode == ContactMode::Sticking) {
            ++sticking;
            EXPECT_LE((sol.object_velocity - sol.pusher_velocity).norm(), 1e-9);
            EXPECT_LE(angle, cone + 1e-9);
        } else {
            ++sliding;
            EXPECT_NEAR(angle, cone, 1e-9);
        }
        // determinism
        const auto again = quasi_static_step(c.object_pose, c.object.slider, c.contact, c.pusher_pose, c.motion);
        EXPECT_EQ(again.first, pose);

        const PhysicsCase m = pushrl::check::mirror_case(c);
        const auto msol = solve_contact(m.object_pose, m.object.slider, m.contact, m.pusher_pose, m.motion);
        EXPECT_NEAR(msol.twist.v_cof.x(), sol.twist.v_cof.x(), 1e-9);
        EXPECT_NEAR(msol.twist.v_cof.y(), -sol.twist.v_cof.y(), 1e-9);
        EXPECT_NEAR(msol.twist.omega, -sol.twist.omega, 1e-9);
    }
    EXPECT_GT(sticking, 100);
    EXPECT_GT(sliding, 100);
}

TEST(QuasiStatic, WithdrawingMotionNeverMovesObject) {
    Rng rng(7);
    for (int i = 0; i < 500; ++i) {
        PhysicsCase c = pushrl::check::random_case(rng);
        const auto sol = solve_contact(c.object_pose, c.object.slider, c.contact, c.pusher_pose, c.motion);
        if (sol.pusher_velocity.dot(-c.contact.normal) > 0) continue;
        const auto r = quasi_static_step(c.object_pose, c.object.slider, c.contact, c.pusher_pose, c.motion);
        EXPECT_EQ(r.first, c.object_pose);
        EXPECT_EQ(r.second, ContactMode::Separated);
    }
}

TEST(ObjectLibrary, DefaultRoundTripAndShippedFile) {
    const auto lib = default_object_library();
    for (const char* n : {"square-0.075", "circle-0.045", "hexagon-0.04", "thin-box-0.09x0.03", "large-circle-0.08"})
        EXPECT_TRUE(lib.contains(n)) << n;
    const auto back = ObjectLibrary::from_json(lib.to_json());
    EXPECT_EQ(back.to_json(), lib.to_json());
    const auto shipped = ObjectLibrary::load(PUSHRL_DATA_DIR "/objects.json");
    EXPECT_EQ(shipped.names(), lib.names());
    for (const auto& n : lib.names()) {
        const auto& a = shipped.at(n);
        const auto& b = lib.at(n);
        ASSERT_EQ(a.shape.size(), b.shape.size());
        for (std::size_t i = 0; i < a.shape.size(); ++i)
            EXPECT_LT((a.shape.vertex(i) - b.shape.vertex(i)).norm(), 1e-12);
        EXPECT_NEAR(a.slider.c_ls, b.slider.c_ls, 1e-12);
    }
}

TEST(ObjectLibrary, RejectsUnknownKeysAndNames) {
    auto j = default_object_library().to_json();
    j["objects"]["square-0.075"]["colour"] = "red";
    EXPECT_THROW(ObjectLibrary::from_json(j), ConfigError);
    try {
        default_object_library().at("banana");
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("square-0.075"), std::string::npos);
    }
}
