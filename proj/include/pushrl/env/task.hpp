#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "json.hpp"

#include "pushrl/core/error.hpp"
#include "pushrl/core/json_fields.hpp"
#include "pushrl/core/pose.hpp"
#include "pushrl/core/rng.hpp"

namespace pushrl {

struct Workspace {
    double x_min = 0.0, x_max = 0.4;
    double y_min = -0.3, y_max = 0.3;

    bool contains(double x, double y) const { return x >= x_min && x <= x_max && y >= y_min && y <= y_max; }
    double width() const { return x_max - x_min; }
    double height() const { return y_max - y_min; }
    double diagonal() const { return std::hypot(width(), height()); }
};

struct EnvConfig {
    Workspace workspace;
    double goal_band_width = 0.05;
    double approach_distance = 0.1;
    double success_tolerance = 0.025;
    double dx_fixed = 0.001;
    double dy_max = 0.001;
    double dtheta_max = std::numbers::pi / 180.0;
    int max_steps = 1000;
    bool contact_loss_terminates = true;
    /// Object orientation at reset (world frame), radians.
    double initial_object_theta = 0.0;
    /// Rotation of the object about the initial contact point, radians.
    double initial_contact_angle = 0.0;
    /// Indentation of the pusher tip into the object at reset.
    double initial_depth = 0.002;
    /// Quasi-static sub-steps per environment step.
    int substeps = 4;

    void validate() const {
        const double extent = std::min(workspace.width(), workspace.height());
        if (!(workspace.x_max > workspace.x_min && workspace.y_max > workspace.y_min))
            throw ConfigError("env.workspace: empty rectangle");
        if (!(success_tolerance > 0.0 && success_tolerance < approach_distance && approach_distance < extent))
            throw ConfigError("env: need 0 < success_tolerance < approach_distance < workspace extent");
        if (!(dx_fixed > 0.0)) throw ConfigError("env.dx_fixed: must be > 0");
        if (!(dy_max >= 0.0 && dtheta_max >= 0.0)) throw ConfigError("env: action bounds must be >= 0");
        if (max_steps <= 0) throw ConfigError("env.max_steps: must be > 0");
        if (!(goal_band_width > 0.0)) throw ConfigError("env.goal_band_width: must be > 0");
        if (substeps <= 0) throw ConfigError("env.substeps: must be > 0");
        if (!(initial_depth >= 0.0)) throw ConfigError("env.initial_depth: must be >= 0");
    }
};

inline void to_json(nlohmann::json& j, const EnvConfig& c) {
    j = {{"workspace", {c.workspace.x_min, c.workspace.x_max, c.workspace.y_min, c.workspace.y_max}},
         {"goal_band_width", c.goal_band_width},
         {"approach_distance", c.approach_distance},
         {"success_tolerance", c.success_tolerance},
         {"dx_fixed", c.dx_fixed},
         {"dy_max", c.dy_max},
         {"dtheta_max", c.dtheta_max},
         {"max_steps", c.max_steps},
         {"contact_loss_terminates", c.contact_loss_terminates},
         {"initial_object_theta", c.initial_object_theta},
         {"initial_contact_angle", c.initial_contact_angle},
         {"initial_depth", c.initial_depth},
         {"substeps", c.substeps}};
}

inline EnvConfig env_config_from_json(const nlohmann::json& j, const std::string& path = "env") {
    EnvConfig c;
    JsonFields f(j, path);
    if (f.has("workspace")) {
        std::array<double, 4> w{};
        f.read("workspace", w);
        c.workspace = {w[0], w[1], w[2], w[3]};
    }
    f.read("goal_band_width", c.goal_band_width);
    f.read("approach_distance", c.approach_distance);
    f.read("success_tolerance", c.success_tolerance);
    f.read("dx_fixed", c.dx_fixed);
    f.read("dy_max", c.dy_max);
    f.read("dtheta_max", c.dtheta_max);
    f.read("max_steps", c.max_steps);
    f.read("contact_loss_terminates", c.contact_loss_terminates);
    f.read("initial_object_theta", c.initial_object_theta);
    f.read("initial_contact_angle", c.initial_contact_angle);
    f.read("initial_depth", c.initial_depth);
    f.read("substeps", c.substeps);
    f.finish();
    c.validate();
    return c;
}

struct Goal {
    double x = 0.0;
    double y = 0.0;

    Vec2 position() const { return {x, y}; }
    friend bool operator==(const Goal&, const Goal&) = default;
};

/// Lateral and rotational pusher increments; forward motion is fixed by the env.
struct Action {
    double dy = 0.0;
    double dtheta = 0.0;

    friend bool operator==(const Action&, const Action&) = default;
};

inline Action clamp_action(const Action& a, const EnvConfig& c) {
    auto clip = [](double v, double m) { return std::isfinite(v) ? std::clamp(v, -m, m) : throw Error("non-finite action"); };
    return {clip(a.dy, c.dy_max), clip(a.dtheta, c.dtheta_max)};
}

/// Goal-aware observation for the model-free policy: contact surface pose in
/// the pusher frame followed by the goal in the contact frame.
struct PolicyObservation {
    static constexpr int kDim = 6;
    double x_po = 0, y_po = 0, theta_po = 0;
    double x_og = 0, y_og = 0, theta_og = 0;

    std::array<double, kDim> to_array() const { return {x_po, y_po, theta_po, x_og, y_og, theta_og}; }
    friend bool operator==(const PolicyObservation&, const PolicyObservation&) = default;
};

/// Goal-free state for the dynamics model: contact surface pose in the pusher
/// frame followed by the contact frame in the world.
struct ModelState {
    static constexpr int kDim = 6;
    double x_po = 0, y_po = 0, theta_po = 0;
    double x_o = 0, y_o = 0, theta_o = 0;

    std::array<double, kDim> to_array() const { return {x_po, y_po, theta_po, x_o, y_o, theta_o}; }
    static ModelState from_array(const double* v) { return {v[0], v[1], wrap_angle(v[2]), v[3], v[4], wrap_angle(v[5])}; }

    Pose2 contact_world() const { return {x_o, y_o, theta_o}; }
    double pusher_theta() const { return wrap_angle(theta_o - theta_po); }
    friend bool operator==(const ModelState&, const ModelState&) = default;
};

/// Direction from the contact position to the goal in the world frame.
/// Coincident points give 0.
inline double bearing(const Vec2& o_xy, const Vec2& g_xy) {
    const Vec2 d = g_xy - o_xy;
    if (d.x() == 0.0 && d.y() == 0.0) return 0.0;
    return wrap_angle(std::atan2(d.y(), d.x()));
}

inline double cosine_distance(double a, double b) { return 1.0 - std::cos(a - b); }

/// Shaped pushing reward. Outside the approach zone the contact surface is
/// steered toward the goal bearing; inside it the Euclidean distance takes
/// over. Both zones penalize a non-normal pusher.
inline double reward(const Pose2& contact_frame, double pusher_theta, const Goal& goal, const EnvConfig& config) {
    if (!contact_frame.finite() || !std::isfinite(pusher_theta) || !std::isfinite(goal.x) || !std::isfinite(goal.y))
        throw Error("reward: non-finite input");
    const Vec2 o = contact_frame.position();
    const double dist = (o - goal.position()).norm();
    const double normality = cosine_distance(pusher_theta, contact_frame.theta);
    if (dist > config.approach_distance)
        return -(cosine_distance(contact_frame.theta, bearing(o, goal.position())) + normality);
    return -(dist + normality);
}

inline double reward(const ModelState& s, const Goal& goal, const EnvConfig& config) {
    return reward(s.contact_world(), s.pusher_theta(), goal, config);
}

inline ModelState make_model_state(const Pose2& contact_world, const Pose2& pusher_pose) {
    const Pose2 rel = pusher_pose.relative(contact_world);
    return {rel.x, rel.y, rel.theta, contact_world.x, contact_world.y, contact_world.theta};
}

inline PolicyObservation make_policy_observation(const Pose2& contact_world, const Pose2& pusher_pose, const Goal& goal) {
    const Pose2 rel = pusher_pose.relative(contact_world);
    const Vec2 g_local = contact_world.inverse_transform(goal.position());
    const double th = wrap_angle(bearing(contact_world.position(), goal.position()) - contact_world.theta);
    return {rel.x, rel.y, rel.theta, g_local.x(), g_local.y(), th};
}

inline PolicyObservation make_policy_observation(const ModelState& s, const Goal& goal) {
    const Pose2 cw = s.contact_world();
    const Vec2 g_local = cw.inverse_transform(goal.position());
    const double th = wrap_angle(bearing(cw.position(), goal.position()) - cw.theta);
    return {s.x_po, s.y_po, s.theta_po, g_local.x(), g_local.y(), th};
}

/// Samples a goal uniformly from the band of the given width along the
/// workspace edges.
inline Goal sample_band_goal(const EnvConfig& c, Rng& rng) {
    const auto& w = c.workspace;
    const double b = c.goal_band_width;
    for (;;) {
        const double x = rng.uniform(w.x_min, w.x_max);
        const double y = rng.uniform(w.y_min, w.y_max);
        if (x - w.x_min <= b || w.x_max - x <= b || y - w.y_min <= b || w.y_max - y <= b) return {x, y};
    }
}

}  // namespace pushrl
