#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <utility>

#include "pushrl/core/error.hpp"
#include "pushrl/core/pose.hpp"
#include "pushrl/core/rng.hpp"
#include "pushrl/env/task.hpp"
#include "pushrl/physics/contact.hpp"
#include "pushrl/physics/quasi_static.hpp"
#include "pushrl/physics/shape.hpp"

namespace pushrl {

struct StepInfo {
    ContactMode mode = ContactMode::Sticking;
    double distance_to_goal = 0.0;
};

struct StepResult {
    PolicyObservation observation;
    ModelState model_state;
    double reward = 0.0;
    bool terminated = false;  ///< goal reached
    bool failed = false;      ///< contact lost
    bool truncated = false;   ///< step limit
    StepInfo info;

    bool done() const { return terminated || failed || truncated; }
};

/// Goal-conditioned pushing task over the quasi-static simulator.
///
/// Stateful and single-threaded; construct one per worker.
class PushEnv {
public:
    PushEnv(EnvConfig config, ObjectSpec object, PusherParams pusher = {}, std::uint64_t seed = 0)
        : config_(std::move(config)), object_(std::move(object)), pusher_(pusher), rng_(seed, 0x656e76) {
        config_.validate();
        object_.slider.validate(object_.shape);
        pusher_.validate();
    }

    /// Reset with a goal drawn from the edge band.
    std::pair<PolicyObservation, ModelState> reset() { return reset_to(sample_band_goal(config_, rng_)); }

    /// Reset with a fresh goal stream derived from `seed`.
    std::pair<PolicyObservation, ModelState> reset(std::uint64_t seed) {
        rng_ = Rng(seed, 0x656e76);
        return reset();
    }

    std::pair<PolicyObservation, ModelState> reset(const Goal& goal) {
        if (!config_.workspace.contains(goal.x, goal.y)) throw Error("goal outside workspace");
        return reset_to(goal);
    }

    StepResult step(const Action& requested) {
        if (!started_) throw Error("step before reset");
        if (finished_) throw Error("episode finished");
        const Action a = clamp_action(requested, config_);
        const int n = config_.substeps;
        const PusherMotion sub{config_.dx_fixed / n, a.dy / n, a.dtheta / n};

        ContactMode mode = last_mode_;
        bool lost = false;
        for (int k = 0; k < n && !lost; ++k) {
            if (!contact_ || !contact_->touching()) {
                lost = true;
                break;
            }
            auto [next_obj, m] = quasi_static_step(object_pose_, object_.slider, *contact_, pusher_pose_, sub);
            mode = m;
            object_pose_ = next_obj;
            pusher_pose_ = pusher_after(pusher_pose_, sub);
            contact_ = detect_contact(pusher_pose_, pusher_, object_.shape, object_pose_);
            if (contact_ && contact_->touching() && mode != ContactMode::Separated) stabilize_depth();
            lost = !contact_ || !contact_->touching();
        }
        ++steps_;
        last_mode_ = lost ? ContactMode::Separated : mode;

        StepResult r;
        const Pose2 cf = observed_contact_frame();
        r.model_state = make_model_state(cf, pusher_pose_);
        r.observation = make_policy_observation(cf, pusher_pose_, goal_);
        r.reward = reward(cf, pusher_pose_.theta, goal_, config_);
        r.info.mode = last_mode_;
        r.info.distance_to_goal = (cf.position() - goal_.position()).norm();
        if (lost && config_.contact_loss_terminates) {
            r.failed = true;
        } else if (r.info.distance_to_goal <= config_.success_tolerance) {
            r.terminated = true;
        } else if (steps_ >= config_.max_steps) {
            r.truncated = true;
        }
        finished_ = r.done();
        return r;
    }

    const EnvConfig& config() const { return config_; }
    const ObjectSpec& object() const { return object_; }
    const PusherParams& pusher() const { return pusher_; }
    const Pose2& pusher_pose() const { return pusher_pose_; }
    const Pose2& object_pose() const { return object_pose_; }
    const std::optional<Contact>& contact() const { return contact_; }
    const Goal& goal() const { return goal_; }
    int steps() const { return steps_; }
    bool finished() const { return finished_; }
    ContactMode mode() const { return last_mode_; }

    /// Contact frame used for observations. Falls back to the closest boundary
    /// feature when the pusher is out of proximity range.
    Pose2 observed_contact_frame() const {
        if (contact_) return contact_frame(*contact_);
        const Vec2 q = object_pose_.inverse_transform(pusher_pose_.position());
        const auto f = detail::closest_boundary_point(object_.shape, q);
        Contact c;
        c.point = object_pose_.transform(f.point);
        c.normal = rotate(f.normal, object_pose_.theta);
        return contact_frame(c);
    }

private:
    // Per-substep cap on the indentation correction; it only absorbs the
    // second-order drift of the first-order twist integration.
    static constexpr double kDepthCorrectionCap = 2e-5;

    std::pair<PolicyObservation, ModelState> reset_to(const Goal& goal) {
        goal_ = goal;
        steps_ = 0;
        finished_ = false;
        started_ = true;
        last_mode_ = ContactMode::Sticking;
        place_initial_configuration();
        const Pose2 cf = observed_contact_frame();
        return {make_policy_observation(cf, pusher_pose_, goal_), make_model_state(cf, pusher_pose_)};
    }

    // Pusher heads along +x with its contact at the origin; the object sits
    // ahead of it. An optional angular offset rotates the object about the
    // contact point before the indentation is re-seated.
    void place_initial_configuration() {
        const double r = pusher_.tip_radius;
        const double depth = config_.initial_depth;
        pusher_pose_ = Pose2(-(r - depth), 0.0, 0.0);

        const double th = config_.initial_object_theta;
        // Leftmost boundary point of the rotated shape on the line through its center.
        double x_min = 0.0;
        const auto& s = object_.shape;
        for (std::size_t i = 0; i < s.size(); ++i) {
            const Vec2 a = rotate(s.vertex(i), th), b = rotate(s.vertex(i + 1), th);
            if ((a.y() <= 0.0 && b.y() > 0.0) || (a.y() > 0.0 && b.y() <= 0.0)) {
                const double t = a.y() / (a.y() - b.y());
                x_min = std::min(x_min, a.x() + t * (b.x() - a.x()));
            }
        }
        object_pose_ = Pose2(-x_min, 0.0, th);

        if (config_.initial_contact_angle != 0.0) {
            const double da = config_.initial_contact_angle;
            const Vec2 c = rotate(object_pose_.position(), da);
            object_pose_ = Pose2(c, object_pose_.theta + da);
        }
        for (int it = 0; it < 4; ++it) {
            contact_ = detect_contact(pusher_pose_, pusher_, object_.shape, object_pose_);
            if (!contact_) throw Error("initial configuration has no contact");
            const Vec2 shift = (contact_->depth - depth) * (-contact_->normal);
            object_pose_ = Pose2(object_pose_.position() + shift, object_pose_.theta);
        }
        contact_ = detect_contact(pusher_pose_, pusher_, object_.shape, object_pose_);
    }

    void stabilize_depth() {
        const double err = std::clamp(contact_->depth - config_.initial_depth, -kDepthCorrectionCap, kDepthCorrectionCap);
        object_pose_ = Pose2(object_pose_.position() - err * contact_->normal, object_pose_.theta);
        contact_ = detect_contact(pusher_pose_, pusher_, object_.shape, object_pose_);
    }

    EnvConfig config_;
    ObjectSpec object_;
    PusherParams pusher_;
    Rng rng_;

    Goal goal_;
    Pose2 pusher_pose_;
    Pose2 object_pose_;
    std::optional<Contact> contact_;
    ContactMode last_mode_ = ContactMode::Sticking;
    int steps_ = 0;
    bool finished_ = false;
    bool started_ = false;
};

}  // namespace pushrl
