#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "pushrl/core/rng.hpp"
#include "pushrl/env/task.hpp"

namespace pushrl::check {

struct RewardCheckReport {
    int configurations = 0;
    int near_branch = 0;
    int far_branch = 0;
    double max_abs_error = 0.0;
    int sweeps = 0;
    int monotonicity_violations = 0;
};

/// Straight-from-the-definition reward used as the oracle.
inline double reward_oracle(double ox, double oy, double otheta, double pusher_theta, double gx, double gy, double approach) {
    const double dist = std::sqrt((gx - ox) * (gx - ox) + (gy - oy) * (gy - oy));
    const double normality = 1.0 - std::cos(pusher_theta - otheta);
    if (dist <= approach) return -(dist + normality);
    const double beta = std::atan2(gy - oy, gx - ox);
    return -((1.0 - std::cos(otheta - beta)) + normality);
}

/// Random configurations split evenly across both zones, plus 1-degree
/// sweeps of the contact heading away from the goal bearing in the far zone.
inline RewardCheckReport run_reward_checks(int configurations, int sweeps, std::uint64_t seed) {
    RewardCheckReport rep;
    const EnvConfig cfg;
    Rng rng(seed, 0x72657764);
    const double pi = std::numbers::pi;
    for (int i = 0; i < configurations; ++i, ++rep.configurations) {
        const Goal g{rng.uniform(0.0, 0.4), rng.uniform(-0.3, 0.3)};
        const double d = (i % 2 == 0) ? rng.uniform(0.0, cfg.approach_distance) : rng.uniform(cfg.approach_distance * 1.0001, 0.5);
        const double a = rng.uniform(-pi, pi);
        const Pose2 o(g.x - d * std::cos(a), g.y - d * std::sin(a), rng.uniform(-pi, pi));
        const double pth = o.theta + rng.uniform(-0.5, 0.5);
        const double r = reward(o, pth, g, cfg);
        const double ref = reward_oracle(o.x, o.y, o.theta, pth, g.x, g.y, cfg.approach_distance);
        rep.max_abs_error = std::max(rep.max_abs_error, std::abs(r - ref));
        (d <= cfg.approach_distance ? rep.near_branch : rep.far_branch)++;
    }
    for (int s = 0; s < sweeps; ++s, ++rep.sweeps) {
        const Goal g{rng.uniform(0.0, 0.4), rng.uniform(-0.3, 0.3)};
        const double d = rng.uniform(cfg.approach_distance * 1.01, 0.5);
        const double a = rng.uniform(-pi, pi);
        const Vec2 o(g.x - d * std::cos(a), g.y - d * std::sin(a));
        const double side = rng.uniform() < 0.5 ? -1.0 : 1.0;
        double prev = reward(Pose2(o, a), a, g, cfg);
        for (int deg = 1; deg <= 180; ++deg) {
            const double th = a + side * deg * pi / 180.0;
            const double r = reward(Pose2(o, th), th, g, cfg);
            if (!(r < prev)) ++rep.monotonicity_violations;
            prev = r;
        }
    }
    return rep;
}

}  // namespace pushrl::check
