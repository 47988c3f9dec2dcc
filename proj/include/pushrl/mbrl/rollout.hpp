#pragma once

#include <functional>
#include <span>
#include <vector>

#include "pushrl/core/error.hpp"
#include "pushrl/core/rng.hpp"
#include "pushrl/env/task.hpp"
#include "pushrl/mbrl/ensemble.hpp"

namespace pushrl::mbrl {

/// Reward of landing in `next_state` after applying `action`.
using StepReward = std::function<double(const double* next_state, const double* action)>;

/// Pushing reward on predicted model states for a fixed goal.
inline StepReward pushing_reward(const Goal& goal, const EnvConfig& config) {
    return [goal, config](const double* s, const double*) { return reward(ModelState::from_array(s), goal, config); };
}

/// TS1 evaluation of `count` flat action sequences: every sequence is
/// propagated by `particles` particles, and each particle re-draws its
/// ensemble member at every step. Returns the particle-mean return per sequence.
/// With `sample` false particles follow member means (no aleatoric noise).
inline std::vector<double> evaluate_sequences_ts1(const Ensemble& ensemble, std::span<const double> start,
                                                  const std::vector<double>& sequences, std::size_t count, int horizon,
                                                  int particles, const StepReward& step_reward, Rng& rng,
                                                  bool sample = true) {
    const std::size_t sd = ensemble.state_dim(), ad = ensemble.action_dim();
    const std::size_t len = static_cast<std::size_t>(horizon) * ad;
    if (start.size() != sd) throw Error("rollout: start state has the wrong dimension");
    if (sequences.size() != count * len) throw Error("rollout: action sequence length does not match the horizon");
    if (particles < 1) throw Error("rollout: need at least one particle");
    const std::size_t p = static_cast<std::size_t>(particles);
    const std::size_t rows = count * p;

    std::vector<double> state(rows * sd), next(rows * sd), actions(rows * ad), returns(rows, 0.0);
    for (std::size_t r = 0; r < rows; ++r) std::copy(start.begin(), start.end(), state.begin() + static_cast<std::ptrdiff_t>(r * sd));
    std::vector<int> members(rows);
    const auto n_members = static_cast<std::uint64_t>(ensemble.size());
    for (int k = 0; k < horizon; ++k) {
        for (std::size_t r = 0; r < rows; ++r) {
            const std::size_t seq = r / p;
            for (std::size_t j = 0; j < ad; ++j) actions[r * ad + j] = sequences[seq * len + static_cast<std::size_t>(k) * ad + j];
            members[r] = static_cast<int>(rng.below(n_members));
        }
        ensemble.predict_batch(state.data(), actions.data(), members, sample ? &rng : nullptr, next.data());
        for (std::size_t r = 0; r < rows; ++r) returns[r] += step_reward(next.data() + r * sd, actions.data() + r * ad);
        state.swap(next);
    }
    std::vector<double> out(count, 0.0);
    for (std::size_t r = 0; r < rows; ++r) out[r / p] += returns[r];
    for (auto& v : out) v /= static_cast<double>(p);
    return out;
}

struct RolloutResult {
    /// trajectories[particle][step] is a full state; step 0 is the start.
    std::vector<std::vector<std::vector<double>>> trajectories;
    double ret = 0.0;
};

/// TS1 rollout of a single action sequence, keeping every particle's states.
inline RolloutResult rollout_ts1(const Ensemble& ensemble, std::span<const double> start,
                                 const std::vector<double>& actions, int horizon, const StepReward& step_reward,
                                 Rng& rng, int particles = 20, bool sample = true) {
    const std::size_t sd = ensemble.state_dim(), ad = ensemble.action_dim();
    if (start.size() != sd) throw Error("rollout: start state has the wrong dimension");
    if (horizon < 0 || actions.size() != static_cast<std::size_t>(horizon) * ad)
        throw Error("rollout: action sequence length does not match the horizon");
    if (particles < 1) throw Error("rollout: need at least one particle");
    RolloutResult res;
    res.trajectories.assign(static_cast<std::size_t>(particles), {std::vector<double>(start.begin(), start.end())});
    const auto n_members = static_cast<std::uint64_t>(ensemble.size());
    for (auto& traj : res.trajectories) {
        for (int k = 0; k < horizon; ++k) {
            const double* a = actions.data() + static_cast<std::size_t>(k) * ad;
            const int member = static_cast<int>(rng.below(n_members));
            auto next = ensemble.predict(traj.back(), std::span<const double>(a, ad), member, sample ? &rng : nullptr);
            res.ret += step_reward(next.data(), a);
            traj.push_back(std::move(next));
        }
    }
    res.ret /= static_cast<double>(particles);
    return res;
}

}  // namespace pushrl::mbrl
