#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "pushrl/core/error.hpp"
#include "pushrl/core/json_fields.hpp"
#include "pushrl/core/rng.hpp"
#include "pushrl/env/task.hpp"
#include "pushrl/mbrl/ensemble.hpp"
#include "pushrl/mbrl/rollout.hpp"
#include "pushrl/mbrl/trajectory_opt.hpp"

namespace pushrl::mbrl {

enum class OptimizerKind { Cem, Mppi };

struct MpcConfig {
    OptimizerKind optimizer = OptimizerKind::Cem;
    CemConfig cem;
    MppiConfig mppi;
    int particles = 20;
    bool sample_aleatoric = true;

    int horizon() const { return optimizer == OptimizerKind::Cem ? cem.horizon : mppi.horizon; }

    void validate() const {
        cem.validate();
        mppi.validate();
        if (particles < 1) throw ConfigError("mpc.particles must be >= 1");
    }
};

inline void to_json(nlohmann::json& j, const MpcConfig& c) {
    j = {{"optimizer", c.optimizer == OptimizerKind::Cem ? "cem" : "mppi"},
         {"cem", c.cem},
         {"mppi", c.mppi},
         {"particles", c.particles},
         {"sample_aleatoric", c.sample_aleatoric}};
}

inline MpcConfig mpc_config_from_json(const nlohmann::json& j, const std::string& path) {
    MpcConfig c;
    JsonFields f(j, path);
    std::string opt = "cem";
    f.read("optimizer", opt);
    if (opt == "cem")
        c.optimizer = OptimizerKind::Cem;
    else if (opt == "mppi")
        c.optimizer = OptimizerKind::Mppi;
    else
        throw ConfigError(f.field("optimizer") + ": must be cem or mppi");
    if (f.has("cem")) c.cem = cem_config_from_json(f.sub("cem"), f.field("cem"));
    if (f.has("mppi")) c.mppi = mppi_config_from_json(f.sub("mppi"), f.field("mppi"));
    f.read("particles", c.particles);
    f.read("sample_aleatoric", c.sample_aleatoric);
    f.finish();
    c.validate();
    return c;
}

/// Scores action sequences starting from a given state.
using StateObjective =
    std::function<std::vector<double>(std::span<const double> state, const std::vector<double>& sequences,
                                      std::size_t count, Rng& rng)>;

inline ActionBox action_box(const EnvConfig& c) { return {{-c.dy_max, -c.dtheta_max}, {c.dy_max, c.dtheta_max}}; }

/// Receding-horizon controller: optimize a sequence, emit its first action,
/// keep the tail (last step repeated) as the next warm start.
class MpcPlanner {
public:
    MpcPlanner(MpcConfig config, ActionBox box, StateObjective objective, std::uint64_t seed)
        : config_(std::move(config)), box_(std::move(box)), objective_(std::move(objective)), rng_(seed, 0x6d7063) {
        config_.validate();
        box_.validate();
        reset();
    }

    void reset() {
        const std::size_t ad = box_.dim();
        warm_start_.assign(static_cast<std::size_t>(config_.horizon()) * ad, 0.0);
        for (std::size_t k = 0; k < warm_start_.size(); ++k)
            warm_start_[k] = 0.5 * (box_.lower[k % ad] + box_.upper[k % ad]);
        last_plan_.clear();
    }

    void set_objective(StateObjective objective) { objective_ = std::move(objective); }
    void reseed(std::uint64_t seed) { rng_ = Rng(seed, 0x6d7063); }

    std::vector<double> act(std::span<const double> state) {
        SequenceObjective obj = [this, state](const std::vector<double>& seqs, std::size_t count, Rng& rng) {
            return objective_(state, seqs, count, rng);
        };
        if (config_.optimizer == OptimizerKind::Cem)
            last_plan_ = cem_optimize(obj, warm_start_, box_, config_.cem, rng_).mean;
        else
            last_plan_ = mppi_optimize(obj, warm_start_, box_, config_.mppi, rng_);
        const std::size_t ad = box_.dim();
        for (std::size_t k = 0; k < last_plan_.size(); ++k) last_plan_[k] = box_.clamp(k % ad, last_plan_[k]);
        std::vector<double> first(last_plan_.begin(), last_plan_.begin() + static_cast<std::ptrdiff_t>(ad));
        warm_start_.assign(last_plan_.begin() + static_cast<std::ptrdiff_t>(ad), last_plan_.end());
        warm_start_.insert(warm_start_.end(), last_plan_.end() - static_cast<std::ptrdiff_t>(ad), last_plan_.end());
        return first;
    }

    const std::vector<double>& warm_start() const { return warm_start_; }
    const std::vector<double>& last_plan() const { return last_plan_; }
    const MpcConfig& config() const { return config_; }
    const ActionBox& box() const { return box_; }

private:
    MpcConfig config_;
    ActionBox box_;
    StateObjective objective_;
    Rng rng_;
    std::vector<double> warm_start_;
    std::vector<double> last_plan_;
};

/// Objective that rolls the ensemble forward with TS1 and sums the pushing
/// reward toward `goal`.
inline StateObjective ensemble_objective(std::shared_ptr<const Ensemble> ensemble, const EnvConfig& env,
                                         const Goal& goal, const MpcConfig& config) {
    const StepReward r = pushing_reward(goal, env);
    return [ensemble, r, config](std::span<const double> state, const std::vector<double>& seqs, std::size_t count,
                                 Rng& rng) {
        return evaluate_sequences_ts1(*ensemble, state, seqs, count, config.horizon(), config.particles, r, rng,
                                      config.sample_aleatoric);
    };
}

/// Model-based pushing controller over a trained ensemble.
class MpcController {
public:
    MpcController(std::shared_ptr<const Ensemble> ensemble, EnvConfig env, MpcConfig config, std::uint64_t seed = 0)
        : ensemble_(std::move(ensemble)),
          env_(std::move(env)),
          config_(config),
          planner_(config, action_box(env_), nullptr, seed) {
        if (ensemble_->state_dim() != ModelState::kDim || ensemble_->action_dim() != 2)
            throw Error("mpc controller needs an ensemble over the pushing model state");
    }

    void begin_episode(const Goal& goal, std::uint64_t seed) {
        planner_.reset();
        planner_.reseed(seed);
        planner_.set_objective(ensemble_objective(ensemble_, env_, goal, config_));
    }

    Action act(const ModelState& s) {
        const auto arr = s.to_array();
        const auto a = planner_.act(arr);
        return {a[0], a[1]};
    }

    const MpcPlanner& planner() const { return planner_; }
    const std::shared_ptr<const Ensemble>& ensemble() const { return ensemble_; }
    const MpcConfig& config() const { return config_; }

private:
    std::shared_ptr<const Ensemble> ensemble_;
    EnvConfig env_;
    MpcConfig config_;
    MpcPlanner planner_;
};

}  // namespace pushrl::mbrl
