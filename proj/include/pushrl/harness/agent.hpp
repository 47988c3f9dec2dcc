#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "pushrl/core/error.hpp"
#include "pushrl/env/task.hpp"
#include "pushrl/mbrl/ensemble.hpp"
#include "pushrl/mbrl/mpc.hpp"
#include "pushrl/nn/checkpoint.hpp"
#include "pushrl/sac/agent.hpp"

namespace pushrl::harness {

/// Common control interface for evaluation. Each episode starts with
/// begin_episode; act sees both observation flavours and uses whichever it needs.
class Agent {
public:
    virtual ~Agent() = default;
    virtual std::string kind() const = 0;
    virtual void begin_episode(const Goal& goal, std::uint64_t seed) = 0;
    virtual Action act(const PolicyObservation& obs, const ModelState& state) = 0;
    /// Independent copy for another worker thread; heavy read-only parts are shared.
    virtual std::unique_ptr<Agent> clone() const = 0;
};

class ZeroAgent final : public Agent {
public:
    std::string kind() const override { return "zero"; }
    void begin_episode(const Goal&, std::uint64_t) override {}
    Action act(const PolicyObservation&, const ModelState&) override { return {}; }
    std::unique_ptr<Agent> clone() const override { return std::make_unique<ZeroAgent>(); }
};

class ModelBasedAgent final : public Agent {
public:
    ModelBasedAgent(std::shared_ptr<const mbrl::Ensemble> ensemble, EnvConfig env, mbrl::MpcConfig mpc)
        : ensemble_(std::move(ensemble)), env_(std::move(env)), mpc_(mpc), ctrl_(ensemble_, env_, mpc_) {}

    std::string kind() const override { return "mb"; }
    void begin_episode(const Goal& goal, std::uint64_t seed) override { ctrl_.begin_episode(goal, seed); }
    Action act(const PolicyObservation&, const ModelState& state) override { return ctrl_.act(state); }
    std::unique_ptr<Agent> clone() const override { return std::make_unique<ModelBasedAgent>(ensemble_, env_, mpc_); }

    const mbrl::Ensemble& ensemble() const { return *ensemble_; }

private:
    std::shared_ptr<const mbrl::Ensemble> ensemble_;
    EnvConfig env_;
    mbrl::MpcConfig mpc_;
    mbrl::MpcController ctrl_;
};

/// Deterministic (mean-action) model-free policy.
class ModelFreeAgent final : public Agent {
public:
    explicit ModelFreeAgent(std::shared_ptr<const sac::SacAgent> policy) : policy_(std::move(policy)) {
        if (policy_->obs_dim() != PolicyObservation::kDim || policy_->action_dim() != 2)
            throw Error("model-free agent: checkpoint does not match the pushing task dimensions");
    }

    std::string kind() const override { return "mf"; }
    void begin_episode(const Goal&, std::uint64_t) override {}
    Action act(const PolicyObservation& obs, const ModelState&) override {
        const auto o = obs.to_array();
        const auto a = policy_->act(o, true);
        return {a[0], a[1]};
    }
    std::unique_ptr<Agent> clone() const override { return std::make_unique<ModelFreeAgent>(policy_); }

private:
    std::shared_ptr<const sac::SacAgent> policy_;
};

inline const std::vector<std::string>& known_agent_kinds() {
    static const std::vector<std::string> k{"mb", "mf", "zero"};
    return k;
}

/// MPC settings stored alongside a model-based checkpoint, if any.
inline mbrl::MpcConfig stored_mpc_config(const nn::Checkpoint& ck) {
    if (ck.meta.contains("mpc")) return mbrl::mpc_config_from_json(ck.meta.at("mpc"), "checkpoint.mpc");
    return {};
}

/// Builds an agent of the given kind. Model-based and model-free agents read
/// their networks from `checkpoint`; `mpc_override` replaces the planner
/// settings stored with a model-based checkpoint.
inline std::unique_ptr<Agent> load_agent(const std::string& kind, const std::string& checkpoint, const EnvConfig& env,
                                         const mbrl::MpcConfig* mpc_override = nullptr) {
    if (kind == "zero") return std::make_unique<ZeroAgent>();
    if (kind == "mb") {
        const nn::Checkpoint ck = nn::Checkpoint::load(checkpoint);
        auto ens = std::make_shared<const mbrl::Ensemble>(mbrl::Ensemble::from_checkpoint(ck));
        return std::make_unique<ModelBasedAgent>(ens, env, mpc_override ? *mpc_override : stored_mpc_config(ck));
    }
    if (kind == "mf") {
        const nn::Checkpoint ck = nn::Checkpoint::load(checkpoint);
        return std::make_unique<ModelFreeAgent>(std::make_shared<const sac::SacAgent>(sac::SacAgent::from_checkpoint(ck)));
    }
    std::string known;
    for (const auto& k : known_agent_kinds()) known += (known.empty() ? "" : ", ") + k;
    throw ConfigError("unknown agent kind '" + kind + "' (known: " + known + ")");
}

}  // namespace pushrl::harness
