#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "pushrl/core/error.hpp"
#include "pushrl/core/rng.hpp"
#include "pushrl/env/push_env.hpp"
#include "pushrl/sac/agent.hpp"
#include "pushrl/sac/replay_buffer.hpp"

namespace pushrl::sac {

struct EnvStep {
    std::vector<double> obs;
    double reward = 0.0;
    bool terminal = false;   ///< success or failure; not bootstrapped
    bool truncated = false;  ///< step limit; bootstrapped
    bool success = false;

    bool done() const { return terminal || truncated; }
};

/// Minimal episodic interface the learner needs. Actions are in environment units.
class Environment {
public:
    virtual ~Environment() = default;
    virtual std::size_t obs_dim() const = 0;
    virtual ActionBox action_box() const = 0;
    virtual std::vector<double> reset(std::uint64_t seed) = 0;
    virtual EnvStep step(std::span<const double> action) = 0;
};

using EnvironmentFactory = std::function<std::unique_ptr<Environment>()>;

/// Pushing task seen through the goal-aware policy observation.
class PushTaskEnv final : public Environment {
public:
    explicit PushTaskEnv(PushEnv env) : env_(std::move(env)) {}

    std::size_t obs_dim() const override { return PolicyObservation::kDim; }
    ActionBox action_box() const override {
        const auto& c = env_.config();
        return {{-c.dy_max, -c.dtheta_max}, {c.dy_max, c.dtheta_max}};
    }
    std::vector<double> reset(std::uint64_t seed) override {
        const auto a = env_.reset(seed).first.to_array();
        return {a.begin(), a.end()};
    }
    EnvStep step(std::span<const double> action) override {
        if (action.size() != 2) throw Error("push task: action must have 2 entries");
        const StepResult r = env_.step(Action{action[0], action[1]});
        const auto a = r.observation.to_array();
        EnvStep s;
        s.obs.assign(a.begin(), a.end());
        s.reward = r.reward;
        s.terminal = r.terminated || r.failed;
        s.truncated = r.truncated;
        s.success = r.terminated;
        return s;
    }

    PushEnv& env() { return env_; }

    /// Observation multipliers bringing millimetre-scale contact offsets and
    /// decimetre-scale goal offsets to order one.
    static std::vector<double> default_obs_scale() { return {100.0, 100.0, 1.0, 5.0, 5.0, 1.0}; }

private:
    PushEnv env_;
};

struct SacLogRow {
    long env_steps = 0;
    int episodes = 0;
    double eval_return = 0.0;
    double eval_success = 0.0;
    double critic_loss = 0.0;
    double actor_loss = 0.0;
    double alpha = 0.0;
};

inline void write_sac_log_csv(std::ostream& out, const std::vector<SacLogRow>& rows) {
    out << "env_steps,episodes,eval_return,eval_success,critic_loss,actor_loss,alpha\n";
    out.precision(17);
    for (const auto& r : rows)
        out << r.env_steps << ',' << r.episodes << ',' << r.eval_return << ',' << r.eval_success << ','
            << r.critic_loss << ',' << r.actor_loss << ',' << r.alpha << '\n';
}

/// First logged step count at which evaluation success reached `threshold`.
inline std::optional<long> first_step_reaching(const std::vector<SacLogRow>& log, double threshold) {
    for (const auto& r : log)
        if (r.eval_success >= threshold) return r.env_steps;
    return std::nullopt;
}

struct SacProgress {
    long env_steps = 0;
    const SacAgent* agent = nullptr;
    const SacLogRow* last = nullptr;
};

/// Return true to stop training early.
using SacCallback = std::function<bool(const SacProgress&)>;

struct SacTrainResult {
    std::shared_ptr<SacAgent> agent;
    std::vector<SacLogRow> log;
    long env_steps = 0;
};

struct EvalOutcome {
    double mean_return = 0.0;
    double success_rate = 0.0;
};

/// Deterministic-policy evaluation over a fixed list of episode seeds.
inline EvalOutcome evaluate_policy(const SacAgent& agent, Environment& env, const std::vector<std::uint64_t>& seeds) {
    EvalOutcome out;
    if (seeds.empty()) return out;
    for (auto seed : seeds) {
        std::vector<double> obs = env.reset(seed);
        for (;;) {
            const EnvStep s = env.step(agent.act(obs, true));
            out.mean_return += s.reward;
            obs = s.obs;
            if (s.done()) {
                out.success_rate += s.success ? 1.0 : 0.0;
                break;
            }
        }
    }
    out.mean_return /= static_cast<double>(seeds.size());
    out.success_rate /= static_cast<double>(seeds.size());
    return out;
}

/// Off-policy training: uniform random actions for the first
/// `initial_random_steps`, then policy samples with `updates_per_step`
/// gradient updates per environment step. Evaluation runs before the first
/// step and every `eval_interval` steps on a fixed set of episode seeds.
inline SacTrainResult sac_train(const EnvironmentFactory& make_env, const SacConfig& cfg, long budget_steps,
                                std::uint64_t seed, const SacCallback& callback = {}) {
    cfg.validate();
    if (budget_steps <= 0) throw ConfigError("sac training budget must be positive");
    Rng master(seed, 0x73616374);
    auto env = make_env();
    auto eval_env = make_env();
    if (!env || !eval_env) throw Error("sac: environment factory returned null");

    SacTrainResult res;
    res.agent = std::make_shared<SacAgent>(env->obs_dim(), env->action_box(), cfg, master.fork(1).next_u64());
    SacAgent& agent = *res.agent;
    ReplayBuffer buffer(env->obs_dim(), agent.action_dim(), cfg.replay_capacity);
    Rng explore = master.fork(2);
    Rng sample_rng = master.fork(3);

    std::vector<std::uint64_t> eval_seeds;
    for (int k = 0; k < cfg.eval_episodes; ++k) eval_seeds.push_back(master.fork(9000 + static_cast<std::uint64_t>(k)).next_u64());

    SacLogRow row;
    auto log_eval = [&]() {
        const EvalOutcome e = evaluate_policy(agent, *eval_env, eval_seeds);
        row.env_steps = res.env_steps;
        row.eval_return = e.mean_return;
        row.eval_success = e.success_rate;
        row.alpha = agent.alpha();
        res.log.push_back(row);
        return callback && callback({res.env_steps, &agent, &res.log.back()});
    };
    if (log_eval()) return res;

    int episode = 0;
    std::vector<double> obs = env->reset(master.fork(1000 + static_cast<std::uint64_t>(episode)).next_u64());
    const std::size_t ad = agent.action_dim();
    while (res.env_steps < budget_steps) {
        std::vector<double> a_norm(ad);
        if (res.env_steps < cfg.initial_random_steps) {
            for (auto& v : a_norm) v = explore.uniform(-1.0, 1.0);
        } else {
            a_norm = agent.act_normalized(obs, false, &explore);
        }
        const EnvStep s = env->step(agent.to_env_action(a_norm));
        buffer.add(obs, a_norm, s.reward, s.obs, s.terminal);
        ++res.env_steps;
        obs = s.obs;
        if (s.done()) {
            ++episode;
            row.episodes = episode;
            obs = env->reset(master.fork(1000 + static_cast<std::uint64_t>(episode)).next_u64());
        }

        if (res.env_steps >= cfg.initial_random_steps && buffer.size() >= cfg.batch_size) {
            for (int u = 0; u < cfg.updates_per_step; ++u) {
                const UpdateStats st = agent.update(buffer.sample(cfg.batch_size, sample_rng));
                row.critic_loss = st.critic_loss;
                row.actor_loss = st.actor_loss;
            }
        }
        if (res.env_steps % cfg.eval_interval == 0 && log_eval()) return res;
    }
    return res;
}

}  // namespace pushrl::sac
