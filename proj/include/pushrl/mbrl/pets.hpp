#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "pushrl/core/error.hpp"
#include "pushrl/core/json_fields.hpp"
#include "pushrl/core/rng.hpp"
#include "pushrl/env/push_env.hpp"
#include "pushrl/mbrl/ensemble.hpp"
#include "pushrl/mbrl/mpc.hpp"
#include "pushrl/mbrl/transition_buffer.hpp"

namespace pushrl::mbrl {

struct PetsConfig {
    int initial_random_episodes = 5;
    int episodes_per_iteration = 1;
    int train_epochs = 50;
    double holdout_fraction = 0.1;
    long total_env_steps = 50000;
    std::size_t buffer_capacity = 1000000;
    /// Which dynamics parameterization the ensemble uses.
    std::string model_frame = "contact_local";

    void validate() const {
        if (initial_random_episodes < 0) throw ConfigError("pets.initial_random_episodes must be >= 0");
        if (episodes_per_iteration < 1) throw ConfigError("pets.episodes_per_iteration must be >= 1");
        if (train_epochs < 1) throw ConfigError("pets.train_epochs must be >= 1");
        if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) throw ConfigError("pets.holdout_fraction must be in (0,1)");
        if (total_env_steps <= 0) throw ConfigError("pets.total_env_steps must be positive");
        if (buffer_capacity == 0) throw ConfigError("pets.buffer_capacity must be positive");
        if (model_frame != "contact_local" && model_frame != "world")
            throw ConfigError("pets.model_frame must be contact_local or world");
    }
};

inline void to_json(nlohmann::json& j, const PetsConfig& c) {
    j = {{"initial_random_episodes", c.initial_random_episodes},
         {"episodes_per_iteration", c.episodes_per_iteration},
         {"train_epochs", c.train_epochs},
         {"holdout_fraction", c.holdout_fraction},
         {"total_env_steps", c.total_env_steps},
         {"buffer_capacity", c.buffer_capacity},
         {"model_frame", c.model_frame}};
}

inline PetsConfig pets_config_from_json(const nlohmann::json& j, const std::string& path) {
    PetsConfig c;
    JsonFields f(j, path);
    f.read("initial_random_episodes", c.initial_random_episodes);
    f.read("episodes_per_iteration", c.episodes_per_iteration);
    f.read("train_epochs", c.train_epochs);
    f.read("holdout_fraction", c.holdout_fraction);
    f.read("total_env_steps", c.total_env_steps);
    f.read("buffer_capacity", c.buffer_capacity);
    f.read("model_frame", c.model_frame);
    f.finish();
    c.validate();
    return c;
}

inline StateCodec codec_for_frame(const std::string& frame) {
    return frame == "world" ? StateCodec::pushing_raw() : StateCodec::contact_local();
}

/// One collected episode. Random-phase episodes have iteration 0 and no NLL.
struct PetsLogRow {
    int iteration = 0;
    long env_steps = 0;
    double episode_return = 0.0;
    bool success = false;
    int episode_steps = 0;
    std::vector<double> holdout_nll;
};

inline void write_pets_log_csv(std::ostream& out, const std::vector<PetsLogRow>& rows, int members) {
    out << "iteration,env_steps,episode_return,success";
    for (int m = 0; m < members; ++m) out << ",holdout_nll_" << m;
    out << '\n';
    out.precision(17);
    for (const auto& r : rows) {
        out << r.iteration << ',' << r.env_steps << ',' << r.episode_return << ',' << (r.success ? 1 : 0);
        for (int m = 0; m < members; ++m) {
            out << ',';
            if (static_cast<std::size_t>(m) < r.holdout_nll.size()) out << r.holdout_nll[static_cast<std::size_t>(m)];
        }
        out << '\n';
    }
}

using EnvFactory = std::function<PushEnv(std::uint64_t seed)>;

struct PetsProgress {
    int iteration = 0;
    long env_steps = 0;
    const Ensemble* ensemble = nullptr;
    const PetsLogRow* last = nullptr;
};

/// Return true to stop training early.
using PetsCallback = std::function<bool(const PetsProgress&)>;

struct PetsResult {
    std::shared_ptr<Ensemble> ensemble;
    std::shared_ptr<TransitionBuffer> buffer;
    std::vector<PetsLogRow> log;
    long env_steps = 0;
};

struct EpisodeOutcome {
    double ret = 0.0;
    bool success = false;
    int steps = 0;
};

/// Runs one episode, recording transitions. `choose` maps the current model
/// state to an action; the episode is cut at `step_cap` steps.
template <typename Choose>
EpisodeOutcome collect_episode(PushEnv& env, TransitionBuffer& buffer, Choose&& choose, long step_cap) {
    auto [obs, state] = env.reset();
    EpisodeOutcome out;
    while (out.steps < step_cap) {
        const Action a = clamp_action(choose(state), env.config());
        const StepResult r = env.step(a);
        const auto s0 = state.to_array();
        const auto s1 = r.model_state.to_array();
        const std::array<double, 2> av{a.dy, a.dtheta};
        buffer.add(s0.data(), av.data(), s1.data());
        out.ret += r.reward;
        ++out.steps;
        state = r.model_state;
        if (r.done()) {
            out.success = r.terminated;
            break;
        }
    }
    return out;
}

/// Interleaved model learning and MPC data collection. Uniform random
/// episodes seed the buffer; afterwards each iteration retrains the ensemble
/// and collects episodes with the planner until the step budget is spent.
inline PetsResult pets_train(const EnvFactory& make_env, EnsembleConfig ens_cfg, const MpcConfig& mpc_cfg,
                             const PetsConfig& cfg, std::uint64_t seed, const PetsCallback& callback = {}) {
    cfg.validate();
    ens_cfg.epochs = cfg.train_epochs;
    ens_cfg.holdout_fraction = cfg.holdout_fraction;
    Rng master(seed, 0x70657473);
    Rng init_rng = master.fork(1);
    PetsResult res;
    res.ensemble = std::make_shared<Ensemble>(codec_for_frame(cfg.model_frame), ens_cfg, init_rng);
    res.buffer = std::make_shared<TransitionBuffer>(ModelState::kDim, 2, cfg.buffer_capacity,
                                                    std::vector<std::size_t>{2, 5});
    TransitionBuffer& buffer = *res.buffer;

    int episode = 0;
    auto next_env = [&]() { return make_env(master.fork(1000 + static_cast<std::uint64_t>(episode++)).next_u64()); };

    for (int e = 0; e < cfg.initial_random_episodes && res.env_steps < cfg.total_env_steps; ++e) {
        PushEnv env = next_env();
        Rng arng = master.fork(2000 + static_cast<std::uint64_t>(e));
        const EnvConfig& ec = env.config();
        auto random_action = [&](const ModelState&) {
            return Action{arng.uniform(-ec.dy_max, ec.dy_max), arng.uniform(-ec.dtheta_max, ec.dtheta_max)};
        };
        const auto out = collect_episode(env, buffer, random_action, cfg.total_env_steps - res.env_steps);
        res.env_steps += out.steps;
        res.log.push_back({0, res.env_steps, out.ret, out.success, out.steps, {}});
    }
    if (buffer.size() < 2) throw Error("pets: random phase produced too little data; increase the step budget");

    int iteration = 0;
    while (res.env_steps < cfg.total_env_steps) {
        ++iteration;
        Rng train_rng = master.fork(3000 + static_cast<std::uint64_t>(iteration));
        const TrainReport report = res.ensemble->train(buffer, train_rng);
        for (int e = 0; e < cfg.episodes_per_iteration && res.env_steps < cfg.total_env_steps; ++e) {
            PushEnv env = next_env();
            MpcController ctrl(res.ensemble, env.config(), mpc_cfg);
            bool begun = false;
            auto plan = [&](const ModelState& s) {
                if (!begun) {
                    ctrl.begin_episode(env.goal(), master.fork(4000 + static_cast<std::uint64_t>(episode)).next_u64());
                    begun = true;
                }
                return ctrl.act(s);
            };
            const auto out = collect_episode(env, buffer, plan, cfg.total_env_steps - res.env_steps);
            res.env_steps += out.steps;
            res.log.push_back({iteration, res.env_steps, out.ret, out.success, out.steps, report.final_holdout_nll});
            if (callback && callback({iteration, res.env_steps, res.ensemble.get(), &res.log.back()})) return res;
        }
    }
    return res;
}

}  // namespace pushrl::mbrl
