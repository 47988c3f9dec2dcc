#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "pushrl/core/error.hpp"
#include "pushrl/core/json_fields.hpp"
#include "pushrl/core/pose.hpp"
#include "pushrl/core/rng.hpp"
#include "pushrl/env/push_env.hpp"
#include "pushrl/harness/agent.hpp"
#include "pushrl/physics/object_library.hpp"

namespace pushrl::harness {

/// Cell-centred nx-by-ny lattice over `region`, row-major from (x_min, y_min),
/// keeping goals at least `min_distance` from the origin.
inline std::vector<Goal> goal_grid(const Workspace& region, int nx, int ny, double min_distance) {
    if (nx < 1 || ny < 1) throw ConfigError("goal grid counts must be >= 1");
    std::vector<Goal> out;
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            const Goal g{region.x_min + (i + 0.5) * region.width() / nx, region.y_min + (j + 0.5) * region.height() / ny};
            if (g.position().norm() >= min_distance) out.push_back(g);
        }
    return out;
}

/// Goals drawn from the training band but from a stream no training run uses.
inline std::vector<Goal> held_out_band_goals(const EnvConfig& env, int n, double min_distance, std::uint64_t seed) {
    Rng rng(seed, 0x686f6c64);
    std::vector<Goal> out;
    while (static_cast<int>(out.size()) < n) {
        const Goal g = sample_band_goal(env, rng);
        if (g.position().norm() >= min_distance) out.push_back(g);
    }
    return out;
}

struct GridSpec {
    int nx = 9;
    int ny = 6;
    double min_distance = 0.1;
    std::optional<Workspace> region;  ///< defaults to the env workspace
};

enum class DisturbanceKind { None, ContactAngleOffset, CofOffset };

struct Disturbance {
    DisturbanceKind kind = DisturbanceKind::None;
    double angle = 0.0;  ///< radians, for ContactAngleOffset
    Vec2 cof_offset = Vec2::Zero();
};

inline std::string to_string(DisturbanceKind k) {
    switch (k) {
        case DisturbanceKind::None: return "none";
        case DisturbanceKind::ContactAngleOffset: return "contact_angle_offset";
        case DisturbanceKind::CofOffset: return "cof_offset";
    }
    return "none";
}

struct ScenarioSpec {
    std::string name = "custom";
    std::string object = "square-0.075";
    std::vector<Goal> goals;       ///< explicit goals, used when no grid is given
    std::optional<GridSpec> grid;
    int trials = 1;
    Disturbance disturbance;
    std::string agent = "mb";
    std::string checkpoint;
    std::uint64_t seed = 0;
    EnvConfig env;

    std::vector<Goal> resolved_goals() const {
        if (grid) return goal_grid(grid->region.value_or(env.workspace), grid->nx, grid->ny, grid->min_distance);
        return goals;
    }

    void validate() const {
        env.validate();
        if (trials < 1) throw ConfigError("scenario.trials must be >= 1");
        if (grid && grid->region && !(grid->region->x_max > grid->region->x_min && grid->region->y_max > grid->region->y_min))
            throw ConfigError("scenario.grid.region: empty rectangle");
        for (const auto& g : resolved_goals())
            if (!env.workspace.contains(g.x, g.y)) throw ConfigError("scenario goal outside the workspace");
    }
};

inline nlohmann::json workspace_json(const Workspace& w) {
    return {{"x_min", w.x_min}, {"x_max", w.x_max}, {"y_min", w.y_min}, {"y_max", w.y_max}};
}

inline void to_json(nlohmann::json& j, const ScenarioSpec& s) {
    nlohmann::json goals = nlohmann::json::array();
    for (const auto& g : s.goals) goals.push_back({g.x, g.y});
    j = {{"name", s.name},
         {"object", s.object},
         {"goals", goals},
         {"trials", s.trials},
         {"agent", s.agent},
         {"checkpoint", s.checkpoint},
         {"seed", s.seed},
         {"env", s.env}};
    if (s.grid) {
        j["grid"] = {{"nx", s.grid->nx}, {"ny", s.grid->ny}, {"min_distance", s.grid->min_distance}};
        if (s.grid->region) j["grid"]["region"] = workspace_json(*s.grid->region);
    }
    nlohmann::json d = {{"kind", to_string(s.disturbance.kind)}};
    if (s.disturbance.kind == DisturbanceKind::ContactAngleOffset) d["angle_deg"] = s.disturbance.angle * 180.0 / std::numbers::pi;
    if (s.disturbance.kind == DisturbanceKind::CofOffset)
        d["offset"] = {s.disturbance.cof_offset.x(), s.disturbance.cof_offset.y()};
    j["disturbance"] = d;
}

inline Workspace workspace_from_json(const nlohmann::json& j, const std::string& path) {
    Workspace w;
    JsonFields f(j, path);
    f.require("x_min", w.x_min);
    f.require("x_max", w.x_max);
    f.require("y_min", w.y_min);
    f.require("y_max", w.y_max);
    f.finish();
    return w;
}

/// Reads a scenario section. Fields absent from `j` keep the values of `base`.
inline ScenarioSpec scenario_from_json(const nlohmann::json& j, const std::string& path, ScenarioSpec base = {}) {
    ScenarioSpec s = std::move(base);
    JsonFields f(j, path);
    f.read("name", s.name);
    f.read("object", s.object);
    if (f.has("goals")) {
        const auto& gj = f.sub("goals");
        if (!gj.is_array()) throw ConfigError(f.field("goals") + ": expected an array of [x, y] pairs");
        s.goals.clear();
        for (const auto& g : gj) {
            if (!g.is_array() || g.size() != 2 || !g[0].is_number() || !g[1].is_number())
                throw ConfigError(f.field("goals") + ": expected an array of [x, y] pairs");
            s.goals.push_back({g[0].get<double>(), g[1].get<double>()});
        }
        s.grid.reset();
    }
    if (f.has("grid")) {
        const auto& gj = f.sub("grid");
        if (gj.is_null()) {
            s.grid.reset();
        } else {
            GridSpec g = s.grid.value_or(GridSpec{});
            JsonFields gf(gj, f.field("grid"));
            gf.read("nx", g.nx);
            gf.read("ny", g.ny);
            gf.read("min_distance", g.min_distance);
            if (gf.has("region")) g.region = workspace_from_json(gf.sub("region"), gf.field("region"));
            gf.finish();
            s.grid = g;
        }
    }
    f.read("trials", s.trials);
    f.read("agent", s.agent);
    f.read("checkpoint", s.checkpoint);
    f.read("seed", s.seed);
    if (f.has("env")) s.env = env_config_from_json(f.sub("env"), f.field("env"));
    if (f.has("disturbance")) {
        JsonFields df(f.sub("disturbance"), f.field("disturbance"));
        std::string kind = "none";
        df.read("kind", kind);
        Disturbance d;
        if (kind == "none") {
            d.kind = DisturbanceKind::None;
        } else if (kind == "contact_angle_offset") {
            d.kind = DisturbanceKind::ContactAngleOffset;
            double deg = 0.0;
            df.require("angle_deg", deg);
            d.angle = deg * std::numbers::pi / 180.0;
        } else if (kind == "cof_offset") {
            d.kind = DisturbanceKind::CofOffset;
            std::vector<double> off;
            df.require("offset", off);
            if (off.size() != 2) throw ConfigError(df.field("offset") + ": expected [x, y]");
            d.cof_offset = {off[0], off[1]};
        } else {
            throw ConfigError(df.field("kind") + ": unknown disturbance '" + kind +
                              "' (known: none, contact_angle_offset, cof_offset)");
        }
        df.finish();
        s.disturbance = d;
    }
    f.finish();
    s.validate();
    return s;
}

enum class EpisodeStatus { Success, ContactLost, Timeout };

inline std::string to_string(EpisodeStatus s) {
    switch (s) {
        case EpisodeStatus::Success: return "success";
        case EpisodeStatus::ContactLost: return "contact_lost";
        case EpisodeStatus::Timeout: return "timeout";
    }
    return "timeout";
}

inline EpisodeStatus episode_status_from_string(const std::string& s) {
    if (s == "success") return EpisodeStatus::Success;
    if (s == "contact_lost") return EpisodeStatus::ContactLost;
    if (s == "timeout") return EpisodeStatus::Timeout;
    throw Error("unknown episode status '" + s + "'");
}

/// Row 0 is the configuration at reset (zero action and reward); row k is the
/// configuration after the k-th action.
struct StepRecord {
    Pose2 pusher;
    Pose2 object;
    Pose2 contact;
    Action action;
    double reward = 0.0;
    ContactMode mode = ContactMode::Sticking;

    friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

struct EpisodeLog {
    int episode_id = 0;
    std::string object;
    Goal goal;
    int trial = 0;
    std::uint64_t seed = 0;
    EpisodeStatus status = EpisodeStatus::Timeout;
    double wall_clock = 0.0;  ///< seconds
    std::vector<StepRecord> steps;

    int num_steps() const { return steps.empty() ? 0 : static_cast<int>(steps.size()) - 1; }

    double total_return() const {
        double r = 0.0;
        for (const auto& s : steps) r += s.reward;
        return r;
    }

    /// Length of the contact-point path.
    double path_length() const {
        double l = 0.0;
        for (std::size_t i = 1; i < steps.size(); ++i) l += (steps[i].contact.position() - steps[i - 1].contact.position()).norm();
        return l;
    }

    double straight_line_distance() const {
        if (steps.empty()) return 0.0;
        return (steps.back().contact.position() - steps.front().contact.position()).norm();
    }
};

struct SummaryStats {
    int episodes = 0;
    int successes = 0;
    int contact_lost = 0;
    int timeouts = 0;
    double success_rate = 0.0;
    double mean_return = 0.0;
    double std_return = 0.0;
    double mean_path_length = 0.0;  ///< over successful episodes
    double mean_steps = 0.0;

    friend bool operator==(const SummaryStats&, const SummaryStats&) = default;
};

inline SummaryStats summarize(const std::vector<EpisodeLog>& logs) {
    SummaryStats s;
    s.episodes = static_cast<int>(logs.size());
    if (logs.empty()) return s;
    double path = 0.0;
    for (const auto& l : logs) {
        s.successes += l.status == EpisodeStatus::Success;
        s.contact_lost += l.status == EpisodeStatus::ContactLost;
        s.timeouts += l.status == EpisodeStatus::Timeout;
        s.mean_return += l.total_return();
        s.mean_steps += l.num_steps();
        if (l.status == EpisodeStatus::Success) path += l.path_length();
    }
    const double n = static_cast<double>(s.episodes);
    s.success_rate = s.successes / n;
    s.mean_return /= n;
    s.mean_steps /= n;
    if (s.successes > 0) s.mean_path_length = path / s.successes;
    double var = 0.0;
    for (const auto& l : logs) var += std::pow(l.total_return() - s.mean_return, 2);
    s.std_return = std::sqrt(var / n);
    return s;
}

inline nlohmann::json stats_json(const SummaryStats& s) {
    return {{"episodes", s.episodes},
            {"successes", s.successes},
            {"contact_lost", s.contact_lost},
            {"timeouts", s.timeouts},
            {"success_rate", s.success_rate},
            {"mean_return", s.mean_return},
            {"std_return", s.std_return},
            {"mean_path_length", s.mean_path_length},
            {"mean_steps", s.mean_steps}};
}

struct ScenarioResult {
    std::vector<EpisodeLog> logs;
    SummaryStats stats;
};

/// Environment for one scenario, with its disturbance applied.
inline PushEnv make_scenario_env(const ScenarioSpec& spec, const ObjectLibrary& lib, std::uint64_t seed) {
    EnvConfig ec = spec.env;
    ObjectSpec obj = lib.at(spec.object);
    if (spec.disturbance.kind == DisturbanceKind::ContactAngleOffset) ec.initial_contact_angle = spec.disturbance.angle;
    if (spec.disturbance.kind == DisturbanceKind::CofOffset) obj.slider.cof_offset = spec.disturbance.cof_offset;
    return PushEnv(ec, obj, {}, seed);
}

inline EpisodeLog run_episode(const ScenarioSpec& spec, const ObjectLibrary& lib, Agent& agent, int episode_id,
                              const Goal& goal, int trial) {
    EpisodeLog log;
    log.episode_id = episode_id;
    log.object = spec.object;
    log.goal = goal;
    log.trial = trial;
    log.seed = Rng(spec.seed, 0x6576616c).fork(static_cast<std::uint64_t>(episode_id)).next_u64();
    const auto t0 = std::chrono::steady_clock::now();
    PushEnv env = make_scenario_env(spec, lib, log.seed);
    auto [obs, state] = env.reset(goal);
    agent.begin_episode(goal, log.seed);
    log.steps.push_back({env.pusher_pose(), env.object_pose(), env.observed_contact_frame(), {}, 0.0, env.mode()});
    for (;;) {
        const Action a = clamp_action(agent.act(obs, state), env.config());
        const StepResult r = env.step(a);
        log.steps.push_back({env.pusher_pose(), env.object_pose(), env.observed_contact_frame(), a, r.reward, r.info.mode});
        obs = r.observation;
        state = r.model_state;
        if (r.done()) {
            log.status = r.terminated ? EpisodeStatus::Success : r.failed ? EpisodeStatus::ContactLost : EpisodeStatus::Timeout;
            break;
        }
    }
    log.wall_clock = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return log;
}

/// Runs every (goal, trial) pair. Episode i = goal_index * trials + trial;
/// workers take episodes in any order but results are folded by index, so the
/// output does not depend on `threads`.
inline ScenarioResult run_scenario(const ScenarioSpec& spec, const Agent& prototype, const ObjectLibrary& lib,
                                   int threads = 1) {
    spec.validate();
    lib.at(spec.object);
    const std::vector<Goal> goals = spec.resolved_goals();
    const int total = static_cast<int>(goals.size()) * spec.trials;
    ScenarioResult res;
    res.logs.resize(static_cast<std::size_t>(total));
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    auto worker = [&]() {
        try {
            auto agent = prototype.clone();
            for (int i = next++; i < total; i = next++) {
                const int gi = i / spec.trials;
                res.logs[static_cast<std::size_t>(i)] = run_episode(spec, lib, *agent, i, goals[static_cast<std::size_t>(gi)], i % spec.trials);
            }
        } catch (...) {
            std::lock_guard lock(failure_mu);
            if (!failure) failure = std::current_exception();
            next = total;
        }
    };
    const int n = std::max(1, std::min(threads, total));
    if (n == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
    res.stats = summarize(res.logs);
    return res;
}

inline ScenarioResult run_scenario(const ScenarioSpec& spec, const ObjectLibrary& lib, int threads = 1,
                                   const mbrl::MpcConfig* mpc_override = nullptr) {
    const auto agent = load_agent(spec.agent, spec.checkpoint, spec.env, mpc_override);
    return run_scenario(spec, *agent, lib, threads);
}

inline const std::vector<std::string>& builtin_scenario_names() {
    static const std::vector<std::string> n{"cube-grid",       "cube-heldout",      "distant-grid", "disturb-angle-pos",
                                            "disturb-angle-neg", "disturb-cof",       "objects-grid", "objects-heldout"};
    return n;
}

inline constexpr int kHeldOutGoals = 20;
inline constexpr std::uint64_t kHeldOutGoalSeed = 777;
inline constexpr double kDisturbanceAngle = 20.0 * std::numbers::pi / 180.0;
inline constexpr double kCofOffset = 0.015;

/// Named evaluation protocols. Agent, checkpoint, seed, env and trials come
/// from `base`; one spec per object.
inline std::vector<ScenarioSpec> builtin_scenarios(const std::string& name, const ScenarioSpec& base) {
    auto with = [&](std::string n, std::string object) {
        ScenarioSpec s = base;
        s.name = std::move(n);
        s.object = std::move(object);
        s.disturbance = {};
        s.grid.reset();
        s.goals = held_out_band_goals(s.env, kHeldOutGoals, 0.1, kHeldOutGoalSeed);
        return s;
    };
    const std::vector<std::string> unseen{"circle-0.045", "hexagon-0.04", "thin-box-0.09x0.03"};
    std::vector<ScenarioSpec> out;
    if (name == "cube-grid") {
        out.push_back(with(name, "square-0.075"));
        out.back().grid = GridSpec{};
    } else if (name == "cube-heldout") {
        out.push_back(with(name, "square-0.075"));
    } else if (name == "distant-grid") {
        out.push_back(with(name, "square-0.075"));
        out.back().grid = GridSpec{9, 6, 0.11, std::nullopt};
    } else if (name == "disturb-angle-pos" || name == "disturb-angle-neg") {
        out.push_back(with(name, "square-0.075"));
        out.back().disturbance = {DisturbanceKind::ContactAngleOffset,
                                  name == "disturb-angle-pos" ? kDisturbanceAngle : -kDisturbanceAngle, Vec2::Zero()};
    } else if (name == "disturb-cof") {
        out.push_back(with(name, "square-0.075"));
        out.back().disturbance = {DisturbanceKind::CofOffset, 0.0, Vec2(0.0, kCofOffset)};
    } else if (name == "objects-grid" || name == "objects-heldout") {
        for (const auto& o : unseen) {
            out.push_back(with(name + "/" + o, o));
            if (name == "objects-grid") out.back().grid = GridSpec{};
        }
    } else {
        std::string known;
        for (const auto& k : builtin_scenario_names()) known += (known.empty() ? "" : ", ") + k;
        throw ConfigError("unknown scenario '" + name + "' (known: " + known + ")");
    }
    for (auto& s : out) {
        if (s.grid) s.goals.clear();
        s.validate();
    }
    return out;
}

}  // namespace pushrl::harness
