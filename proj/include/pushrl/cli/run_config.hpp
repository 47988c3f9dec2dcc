#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <string>

#include "json.hpp"

#include "pushrl/core/error.hpp"
#include "pushrl/core/json_fields.hpp"
#include "pushrl/env/task.hpp"
#include "pushrl/harness/export.hpp"
#include "pushrl/harness/scenario.hpp"
#include "pushrl/mbrl/ensemble.hpp"
#include "pushrl/mbrl/mpc.hpp"
#include "pushrl/mbrl/pets.hpp"
#include "pushrl/physics/object_library.hpp"
#include "pushrl/sac/agent.hpp"

namespace pushrl::cli {

/// Everything one CLI invocation needs, read from a single JSON file.
struct RunConfig {
    std::uint64_t seed = 0;
    std::string output_dir = "runs/default";
    int threads = 1;
    EnvConfig env;
    std::string object = "square-0.075";
    std::string object_library;  ///< JSON object library; empty means the built-in set
    std::string agent = "mb";
    mbrl::EnsembleConfig ensemble;
    mbrl::MpcConfig mpc;
    mbrl::PetsConfig pets;
    sac::SacConfig sac;
    long sac_steps = 500000;
    harness::ScenarioSpec scenario;

    ObjectLibrary library() const {
        return object_library.empty() ? default_object_library() : ObjectLibrary::load(object_library);
    }
};

inline nlohmann::json to_json(const RunConfig& c) {
    nlohmann::json scen = c.scenario;
    scen.erase("env");
    scen.erase("agent");
    scen.erase("seed");
    return {{"seed", c.seed},
            {"output_dir", c.output_dir},
            {"threads", c.threads},
            {"env", c.env},
            {"physics", {{"object", c.object}, {"library", c.object_library}}},
            {"agent",
             {{"kind", c.agent},
              {"ensemble", c.ensemble},
              {"mpc", c.mpc},
              {"pets", c.pets},
              {"sac", c.sac},
              {"sac_steps", c.sac_steps}}},
            {"scenario", scen}};
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
    RunConfig c;
    JsonFields f(j, "");
    f.read("seed", c.seed);
    f.read("output_dir", c.output_dir);
    f.read("threads", c.threads);
    if (c.threads < 1) throw ConfigError("threads: must be >= 1");
    if (f.has("env")) c.env = env_config_from_json(f.sub("env"), "env");
    if (f.has("physics")) {
        JsonFields pf(f.sub("physics"), "physics");
        pf.read("object", c.object);
        pf.read("library", c.object_library);
        pf.finish();
    }
    if (f.has("agent")) {
        JsonFields af(f.sub("agent"), "agent");
        af.read("kind", c.agent);
        if (c.agent != "mb" && c.agent != "mf") throw ConfigError("agent.kind: must be mb or mf (got '" + c.agent + "')");
        if (af.has("ensemble")) c.ensemble = mbrl::ensemble_config_from_json(af.sub("ensemble"), "agent.ensemble");
        if (af.has("mpc")) c.mpc = mbrl::mpc_config_from_json(af.sub("mpc"), "agent.mpc");
        if (af.has("pets")) c.pets = mbrl::pets_config_from_json(af.sub("pets"), "agent.pets");
        if (af.has("sac")) c.sac = sac::sac_config_from_json(af.sub("sac"), "agent.sac");
        af.read("sac_steps", c.sac_steps);
        if (c.sac_steps <= 0) throw ConfigError("agent.sac_steps: must be positive");
        af.finish();
    }
    harness::ScenarioSpec base;
    base.env = c.env;
    base.agent = c.agent;
    base.object = c.object;
    base.seed = c.seed;
    base.goals = harness::held_out_band_goals(c.env, harness::kHeldOutGoals, 0.1, harness::kHeldOutGoalSeed);
    c.scenario = f.has("scenario") ? harness::scenario_from_json(f.sub("scenario"), "scenario", base) : base;
    f.finish();
    c.env.validate();
    if (!c.library().contains(c.object)) {
        try {
            c.library().at(c.object);
        } catch (const Error& e) {
            throw ConfigError(std::string("physics.object: ") + e.what());
        }
    }
    return c;
}

/// Loads, validates and applies the PUSHRL_SEED override.
inline RunConfig load_run_config(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(harness::read_text_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    RunConfig c = run_config_from_json(j);
    if (const char* s = std::getenv("PUSHRL_SEED"); s && *s) {
        char* end = nullptr;
        const unsigned long long v = std::strtoull(s, &end, 10);
        if (*end != '\0') throw ConfigError("PUSHRL_SEED: not an unsigned integer ('" + std::string(s) + "')");
        c.seed = v;
        c.scenario.seed = v;
    }
    return c;
}

}  // namespace pushrl::cli
