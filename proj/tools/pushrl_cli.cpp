#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "pushrl/check/gradient_checks.hpp"
#include "pushrl/check/physics_invariants.hpp"
#include "pushrl/check/planner_checks.hpp"
#include "pushrl/check/reward_checks.hpp"
#include "pushrl/cli/run_config.hpp"
#include "pushrl/harness/agent.hpp"
#include "pushrl/harness/export.hpp"
#include "pushrl/harness/scenario.hpp"
#include "pushrl/harness/svg.hpp"
#include "pushrl/mbrl/pets.hpp"
#include "pushrl/sac/train.hpp"

namespace fs = std::filesystem;
using namespace pushrl;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitSelfcheck = 4;

struct Options {
    std::string config;
    std::string agent;
    long steps = 0;
    std::string out;
    int threads = 0;
    std::string checkpoint;
    std::string scenario;
    std::string svg = "scenario";
    std::vector<double> goal;
    std::string results;
    std::string inject_fault;
};

fs::path output_dir(const cli::RunConfig& rc, const Options& o) { return o.out.empty() ? fs::path(rc.output_dir) : fs::path(o.out); }

int thread_count(const cli::RunConfig& rc, const Options& o) { return o.threads > 0 ? o.threads : rc.threads; }

int cmd_train(const Options& o) {
    cli::RunConfig rc = cli::load_run_config(o.config);
    if (!o.agent.empty()) rc.agent = o.agent;
    const fs::path dir = output_dir(rc, o);
    fs::create_directories(dir);
    const ObjectLibrary lib = rc.library();
    const ObjectSpec object = lib.at(rc.object);
    harness::write_text_file(dir / "run_config.json", cli::to_json(rc).dump(2) + "\n");

    if (rc.agent == "mb") {
        mbrl::PetsConfig pc = rc.pets;
        if (o.steps > 0) pc.total_env_steps = o.steps;
        const EnvConfig env = rc.env;
        auto factory = [&](std::uint64_t s) { return PushEnv(env, object, {}, s); };
        auto progress = [](const mbrl::PetsProgress& p) {
            std::printf("iteration %d  env_steps %ld  return %.3f  success %d\n", p.iteration, p.env_steps,
                        p.last->episode_return, p.last->success ? 1 : 0);
            std::fflush(stdout);
            return false;
        };
        const auto res = mbrl::pets_train(factory, rc.ensemble, rc.mpc, pc, rc.seed, progress);
        nn::Checkpoint ck = res.ensemble->to_checkpoint();
        ck.meta["mpc"] = rc.mpc;
        ck.meta["env"] = rc.env;
        ck.save((dir / "model.ckpt").string());
        std::ostringstream csv;
        mbrl::write_pets_log_csv(csv, res.log, res.ensemble->size());
        harness::write_text_file(dir / "train_log.csv", csv.str());
        std::printf("trained model-based agent: %ld env steps -> %s\n", res.env_steps, (dir / "model.ckpt").c_str());
    } else if (rc.agent == "mf") {
        const long steps = o.steps > 0 ? o.steps : rc.sac_steps;
        sac::SacConfig sc = rc.sac;
        if (sc.obs_scale.empty()) sc.obs_scale = sac::PushTaskEnv::default_obs_scale();
        const EnvConfig env = rc.env;
        auto factory = [&]() -> std::unique_ptr<sac::Environment> {
            return std::make_unique<sac::PushTaskEnv>(PushEnv(env, object, {}, 0));
        };
        auto progress = [](const sac::SacProgress& p) {
            std::printf("env_steps %ld  eval_return %.3f  eval_success %.2f  alpha %.4f\n", p.env_steps, p.last->eval_return,
                        p.last->eval_success, p.last->alpha);
            std::fflush(stdout);
            return false;
        };
        const auto res = sac::sac_train(factory, sc, steps, rc.seed, progress);
        nn::Checkpoint ck = res.agent->to_checkpoint();
        ck.meta["env"] = rc.env;
        ck.save((dir / "model.ckpt").string());
        std::ostringstream csv;
        sac::write_sac_log_csv(csv, res.log);
        harness::write_text_file(dir / "train_log.csv", csv.str());
        std::printf("trained model-free agent: %ld env steps -> %s\n", res.env_steps, (dir / "model.ckpt").c_str());
    } else {
        throw ConfigError("--agent must be mb or mf (got '" + rc.agent + "')");
    }
    return kExitOk;
}

void print_stats(const std::string& name, const harness::SummaryStats& s) {
    std::printf("%-28s episodes %3d  success %.3f  return %.3f +- %.3f  steps %.1f  path %.3f m\n", name.c_str(), s.episodes,
                s.success_rate, s.mean_return, s.std_return, s.mean_steps, s.mean_path_length);
}

void write_outputs(const fs::path& dir, const harness::ScenarioSpec& spec, const harness::ScenarioResult& r,
                   const ObjectLibrary& lib, const std::string& svg) {
    harness::export_results(dir, spec, r);
    const auto goals = spec.resolved_goals();
    if (svg == "scenario") {
        harness::render_svg_file(dir / "trajectories.svg", r.logs, goals, spec.env.workspace, &lib);
    } else if (svg == "episode") {
        for (const auto& l : r.logs)
            harness::render_svg_file(dir / ("episode_" + std::to_string(l.episode_id) + ".svg"), {l}, {l.goal},
                                     spec.env.workspace, &lib);
    }
}

int cmd_eval(const Options& o) {
    cli::RunConfig rc = cli::load_run_config(o.config);
    harness::ScenarioSpec base = rc.scenario;
    if (!o.agent.empty()) base.agent = o.agent;
    if (!o.checkpoint.empty()) base.checkpoint = o.checkpoint;
    if (base.agent != "zero" && base.checkpoint.empty()) throw ConfigError("eval: --checkpoint is required for agent '" + base.agent + "'");
    const std::vector<harness::ScenarioSpec> specs =
        o.scenario.empty() ? std::vector<harness::ScenarioSpec>{base} : harness::builtin_scenarios(o.scenario, base);
    const fs::path dir = output_dir(rc, o);
    const ObjectLibrary lib = rc.library();
    const auto agent = harness::load_agent(base.agent, base.checkpoint, base.env);
    for (const auto& spec : specs) {
        const auto r = harness::run_scenario(spec, *agent, lib, thread_count(rc, o));
        const fs::path sub = specs.size() == 1 ? dir : dir / spec.object;
        write_outputs(sub, spec, r, lib, o.svg);
        print_stats(spec.name, r.stats);
    }
    return kExitOk;
}

int cmd_rollout(const Options& o) {
    cli::RunConfig rc = cli::load_run_config(o.config);
    harness::ScenarioSpec spec = rc.scenario;
    spec.name = "rollout";
    if (!o.agent.empty()) spec.agent = o.agent;
    if (!o.checkpoint.empty()) spec.checkpoint = o.checkpoint;
    if (spec.agent != "zero" && spec.checkpoint.empty())
        throw ConfigError("rollout: --checkpoint is required for agent '" + spec.agent + "'");
    if (o.goal.size() != 2) throw ConfigError("rollout: --goal takes two numbers");
    spec.grid.reset();
    spec.goals = {{o.goal[0], o.goal[1]}};
    spec.trials = 1;
    spec.validate();
    const ObjectLibrary lib = rc.library();
    const auto r = harness::run_scenario(spec, lib, 1);
    write_outputs(output_dir(rc, o), spec, r, lib, "scenario");
    const auto& l = r.logs.front();
    const auto& last = l.steps.back();
    std::printf("status %s  steps %d  return %.4f  final contact (%.4f, %.4f)  goal (%.4f, %.4f)\n",
                harness::to_string(l.status).c_str(), l.num_steps(), l.total_return(), last.contact.x, last.contact.y,
                l.goal.x, l.goal.y);
    return kExitOk;
}

int cmd_plot(const Options& o) {
    const auto imported = harness::import_results(o.results);
    Workspace ws;
    std::vector<Goal> goals;
    if (imported.spec.contains("env")) ws = env_config_from_json(imported.spec["env"], "env").workspace;
    for (const auto& l : imported.result.logs)
        if (std::find(goals.begin(), goals.end(), l.goal) == goals.end()) goals.push_back(l.goal);
    const fs::path out = o.out.empty() ? fs::path(o.results) / "trajectories.svg" : fs::path(o.out);
    const ObjectLibrary lib = default_object_library();
    harness::render_svg_file(out, imported.result.logs, goals, ws, &lib);
    std::printf("wrote %s (%zu episodes)\n", out.c_str(), imported.result.logs.size());
    return kExitOk;
}

int cmd_selfcheck(const Options& o) {
    if (!o.inject_fault.empty() && o.inject_fault != "gradient")
        throw ConfigError("--inject-fault: only 'gradient' is supported");
    struct Row {
        std::string name;
        bool pass;
        std::string detail;
        double seconds;
    };
    std::vector<Row> rows;
    auto timed = [&](const std::string& name, const std::function<std::pair<bool, std::string>()>& fn) {
        const auto t0 = std::chrono::steady_clock::now();
        auto [pass, detail] = fn();
        rows.push_back({name, pass, detail, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()});
    };
    char buf[256];
    timed("gradients", [&] {
        const auto g = check::run_gradient_checks(100, 1, o.inject_fault == "gradient" ? 1.01 : 1.0);
        std::snprintf(buf, sizeof buf, "%d pairs, max rel err %.2e (%s)", g.pairs, g.max_rel_error, g.worst.c_str());
        return std::pair{g.max_rel_error < 1e-4, std::string(buf)};
    });
    timed("physics invariants", [&] {
        const auto p = check::run_physics_invariants(10000, 2);
        const long v = p.sticking_velocity.violations + p.friction_cone.violations + p.mirror.violations +
                       p.no_pull.violations + p.symmetric_push.violations;
        std::snprintf(buf, sizeof buf, "%ld violations over 10000 cases per property", v);
        return std::pair{p.ok(), std::string(buf)};
    });
    timed("reward algebra", [&] {
        const auto r = check::run_reward_checks(1000, 20, 3);
        std::snprintf(buf, sizeof buf, "max abs err %.1e, %d monotonicity violations", r.max_abs_error,
                      r.monotonicity_violations);
        return std::pair{r.max_abs_error <= 1e-12 && r.monotonicity_violations == 0, std::string(buf)};
    });
    timed("planner quadratic", [&] {
        const auto p = check::run_planner_checks(3, 4);
        std::snprintf(buf, sizeof buf, "cem err %.1e, mppi err %.1e, elite-mean decreases %d", p.cem_max_error,
                      p.mppi_max_error, p.elite_mean_decreases);
        return std::pair{p.cem_max_error < 1e-2 && p.mppi_max_error < 5e-2 && p.elite_mean_decreases == 0, std::string(buf)};
    });
    bool all = true;
    std::printf("%-20s %-6s %8s  %s\n", "check", "result", "seconds", "detail");
    for (const auto& r : rows) {
        all = all && r.pass;
        std::printf("%-20s %-6s %8.2f  %s\n", r.name.c_str(), r.pass ? "PASS" : "FAIL", r.seconds, r.detail.c_str());
    }
    return all ? kExitOk : kExitSelfcheck;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pushrl: planar pushing with model-based and model-free reinforcement learning"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Print help for every subcommand and exit");
    Options o;

    auto add_config = [&](CLI::App* sub) {
        sub->add_option("-c,--config", o.config, "Run configuration (JSON)")->required();
    };
    auto add_threads = [&](CLI::App* sub) {
        sub->add_option("--threads", o.threads, "Maximum worker threads (overrides the config)")->check(CLI::PositiveNumber);
    };

    auto* train = app.add_subcommand("train", "Train an agent and write model.ckpt and train_log.csv");
    add_config(train);
    train->add_option("--agent", o.agent, "Agent kind")->check(CLI::IsMember({"mb", "mf"}));
    train->add_option("--steps", o.steps, "Environment step budget (overrides the config)")->check(CLI::PositiveNumber);
    train->add_option("--out", o.out, "Output directory (overrides output_dir)");
    add_threads(train);

    auto* eval = app.add_subcommand("eval", "Evaluate an agent on a scenario; write episodes.csv, summary.json, SVG");
    add_config(eval);
    eval->add_option("--checkpoint", o.checkpoint, "Agent checkpoint");
    eval->add_option("--agent", o.agent, "Agent kind")->check(CLI::IsMember({"mb", "mf", "zero"}));
    eval->add_option("--scenario", o.scenario, "Built-in scenario (default: the config's scenario section)")
        ->check(CLI::IsMember(harness::builtin_scenario_names()));
    eval->add_option("--out", o.out, "Output directory (overrides output_dir)");
    eval->add_option("--svg", o.svg, "SVG output: none, scenario or episode")->check(CLI::IsMember({"none", "scenario", "episode"}));
    add_threads(eval);

    auto* rollout = app.add_subcommand("rollout", "Run a single episode towards one goal");
    add_config(rollout);
    rollout->add_option("--checkpoint", o.checkpoint, "Agent checkpoint");
    rollout->add_option("--agent", o.agent, "Agent kind")->check(CLI::IsMember({"mb", "mf", "zero"}));
    rollout->add_option("--goal", o.goal, "Goal position x y [m]")->required()->expected(2);
    rollout->add_option("--out", o.out, "Output directory (overrides output_dir)");

    auto* plot = app.add_subcommand("plot", "Render trajectories.svg from exported results");
    plot->add_option("--results", o.results, "Directory holding episodes.csv and summary.json")->required();
    plot->add_option("--out", o.out, "SVG file (default: <results>/trajectories.svg)");

    auto* selfcheck = app.add_subcommand("selfcheck", "Run gradient, physics, reward and planner checks");
    selfcheck->add_option("--inject-fault", o.inject_fault)->group("");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*train) return cmd_train(o);
        if (*eval) return cmd_eval(o);
        if (*rollout) return cmd_rollout(o);
        if (*plot) return cmd_plot(o);
        if (*selfcheck) return cmd_selfcheck(o);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return kExitIo;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return kExitOk;
}
