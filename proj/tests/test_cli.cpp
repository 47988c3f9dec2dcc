#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct CliRun {
    int code = -1;
    std::string output;
};

CliRun run(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + (env.empty() ? "" : " ") + std::string(PUSHRL_CLI_PATH) + " " + args + " 2>&1";
    CliRun r;
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return r;
    std::array<char, 4096> buf{};
    while (std::size_t n = std::fread(buf.data(), 1, buf.size(), p)) r.output.append(buf.data(), n);
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("pushrl_cli_test_" + std::to_string(::getpid())) / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

void write(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

const std::string kSmoke = std::string(PUSHRL_CONFIG_DIR) + "/smoke.json";

const fs::path& trained_smoke() {
    static const fs::path dir = [] {
        const fs::path d = scratch("smoke_mb");
        const CliRun r = run("train --config " + kSmoke + " --agent mb --steps 1000 --out " + d.string());
        EXPECT_EQ(r.code, 0) << r.output;
        return d;
    }();
    return dir;
}

}  // namespace

TEST(CliHelp, ListsFlags) {
    const CliRun top = run("--help");
    EXPECT_EQ(top.code, 0);
    for (const char* s : {"train", "eval", "rollout", "plot", "selfcheck"}) EXPECT_NE(top.output.find(s), std::string::npos) << s;
    const CliRun train = run("train --help");
    EXPECT_EQ(train.code, 0);
    for (const char* s : {"--config", "--agent", "--steps", "--out", "--threads"})
        EXPECT_NE(train.output.find(s), std::string::npos) << s;
    const CliRun eval = run("eval --help");
    for (const char* s : {"--config", "--checkpoint", "--scenario", "--svg", "--out", "--threads"})
        EXPECT_NE(eval.output.find(s), std::string::npos) << s;
    const CliRun all = run("--help-all");
    EXPECT_EQ(all.code, 0);
    EXPECT_NE(all.output.find("--goal"), std::string::npos);
    EXPECT_NE(all.output.find("--results"), std::string::npos);
}

TEST(CliHelp, UnknownFlagRejected) {
    const CliRun r = run("train --config " + kSmoke + " --bogus 3");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.output.find("--bogus"), std::string::npos) << r.output;
    EXPECT_EQ(run("").code, 2);
    EXPECT_EQ(run("frobnicate").code, 2);
    EXPECT_EQ(run("eval --config " + kSmoke + " --scenario nowhere").code, 2);
}

TEST(CliTrain, SmokeWritesCheckpointAndLog) {
    const fs::path& d = trained_smoke();
    EXPECT_TRUE(fs::exists(d / "model.ckpt"));
    EXPECT_TRUE(fs::exists(d / "train_log.csv"));
    EXPECT_TRUE(fs::exists(d / "run_config.json"));
    std::istringstream log(slurp(d / "train_log.csv"));
    std::string header, line, last;
    std::getline(log, header);
    EXPECT_EQ(header.rfind("iteration,env_steps,episode_return,success", 0), 0u);
    while (std::getline(log, line)) last = line;
    std::istringstream ls(last);
    std::string it, steps;
    std::getline(ls, it, ',');
    std::getline(ls, steps, ',');
    EXPECT_EQ(std::stol(steps), 1000);
}

TEST(CliTrain, MalformedConfigNamesField) {
    const fs::path d = scratch("malformed");
    write(d / "type.json", R"({"agent": {"kind": "mb", "pets": {"total_env_steps": "many"}}})");
    CliRun r = run("train --config " + (d / "type.json").string());
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.output.find("agent.pets.total_env_steps"), std::string::npos) << r.output;

    write(d / "unknown.json", R"({"seed": 1, "env": {"dy_maxx": 0.001}})");
    r = run("train --config " + (d / "unknown.json").string());
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.output.find("env.dy_maxx"), std::string::npos) << r.output;

    write(d / "syntax.json", "{\n  \"seed\": 1,\n  \"threads\" 2\n}\n");
    r = run("train --config " + (d / "syntax.json").string());
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.output.find("line 3"), std::string::npos) << r.output;

    write(d / "object.json", R"({"physics": {"object": "teapot"}})");
    r = run("train --config " + (d / "object.json").string());
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.output.find("teapot"), std::string::npos) << r.output;
}

TEST(CliTrain, MissingConfigIsIoError) {
    const CliRun r = run("train --config /nonexistent/dir/cfg.json");
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.output.find("/nonexistent/dir/cfg.json"), std::string::npos) << r.output;
}

TEST(CliTrain, SameSeedIdenticalOutputs) {
    const fs::path& a = trained_smoke();
    const fs::path b = scratch("smoke_mb_again");
    ASSERT_EQ(run("train --config " + kSmoke + " --agent mb --steps 1000 --out " + b.string()).code, 0);
    EXPECT_EQ(slurp(a / "train_log.csv"), slurp(b / "train_log.csv"));
    EXPECT_EQ(slurp(a / "model.ckpt"), slurp(b / "model.ckpt"));

    const fs::path m1 = scratch("smoke_mf_1"), m2 = scratch("smoke_mf_2");
    ASSERT_EQ(run("train --config " + kSmoke + " --agent mf --steps 600 --out " + m1.string()).code, 0);
    ASSERT_EQ(run("train --config " + kSmoke + " --agent mf --steps 600 --out " + m2.string()).code, 0);
    EXPECT_EQ(slurp(m1 / "train_log.csv"), slurp(m2 / "train_log.csv"));
    EXPECT_EQ(slurp(m1 / "model.ckpt"), slurp(m2 / "model.ckpt"));
}

TEST(CliTrain, SeedEnvironmentOverride) {
    const fs::path d = scratch("seed_override");
    ASSERT_EQ(run("train --config " + kSmoke + " --steps 1000 --out " + d.string(), "PUSHRL_SEED=99").code, 0);
    const auto cfg = nlohmann::json::parse(slurp(d / "run_config.json"));
    EXPECT_EQ(cfg.at("seed").get<std::uint64_t>(), 99u);
    EXPECT_NE(slurp(d / "train_log.csv"), slurp(trained_smoke() / "train_log.csv"));
    const CliRun bad = run("train --config " + kSmoke + " --steps 1000 --out " + d.string(), "PUSHRL_SEED=abc");
    EXPECT_EQ(bad.code, 2);
    EXPECT_NE(bad.output.find("PUSHRL_SEED"), std::string::npos);
}

TEST(CliEval, MissingCheckpointIsIoError) {
    const CliRun r = run("eval --config " + kSmoke + " --checkpoint /no/such/model.ckpt --out " + scratch("missing").string());
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.output.find("/no/such/model.ckpt"), std::string::npos) << r.output;
}

TEST(CliEval, CubeGridOutputsMatchRecomputation) {
    const fs::path d = scratch("eval_grid");
    const CliRun r = run("eval --config " + kSmoke + " --checkpoint " + (trained_smoke() / "model.ckpt").string() +
                      " --scenario cube-grid --out " + d.string());
    ASSERT_EQ(r.code, 0) << r.output;
    for (const char* f : {"episodes.csv", "summary.json", "timing.json", "trajectories.svg"}) EXPECT_TRUE(fs::exists(d / f)) << f;

    std::istringstream csv(slurp(d / "episodes.csv"));
    std::string line;
    std::getline(csv, line);
    std::map<int, std::string> status;
    std::map<int, int> rows;
    while (std::getline(csv, line)) {
        const int id = std::stoi(line.substr(0, line.find(',')));
        status[id] = line.substr(line.rfind(',') + 1);
        ++rows[id];
    }
    int successes = 0, lost = 0, timeouts = 0;
    for (const auto& [id, s] : status) {
        successes += s == "success";
        lost += s == "contact_lost";
        timeouts += s == "timeout";
    }
    const auto summary = nlohmann::json::parse(slurp(d / "summary.json"));
    const auto& stats = summary.at("stats");
    EXPECT_EQ(stats.at("episodes").get<int>(), static_cast<int>(status.size()));
    EXPECT_EQ(stats.at("successes").get<int>(), successes);
    EXPECT_EQ(stats.at("contact_lost").get<int>(), lost);
    EXPECT_EQ(stats.at("timeouts").get<int>(), timeouts);
    EXPECT_DOUBLE_EQ(stats.at("success_rate").get<double>(), static_cast<double>(successes) / status.size());
    for (const auto& e : summary.at("episodes")) EXPECT_EQ(e.at("steps").get<int>() + 1, rows.at(e.at("episode_id").get<int>()));

    const fs::path svg = d / "replot.svg";
    EXPECT_EQ(run("plot --results " + d.string() + " --out " + svg.string()).code, 0);
    EXPECT_TRUE(fs::exists(svg));
}

TEST(CliEval, ThreadCountDoesNotChangeResults) {
    const fs::path a = scratch("eval_t1"), b = scratch("eval_t3");
    const std::string base = "eval --config " + kSmoke + " --checkpoint " + (trained_smoke() / "model.ckpt").string() + " --svg none";
    ASSERT_EQ(run(base + " --threads 1 --out " + a.string()).code, 0);
    ASSERT_EQ(run(base + " --threads 3 --out " + b.string()).code, 0);
    EXPECT_EQ(slurp(a / "episodes.csv"), slurp(b / "episodes.csv"));
    EXPECT_EQ(slurp(a / "summary.json"), slurp(b / "summary.json"));
    EXPECT_FALSE(fs::exists(a / "trajectories.svg"));
}

TEST(CliRollout, ZeroAgentStraightAhead) {
    const fs::path d = scratch("rollout");
    const CliRun r = run("rollout --config " + kSmoke + " --agent zero --goal 0.3 0 --out " + d.string());
    EXPECT_EQ(r.code, 0) << r.output;
    EXPECT_NE(r.output.find("status success"), std::string::npos) << r.output;
    EXPECT_TRUE(fs::exists(d / "episodes.csv"));
    EXPECT_EQ(run("rollout --config " + kSmoke + " --agent zero --goal 0.3").code, 2);
    EXPECT_EQ(run("rollout --config " + kSmoke + " --agent mb --goal 0.3 0").code, 2);
}

TEST(CliPlot, MissingResultsIsIoError) {
    const CliRun r = run("plot --results /no/such/results");
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.output.find("/no/such/results"), std::string::npos);
}

TEST(CliSelfcheck, PassesAndDetectsInjectedFault) {
    const CliRun ok = run("selfcheck");
    EXPECT_EQ(ok.code, 0) << ok.output;
    for (const char* s : {"gradients", "physics invariants", "reward algebra", "planner quadratic"})
        EXPECT_NE(ok.output.find(s), std::string::npos) << s;
    EXPECT_EQ(ok.output.find("FAIL"), std::string::npos);
    const CliRun bad = run("selfcheck --inject-fault gradient");
    EXPECT_EQ(bad.code, 4) << bad.output;
    EXPECT_NE(bad.output.find("FAIL"), std::string::npos);
}
