#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "pushrl/core/error.hpp"
#include "pushrl/harness/scenario.hpp"

namespace pushrl::harness {

inline constexpr int kResultsSchemaVersion = 1;
inline constexpr const char* kEpisodesCsvHeader =
    "episode_id,step,px,py,ptheta,ox,oy,otheta,cx,cy,ctheta,dy,dtheta,reward,mode,status";

/// One row per logged step; doubles are written with 17 significant digits so
/// they parse back to the same bits.
inline void write_episodes_csv(std::ostream& out, const std::vector<EpisodeLog>& logs) {
    out << kEpisodesCsvHeader << '\n';
    out.precision(17);
    for (const auto& l : logs) {
        const std::string status = to_string(l.status);
        for (std::size_t k = 0; k < l.steps.size(); ++k) {
            const auto& s = l.steps[k];
            out << l.episode_id << ',' << k << ',' << s.pusher.x << ',' << s.pusher.y << ',' << s.pusher.theta << ','
                << s.object.x << ',' << s.object.y << ',' << s.object.theta << ',' << s.contact.x << ',' << s.contact.y
                << ',' << s.contact.theta << ',' << s.action.dy << ',' << s.action.dtheta << ',' << s.reward << ','
                << to_string(s.mode) << ',' << status << '\n';
        }
    }
}

struct CsvEpisode {
    std::vector<StepRecord> steps;
    EpisodeStatus status = EpisodeStatus::Timeout;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(line);
    while (std::getline(in, cur, ',')) out.push_back(cur);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

template <typename T>
T parse_number(const std::string& s, const std::string& where) {
    T v{};
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw IoError(where + ": cannot parse '" + s + "'");
    return v;
}

}  // namespace detail

inline std::map<int, CsvEpisode> read_episodes_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kEpisodesCsvHeader) throw IoError("episodes.csv: unexpected header");
    std::map<int, CsvEpisode> out;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto f = detail::split_csv_line(line);
        const std::string where = "episodes.csv line " + std::to_string(lineno);
        if (f.size() != 16) throw IoError(where + ": expected 16 columns");
        auto d = [&](int i) { return detail::parse_number<double>(f[static_cast<std::size_t>(i)], where); };
        const int id = detail::parse_number<int>(f[0], where);
        const auto step = detail::parse_number<std::size_t>(f[1], where);
        CsvEpisode& ep = out[id];
        if (step != ep.steps.size()) throw IoError(where + ": steps out of order");
        StepRecord r;
        r.pusher = Pose2(d(2), d(3), d(4));
        r.object = Pose2(d(5), d(6), d(7));
        r.contact = Pose2(d(8), d(9), d(10));
        r.action = {d(11), d(12)};
        r.reward = d(13);
        r.mode = contact_mode_from_string(f[14]);
        ep.status = episode_status_from_string(f[15]);
        ep.steps.push_back(r);
    }
    return out;
}

inline nlohmann::json summary_json(const ScenarioSpec& spec, const ScenarioResult& r) {
    nlohmann::json eps = nlohmann::json::array();
    for (const auto& l : r.logs)
        eps.push_back({{"episode_id", l.episode_id},
                       {"object", l.object},
                       {"goal", {l.goal.x, l.goal.y}},
                       {"trial", l.trial},
                       {"seed", l.seed},
                       {"status", to_string(l.status)},
                       {"steps", l.num_steps()},
                       {"return", l.total_return()}});
    return {{"schema_version", kResultsSchemaVersion}, {"spec", spec}, {"stats", stats_json(r.stats)}, {"episodes", eps}};
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw IoError("short write on '" + path.string() + "'");
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Writes episodes.csv, summary.json and timing.json into `dir`. Wall-clock
/// times live only in timing.json so the other two files are reproducible.
inline void export_results(const std::filesystem::path& dir, const ScenarioSpec& spec, const ScenarioResult& r) {
    std::filesystem::create_directories(dir);
    std::ostringstream csv;
    write_episodes_csv(csv, r.logs);
    write_text_file(dir / "episodes.csv", csv.str());
    write_text_file(dir / "summary.json", summary_json(spec, r).dump(2) + "\n");
    nlohmann::json t = nlohmann::json::array();
    for (const auto& l : r.logs) t.push_back({{"episode_id", l.episode_id}, {"wall_clock_s", l.wall_clock}});
    write_text_file(dir / "timing.json", nlohmann::json{{"episodes", t}}.dump(2) + "\n");
}

struct ImportedResults {
    nlohmann::json spec;
    ScenarioResult result;
};

inline ImportedResults import_results(const std::filesystem::path& dir) {
    nlohmann::json summary;
    try {
        summary = nlohmann::json::parse(read_text_file(dir / "summary.json"));
    } catch (const nlohmann::json::exception& e) {
        throw IoError("corrupt summary.json in '" + dir.string() + "': " + e.what());
    }
    if (summary.value("schema_version", 0) != kResultsSchemaVersion) throw IoError("summary.json: unsupported schema_version");
    std::istringstream csv(read_text_file(dir / "episodes.csv"));
    auto rows = read_episodes_csv(csv);
    std::map<int, double> clock;
    if (std::filesystem::exists(dir / "timing.json")) {
        const auto t = nlohmann::json::parse(read_text_file(dir / "timing.json"));
        for (const auto& e : t.at("episodes")) clock[e.at("episode_id").get<int>()] = e.at("wall_clock_s").get<double>();
    }
    ImportedResults out;
    out.spec = summary.at("spec");
    for (const auto& e : summary.at("episodes")) {
        EpisodeLog l;
        l.episode_id = e.at("episode_id").get<int>();
        l.object = e.at("object").get<std::string>();
        l.goal = {e.at("goal")[0].get<double>(), e.at("goal")[1].get<double>()};
        l.trial = e.at("trial").get<int>();
        l.seed = e.at("seed").get<std::uint64_t>();
        l.status = episode_status_from_string(e.at("status").get<std::string>());
        auto it = rows.find(l.episode_id);
        if (it == rows.end()) throw IoError("episodes.csv has no rows for episode " + std::to_string(l.episode_id));
        if (it->second.status != l.status) throw IoError("episodes.csv and summary.json disagree on episode status");
        l.steps = std::move(it->second.steps);
        rows.erase(it);
        if (clock.count(l.episode_id)) l.wall_clock = clock[l.episode_id];
        out.result.logs.push_back(std::move(l));
    }
    if (!rows.empty()) throw IoError("episodes.csv has rows for episodes missing from summary.json");
    out.result.stats = summarize(out.result.logs);
    return out;
}

}  // namespace pushrl::harness
