#pragma once

#include <filesystem>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "pushrl/env/task.hpp"
#include "pushrl/harness/export.hpp"
#include "pushrl/harness/scenario.hpp"
#include "pushrl/physics/object_library.hpp"

namespace pushrl::harness {

/// Plot coordinates are world metres: the viewBox spans the workspace plus a
/// margin and the drawing group flips y (transform="scale(1,-1)"), so a world
/// point (x, y) is written as-is.
struct SvgStyle {
    double margin = 0.03;
    double pixels_per_metre = 1500.0;
    double goal_radius = 0.025;
};

inline const std::vector<std::string>& svg_palette() {
    static const std::vector<std::string> p{"#1f77b4", "#d62728", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};
    return p;
}

inline void render_svg(std::ostream& out, const std::vector<EpisodeLog>& logs, const std::vector<Goal>& goals,
                       const Workspace& ws, const ObjectLibrary* objects = nullptr, const SvgStyle& style = {}) {
    const double m = style.margin;
    const double w = ws.width() + 2 * m, h = ws.height() + 2 * m;
    out.precision(17);
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w * style.pixels_per_metre << "\" height=\""
        << h * style.pixels_per_metre << "\" viewBox=\"" << ws.x_min - m << ' ' << -(ws.y_max + m) << ' ' << w << ' ' << h
        << "\">\n"
        << "<g id=\"world\" transform=\"scale(1,-1)\">\n"
        << "<rect class=\"workspace\" x=\"" << ws.x_min << "\" y=\"" << ws.y_min << "\" width=\"" << ws.width()
        << "\" height=\"" << ws.height() << "\" fill=\"none\" stroke=\"#444\" stroke-width=\"0.001\"/>\n";
    for (const auto& g : goals)
        out << "<circle class=\"goal\" cx=\"" << g.x << "\" cy=\"" << g.y << "\" r=\"" << style.goal_radius
            << "\" fill=\"#2ca02c\" fill-opacity=\"0.35\" stroke=\"#2ca02c\" stroke-width=\"0.001\"/>\n";
    auto outline = [&](const EpisodeLog& l, const Pose2& pose, const std::string& colour, const char* cls) {
        if (!objects || !objects->contains(l.object)) return;
        const auto& shape = objects->at(l.object).shape;
        out << "<polygon class=\"" << cls << "\" points=\"";
        for (std::size_t i = 0; i < shape.size(); ++i) {
            const Vec2 p = pose.transform(shape.vertex(i));
            out << (i ? " " : "") << p.x() << ',' << p.y();
        }
        out << "\" fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"0.0008\" stroke-dasharray=\"0.003 0.002\"/>\n";
    };
    for (std::size_t e = 0; e < logs.size(); ++e) {
        const auto& l = logs[e];
        if (l.steps.empty()) continue;
        const std::string colour = svg_palette()[e % svg_palette().size()];
        outline(l, l.steps.front().object, colour, "object-start");
        outline(l, l.steps.back().object, colour, "object-end");
        out << "<polyline class=\"object-path\" data-episode=\"" << l.episode_id << "\" points=\"";
        for (std::size_t k = 0; k < l.steps.size(); ++k)
            out << (k ? " " : "") << l.steps[k].contact.x << ',' << l.steps[k].contact.y;
        out << "\" fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"0.0015\"/>\n";
        out << "<polyline class=\"pusher-path\" data-episode=\"" << l.episode_id << "\" points=\"";
        for (std::size_t k = 0; k < l.steps.size(); ++k)
            out << (k ? " " : "") << l.steps[k].pusher.x << ',' << l.steps[k].pusher.y;
        out << "\" fill=\"none\" stroke=\"" << colour << "\" stroke-opacity=\"0.5\" stroke-width=\"0.0008\"/>\n";
    }
    out << "</g>\n</svg>\n";
}

inline void render_svg_file(const std::filesystem::path& path, const std::vector<EpisodeLog>& logs,
                            const std::vector<Goal>& goals, const Workspace& ws, const ObjectLibrary* objects = nullptr) {
    std::ostringstream ss;
    render_svg(ss, logs, goals, ws, objects);
    write_text_file(path, ss.str());
}

}  // namespace pushrl::harness
