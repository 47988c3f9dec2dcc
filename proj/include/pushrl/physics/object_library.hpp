#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "pushrl/core/error.hpp"
#include "pushrl/physics/shape.hpp"

namespace pushrl {

/// Named collection of 2D object proxies with their friction parameters.
///
/// File layout:
///   { "schema_version": 1,
///     "objects": { "<name>": { "vertices": [[x, y], ...], "mu_contact": m,
///                              "c_ls": c, "cof_offset": [x, y] }, ... } }
/// `c_ls` and `cof_offset` are optional (defaults: 0.6 * circumradius, zero).
class ObjectLibrary {
public:
    static constexpr int kSchemaVersion = 1;

    void add(ObjectSpec spec) {
        spec.slider.validate(spec.shape);
        const std::string name = spec.shape.name();
        objects_.insert_or_assign(name, std::move(spec));
    }

    const ObjectSpec& at(const std::string& name) const {
        auto it = objects_.find(name);
        if (it == objects_.end()) throw Error("unknown object '" + name + "'; known objects: " + known_names());
        return it->second;
    }

    bool contains(const std::string& name) const { return objects_.count(name) != 0; }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        for (const auto& [k, _] : objects_) out.push_back(k);
        return out;
    }

    std::string known_names() const {
        std::string s;
        for (const auto& [k, _] : objects_) s += (s.empty() ? "" : ", ") + k;
        return s;
    }

    nlohmann::json to_json() const {
        nlohmann::json objs = nlohmann::json::object();
        for (const auto& [name, spec] : objects_) {
            nlohmann::json verts = nlohmann::json::array();
            for (const auto& v : spec.shape.vertices()) verts.push_back({v.x(), v.y()});
            objs[name] = {{"vertices", verts},
                          {"mu_contact", spec.slider.mu_contact},
                          {"c_ls", spec.slider.c_ls},
                          {"cof_offset", {spec.slider.cof_offset.x(), spec.slider.cof_offset.y()}}};
        }
        return {{"schema_version", kSchemaVersion}, {"objects", objs}};
    }

    static ObjectLibrary from_json(const nlohmann::json& j) {
        if (!j.is_object() || j.value("schema_version", 0) != kSchemaVersion)
            throw ConfigError("object library: missing or unsupported schema_version");
        if (!j.contains("objects") || !j["objects"].is_object())
            throw ConfigError("object library: 'objects' must be an object");
        ObjectLibrary lib;
        for (const auto& [name, o] : j["objects"].items()) {
            const std::string where = "object library: objects." + name;
            try {
                std::vector<Vec2> verts;
                for (const auto& v : o.at("vertices")) verts.emplace_back(v.at(0).get<double>(), v.at(1).get<double>());
                ConvexShape shape(name, std::move(verts));
                SliderParams sp = SliderParams::defaults_for(shape);
                sp.mu_contact = o.at("mu_contact").get<double>();
                if (o.contains("c_ls")) sp.c_ls = o["c_ls"].get<double>();
                if (o.contains("cof_offset")) sp.cof_offset = {o["cof_offset"].at(0).get<double>(), o["cof_offset"].at(1).get<double>()};
                for (const auto& [key, _] : o.items())
                    if (key != "vertices" && key != "mu_contact" && key != "c_ls" && key != "cof_offset")
                        throw ConfigError("unknown key '" + key + "'");
                lib.add({std::move(shape), sp});
            } catch (const nlohmann::json::exception& e) {
                throw ConfigError(where + ": " + e.what());
            } catch (const Error& e) {
                throw ConfigError(where + ": " + e.what());
            }
        }
        return lib;
    }

    static ObjectLibrary load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open object library '" + path + "'");
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError("object library '" + path + "': " + e.what());
        }
        return from_json(j);
    }

    void save(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw IoError("cannot write object library '" + path + "'");
        out << to_json().dump(2) << '\n';
    }

private:
    std::map<std::string, ObjectSpec> objects_;
};

/// Built-in 2D proxies: the 75 mm training cube plus unseen test objects
/// (round, hexagonal, thin and large). Round objects are 32-gons.
inline ObjectLibrary default_object_library() {
    ObjectLibrary lib;
    auto add = [&lib](ConvexShape shape) {
        SliderParams sp = SliderParams::defaults_for(shape);
        lib.add({std::move(shape), sp});
    };
    add(make_box("square-0.075", 0.075, 0.075));
    add(make_regular_polygon("circle-0.045", 32, 0.045));
    add(make_regular_polygon("hexagon-0.04", 6, 0.04));
    add(make_box("thin-box-0.09x0.03", 0.03, 0.09));
    add(make_regular_polygon("large-circle-0.08", 32, 0.08));
    return lib;
}

}  // namespace pushrl
