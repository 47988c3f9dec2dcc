#pragma once

#include <set>
#include <string>
#include <utility>

#include "json.hpp"

#include "pushrl/core/error.hpp"

namespace pushrl {

/// Strict reader for one JSON object: every lookup records the key, and
/// finish() rejects anything that was never read. Error messages carry the
/// dotted path of the offending field.
class JsonFields {
public:
    JsonFields(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_ + ": expected a JSON object");
    }

    template <typename T>
    void read(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError(field(key) + ": wrong type (got " + std::string(j_.at(key).type_name()) + ")");
        }
    }

    template <typename T>
    void require(const char* key, T& out) {
        if (!j_.contains(key)) throw ConfigError(field(key) + ": required field missing");
        read(key, out);
    }

    bool has(const char* key) const { return j_.contains(key); }

    const nlohmann::json& sub(const char* key) {
        seen_.insert(key);
        return j_.at(key);
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    void finish() const {
        for (const auto& [key, _] : j_.items())
            if (!seen_.count(key)) throw ConfigError(field(key) + ": unknown key");
    }

private:
    const nlohmann::json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

}  // namespace pushrl
