#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "json.hpp"

#include "pushrl/core/error.hpp"
#include "pushrl/core/pose.hpp"

namespace pushrl::mbrl {

/// Maps (state, action) to network features and state transitions to
/// regression targets, and back.
///
/// Raw: features are [state, action]; targets are next - state with wrapped
/// differences on the angle fields.
///
/// ContactLocal (pushing model state only): features drop the world contact
/// position, encode the relative angle as (sin, cos), and the world
/// displacement of the contact frame is regressed in the contact frame's own
/// axes. The pusher-slider dynamics are invariant to where the contact sits in
/// the world and which way it faces, so this removes 3 of 8 inputs.
class StateCodec {
public:
    enum class Kind { Raw, ContactLocal };

    static StateCodec raw(std::size_t state_dim, std::size_t action_dim, std::vector<std::size_t> angle_fields = {}) {
        StateCodec c;
        c.kind_ = Kind::Raw;
        c.state_dim_ = state_dim;
        c.action_dim_ = action_dim;
        c.angle_fields_ = std::move(angle_fields);
        return c;
    }

    /// Layout [x_po, y_po, theta_po, x_o, y_o, theta_o] with a 2-D action.
    static StateCodec contact_local() {
        StateCodec c;
        c.kind_ = Kind::ContactLocal;
        c.state_dim_ = 6;
        c.action_dim_ = 2;
        c.angle_fields_ = {2, 5};
        return c;
    }

    /// Layout [x_po, y_po, theta_po, x_o, y_o, theta_o] with raw features.
    static StateCodec pushing_raw() { return raw(6, 2, {2, 5}); }

    Kind kind() const { return kind_; }
    std::size_t state_dim() const { return state_dim_; }
    std::size_t action_dim() const { return action_dim_; }
    std::size_t feature_dim() const { return kind_ == Kind::Raw ? state_dim_ + action_dim_ : 6; }
    std::size_t target_dim() const { return state_dim_; }
    const std::vector<std::size_t>& angle_fields() const { return angle_fields_; }

    void features(const double* s, const double* a, double* out) const {
        if (kind_ == Kind::Raw) {
            for (std::size_t i = 0; i < state_dim_; ++i) out[i] = s[i];
            for (std::size_t i = 0; i < action_dim_; ++i) out[state_dim_ + i] = a[i];
            return;
        }
        out[0] = s[0];
        out[1] = s[1];
        out[2] = std::sin(s[2]);
        out[3] = std::cos(s[2]);
        out[4] = a[0];
        out[5] = a[1];
    }

    void target(const double* s, const double* next, double* out) const {
        if (kind_ == Kind::Raw) {
            for (std::size_t i = 0; i < state_dim_; ++i) out[i] = is_angle(i) ? wrap_angle(next[i] - s[i]) : next[i] - s[i];
            return;
        }
        out[0] = next[0] - s[0];
        out[1] = next[1] - s[1];
        out[2] = wrap_angle(next[2] - s[2]);
        const Vec2 d = rotate({next[3] - s[3], next[4] - s[4]}, -s[5]);
        out[3] = d.x();
        out[4] = d.y();
        out[5] = wrap_angle(next[5] - s[5]);
    }

    void apply(const double* s, const double* delta, double* next) const {
        if (kind_ == Kind::Raw) {
            for (std::size_t i = 0; i < state_dim_; ++i) next[i] = is_angle(i) ? wrap_angle(s[i] + delta[i]) : s[i] + delta[i];
            return;
        }
        const Vec2 d = rotate({delta[3], delta[4]}, s[5]);
        next[0] = s[0] + delta[0];
        next[1] = s[1] + delta[1];
        next[2] = wrap_angle(s[2] + delta[2]);
        next[3] = s[3] + d.x();
        next[4] = s[4] + d.y();
        next[5] = wrap_angle(s[5] + delta[5]);
    }

    nlohmann::json to_json() const {
        return {{"kind", kind_ == Kind::Raw ? "raw" : "contact_local"},
                {"state_dim", state_dim_},
                {"action_dim", action_dim_},
                {"angle_fields", angle_fields_}};
    }

    static StateCodec from_json(const nlohmann::json& j) {
        const std::string k = j.at("kind");
        if (k == "contact_local") return contact_local();
        if (k == "raw")
            return raw(j.at("state_dim"), j.at("action_dim"), j.at("angle_fields").get<std::vector<std::size_t>>());
        throw Error("unknown state codec '" + k + "'");
    }

private:
    bool is_angle(std::size_t i) const {
        for (auto a : angle_fields_)
            if (a == i) return true;
        return false;
    }

    Kind kind_ = Kind::Raw;
    std::size_t state_dim_ = 0, action_dim_ = 0;
    std::vector<std::size_t> angle_fields_;
};

}  // namespace pushrl::mbrl
