#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "pushrl/core/error.hpp"
#include "pushrl/core/pose.hpp"

namespace pushrl::mbrl {

/// FIFO store of (state, action, next_state) rows for dynamics training.
/// Once full, the oldest transition is overwritten.
class TransitionBuffer {
public:
    TransitionBuffer(std::size_t state_dim, std::size_t action_dim, std::size_t capacity,
                     std::vector<std::size_t> angle_fields = {})
        : state_dim_(state_dim), action_dim_(action_dim), capacity_(capacity), angle_fields_(std::move(angle_fields)) {
        if (capacity_ == 0) throw Error("transition buffer capacity must be positive");
        for (auto i : angle_fields_)
            if (i >= state_dim_) throw Error("angle field index out of range");
    }

    void add(const double* state, const double* action, const double* next_state) {
        for (std::size_t i = 0; i < state_dim_; ++i)
            if (!std::isfinite(state[i]) || !std::isfinite(next_state[i])) throw Error("non-finite transition");
        const std::size_t slot = inserted_ % capacity_;
        if (size() < capacity_) {
            states_.resize(states_.size() + state_dim_);
            actions_.resize(actions_.size() + action_dim_);
            next_.resize(next_.size() + state_dim_);
        }
        for (std::size_t i = 0; i < state_dim_; ++i) {
            states_[slot * state_dim_ + i] = wrap(i, state[i]);
            next_[slot * state_dim_ + i] = wrap(i, next_state[i]);
        }
        for (std::size_t i = 0; i < action_dim_; ++i) actions_[slot * action_dim_ + i] = action[i];
        ++inserted_;
    }

    template <typename S, typename A>
        requires requires(const S& s, const A& a) { s.data(); a.data(); }
    void add(const S& state, const A& action, const S& next_state) {
        add(state.data(), action.data(), next_state.data());
    }

    std::size_t size() const { return inserted_ < capacity_ ? inserted_ : capacity_; }
    bool empty() const { return inserted_ == 0; }
    std::size_t capacity() const { return capacity_; }
    std::size_t insertion_count() const { return inserted_; }
    std::size_t state_dim() const { return state_dim_; }
    std::size_t action_dim() const { return action_dim_; }

    const double* state(std::size_t i) const { return states_.data() + i * state_dim_; }
    const double* action(std::size_t i) const { return actions_.data() + i * action_dim_; }
    const double* next_state(std::size_t i) const { return next_.data() + i * state_dim_; }

private:
    double wrap(std::size_t field, double v) const {
        for (auto a : angle_fields_)
            if (a == field) return wrap_angle(v);
        return v;
    }

    std::size_t state_dim_, action_dim_, capacity_;
    std::vector<std::size_t> angle_fields_;
    std::vector<double> states_, actions_, next_;
    std::size_t inserted_ = 0;
};

}  // namespace pushrl::mbrl
