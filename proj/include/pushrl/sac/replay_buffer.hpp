#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pushrl/core/error.hpp"
#include "pushrl/core/rng.hpp"
#include "pushrl/nn/tensor.hpp"

namespace pushrl::sac {

/// Sampled minibatch. `done` is 1 only for true terminal transitions (goal
/// reached or contact lost); a step-limit cut is stored with done = 0 so the
/// critic still bootstraps through it.
struct Batch {
    nn::Tensor obs;
    nn::Tensor action;
    std::vector<double> reward;
    nn::Tensor next_obs;
    std::vector<double> done;

    std::size_t size() const { return reward.size(); }
};

class ReplayBuffer {
public:
    ReplayBuffer(std::size_t obs_dim, std::size_t action_dim, std::size_t capacity)
        : obs_dim_(obs_dim), action_dim_(action_dim), capacity_(capacity) {
        if (capacity_ == 0) throw Error("replay capacity must be positive");
    }

    void add(std::span<const double> obs, std::span<const double> action, double reward, std::span<const double> next_obs,
             bool done) {
        if (obs.size() != obs_dim_ || next_obs.size() != obs_dim_ || action.size() != action_dim_)
            throw Error("replay: transition dimension mismatch");
        const std::size_t slot = inserted_ % capacity_;
        if (size() < capacity_) {
            obs_.resize(obs_.size() + obs_dim_);
            next_.resize(next_.size() + obs_dim_);
            act_.resize(act_.size() + action_dim_);
            rew_.push_back(0.0);
            done_.push_back(0.0);
        }
        std::copy(obs.begin(), obs.end(), obs_.begin() + static_cast<std::ptrdiff_t>(slot * obs_dim_));
        std::copy(next_obs.begin(), next_obs.end(), next_.begin() + static_cast<std::ptrdiff_t>(slot * obs_dim_));
        std::copy(action.begin(), action.end(), act_.begin() + static_cast<std::ptrdiff_t>(slot * action_dim_));
        rew_[slot] = reward;
        done_[slot] = done ? 1.0 : 0.0;
        ++inserted_;
    }

    std::size_t size() const { return inserted_ < capacity_ ? inserted_ : capacity_; }
    std::size_t capacity() const { return capacity_; }
    std::size_t obs_dim() const { return obs_dim_; }
    std::size_t action_dim() const { return action_dim_; }
    double done(std::size_t i) const { return done_.at(i); }
    double reward(std::size_t i) const { return rew_.at(i); }

    /// Uniform sample with replacement.
    Batch sample(std::size_t n, Rng& rng) const {
        if (size() == 0) throw Error("replay: cannot sample from an empty buffer");
        std::vector<std::size_t> idx(n);
        for (auto& i : idx) i = rng.below(size());
        return gather(idx);
    }

    Batch gather(const std::vector<std::size_t>& idx) const {
        Batch b{nn::Tensor(idx.size(), obs_dim_), nn::Tensor(idx.size(), action_dim_), {}, nn::Tensor(idx.size(), obs_dim_), {}};
        for (std::size_t k = 0; k < idx.size(); ++k) {
            const std::size_t i = idx[k];
            std::copy_n(obs_.data() + i * obs_dim_, obs_dim_, b.obs.row(k));
            std::copy_n(next_.data() + i * obs_dim_, obs_dim_, b.next_obs.row(k));
            std::copy_n(act_.data() + i * action_dim_, action_dim_, b.action.row(k));
            b.reward.push_back(rew_[i]);
            b.done.push_back(done_[i]);
        }
        return b;
    }

private:
    std::size_t obs_dim_, action_dim_, capacity_;
    std::vector<double> obs_, next_, act_, rew_, done_;
    std::size_t inserted_ = 0;
};

}  // namespace pushrl::sac
