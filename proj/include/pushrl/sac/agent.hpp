#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "pushrl/core/error.hpp"
#include "pushrl/core/json_fields.hpp"
#include "pushrl/core/rng.hpp"
#include "pushrl/mbrl/trajectory_opt.hpp"
#include "pushrl/nn/adam.hpp"
#include "pushrl/nn/checkpoint.hpp"
#include "pushrl/nn/mlp.hpp"
#include "pushrl/sac/policy.hpp"
#include "pushrl/sac/replay_buffer.hpp"

namespace pushrl::sac {

using mbrl::ActionBox;

struct SacConfig {
    double gamma = 0.99;
    double tau = 0.005;
    double actor_lr = 3e-4;
    double critic_lr = 3e-4;
    double alpha_lr = 3e-4;
    std::size_t batch_size = 256;
    std::size_t replay_capacity = 1000000;
    long initial_random_steps = 10000;
    /// NaN means -dim(action).
    double target_entropy = std::numeric_limits<double>::quiet_NaN();
    double initial_alpha = 1.0;
    int updates_per_step = 1;
    std::vector<std::size_t> hidden{256, 256};
    /// Per-dimension multiplier applied to observations before the networks.
    std::vector<double> obs_scale;
    long eval_interval = 5000;
    int eval_episodes = 10;

    void validate() const {
        if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("sac.gamma must be in [0, 1)");
        if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("sac.tau must be in (0, 1]");
        if (!(actor_lr > 0.0 && critic_lr > 0.0 && alpha_lr >= 0.0)) throw ConfigError("sac learning rates must be > 0");
        if (batch_size < 2) throw ConfigError("sac.batch_size must be >= 2");
        if (replay_capacity == 0) throw ConfigError("sac.replay_capacity must be positive");
        if (initial_random_steps < 0) throw ConfigError("sac.initial_random_steps must be >= 0");
        if (!(initial_alpha > 0.0)) throw ConfigError("sac.initial_alpha must be > 0");
        if (updates_per_step < 1) throw ConfigError("sac.updates_per_step must be >= 1");
        if (hidden.empty()) throw ConfigError("sac.hidden needs at least one layer");
        if (eval_interval <= 0 || eval_episodes < 0) throw ConfigError("sac evaluation cadence must be positive");
    }
};

inline void to_json(nlohmann::json& j, const SacConfig& c) {
    j = {{"gamma", c.gamma},
         {"tau", c.tau},
         {"actor_lr", c.actor_lr},
         {"critic_lr", c.critic_lr},
         {"alpha_lr", c.alpha_lr},
         {"batch_size", c.batch_size},
         {"replay_capacity", c.replay_capacity},
         {"initial_random_steps", c.initial_random_steps},
         {"target_entropy", std::isnan(c.target_entropy) ? nlohmann::json(nullptr) : nlohmann::json(c.target_entropy)},
         {"initial_alpha", c.initial_alpha},
         {"updates_per_step", c.updates_per_step},
         {"hidden", c.hidden},
         {"obs_scale", c.obs_scale},
         {"eval_interval", c.eval_interval},
         {"eval_episodes", c.eval_episodes}};
}

inline SacConfig sac_config_from_json(const nlohmann::json& j, const std::string& path) {
    SacConfig c;
    JsonFields f(j, path);
    f.read("gamma", c.gamma);
    f.read("tau", c.tau);
    f.read("actor_lr", c.actor_lr);
    f.read("critic_lr", c.critic_lr);
    f.read("alpha_lr", c.alpha_lr);
    f.read("batch_size", c.batch_size);
    f.read("replay_capacity", c.replay_capacity);
    f.read("initial_random_steps", c.initial_random_steps);
    if (f.has("target_entropy") && !f.sub("target_entropy").is_null()) f.read("target_entropy", c.target_entropy);
    f.read("initial_alpha", c.initial_alpha);
    f.read("updates_per_step", c.updates_per_step);
    f.read("hidden", c.hidden);
    f.read("obs_scale", c.obs_scale);
    f.read("eval_interval", c.eval_interval);
    f.read("eval_episodes", c.eval_episodes);
    f.finish();
    c.validate();
    return c;
}

struct UpdateStats {
    double critic_loss = 0.0;
    double actor_loss = 0.0;
    double alpha_loss = 0.0;
    double alpha = 0.0;
    double entropy = 0.0;  ///< minus the mean log-density of fresh policy samples
};

/// Soft actor-critic learner: squashed-Gaussian policy, twin Q-networks with
/// Polyak-averaged targets, and a learned entropy temperature.
class SacAgent {
public:
    SacAgent(std::size_t obs_dim, ActionBox box, SacConfig config, std::uint64_t seed)
        : obs_dim_(obs_dim), box_(std::move(box)), config_(std::move(config)), rng_(seed, 0x736163) {
        config_.validate();
        box_.validate();
        if (!config_.obs_scale.empty() && config_.obs_scale.size() != obs_dim_)
            throw ConfigError("sac.obs_scale must have one entry per observation dimension");
        if (config_.obs_scale.empty()) config_.obs_scale.assign(obs_dim_, 1.0);
        if (std::isnan(config_.target_entropy)) config_.target_entropy = -static_cast<double>(box_.dim());
        Rng init = rng_.fork(1);
        const std::size_t ad = box_.dim();
        policy_ = nn::Mlp::make(obs_dim_, config_.hidden, 2 * ad, nn::Activation::Relu, init);
        q1_ = nn::Mlp::make(obs_dim_ + ad, config_.hidden, 1, nn::Activation::Relu, init);
        q2_ = nn::Mlp::make(obs_dim_ + ad, config_.hidden, 1, nn::Activation::Relu, init);
        q1_target_ = q1_;
        q2_target_ = q2_;
        log_alpha_ = std::log(config_.initial_alpha);
        reset_optimizers();
    }

    std::size_t obs_dim() const { return obs_dim_; }
    std::size_t action_dim() const { return box_.dim(); }
    const ActionBox& box() const { return box_; }
    const SacConfig& config() const { return config_; }
    double alpha() const { return std::exp(log_alpha_); }
    double log_alpha() const { return log_alpha_; }
    nn::Mlp& policy() { return policy_; }
    const nn::Mlp& policy() const { return policy_; }
    nn::Mlp& q1() { return q1_; }
    nn::Mlp& q2() { return q2_; }
    const nn::Mlp& q1() const { return q1_; }
    const nn::Mlp& q2() const { return q2_; }
    const nn::Mlp& q1_target() const { return q1_target_; }
    const nn::Mlp& q2_target() const { return q2_target_; }
    Rng& rng() { return rng_; }

    nn::Tensor scale_obs(const nn::Tensor& obs) const {
        obs.require_cols(obs_dim_, "sac observation");
        nn::Tensor out = obs;
        for (std::size_t i = 0; i < out.rows(); ++i)
            for (std::size_t j = 0; j < obs_dim_; ++j) out(i, j) *= config_.obs_scale[j];
        return out;
    }

    /// Maps a normalized action in [-1, 1]^A onto the box (clamped, so rounding
    /// at the ends cannot leave it).
    std::vector<double> to_env_action(std::span<const double> normalized) const {
        std::vector<double> a(box_.dim());
        for (std::size_t j = 0; j < a.size(); ++j) {
            const double mid = 0.5 * (box_.lower[j] + box_.upper[j]);
            const double half = 0.5 * (box_.upper[j] - box_.lower[j]);
            a[j] = box_.clamp(j, mid + half * normalized[j]);
        }
        return a;
    }

    std::vector<double> to_normalized_action(std::span<const double> env_action) const {
        std::vector<double> a(box_.dim());
        for (std::size_t j = 0; j < a.size(); ++j) {
            const double mid = 0.5 * (box_.lower[j] + box_.upper[j]);
            const double half = 0.5 * (box_.upper[j] - box_.lower[j]);
            a[j] = half > 0.0 ? std::clamp((env_action[j] - mid) / half, -1.0, 1.0) : 0.0;
        }
        return a;
    }

    /// Normalized action for one observation. Deterministic mode returns the
    /// squashed mean; otherwise a sample using `rng` (or the agent's own).
    std::vector<double> act_normalized(std::span<const double> obs, bool deterministic, Rng* rng = nullptr) {
        if (obs.size() != obs_dim_) throw Error("sac act: observation dimension mismatch");
        nn::Tensor x(1, obs_dim_, std::vector<double>(obs.begin(), obs.end()));
        x = scale_obs(x);
        nn::Tensor noise(1, box_.dim());
        if (!deterministic) {
            Rng& r = rng ? *rng : rng_;
            for (auto& v : noise.data) v = r.normal();
        }
        const PolicySample s = policy_sample(policy_, x, &noise);
        return s.action.data;
    }

    /// Environment-unit action for one observation.
    std::vector<double> act(std::span<const double> obs, bool deterministic, Rng* rng = nullptr) {
        return to_env_action(act_normalized(obs, deterministic, rng));
    }

    std::vector<double> act(std::span<const double> obs, bool deterministic, Rng* rng = nullptr) const {
        if (!deterministic && !rng) throw Error("sac act: a const agent needs an rng to sample");
        if (obs.size() != obs_dim_) throw Error("sac act: observation dimension mismatch");
        nn::Tensor x(1, obs_dim_, std::vector<double>(obs.begin(), obs.end()));
        x = scale_obs(x);
        nn::Tensor noise(1, box_.dim());
        if (!deterministic)
            for (auto& v : noise.data) v = rng->normal();
        return to_env_action(policy_sample(policy_, x, &noise).action.data);
    }

    /// Soft Bellman targets r + gamma (1 - done) (min target Q(s', a') - alpha log pi(a'|s')).
    std::vector<double> critic_targets(const Batch& b, const nn::Tensor& next_noise) const {
        const nn::Tensor next_obs = scale_obs(b.next_obs);
        const PolicySample s = policy_sample(policy_, next_obs, &next_noise);
        const nn::Tensor x = critic_input(next_obs, s.action);
        const nn::Tensor v1 = q1_target_.forward(x), v2 = q2_target_.forward(x);
        std::vector<double> y(b.size());
        const double alpha = this->alpha();
        for (std::size_t i = 0; i < y.size(); ++i) {
            const double soft_v = std::min(v1(i, 0), v2(i, 0)) - alpha * s.log_prob[i];
            y[i] = b.reward[i] + config_.gamma * (1.0 - b.done[i]) * soft_v;
        }
        return y;
    }

    /// One gradient step on critics, actor and temperature, then a Polyak
    /// update of the target critics.
    UpdateStats update(const Batch& b) {
        if (b.size() < 2) throw Error("sac update needs a batch of at least 2 transitions");
        b.action.require_cols(box_.dim(), "sac batch action");
        const std::size_t n = b.size(), ad = box_.dim();
        UpdateStats st;

        nn::Tensor next_noise(n, ad), noise(n, ad);
        for (auto& v : next_noise.data) v = rng_.normal();
        for (auto& v : noise.data) v = rng_.normal();

        const std::vector<double> y = critic_targets(b, next_noise);
        const nn::Tensor obs = scale_obs(b.obs);
        const LossGrad c1 = critic_loss(q1_, obs, b.action, y);
        const LossGrad c2 = critic_loss(q2_, obs, b.action, y);
        nn::optim_step(q1_.params(), c1.grad, q1_opt_);
        nn::optim_step(q2_.params(), c2.grad, q2_opt_);
        st.critic_loss = 0.5 * (c1.loss + c2.loss);

        const ActorLoss al = actor_loss(policy_, q1_, q2_, obs, noise, alpha());
        nn::optim_step(policy_.params(), al.grad, policy_opt_);
        st.actor_loss = al.loss;
        st.entropy = -al.mean_log_prob;

        // d/d(log alpha) of -log_alpha * (log pi + target)
        const double g_alpha = -(al.mean_log_prob + config_.target_entropy);
        st.alpha_loss = -log_alpha_ * (al.mean_log_prob + config_.target_entropy);
        if (config_.alpha_lr > 0.0) {
            std::vector<double> la{log_alpha_};
            const std::vector<double> ga{g_alpha};
            nn::optim_step(la, ga, alpha_opt_);
            log_alpha_ = la[0];
        }
        st.alpha = alpha();

        soft_update(q1_target_, q1_, config_.tau);
        soft_update(q2_target_, q2_, config_.tau);
        return st;
    }

    nn::Checkpoint to_checkpoint() const {
        nn::Checkpoint ck;
        ck.networks = {{"policy", policy_}, {"q1", q1_}, {"q2", q2_}, {"q1_target", q1_target_}, {"q2_target", q2_target_}};
        ck.meta["sac"] = {{"config", config_},
                          {"obs_dim", obs_dim_},
                          {"action_lower", box_.lower},
                          {"action_upper", box_.upper},
                          {"log_alpha", log_alpha_}};
        return ck;
    }

    static SacAgent from_checkpoint(const nn::Checkpoint& ck, std::uint64_t seed = 0) {
        const auto& m = ck.meta.at("sac");
        SacConfig cfg = sac_config_from_json(m.at("config"), "sac.config");
        ActionBox box{m.at("action_lower").get<std::vector<double>>(), m.at("action_upper").get<std::vector<double>>()};
        SacAgent agent(m.at("obs_dim").get<std::size_t>(), box, cfg, seed);
        auto load = [&](nn::Mlp& dst, const char* name) {
            const auto& src = ck.network(name);
            if (src.dims() != dst.dims()) throw Error(std::string("checkpoint network '") + name + "' has unexpected dims");
            dst = src;
        };
        load(agent.policy_, "policy");
        load(agent.q1_, "q1");
        load(agent.q2_, "q2");
        load(agent.q1_target_, "q1_target");
        load(agent.q2_target_, "q2_target");
        agent.log_alpha_ = m.at("log_alpha").get<double>();
        return agent;
    }

private:
    static void soft_update(nn::Mlp& target, const nn::Mlp& source, double tau) {
        auto& t = target.params();
        const auto& s = source.params();
        if (tau == 1.0) {
            t = s;
            return;
        }
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = tau * s[i] + (1.0 - tau) * t[i];
    }

    void reset_optimizers() {
        policy_opt_ = nn::OptimState(policy_.num_params(), config_.actor_lr);
        q1_opt_ = nn::OptimState(q1_.num_params(), config_.critic_lr);
        q2_opt_ = nn::OptimState(q2_.num_params(), config_.critic_lr);
        alpha_opt_ = nn::OptimState(1, config_.alpha_lr > 0.0 ? config_.alpha_lr : 1.0);
    }

    std::size_t obs_dim_;
    ActionBox box_;
    SacConfig config_;
    Rng rng_;
    nn::Mlp policy_, q1_, q2_, q1_target_, q2_target_;
    nn::OptimState policy_opt_, q1_opt_, q2_opt_, alpha_opt_;
    double log_alpha_ = 0.0;
};

}  // namespace pushrl::sac
