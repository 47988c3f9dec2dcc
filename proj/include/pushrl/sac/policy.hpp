#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "pushrl/core/error.hpp"
#include "pushrl/nn/gaussian.hpp"
#include "pushrl/nn/mlp.hpp"

namespace pushrl::sac {

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;

/// log(1 - tanh(u)^2), stable for large |u|.
inline double log_one_minus_tanh2(double u) {
    return 2.0 * (std::numbers::ln2 - u - nn::softplus(-2.0 * u));
}

/// Squashed-Gaussian policy output for a batch. Actions live in [-1, 1]^A;
/// the agent maps them onto the environment's box.
struct PolicySample {
    nn::Tensor mean;      ///< pre-squash mean
    nn::Tensor log_std;   ///< clamped
    nn::Tensor noise;     ///< standard-normal draws (zero when deterministic)
    nn::Tensor pre;       ///< mean + std * noise
    nn::Tensor action;    ///< tanh(pre)
    std::vector<double> log_prob;  ///< density of `action` in [-1, 1]^A
    nn::Tensor raw;       ///< network output [mean | raw log std]
};

/// Evaluates the policy. With `noise` null the mean action is returned and the
/// log-density is evaluated at zero noise.
inline PolicySample policy_sample(const nn::Mlp& policy, const nn::Tensor& obs, const nn::Tensor* noise,
                                  nn::Trace* trace = nullptr) {
    PolicySample s;
    s.raw = policy.forward(obs, trace);
    const std::size_t n = obs.rows(), a = policy.output_dim() / 2;
    if (noise) noise->require_shape(n, a, "policy noise");
    s.mean = nn::Tensor(n, a);
    s.log_std = nn::Tensor(n, a);
    s.noise = noise ? *noise : nn::Tensor(n, a);
    s.pre = nn::Tensor(n, a);
    s.action = nn::Tensor(n, a);
    s.log_prob.assign(n, 0.0);
    const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < a; ++j) {
            const double mu = s.raw(i, j);
            const double ls = std::clamp(s.raw(i, a + j), kLogStdMin, kLogStdMax);
            const double eps = s.noise(i, j);
            const double u = mu + std::exp(ls) * eps;
            s.mean(i, j) = mu;
            s.log_std(i, j) = ls;
            s.pre(i, j) = u;
            s.action(i, j) = std::tanh(u);
            s.log_prob[i] += -0.5 * eps * eps - ls - half_log_2pi - log_one_minus_tanh2(u);
        }
    }
    return s;
}

/// Q-network input: observation features followed by the normalized action.
inline nn::Tensor critic_input(const nn::Tensor& obs, const nn::Tensor& action) {
    if (obs.rows() != action.rows()) throw Error("critic input: batch size mismatch");
    nn::Tensor x(obs.rows(), obs.cols() + action.cols());
    for (std::size_t i = 0; i < obs.rows(); ++i) {
        std::copy_n(obs.row(i), obs.cols(), x.row(i));
        std::copy_n(action.row(i), action.cols(), x.row(i) + obs.cols());
    }
    return x;
}

struct LossGrad {
    double loss = 0.0;
    std::vector<double> grad;  ///< parameter gradient of `loss`
};

/// Mean squared regression of Q(obs, action) onto fixed targets.
inline LossGrad critic_loss(const nn::Mlp& q, const nn::Tensor& obs, const nn::Tensor& action,
                            const std::vector<double>& targets) {
    const std::size_t n = obs.rows();
    if (targets.size() != n) throw Error("critic loss: target count mismatch");
    nn::Trace trace;
    const nn::Tensor out = q.forward(critic_input(obs, action), &trace);
    nn::Tensor g(n, 1);
    LossGrad r;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = out(i, 0) - targets[i];
        r.loss += d * d / static_cast<double>(n);
        g(i, 0) = 2.0 * d / static_cast<double>(n);
    }
    r.grad = q.backward(trace, g).params;
    return r;
}

struct ActorLoss {
    double loss = 0.0;
    double mean_log_prob = 0.0;
    std::vector<double> grad;
};

/// Reparameterized actor objective mean_i[alpha * log pi(a_i|s_i) - min_j Q_j(s_i, a_i)]
/// for fixed noise, with its gradient w.r.t. the policy parameters.
inline ActorLoss actor_loss(const nn::Mlp& policy, const nn::Mlp& q1, const nn::Mlp& q2, const nn::Tensor& obs,
                            const nn::Tensor& noise, double alpha) {
    const std::size_t n = obs.rows(), a = policy.output_dim() / 2;
    nn::Trace ptrace;
    const PolicySample s = policy_sample(policy, obs, &noise, &ptrace);
    const nn::Tensor x = critic_input(obs, s.action);
    nn::Trace t1, t2;
    const nn::Tensor v1 = q1.forward(x, &t1);
    const nn::Tensor v2 = q2.forward(x, &t2);
    nn::Tensor g1(n, 1), g2(n, 1);
    ActorLoss r;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const bool first = v1(i, 0) <= v2(i, 0);
        const double qmin = first ? v1(i, 0) : v2(i, 0);
        r.loss += (alpha * s.log_prob[i] - qmin) * inv_n;
        r.mean_log_prob += s.log_prob[i] * inv_n;
        (first ? g1 : g2)(i, 0) = -inv_n;
    }
    // d(-Q)/d action through whichever critic was the minimum
    const nn::Tensor dx1 = q1.backward(t1, g1).input;
    const nn::Tensor dx2 = q2.backward(t2, g2).input;
    const std::size_t od = obs.cols();
    nn::Tensor graw(n, 2 * a);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < a; ++j) {
            const double act = s.action(i, j);
            const double dq_da = dx1(i, od + j) + dx2(i, od + j);
            // d/du of [alpha*logpi - Q]: logpi carries -log(1 - tanh^2 u) whose derivative is 2 tanh u
            const double dl_du = alpha * inv_n * 2.0 * act + dq_da * (1.0 - act * act);
            const double raw_ls = s.raw(i, a + j);
            const bool inside = raw_ls > kLogStdMin && raw_ls < kLogStdMax;
            graw(i, j) = dl_du;
            graw(i, a + j) =
                inside ? -alpha * inv_n + dl_du * std::exp(s.log_std(i, j)) * s.noise(i, j) : 0.0;
        }
    r.grad = policy.backward(ptrace, graw).params;
    return r;
}

}  // namespace pushrl::sac
