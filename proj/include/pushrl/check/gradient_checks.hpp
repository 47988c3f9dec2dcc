#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pushrl/core/rng.hpp"
#include "pushrl/nn/gaussian.hpp"
#include "pushrl/nn/mlp.hpp"
#include "pushrl/sac/policy.hpp"

namespace pushrl::check {

struct GradientCheckReport {
    int pairs = 0;
    long components = 0;
    double max_rel_error = 0.0;
    std::string worst;  ///< loss family of the worst component
};

inline double relative_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

namespace detail {

inline nn::Tensor random_tensor(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
    nn::Tensor t(r, c);
    for (auto& v : t.data) v = rng.normal(0.0, scale);
    return t;
}

inline std::vector<std::size_t> random_hidden(Rng& rng) {
    std::vector<std::size_t> h(1 + rng.below(2));
    for (auto& d : h) d = 3 + rng.below(8);
    return h;
}

/// Compares `grad` against central differences of `loss` over `params`.
inline void compare(const std::function<double()>& loss, std::vector<double>& params, const std::vector<double>& grad,
                    double grad_scale, const char* family, GradientCheckReport& rep) {
    const double h = 1e-5;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double p0 = params[i];
        params[i] = p0 + h;
        const double up = loss();
        params[i] = p0 - h;
        const double dn = loss();
        params[i] = p0;
        const double e = relative_error(grad_scale * grad[i], (up - dn) / (2 * h));
        ++rep.components;
        if (e > rep.max_rel_error) {
            rep.max_rel_error = e;
            rep.worst = family;
        }
    }
}

}  // namespace detail

/// Central-difference checks over `pairs` random (network, input) draws,
/// cycling through a weighted MLP output, the Gaussian NLL, the critic
/// regression loss and the reparameterized actor loss. Networks use tanh so
/// the loss is smooth at every draw. `grad_scale` multiplies the analytic
/// gradient and exists only to demonstrate that the check can fail.
inline GradientCheckReport run_gradient_checks(int pairs, std::uint64_t seed, double grad_scale = 1.0) {
    GradientCheckReport rep;
    Rng rng(seed, 0x67726164);
    const auto act = nn::Activation::Tanh;
    for (int p = 0; p < pairs; ++p, ++rep.pairs) {
        const std::size_t batch = 2 + rng.below(5);
        switch (p % 4) {
            case 0: {
                const std::size_t in = 1 + rng.below(5), out = 1 + rng.below(4);
                nn::Mlp net = nn::Mlp::make(in, detail::random_hidden(rng), out, act, rng);
                const nn::Tensor x = detail::random_tensor(batch, in, rng);
                const nn::Tensor w = detail::random_tensor(batch, out, rng);
                auto loss = [&] {
                    const nn::Tensor y = net.forward(x);
                    double l = 0.0;
                    for (std::size_t i = 0; i < y.size(); ++i) l += w.data[i] * y.data[i];
                    return l;
                };
                nn::Trace tr;
                net.forward(x, &tr);
                const auto g = net.backward(tr, w);
                detail::compare(loss, net.params(), g.params, grad_scale, "mlp", rep);
                break;
            }
            case 1: {
                const std::size_t in = 1 + rng.below(5), d = 1 + rng.below(3);
                nn::Mlp net = nn::Mlp::make(in, detail::random_hidden(rng), 2 * d, act, rng);
                const nn::Tensor x = detail::random_tensor(batch, in, rng);
                const nn::Tensor t = detail::random_tensor(batch, d, rng);
                auto loss = [&] { return nn::gaussian_nll(nn::split_gaussian(net.forward(x)), t).loss; };
                nn::Trace tr;
                const nn::Tensor out = net.forward(x, &tr);
                const auto nll = nn::gaussian_nll(nn::split_gaussian(out), t);
                const auto g = net.backward(tr, nn::gaussian_output_grad(out, nll));
                detail::compare(loss, net.params(), g.params, grad_scale, "nll", rep);
                break;
            }
            case 2: {
                const std::size_t od = 1 + rng.below(4), ad = 1 + rng.below(2);
                nn::Mlp q = nn::Mlp::make(od + ad, detail::random_hidden(rng), 1, act, rng);
                const nn::Tensor obs = detail::random_tensor(batch, od, rng);
                nn::Tensor a(batch, ad);
                for (auto& v : a.data) v = rng.uniform(-1.0, 1.0);
                std::vector<double> y(batch);
                for (auto& v : y) v = rng.normal();
                auto loss = [&] { return sac::critic_loss(q, obs, a, y).loss; };
                const auto lg = sac::critic_loss(q, obs, a, y);
                detail::compare(loss, q.params(), lg.grad, grad_scale, "critic", rep);
                break;
            }
            default: {
                const std::size_t od = 1 + rng.below(4), ad = 1 + rng.below(2);
                nn::Mlp pi = nn::Mlp::make(od, detail::random_hidden(rng), 2 * ad, act, rng);
                const nn::Mlp q1 = nn::Mlp::make(od + ad, detail::random_hidden(rng), 1, act, rng);
                const nn::Mlp q2 = nn::Mlp::make(od + ad, detail::random_hidden(rng), 1, act, rng);
                const nn::Tensor obs = detail::random_tensor(batch, od, rng);
                const nn::Tensor noise = detail::random_tensor(batch, ad, rng);
                const double alpha = rng.uniform(0.0, 1.0);
                auto loss = [&] { return sac::actor_loss(pi, q1, q2, obs, noise, alpha).loss; };
                const auto al = sac::actor_loss(pi, q1, q2, obs, noise, alpha);
                detail::compare(loss, pi.params(), al.grad, grad_scale, "actor", rep);
                break;
            }
        }
    }
    return rep;
}

}  // namespace pushrl::check
