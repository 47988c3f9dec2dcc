#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "pushrl/core/error.hpp"

namespace pushrl::nn {

struct OptimState {
    std::vector<double> m;
    std::vector<double> v;
    long step = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;

    OptimState() = default;
    OptimState(std::size_t n, double learning_rate) : m(n, 0.0), v(n, 0.0), lr(learning_rate) {}
};

/// Bias-corrected adaptive-moment update, in place.
inline void optim_step(std::span<double> params, std::span<const double> grads, OptimState& s) {
    if (params.size() != grads.size() || params.size() != s.m.size())
        throw Error("optim_step: parameter/gradient/state sizes differ");
    ++s.step;
    const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
    const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i] + s.weight_decay * params[i];
        s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * g;
        s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * g * g;
        const double mhat = s.m[i] / c1;
        const double vhat = s.v[i] / c2;
        params[i] -= s.lr * mhat / (std::sqrt(vhat) + s.eps);
    }
}

}  // namespace pushrl::nn
