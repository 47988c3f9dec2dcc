#pragma once

#include <algorithm>
#include <cmath>

#include "pushrl/core/error.hpp"
#include "pushrl/nn/tensor.hpp"

namespace pushrl::nn {

inline constexpr double kLogVarMin = -10.0;
inline constexpr double kLogVarMax = 4.0;

inline double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Diagonal Gaussian prediction. log_var always lies in [kLogVarMin, kLogVarMax].
struct GaussianHead {
    Tensor mean;
    Tensor log_var;
};

/// Smooth two-sided clamp used on the raw log-variance output. Keeps a
/// non-zero gradient everywhere, unlike a hard clip.
inline double soft_clamp_log_var(double raw, double* derivative = nullptr) {
    const double upper = kLogVarMax - softplus(kLogVarMax - raw);
    const double out = kLogVarMin + softplus(upper - kLogVarMin);
    if (derivative) *derivative = sigmoid(kLogVarMax - raw) * sigmoid(upper - kLogVarMin);
    // softplus(30+) returns x exactly, so saturate explicitly to honor the range.
    return std::min(kLogVarMax, std::max(kLogVarMin, out));
}

/// Splits a [N, 2D] network output into mean and clamped log-variance.
inline GaussianHead split_gaussian(const Tensor& output) {
    if (output.shape.size() != 2 || output.cols() % 2 != 0) throw Error("gaussian head needs [N, 2D] output");
    const std::size_t n = output.rows(), d = output.cols() / 2;
    GaussianHead h{Tensor(n, d), Tensor(n, d)};
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            h.mean(i, j) = output(i, j);
            h.log_var(i, j) = soft_clamp_log_var(output(i, d + j));
        }
    return h;
}

struct NllResult {
    double loss = 0.0;
    Tensor grad_mean;
    Tensor grad_log_var;
};

/// Batch-mean Gaussian negative log-likelihood without the 2*pi constant:
/// mean_n [ (t - mu)^T Sigma^-1 (t - mu) + log det Sigma ].
inline NllResult gaussian_nll(const GaussianHead& head, const Tensor& target) {
    if (head.mean.shape != head.log_var.shape) throw Error("gaussian_nll: mean/log_var shape mismatch");
    if (target.shape != head.mean.shape)
        throw Error("gaussian_nll: target shape " + dims_to_string(target.shape) + " does not match prediction " +
                    dims_to_string(head.mean.shape));
    const std::size_t n = target.rows(), d = target.cols();
    NllResult r{0.0, Tensor(n, d), Tensor(n, d)};
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            const double lv = head.log_var(i, j);
            const double inv_var = std::exp(-lv);
            const double res = target(i, j) - head.mean(i, j);
            r.loss += res * res * inv_var + lv;
            r.grad_mean(i, j) = -2.0 * res * inv_var * inv_n;
            r.grad_log_var(i, j) = (1.0 - res * res * inv_var) * inv_n;
        }
    r.loss *= inv_n;
    return r;
}

/// Chains head gradients back to the raw [N, 2D] network output.
inline Tensor gaussian_output_grad(const Tensor& raw_output, const NllResult& nll) {
    const std::size_t n = raw_output.rows(), d = raw_output.cols() / 2;
    Tensor g(n, 2 * d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            double dclamp = 0.0;
            soft_clamp_log_var(raw_output(i, d + j), &dclamp);
            g(i, j) = nll.grad_mean(i, j);
            g(i, d + j) = nll.grad_log_var(i, j) * dclamp;
        }
    return g;
}

}  // namespace pushrl::nn
