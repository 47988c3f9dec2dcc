#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "pushrl/core/error.hpp"
#include "pushrl/core/rng.hpp"
#include "pushrl/nn/tensor.hpp"

namespace pushrl::nn {

enum class Activation { Relu, Tanh };

inline std::string to_string(Activation a) { return a == Activation::Relu ? "relu" : "tanh"; }

inline Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::Relu;
    if (s == "tanh") return Activation::Tanh;
    throw Error("unknown activation '" + s + "'");
}

class Mlp;

/// Activations recorded by a forward pass; enough to run backward once.
struct Trace {
    const Mlp* net = nullptr;
    std::vector<RowMatrix> activations;  // input, then every hidden post-activation

    bool valid() const { return net != nullptr; }
};

/// Gradients with the same flat layout as Mlp::params().
struct Gradients {
    std::vector<double> params;
    Tensor input;
};

/// Fully connected network: affine + activation on every hidden layer, affine
/// output. Parameters live in one flat vector (per layer: weight [in x out]
/// row-major, then bias [out]) so optimizers and checkpoints see one buffer.
class Mlp {
public:
    Mlp() = default;

    Mlp(std::vector<std::size_t> layer_dims, Activation activation)
        : dims_(std::move(layer_dims)), activation_(activation) {
        if (dims_.size() < 3) throw Error("mlp needs at least one hidden layer");
        for (auto d : dims_)
            if (d == 0) throw Error("mlp layer dims must be positive");
        std::size_t n = 0;
        for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
            offsets_.push_back(n);
            n += dims_[l] * dims_[l + 1] + dims_[l + 1];
        }
        params_.assign(n, 0.0);
    }

    /// Builds `in -> hidden... -> out` with uniform fan-in initialization.
    static Mlp make(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out, Activation act, Rng& rng) {
        std::vector<std::size_t> dims{in};
        dims.insert(dims.end(), hidden.begin(), hidden.end());
        dims.push_back(out);
        Mlp m(dims, act);
        m.init(rng);
        return m;
    }

    /// relu(x) - relu(-x): an exact identity map with one hidden layer.
    static Mlp identity(std::size_t dim) {
        Mlp m({dim, 2 * dim, dim}, Activation::Relu);
        auto w0 = m.weight(0);
        auto w1 = m.weight(1);
        for (std::size_t i = 0; i < dim; ++i) {
            w0(i, i) = 1.0;
            w0(i, dim + i) = -1.0;
            w1(i, i) = 1.0;
            w1(dim + i, i) = -1.0;
        }
        return m;
    }

    void init(Rng& rng) {
        for (std::size_t l = 0; l < num_layers(); ++l) {
            const double bound = std::sqrt(1.0 / static_cast<double>(dims_[l]));
            auto w = weight(l);
            for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-bound, bound);
            auto b = bias(l);
            for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = rng.uniform(-bound, bound);
        }
    }

    std::size_t num_layers() const { return dims_.size() - 1; }
    std::size_t input_dim() const { return dims_.front(); }
    std::size_t output_dim() const { return dims_.back(); }
    const std::vector<std::size_t>& dims() const { return dims_; }
    Activation activation() const { return activation_; }

    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }
    std::size_t num_params() const { return params_.size(); }

    MatrixMap weight(std::size_t l) {
        return {params_.data() + offsets_[l], static_cast<Eigen::Index>(dims_[l]), static_cast<Eigen::Index>(dims_[l + 1])};
    }
    ConstMatrixMap weight(std::size_t l) const {
        return {params_.data() + offsets_[l], static_cast<Eigen::Index>(dims_[l]), static_cast<Eigen::Index>(dims_[l + 1])};
    }
    Eigen::Map<Eigen::RowVectorXd> bias(std::size_t l) {
        return {params_.data() + offsets_[l] + dims_[l] * dims_[l + 1], static_cast<Eigen::Index>(dims_[l + 1])};
    }
    Eigen::Map<const Eigen::RowVectorXd> bias(std::size_t l) const {
        return {params_.data() + offsets_[l] + dims_[l] * dims_[l + 1], static_cast<Eigen::Index>(dims_[l + 1])};
    }

    /// Forward pass. Records a trace when one is supplied.
    Tensor forward(const Tensor& input, Trace* trace = nullptr) const {
        input.require_cols(input_dim(), "mlp forward input");
        RowMatrix x = input.matrix();
        if (trace) {
            trace->net = this;
            trace->activations.clear();
            trace->activations.push_back(x);
        }
        for (std::size_t l = 0; l < num_layers(); ++l) {
            RowMatrix y = x * weight(l);
            y.rowwise() += bias(l);
            if (l + 1 < num_layers()) {
                if (activation_ == Activation::Relu)
                    y = y.cwiseMax(0.0);
                else
                    y = y.array().tanh();
                if (trace) trace->activations.push_back(y);
            }
            x = std::move(y);
        }
        Tensor out(input.rows(), output_dim());
        out.matrix() = x;
        return out;
    }

    /// Reverse-mode pass through a recorded forward. Parameter gradients are
    /// added to `accumulate` when given, otherwise returned fresh.
    Gradients backward(const Trace& trace, const Tensor& output_grad) const {
        if (!trace.valid()) throw Error("backward without a recorded forward trace");
        if (trace.net != this) throw Error("backward with a trace recorded by a different network");
        const std::size_t batch = static_cast<std::size_t>(trace.activations.front().rows());
        output_grad.require_shape(batch, output_dim(), "mlp backward output gradient");

        Gradients g;
        g.params.assign(params_.size(), 0.0);
        RowMatrix delta = output_grad.matrix();
        for (std::size_t l = num_layers(); l-- > 0;) {
            const RowMatrix& a = trace.activations[l];
            MatrixMap gw(g.params.data() + offsets_[l], static_cast<Eigen::Index>(dims_[l]),
                         static_cast<Eigen::Index>(dims_[l + 1]));
            Eigen::Map<Eigen::RowVectorXd> gb(g.params.data() + offsets_[l] + dims_[l] * dims_[l + 1],
                                              static_cast<Eigen::Index>(dims_[l + 1]));
            gw.noalias() = a.transpose() * delta;
            gb = delta.colwise().sum();
            RowMatrix prev = delta * weight(l).transpose();
            if (l > 0) {
                if (activation_ == Activation::Relu)
                    prev = prev.cwiseProduct((a.array() > 0.0).cast<double>().matrix());
                else
                    prev = prev.cwiseProduct((1.0 - a.array().square()).matrix());
            }
            delta = std::move(prev);
        }
        g.input = Tensor(batch, input_dim());
        g.input.matrix() = delta;
        return g;
    }

private:
    std::vector<std::size_t> dims_;
    Activation activation_ = Activation::Relu;
    std::vector<std::size_t> offsets_;
    std::vector<double> params_;
};

inline void add_scaled(std::span<double> dst, std::span<const double> src, double scale = 1.0) {
    if (dst.size() != src.size()) throw Error("gradient size mismatch");
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
}

}  // namespace pushrl::nn
