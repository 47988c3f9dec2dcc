#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pushrl/core/error.hpp"

namespace pushrl::nn {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

inline std::string dims_to_string(const std::vector<std::size_t>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? ", " : "") + std::to_string(shape[i]);
    return s + "]";
}

/// Dense row-major tensor of doubles. Most of the code only needs rank 2
/// (batch x features), so that case gets convenience accessors.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s, double fill = 0.0) : shape(std::move(s)) {
        data.assign(numel(shape), fill);
    }
    Tensor(std::size_t rows, std::size_t cols, double fill = 0.0) : Tensor(std::vector<std::size_t>{rows, cols}, fill) {}
    Tensor(std::size_t rows, std::size_t cols, std::vector<double> values) : shape{rows, cols}, data(std::move(values)) {
        if (data.size() != rows * cols) throw Error("tensor data size does not match shape");
    }

    static std::size_t numel(const std::vector<std::size_t>& s) {
        return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
    }

    std::size_t size() const { return data.size(); }
    std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
    std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

    double* row(std::size_t r) { return data.data() + r * cols(); }
    const double* row(std::size_t r) const { return data.data() + r * cols(); }

    MatrixMap matrix() { return {data.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols())}; }
    ConstMatrixMap matrix() const {
        return {data.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols())};
    }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    void require_shape(std::size_t r, std::size_t c, const char* what) const {
        if (shape.size() != 2 || shape[0] != r || shape[1] != c)
            throw Error(std::string(what) + ": expected shape " + dims_to_string({r, c}) + ", got " +
                        dims_to_string(shape));
    }

    void require_cols(std::size_t c, const char* what) const {
        if (shape.size() != 2 || shape[1] != c)
            throw Error(std::string(what) + ": expected " + std::to_string(c) + " columns, got shape " +
                        dims_to_string(shape));
    }
};

}  // namespace pushrl::nn
