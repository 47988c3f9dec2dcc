#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "json.hpp"

#include "pushrl/core/error.hpp"
#include "pushrl/core/json_fields.hpp"
#include "pushrl/core/rng.hpp"

namespace pushrl::mbrl {

/// Action sequences are flat: step k, action dim j lives at k * action_dim + j.
/// An objective scores `count` sequences stored back to back and returns one
/// value per sequence (higher is better).
using SequenceObjective = std::function<std::vector<double>(const std::vector<double>& sequences, std::size_t count, Rng& rng)>;

struct ActionBox {
    std::vector<double> lower;
    std::vector<double> upper;

    std::size_t dim() const { return lower.size(); }

    void validate() const {
        if (lower.empty() || lower.size() != upper.size()) throw ConfigError("action bounds: lower/upper size mismatch");
        for (std::size_t j = 0; j < lower.size(); ++j)
            if (!(lower[j] <= upper[j])) throw ConfigError("action bounds: lower > upper");
    }

    double clamp(std::size_t j, double v) const { return std::clamp(v, lower[j], upper[j]); }
};

struct CemConfig {
    int horizon = 20;
    int population = 400;
    int elites = 40;
    int iterations = 5;
    double alpha = 0.1;
    /// Initial per-dimension std; empty means half the action range.
    std::vector<double> initial_std;
    /// Carry the previous iteration's elites into the next population.
    bool keep_elites = true;

    void validate() const {
        if (horizon < 1) throw ConfigError("cem.horizon must be >= 1");
        if (population < 1) throw ConfigError("cem.population must be >= 1");
        if (elites < 1 || elites > population) throw ConfigError("cem.elites must be in [1, population]");
        if (iterations < 0) throw ConfigError("cem.iterations must be >= 0");
        if (!(alpha >= 0.0 && alpha < 1.0)) throw ConfigError("cem.alpha must be in [0, 1)");
        for (double s : initial_std)
            if (!(s > 0.0)) throw ConfigError("cem.initial_std entries must be > 0");
    }
};

inline void to_json(nlohmann::json& j, const CemConfig& c) {
    j = {{"horizon", c.horizon},     {"population", c.population},   {"elites", c.elites},
         {"iterations", c.iterations}, {"alpha", c.alpha},           {"initial_std", c.initial_std},
         {"keep_elites", c.keep_elites}};
}

inline CemConfig cem_config_from_json(const nlohmann::json& j, const std::string& path) {
    CemConfig c;
    JsonFields f(j, path);
    f.read("horizon", c.horizon);
    f.read("population", c.population);
    f.read("elites", c.elites);
    f.read("iterations", c.iterations);
    f.read("alpha", c.alpha);
    f.read("initial_std", c.initial_std);
    f.read("keep_elites", c.keep_elites);
    f.finish();
    c.validate();
    return c;
}

struct CemResult {
    std::vector<double> mean;
    /// Mean objective of the elite set after each iteration.
    std::vector<double> elite_mean_history;
    std::vector<double> best_sequence;
    double best_value = -std::numeric_limits<double>::infinity();
};

/// Cross-entropy method over a diagonal Gaussian on the flat sequence space.
/// Samples are clamped to the box; mean and variance are refit on the elites
/// with smoothing `alpha` (weight on the previous value).
inline CemResult cem_optimize(const SequenceObjective& objective, std::vector<double> warm_start, const ActionBox& box,
                              const CemConfig& cfg, Rng& rng) {
    cfg.validate();
    box.validate();
    const std::size_t ad = box.dim();
    const std::size_t len = static_cast<std::size_t>(cfg.horizon) * ad;
    if (warm_start.size() != len) throw Error("cem: warm start length does not match horizon x action dim");

    CemResult res;
    res.mean = std::move(warm_start);
    std::vector<double> var(len);
    for (std::size_t k = 0; k < len; ++k) {
        const std::size_t j = k % ad;
        const double s = cfg.initial_std.empty() ? 0.5 * (box.upper[j] - box.lower[j]) : cfg.initial_std.at(j);
        var[k] = s * s;
    }

    const std::size_t pop = static_cast<std::size_t>(cfg.population);
    const std::size_t ne = static_cast<std::size_t>(cfg.elites);
    std::vector<double> kept;  // previous elites, flat
    std::vector<double> kept_values;
    for (int it = 0; it < cfg.iterations; ++it) {
        const std::size_t total = pop + kept_values.size();
        std::vector<double> samples(pop * len);
        for (std::size_t p = 0; p < pop; ++p)
            for (std::size_t k = 0; k < len; ++k)
                samples[p * len + k] = box.clamp(k % ad, res.mean[k] + std::sqrt(var[k]) * rng.normal());
        std::vector<double> values = objective(samples, pop, rng);
        if (values.size() != pop) throw Error("cem: objective returned the wrong number of values");
        samples.insert(samples.end(), kept.begin(), kept.end());
        values.insert(values.end(), kept_values.begin(), kept_values.end());

        std::vector<std::size_t> order(total);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });

        std::vector<double> emean(len, 0.0), evar(len, 0.0);
        double score = 0.0;
        for (std::size_t e = 0; e < ne; ++e) {
            score += values[order[e]];
            for (std::size_t k = 0; k < len; ++k) emean[k] += samples[order[e] * len + k];
        }
        for (auto& v : emean) v /= static_cast<double>(ne);
        for (std::size_t e = 0; e < ne; ++e)
            for (std::size_t k = 0; k < len; ++k) {
                const double d = samples[order[e] * len + k] - emean[k];
                evar[k] += d * d;
            }
        for (std::size_t k = 0; k < len; ++k) {
            res.mean[k] = cfg.alpha * res.mean[k] + (1.0 - cfg.alpha) * emean[k];
            var[k] = cfg.alpha * var[k] + (1.0 - cfg.alpha) * evar[k] / static_cast<double>(ne);
        }
        res.elite_mean_history.push_back(score / static_cast<double>(ne));
        if (values[order[0]] > res.best_value) {
            res.best_value = values[order[0]];
            res.best_sequence.assign(samples.begin() + static_cast<std::ptrdiff_t>(order[0] * len),
                                     samples.begin() + static_cast<std::ptrdiff_t>((order[0] + 1) * len));
        }
        if (cfg.keep_elites) {
            kept.resize(ne * len);
            kept_values.resize(ne);
            for (std::size_t e = 0; e < ne; ++e) {
                std::copy_n(samples.begin() + static_cast<std::ptrdiff_t>(order[e] * len), len,
                            kept.begin() + static_cast<std::ptrdiff_t>(e * len));
                kept_values[e] = values[order[e]];
            }
        }
    }
    return res;
}

struct MppiConfig {
    int horizon = 20;
    int samples = 400;
    double lambda = 1.0;
    /// Per action dimension noise std; empty means a quarter of the range.
    std::vector<double> sigma;
    int iterations = 1;

    void validate() const {
        if (horizon < 1) throw ConfigError("mppi.horizon must be >= 1");
        if (samples < 1) throw ConfigError("mppi.samples must be >= 1");
        if (!(lambda > 0.0)) throw ConfigError("mppi.lambda must be > 0");
        if (iterations < 0) throw ConfigError("mppi.iterations must be >= 0");
        for (double s : sigma)
            if (!(s > 0.0)) throw ConfigError("mppi.sigma entries must be > 0");
    }
};

inline void to_json(nlohmann::json& j, const MppiConfig& c) {
    j = {{"horizon", c.horizon}, {"samples", c.samples}, {"lambda", c.lambda}, {"sigma", c.sigma}, {"iterations", c.iterations}};
}

inline MppiConfig mppi_config_from_json(const nlohmann::json& j, const std::string& path) {
    MppiConfig c;
    JsonFields f(j, path);
    f.read("horizon", c.horizon);
    f.read("samples", c.samples);
    f.read("lambda", c.lambda);
    f.read("sigma", c.sigma);
    f.read("iterations", c.iterations);
    f.finish();
    c.validate();
    return c;
}

/// Weights proportional to exp(value / lambda), shifted by the max for stability.
inline std::vector<double> mppi_weights(const std::vector<double>& values, double lambda) {
    const double vmax = *std::max_element(values.begin(), values.end());
    std::vector<double> w(values.size());
    double z = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) z += (w[i] = std::exp((values[i] - vmax) / lambda));
    for (auto& x : w) x /= z;
    return w;
}

/// Model-predictive path integral: exponentially weighted average of noisy
/// perturbations of the warm start.
inline std::vector<double> mppi_optimize(const SequenceObjective& objective, std::vector<double> warm_start,
                                         const ActionBox& box, const MppiConfig& cfg, Rng& rng) {
    cfg.validate();
    box.validate();
    const std::size_t ad = box.dim();
    const std::size_t len = static_cast<std::size_t>(cfg.horizon) * ad;
    if (warm_start.size() != len) throw Error("mppi: warm start length does not match horizon x action dim");
    const std::size_t n = static_cast<std::size_t>(cfg.samples);
    std::vector<double> mean = std::move(warm_start);
    for (int it = 0; it < cfg.iterations; ++it) {
        std::vector<double> seqs(n * len);
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t k = 0; k < len; ++k) {
                const std::size_t j = k % ad;
                const double s = cfg.sigma.empty() ? 0.25 * (box.upper[j] - box.lower[j]) : cfg.sigma.at(j);
                seqs[p * len + k] = box.clamp(j, mean[k] + s * rng.normal());
            }
        const auto values = objective(seqs, n, rng);
        if (values.size() != n) throw Error("mppi: objective returned the wrong number of values");
        const auto w = mppi_weights(values, cfg.lambda);
        std::fill(mean.begin(), mean.end(), 0.0);
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t k = 0; k < len; ++k) mean[k] += w[p] * seqs[p * len + k];
    }
    return mean;
}

}  // namespace pushrl::mbrl
