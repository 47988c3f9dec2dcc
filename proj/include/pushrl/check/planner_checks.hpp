#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "pushrl/core/rng.hpp"
#include "pushrl/mbrl/trajectory_opt.hpp"

namespace pushrl::check {

struct PlannerCheckReport {
    double cem_max_error = 0.0;   ///< per action dimension
    double mppi_max_error = 0.0;
    int elite_mean_decreases = 0;
    int problems = 0;
};

inline std::vector<double> negative_squared_distance(const std::vector<double>& seqs, std::size_t count,
                                                     const std::vector<double>& target) {
    const std::size_t len = target.size();
    std::vector<double> v(count, 0.0);
    for (std::size_t p = 0; p < count; ++p)
        for (std::size_t k = 0; k < len; ++k) {
            const double d = seqs[p * len + k] - target[k];
            v[p] -= d * d;
        }
    return v;
}

/// CEM and MPPI on random concave quadratics with interior optima.
inline PlannerCheckReport run_planner_checks(int problems, std::uint64_t seed) {
    PlannerCheckReport rep;
    Rng rng(seed, 0x706c616e);
    const mbrl::ActionBox box{{-1.0, -1.0}, {1.0, 1.0}};
    for (int p = 0; p < problems; ++p, ++rep.problems) {
        const int horizon = 2 + static_cast<int>(rng.below(3));
        std::vector<double> target(static_cast<std::size_t>(horizon) * 2);
        for (auto& t : target) t = rng.uniform(-0.8, 0.8);
        const mbrl::SequenceObjective obj = [&](const std::vector<double>& seqs, std::size_t count, Rng&) {
            return negative_squared_distance(seqs, count, target);
        };
        mbrl::CemConfig cem;
        cem.horizon = horizon;
        cem.population = 200;
        cem.elites = 20;
        cem.iterations = 30;
        Rng crng = rng.fork(static_cast<std::uint64_t>(2 * p));
        const auto res = mbrl::cem_optimize(obj, std::vector<double>(target.size(), 0.0), box, cem, crng);
        for (std::size_t k = 0; k < target.size(); ++k)
            rep.cem_max_error = std::max(rep.cem_max_error, std::abs(res.mean[k] - target[k]));
        for (std::size_t e = 1; e < res.elite_mean_history.size(); ++e)
            if (res.elite_mean_history[e] < res.elite_mean_history[e - 1]) ++rep.elite_mean_decreases;

        mbrl::MppiConfig mppi;
        mppi.horizon = horizon;
        mppi.samples = 400;
        mppi.lambda = 0.01;
        mppi.iterations = 20;
        mppi.sigma = {0.1, 0.1};
        Rng mrng = rng.fork(static_cast<std::uint64_t>(2 * p + 1));
        const auto out = mbrl::mppi_optimize(obj, std::vector<double>(target.size(), 0.0), box, mppi, mrng);
        for (std::size_t k = 0; k < target.size(); ++k)
            rep.mppi_max_error = std::max(rep.mppi_max_error, std::abs(out[k] - target[k]));
    }
    return rep;
}

}  // namespace pushrl::check
