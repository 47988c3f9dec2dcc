#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "pushrl/core/error.hpp"
#include "pushrl/core/json_fields.hpp"
#include "pushrl/core/rng.hpp"
#include "pushrl/mbrl/state_codec.hpp"
#include "pushrl/mbrl/transition_buffer.hpp"
#include "pushrl/nn/adam.hpp"
#include "pushrl/nn/checkpoint.hpp"
#include "pushrl/nn/gaussian.hpp"
#include "pushrl/nn/mlp.hpp"

namespace pushrl::mbrl {

inline constexpr double kStdFloor = 1e-8;

/// Per-column mean/std, std floored at kStdFloor.
struct Normalizer {
    std::vector<double> mean;
    std::vector<double> std;

    void fit(const std::vector<double>& rows, std::size_t dim) {
        const std::size_t n = rows.size() / dim;
        mean.assign(dim, 0.0);
        std.assign(dim, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < dim; ++j) mean[j] += rows[i * dim + j];
        for (auto& m : mean) m /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < dim; ++j) {
                const double d = rows[i * dim + j] - mean[j];
                std[j] += d * d;
            }
        for (auto& s : std) s = std::max(kStdFloor, std::sqrt(s / static_cast<double>(n)));
    }

    void identity(std::size_t dim) {
        mean.assign(dim, 0.0);
        std.assign(dim, 1.0);
    }

    double normalize(std::size_t j, double v) const { return (v - mean[j]) / std[j]; }
    double denormalize(std::size_t j, double v) const { return v * std[j] + mean[j]; }
};

struct EnsembleConfig {
    int members = 5;
    std::vector<std::size_t> hidden{200, 200, 200, 200};
    nn::Activation activation = nn::Activation::Relu;
    double learning_rate = 1e-3;
    double weight_decay = 0.0;
    std::size_t batch_size = 256;
    int epochs = 50;
    double holdout_fraction = 0.1;
    int patience = 5;

    void validate() const {
        if (members <= 0) throw ConfigError("ensemble.members must be positive");
        if (hidden.empty()) throw ConfigError("ensemble.hidden needs at least one layer");
        if (batch_size == 0) throw ConfigError("ensemble.batch_size must be positive");
        if (epochs < 0) throw ConfigError("ensemble.epochs must be >= 0");
        if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) throw ConfigError("ensemble.holdout_fraction must be in (0,1)");
        if (!(learning_rate > 0.0)) throw ConfigError("ensemble.learning_rate must be > 0");
    }
};

inline void to_json(nlohmann::json& j, const EnsembleConfig& c) {
    j = {{"members", c.members},           {"hidden", c.hidden},
         {"activation", nn::to_string(c.activation)}, {"learning_rate", c.learning_rate},
         {"weight_decay", c.weight_decay}, {"batch_size", c.batch_size},
         {"epochs", c.epochs},             {"holdout_fraction", c.holdout_fraction},
         {"patience", c.patience}};
}

inline EnsembleConfig ensemble_config_from_json(const nlohmann::json& j, const std::string& path) {
    EnsembleConfig c;
    JsonFields f(j, path);
    f.read("members", c.members);
    f.read("hidden", c.hidden);
    std::string act = nn::to_string(c.activation);
    f.read("activation", act);
    try {
        c.activation = nn::activation_from_string(act);
    } catch (const Error&) {
        throw ConfigError(f.field("activation") + ": must be relu or tanh");
    }
    f.read("learning_rate", c.learning_rate);
    f.read("weight_decay", c.weight_decay);
    f.read("batch_size", c.batch_size);
    f.read("epochs", c.epochs);
    f.read("holdout_fraction", c.holdout_fraction);
    f.read("patience", c.patience);
    f.finish();
    c.validate();
    return c;
}

struct MemberCurve {
    std::vector<double> train_nll;
    std::vector<double> holdout_nll;
    int best_epoch = -1;
};

struct TrainReport {
    std::vector<MemberCurve> members;
    std::vector<double> final_holdout_nll;

    double mean_holdout_nll() const {
        if (final_holdout_nll.empty()) return 0.0;
        return std::accumulate(final_holdout_nll.begin(), final_holdout_nll.end(), 0.0) /
               static_cast<double>(final_holdout_nll.size());
    }
};

/// Bootstrapped ensemble of probabilistic networks predicting the Gaussian
/// distribution of the (encoded) state change.
class Ensemble {
public:
    Ensemble(StateCodec codec, EnsembleConfig config, Rng& rng) : codec_(std::move(codec)), config_(std::move(config)) {
        config_.validate();
        for (int m = 0; m < config_.members; ++m) {
            Rng r = rng.fork(static_cast<std::uint64_t>(m));
            members_.push_back(nn::Mlp::make(codec_.feature_dim(), config_.hidden, 2 * codec_.target_dim(),
                                             config_.activation, r));
            optim_.emplace_back(members_.back().num_params(), config_.learning_rate);
            optim_.back().weight_decay = config_.weight_decay;
        }
        in_norm_.identity(codec_.feature_dim());
        out_norm_.identity(codec_.target_dim());
    }

    const StateCodec& codec() const { return codec_; }
    const EnsembleConfig& config() const { return config_; }
    int size() const { return static_cast<int>(members_.size()); }
    std::size_t state_dim() const { return codec_.state_dim(); }
    std::size_t action_dim() const { return codec_.action_dim(); }
    std::size_t input_dim() const { return codec_.feature_dim(); }
    const nn::Mlp& member(int i) const { return members_.at(static_cast<std::size_t>(i)); }
    nn::Mlp& member(int i) { return members_.at(static_cast<std::size_t>(i)); }
    const Normalizer& input_normalizer() const { return in_norm_; }
    const Normalizer& output_normalizer() const { return out_norm_; }
    Normalizer& input_normalizer() { return in_norm_; }
    Normalizer& output_normalizer() { return out_norm_; }

    /// Refreshes normalizers from the whole buffer, then fits every member on
    /// its own bootstrap resample of the training split with holdout-based
    /// early stopping. Returns per-member NLL curves.
    TrainReport train(const TransitionBuffer& buffer, Rng& rng) { return train(buffer, rng, config_.epochs); }

    TrainReport train(const TransitionBuffer& buffer, Rng& rng, int epochs) {
        if (buffer.empty()) throw Error("cannot train the ensemble on an empty buffer");
        if (buffer.state_dim() != state_dim() || buffer.action_dim() != action_dim())
            throw Error("transition buffer dims do not match the ensemble");
        const std::size_t n = buffer.size();
        const std::size_t fd = input_dim(), td = codec_.target_dim();

        std::vector<double> feats(n * fd), targets(n * td);
        for (std::size_t i = 0; i < n; ++i) {
            codec_.features(buffer.state(i), buffer.action(i), feats.data() + i * fd);
            codec_.target(buffer.state(i), buffer.next_state(i), targets.data() + i * td);
        }
        in_norm_.fit(feats, fd);
        out_norm_.fit(targets, td);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < fd; ++j) feats[i * fd + j] = in_norm_.normalize(j, feats[i * fd + j]);
            for (std::size_t j = 0; j < td; ++j) targets[i * td + j] = out_norm_.normalize(j, targets[i * td + j]);
        }

        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng split_rng = rng.fork(0x73706c);
        std::shuffle(order.begin(), order.end(), split_rng);
        std::size_t n_hold = static_cast<std::size_t>(std::floor(config_.holdout_fraction * static_cast<double>(n)));
        if (n_hold >= n) n_hold = n - 1;
        std::vector<std::size_t> train_idx(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_hold));
        std::vector<std::size_t> hold_idx(order.end() - static_cast<std::ptrdiff_t>(n_hold), order.end());
        if (hold_idx.empty()) hold_idx = train_idx;

        const nn::Tensor hold_x = gather(feats, fd, hold_idx);
        const nn::Tensor hold_y = gather(targets, td, hold_idx);

        TrainReport report;
        for (int m = 0; m < size(); ++m) {
            Rng mrng = rng.fork(0x6d656d00 + static_cast<std::uint64_t>(m));
            std::vector<std::size_t> boot(train_idx.size());
            for (auto& b : boot) b = train_idx[mrng.below(train_idx.size())];

            auto& net = members_[static_cast<std::size_t>(m)];
            MemberCurve curve;
            double best = holdout_nll(net, hold_x, hold_y);
            std::vector<double> best_params = net.params();
            int since_best = 0;
            const std::size_t bs = std::min(config_.batch_size, boot.size());
            for (int epoch = 0; epoch < epochs; ++epoch) {
                std::shuffle(boot.begin(), boot.end(), mrng);
                double train_sum = 0.0;
                std::size_t batches = 0;
                for (std::size_t start = 0; start < boot.size(); start += bs) {
                    const std::size_t end = std::min(boot.size(), start + bs);
                    std::vector<std::size_t> idx(boot.begin() + static_cast<std::ptrdiff_t>(start),
                                                 boot.begin() + static_cast<std::ptrdiff_t>(end));
                    const nn::Tensor x = gather(feats, fd, idx);
                    const nn::Tensor y = gather(targets, td, idx);
                    nn::Trace trace;
                    const nn::Tensor out = net.forward(x, &trace);
                    const auto nll = nn::gaussian_nll(nn::split_gaussian(out), y);
                    const auto grads = net.backward(trace, nn::gaussian_output_grad(out, nll));
                    nn::optim_step(net.params(), grads.params, optim_[static_cast<std::size_t>(m)]);
                    train_sum += nll.loss;
                    ++batches;
                }
                curve.train_nll.push_back(train_sum / static_cast<double>(std::max<std::size_t>(1, batches)));
                const double h = holdout_nll(net, hold_x, hold_y);
                curve.holdout_nll.push_back(h);
                if (h < best) {
                    best = h;
                    best_params = net.params();
                    curve.best_epoch = epoch;
                    since_best = 0;
                } else if (++since_best >= config_.patience) {
                    break;
                }
            }
            net.params() = best_params;
            report.final_holdout_nll.push_back(best);
            report.members.push_back(std::move(curve));
        }
        return report;
    }

    /// Mean and variance of the encoded state change for one member, in
    /// target (denormalized) units.
    void delta_distribution(const double* state, const double* action, int member_index, double* mean,
                            double* var) const {
        check_member(member_index);
        nn::Tensor x(1, input_dim());
        codec_.features(state, action, x.row(0));
        for (std::size_t j = 0; j < input_dim(); ++j) x(0, j) = in_norm_.normalize(j, x(0, j));
        const auto head = nn::split_gaussian(members_[static_cast<std::size_t>(member_index)].forward(x));
        for (std::size_t j = 0; j < codec_.target_dim(); ++j) {
            mean[j] = out_norm_.denormalize(j, head.mean(0, j));
            var[j] = std::exp(head.log_var(0, j)) * out_norm_.std[j] * out_norm_.std[j];
        }
    }

    /// Samples the next state from one member. A null rng returns the mean.
    std::vector<double> predict(std::span<const double> state, std::span<const double> action, int member_index,
                                Rng* rng) const {
        if (state.size() != state_dim() || action.size() != action_dim()) throw Error("predict: dimension mismatch");
        std::vector<double> out(state_dim());
        const int members[1] = {member_index};
        predict_batch(state.data(), action.data(), members, rng, out.data());
        return out;
    }

    /// Batched prediction: row i of `states`/`actions` goes through member
    /// `members[i]`; rows are grouped per member for one forward each.
    void predict_batch(const double* states, const double* actions, std::span<const int> members, Rng* rng,
                       double* next_states) const {
        const std::size_t rows = members.size();
        const std::size_t sd = state_dim(), ad = action_dim(), fd = input_dim(), td = codec_.target_dim();
        for (int m : members) check_member(m);
        std::vector<std::vector<std::size_t>> groups(members_.size());
        for (std::size_t i = 0; i < rows; ++i) groups[static_cast<std::size_t>(members[i])].push_back(i);
        std::vector<double> delta(td);
        for (std::size_t m = 0; m < members_.size(); ++m) {
            const auto& g = groups[m];
            if (g.empty()) continue;
            nn::Tensor x(g.size(), fd);
            for (std::size_t k = 0; k < g.size(); ++k) {
                codec_.features(states + g[k] * sd, actions + g[k] * ad, x.row(k));
                for (std::size_t j = 0; j < fd; ++j) x(k, j) = in_norm_.normalize(j, x(k, j));
            }
            const nn::Tensor out = members_[m].forward(x);
            for (std::size_t k = 0; k < g.size(); ++k) {
                for (std::size_t j = 0; j < td; ++j) {
                    double z = out(k, j);
                    if (rng) z += std::exp(0.5 * nn::soft_clamp_log_var(out(k, td + j))) * rng->normal();
                    delta[j] = out_norm_.denormalize(j, z);
                }
                codec_.apply(states + g[k] * sd, delta.data(), next_states + g[k] * sd);
            }
        }
    }

    nn::Checkpoint to_checkpoint() const {
        nn::Checkpoint ck;
        for (std::size_t m = 0; m < members_.size(); ++m) ck.networks.emplace_back("member" + std::to_string(m), members_[m]);
        ck.meta["ensemble"] = {{"codec", codec_.to_json()},
                               {"config", config_},
                               {"input_mean", in_norm_.mean},
                               {"input_std", in_norm_.std},
                               {"output_mean", out_norm_.mean},
                               {"output_std", out_norm_.std}};
        return ck;
    }

    static Ensemble from_checkpoint(const nn::Checkpoint& ck) {
        const auto& e = ck.meta.at("ensemble");
        Rng dummy;
        EnsembleConfig cfg = ensemble_config_from_json(e.at("config"), "ensemble.config");
        Ensemble ens(StateCodec::from_json(e.at("codec")), cfg, dummy);
        for (int m = 0; m < ens.size(); ++m) {
            const auto& net = ck.network("member" + std::to_string(m));
            if (net.dims() != ens.members_[static_cast<std::size_t>(m)].dims())
                throw Error("checkpoint member dims do not match ensemble config");
            ens.members_[static_cast<std::size_t>(m)] = net;
        }
        ens.in_norm_.mean = e.at("input_mean").get<std::vector<double>>();
        ens.in_norm_.std = e.at("input_std").get<std::vector<double>>();
        ens.out_norm_.mean = e.at("output_mean").get<std::vector<double>>();
        ens.out_norm_.std = e.at("output_std").get<std::vector<double>>();
        return ens;
    }

private:
    void check_member(int m) const {
        if (m < 0 || m >= size())
            throw Error("ensemble member index " + std::to_string(m) + " out of range [0, " + std::to_string(size()) + ")");
    }

    static nn::Tensor gather(const std::vector<double>& rows, std::size_t dim, const std::vector<std::size_t>& idx) {
        nn::Tensor t(idx.size(), dim);
        for (std::size_t k = 0; k < idx.size(); ++k)
            std::copy_n(rows.data() + idx[k] * dim, dim, t.row(k));
        return t;
    }

    static double holdout_nll(const nn::Mlp& net, const nn::Tensor& x, const nn::Tensor& y) {
        return nn::gaussian_nll(nn::split_gaussian(net.forward(x)), y).loss;
    }

    StateCodec codec_;
    EnsembleConfig config_;
    std::vector<nn::Mlp> members_;
    std::vector<nn::OptimState> optim_;
    Normalizer in_norm_, out_norm_;
};

}  // namespace pushrl::mbrl
