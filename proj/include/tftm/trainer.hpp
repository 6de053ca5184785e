#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <tuple>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "tftm/model.hpp"
#include "tftm/objective.hpp"
#include "tftm/timegrid.hpp"

namespace tftm {

/// Windows (original units, not yet filled) together with the schema they follow.
struct Dataset {
    VariableSchema schema;
    std::vector<WindowSample> windows;
    int past_len = 75;
    int horizon = 25;
    int bin_minutes = 15;
};

struct TrainConfig {
    double learning_rate = 1e-3;
    std::size_t batch_size = 800;
    int max_epochs = 2000;
    int patience = 50;
    double validation_fraction = 0.1;
    std::uint64_t seed = 0;
    double clip_norm = 10.0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;

    void validate() const {
        if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
        if (batch_size == 0) throw ConfigError("batch_size must be positive");
        if (max_epochs <= 0) throw ConfigError("max_epochs must be positive");
        if (patience < 0 || patience >= max_epochs) throw ConfigError("patience must be in [0, max_epochs)");
        if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
            throw ConfigError("validation_fraction must be in (0, 1)");
        if (!(clip_norm > 0.0)) throw ConfigError("clip_norm must be positive");
    }
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double elapsed_s = 0.0;
    int clipped_batches = 0;
    bool improved = false;

    /// One line of the training log (JSON).
    std::string to_line() const {
        std::ostringstream os;
        os.precision(10);
        os << "{\"epoch\":" << epoch << ",\"train_loss\":" << train_loss << ",\"val_loss\":" << val_loss
           << ",\"elapsed\":" << elapsed_s << ",\"clipped\":" << clipped_batches << ",\"improved\":"
           << (improved ? "true" : "false") << "}";
        return os.str();
    }
};

template <class T>
struct TrainResult {
    TrainedModel<T> model;
    std::vector<EpochRecord> log;
    int best_epoch = 0;
    double best_val_loss = 0.0;
    std::string stop_reason;
};

/// Adam with bias correction.
template <class T>
class Adam {
public:
    Adam(const ParamStore<T>& params, double lr, double b1, double b2, double eps) : lr_(lr), b1_(b1), b2_(b2), eps_(eps) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_.push_back(Matrix<T>::Zero(params.value(i).rows(), params.value(i).cols()));
            v_.push_back(m_.back());
        }
    }

    void step(ParamStore<T>& params, const std::vector<Matrix<T>>& grads) {
        ++t_;
        const double c1 = 1.0 - std::pow(b1_, t_), c2 = 1.0 - std::pow(b2_, t_);
        for (std::size_t i = 0; i < params.size(); ++i) {
            const auto& g = grads[i];
            if (g.size() == 0) continue;
            m_[i] = T(b1_) * m_[i] + T(1 - b1_) * g;
            v_[i] = T(b2_) * v_[i] + T(1 - b2_) * g.cwiseProduct(g);
            auto mhat = m_[i].array() / T(c1);
            auto vhat = v_[i].array() / T(c2);
            params.value(i).array() -= T(lr_) * mhat / (vhat.sqrt() + T(eps_));
        }
    }

private:
    double lr_, b1_, b2_, eps_;
    int t_ = 0;
    std::vector<Matrix<T>> m_, v_;
};

/// Loss and parameter gradients of one batch. Missing gradients come back as zeros.
template <class T>
struct BatchGradient {
    double loss = 0.0;
    LossBreakdown breakdown;
    std::vector<Matrix<T>> grads;
};

template <class T>
BatchGradient<T> batch_gradient(const TftNetwork<T>& net, const ParamStore<T>& params, const BatchInput<T>& batch,
                                const nn::PassContext& pc, Reduction reduction = Reduction::Mean) {
    Graph<T> g(&params);
    auto out = net.forward(g, batch, pc);
    BatchGradient<T> res;
    Var loss = masked_loss_node(g, out.prediction, batch.targets, batch.mask,
                                static_cast<std::size_t>(net.config().horizon), net.config().quantiles, reduction,
                                &res.breakdown);
    res.loss = res.breakdown.total;
    if (!std::isfinite(res.loss)) throw NumericError("loss", "non-finite loss");
    g.backward(loss);
    res.grads.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& gi = g.param_grad(i);
        res.grads[i] = gi.size() ? gi : Matrix<T>::Zero(params.value(i).rows(), params.value(i).cols());
        if (!res.grads[i].allFinite()) throw NumericError(params.name(i), "non-finite gradient");
    }
    return res;
}

/// Eval-mode loss of a set of encoded windows, averaged over windows.
template <class T>
double evaluate_loss(const TftNetwork<T>& net, const ParamStore<T>& params, const std::vector<EncodedWindow>& set,
                     std::size_t chunk = 256) {
    if (set.empty()) return 0.0;
    double total = 0.0;
    for (std::size_t start = 0; start < set.size(); start += chunk) {
        std::vector<const EncodedWindow*> ptrs;
        for (std::size_t i = start; i < std::min(set.size(), start + chunk); ++i) ptrs.push_back(&set[i]);
        auto batch = make_batch<T>(ptrs, net.config());
        Graph<T> g(&params);
        auto out = net.forward(g, batch, nn::PassContext{});
        total += masked_loss<T>(g.value(out.prediction), batch.targets, batch.mask,
                                static_cast<std::size_t>(net.config().horizon), net.config().quantiles, Reduction::Sum)
                     .total;
    }
    return total / static_cast<double>(set.size());
}

/// Prepares a model shell (fallbacks, normalisation, initial weights) for a training set.
template <class T>
TrainedModel<T> prepare_model(const Dataset& train_set, const ModelConfig& cfg, std::uint64_t seed) {
    TrainedModel<T> m;
    m.config = cfg;
    m.config.validate();
    m.fallbacks = fit_fallbacks(train_set.windows, train_set.schema);
    std::vector<WindowSample> filled;
    filled.reserve(train_set.windows.size());
    for (const auto& w : train_set.windows) filled.push_back(fill_window(w, m.fallbacks));
    m.norm = fit_normalizer(filled, train_set.schema);
    m.params = TftNetwork<T>(m.config).init_params(seed);
    return m;
}

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t s = a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2));
    return splitmix64(s);
}

} // namespace detail

/**
 * @brief Minibatch Adam on the masked loss with early stopping.
 *
 * A validation subset is held out from `train_set`; after every epoch its
 * eval-mode loss decides whether the weights are the best so far. Training
 * stops after `patience` consecutive non-improving epochs (patience 0 stops at
 * the first one) or at max_epochs, and the best weights are restored.
 *
 * `on_epoch` runs after every epoch; `on_best` whenever the weights improve.
 */
template <class T>
TrainResult<T> train(const Dataset& train_set, const ModelConfig& model_cfg, const TrainConfig& tc,
                     const std::function<void(const EpochRecord&)>& on_epoch = {},
                     const std::function<void(const TrainedModel<T>&, const EpochRecord&)>& on_best = {}) {
    tc.validate();
    if (train_set.windows.empty()) throw ConfigError("train: empty training set");
    TrainResult<T> res;
    res.model = prepare_model<T>(train_set, model_cfg, tc.seed);
    const auto& model = res.model;

    std::vector<EncodedWindow> encoded;
    encoded.reserve(train_set.windows.size());
    for (const auto& w : train_set.windows) encoded.push_back(model.encode(w));
    std::vector<EncodedWindow> fit_set, val_set;
    if (encoded.size() >= 2) {
        std::tie(fit_set, val_set) = split_cohort(encoded, 1.0 - tc.validation_fraction, detail::mix_seed(tc.seed, 0x5eed));
    } else {
        fit_set = encoded;
        val_set = encoded;
    }

    TftNetwork<T> net(model.config);
    ParamStore<T>& params = res.model.params;
    Adam<T> adam(params, tc.learning_rate, tc.adam_beta1, tc.adam_beta2, tc.adam_eps);
    ParamStore<T> best = params;
    double best_val = std::numeric_limits<double>::infinity();
    int since_best = 0;
    const std::size_t bs = std::min(tc.batch_size, fit_set.size());
    const auto t0 = std::chrono::steady_clock::now();
    res.stop_reason = "max_epochs";

    for (int epoch = 1; epoch <= tc.max_epochs; ++epoch) {
        auto order = detail::seeded_permutation(fit_set.size(), detail::mix_seed(tc.seed, static_cast<std::uint64_t>(epoch)));
        EpochRecord rec;
        rec.epoch = epoch;
        double weighted = 0.0;
        std::size_t batch_no = 0;
        for (std::size_t start = 0; start < order.size(); start += bs, ++batch_no) {
            std::vector<const EncodedWindow*> ptrs;
            for (std::size_t i = start; i < std::min(order.size(), start + bs); ++i) ptrs.push_back(&fit_set[order[i]]);
            auto batch = make_batch<T>(ptrs, model.config);
            std::mt19937_64 rng(detail::mix_seed(detail::mix_seed(tc.seed, static_cast<std::uint64_t>(epoch)), batch_no));
            nn::PassContext pc{Mode::Train, model.config.dropout, &rng};
            BatchGradient<T> bg;
            try {
                bg = batch_gradient(net, params, batch, pc);
            } catch (const NumericError& e) {
                throw NumericError(e.where(), "training diverged at epoch " + std::to_string(epoch) + ", batch " +
                                                  std::to_string(batch_no) + ": " + e.what());
            }
            double norm2 = 0.0;
            for (const auto& gm : bg.grads) norm2 += static_cast<double>(gm.squaredNorm());
            double norm = std::sqrt(norm2);
            if (norm > tc.clip_norm) {
                T s = static_cast<T>(tc.clip_norm / norm);
                for (auto& gm : bg.grads) gm *= s;
                ++rec.clipped_batches;
            }
            adam.step(params, bg.grads);
            weighted += bg.loss * static_cast<double>(ptrs.size());
        }
        rec.train_loss = weighted / static_cast<double>(fit_set.size());
        rec.val_loss = evaluate_loss(net, params, val_set);
        if (!std::isfinite(rec.val_loss)) throw NumericError("validation", "non-finite validation loss at epoch " + std::to_string(epoch));
        rec.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (rec.val_loss < best_val) {
            best_val = rec.val_loss;
            best = params;
            res.best_epoch = epoch;
            since_best = 0;
            rec.improved = true;
        } else {
            ++since_best;
        }
        res.log.push_back(rec);
        if (on_epoch) on_epoch(rec);
        if (rec.improved && on_best) {
            TrainedModel<T> snapshot = res.model;
            on_best(snapshot, rec);
        }
        if (since_best > tc.patience) {
            res.stop_reason = "early_stopping";
            break;
        }
    }
    params = best;
    res.best_val_loss = best_val;
    return res;
}

// ---- gradient check -----------------------------------------------------

struct GradCheckEntry {
    std::string param;
    long row = 0, col = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_error = 0.0;
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t coordinates = 0;
    std::size_t param_count = 0;
    std::vector<GradCheckEntry> offending; ///< rel_error above tolerance
    std::vector<GradCheckEntry> entries;
    bool passed() const { return offending.empty(); }
};

/// |a - n| / max(|a|, |n|, floor). The floor keeps near-zero gradients from
/// turning rounding noise into huge ratios.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Random encoded windows for a config: Gaussian inputs, random masks.
inline std::vector<EncodedWindow> random_encoded_windows(const ModelConfig& cfg, std::size_t n, std::uint64_t seed,
                                                         double real_rate = 0.6) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    std::bernoulli_distribution real(real_rate), coin(0.5);
    const auto P = static_cast<std::size_t>(cfg.past_len), H = static_cast<std::size_t>(cfg.horizon);
    std::vector<EncodedWindow> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& e = out[i];
        e.id = "rand" + std::to_string(i);
        for (std::size_t j = 0; j < cfg.static_inputs.size(); ++j) e.statics.push_back(z(rng));
        for (std::size_t k = 0; k < P * cfg.past_inputs.size(); ++k) e.past.push_back(z(rng));
        for (std::size_t k = 0; k < H * cfg.future_inputs.size(); ++k) e.future.push_back(coin(rng) ? 1.0 : 0.0);
        for (std::size_t k = 0; k < H * cfg.targets.size(); ++k) {
            e.targets.push_back(z(rng));
            e.mask.push_back(real(rng) ? 1 : 0);
        }
    }
    return out;
}

/**
 * Compares the tape gradient of the masked loss with central differences on
 * `coordinates` randomly chosen parameter entries (64-bit, eval mode).
 */
inline GradCheckReport gradient_check(const ModelConfig& cfg, std::uint64_t seed, std::size_t coordinates = 256,
                                      double eps = 1e-4, double tolerance = 1e-3, std::size_t batch_size = 3) {
    TftNetwork<double> net(cfg);
    ParamStore<double> params = net.init_params(seed);
    GradCheckReport rep;
    rep.param_count = params.scalar_count();
    if (rep.param_count > 10000) throw ConfigError("gradient_check expects a tiny config (<= 10k parameters)");

    auto windows = random_encoded_windows(cfg, batch_size, seed ^ 0xabcdefull);
    std::vector<const EncodedWindow*> ptrs;
    for (const auto& w : windows) ptrs.push_back(&w);
    auto batch = make_batch<double>(ptrs, cfg);
    auto analytic = batch_gradient(net, params, batch, nn::PassContext{});

    auto loss_at = [&](ParamStore<double>& p) {
        Graph<double> g(&p);
        auto out = net.forward(g, batch, nn::PassContext{});
        return masked_loss<double>(g.value(out.prediction), batch.targets, batch.mask,
                                   static_cast<std::size_t>(cfg.horizon), cfg.quantiles)
            .total;
    };

    std::mt19937_64 rng(seed + 17);
    std::vector<std::pair<std::size_t, Eigen::Index>> flat;
    for (std::size_t i = 0; i < params.size(); ++i)
        for (Eigen::Index k = 0; k < params.value(i).size(); ++k) flat.emplace_back(i, k);
    std::shuffle(flat.begin(), flat.end(), rng);
    coordinates = std::min(coordinates, flat.size());
    for (std::size_t c = 0; c < coordinates; ++c) {
        auto [pi, k] = flat[c];
        double& x = params.value(pi).data()[k];
        const double orig = x;
        x = orig + eps;
        double up = loss_at(params);
        x = orig - eps;
        double down = loss_at(params);
        x = orig;
        GradCheckEntry e;
        e.param = params.name(pi);
        e.row = static_cast<long>(k / params.value(pi).cols());
        e.col = static_cast<long>(k % params.value(pi).cols());
        e.analytic = analytic.grads[pi].data()[k];
        e.numeric = (up - down) / (2 * eps);
        e.rel_error = relative_error(e.analytic, e.numeric);
        rep.max_rel_error = std::max(rep.max_rel_error, e.rel_error);
        if (e.rel_error > tolerance) rep.offending.push_back(e);
        rep.entries.push_back(e);
    }
    rep.coordinates = coordinates;
    return rep;
}

} // namespace tftm
