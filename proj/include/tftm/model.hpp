#pragma once

// The multi-target temporal fusion network and its inference wrapper.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tftm/autodiff.hpp"
#include "tftm/layers.hpp"
#include "tftm/timegrid.hpp"

namespace tftm {

using ad::Graph;
using ad::Matrix;
using ad::ParamStore;
using ad::Var;
using nn::Mode;

struct ModelConfig {
    int hidden_size = 64;
    int num_heads = 4;
    double dropout = 0.3;
    std::vector<double> quantiles{0.1, 0.5, 0.9};
    std::vector<std::string> targets;
    std::vector<std::string> static_inputs;
    std::vector<std::string> past_inputs;   ///< targets first, then observed, then known-future
    std::vector<std::string> future_inputs; ///< known-future
    int past_len = 75;
    int horizon = 25;

    /// Builds the input layout implied by a schema.
    static ModelConfig from_schema(const VariableSchema& schema, int past_len, int horizon, int hidden_size = 64,
                                   int num_heads = 4, double dropout = 0.3) {
        ModelConfig c;
        c.hidden_size = hidden_size;
        c.num_heads = num_heads;
        c.dropout = dropout;
        c.targets = schema.targets();
        c.static_inputs = schema.statics();
        c.past_inputs = schema.past_inputs();
        c.future_inputs = schema.known_future();
        c.past_len = past_len;
        c.horizon = horizon;
        c.validate();
        return c;
    }

    int num_targets() const { return static_cast<int>(targets.size()); }
    int num_quantiles() const { return static_cast<int>(quantiles.size()); }
    int sequence_len() const { return past_len + horizon; }
    int output_width() const { return num_targets() * num_quantiles(); }

    void validate() const {
        if (hidden_size <= 0 || num_heads <= 0 || hidden_size % num_heads != 0)
            throw ConfigError("hidden_size must be a positive multiple of num_heads");
        if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
        if (quantiles.empty()) throw ConfigError("at least one quantile is required");
        for (std::size_t i = 0; i < quantiles.size(); ++i) {
            if (!(quantiles[i] > 0.0 && quantiles[i] < 1.0)) throw ConfigError("quantiles must lie in (0, 1)");
            if (i && quantiles[i] <= quantiles[i - 1]) throw ConfigError("quantiles must be sorted ascending");
        }
        if (targets.empty()) throw ConfigError("at least one target is required");
        if (past_len <= 0 || horizon <= 0) throw ConfigError("past_len and horizon must be positive");
        for (std::size_t v = 0; v < targets.size(); ++v)
            if (v >= past_inputs.size() || past_inputs[v] != targets[v])
                throw ConfigError("past inputs must start with the targets");
    }

    nlohmann::json to_json() const {
        return {{"hidden_size", hidden_size}, {"num_heads", num_heads},     {"dropout", dropout},
                {"quantiles", quantiles},     {"targets", targets},         {"static_inputs", static_inputs},
                {"past_inputs", past_inputs}, {"future_inputs", future_inputs}, {"past_len", past_len},
                {"horizon", horizon}};
    }

    static ModelConfig from_json(const nlohmann::json& j) {
        ModelConfig c;
        c.hidden_size = j.at("hidden_size");
        c.num_heads = j.at("num_heads");
        c.dropout = j.at("dropout");
        c.quantiles = j.at("quantiles").get<std::vector<double>>();
        c.targets = j.at("targets").get<std::vector<std::string>>();
        c.static_inputs = j.at("static_inputs").get<std::vector<std::string>>();
        c.past_inputs = j.at("past_inputs").get<std::vector<std::string>>();
        c.future_inputs = j.at("future_inputs").get<std::vector<std::string>>();
        c.past_len = j.at("past_len");
        c.horizon = j.at("horizon");
        c.validate();
        return c;
    }

    std::string fingerprint() const { return hex64(fnv1a64(to_json().dump())); }

    bool has_future_input(const std::string& name) const {
        return std::find(future_inputs.begin(), future_inputs.end(), name) != future_inputs.end();
    }
};

/// A window flattened into the network's input order (normalised units).
struct EncodedWindow {
    std::string id;
    std::vector<double> statics;       ///< n_static
    std::vector<double> past;          ///< P x n_past, row = step
    std::vector<double> future;        ///< H x n_future
    std::vector<double> targets;       ///< H x V
    std::vector<unsigned char> mask;   ///< H x V, 1 = real
};

/// `w` must already be forward-filled and normalised.
inline EncodedWindow encode_window(const WindowSample& w, const ModelConfig& cfg) {
    EncodedWindow e;
    e.id = w.encounter_id;
    const auto P = static_cast<std::size_t>(cfg.past_len), H = static_cast<std::size_t>(cfg.horizon);
    for (const auto& name : cfg.static_inputs) {
        auto it = w.statics.find(name);
        if (it == w.statics.end()) throw SchemaError("window '" + w.encounter_id + "' lacks static '" + name + "'");
        e.statics.push_back(it->second);
    }
    const auto np = cfg.past_inputs.size(), nf = cfg.future_inputs.size(), V = cfg.targets.size();
    e.past.assign(P * np, 0.0);
    for (std::size_t j = 0; j < np; ++j) {
        auto it = w.past.find(cfg.past_inputs[j]);
        if (it == w.past.end() || it->second.size() != P)
            throw ShapeError("window '" + w.encounter_id + "': past series '" + cfg.past_inputs[j] + "' missing or wrong length");
        for (std::size_t t = 0; t < P; ++t) e.past[t * np + j] = it->second.values[t];
    }
    e.future.assign(H * nf, 0.0);
    for (std::size_t j = 0; j < nf; ++j) {
        auto it = w.future_known.find(cfg.future_inputs[j]);
        if (it == w.future_known.end() || it->second.size() != H)
            throw ShapeError("window '" + w.encounter_id + "': known-future series '" + cfg.future_inputs[j] + "' missing or wrong length");
        for (std::size_t t = 0; t < H; ++t) e.future[t * nf + j] = it->second[t];
    }
    e.targets.assign(H * V, 0.0);
    e.mask.assign(H * V, 0);
    for (std::size_t v = 0; v < V; ++v) {
        auto it = w.targets_future.find(cfg.targets[v]);
        if (it == w.targets_future.end() || it->second.size() != H)
            throw ShapeError("window '" + w.encounter_id + "': future target '" + cfg.targets[v] + "' missing or wrong length");
        for (std::size_t t = 0; t < H; ++t) {
            e.targets[t * V + v] = it->second.values[t];
            e.mask[t * V + v] = it->second.is_real[t] ? 1 : 0;
        }
    }
    for (double x : e.statics)
        if (!std::isfinite(x)) throw NumericError("input/static", "non-finite static input in '" + w.encounter_id + "'");
    for (double x : e.past)
        if (!std::isfinite(x)) throw NumericError("input/past", "non-finite past input in '" + w.encounter_id + "' (not forward-filled?)");
    for (double x : e.future)
        if (!std::isfinite(x)) throw NumericError("input/future", "non-finite known-future input in '" + w.encounter_id + "'");
    return e;
}

/// Dense network inputs for B windows. Temporal rows are time-major (row = t*B + b).
template <class T>
struct BatchInput {
    Eigen::Index batch = 0;
    Matrix<T> statics; ///< B x n_static
    Matrix<T> past;    ///< (P*B) x n_past
    Matrix<T> future;  ///< (H*B) x n_future
    Matrix<T> targets; ///< (B*H) x V, sample-major
    Matrix<T> mask;    ///< (B*H) x V, 1 = real
};

template <class T>
BatchInput<T> make_batch(const std::vector<const EncodedWindow*>& windows, const ModelConfig& cfg) {
    BatchInput<T> in;
    const auto B = static_cast<Eigen::Index>(windows.size());
    const Eigen::Index P = cfg.past_len, H = cfg.horizon;
    const auto ns = static_cast<Eigen::Index>(cfg.static_inputs.size());
    const auto np = static_cast<Eigen::Index>(cfg.past_inputs.size());
    const auto nf = static_cast<Eigen::Index>(cfg.future_inputs.size());
    const auto V = static_cast<Eigen::Index>(cfg.targets.size());
    in.batch = B;
    in.statics.resize(B, ns);
    in.past.resize(P * B, np);
    in.future.resize(H * B, nf);
    in.targets.resize(B * H, V);
    in.mask.resize(B * H, V);
    for (Eigen::Index b = 0; b < B; ++b) {
        const EncodedWindow& w = *windows[static_cast<std::size_t>(b)];
        for (Eigen::Index j = 0; j < ns; ++j) in.statics(b, j) = static_cast<T>(w.statics[static_cast<std::size_t>(j)]);
        for (Eigen::Index t = 0; t < P; ++t)
            for (Eigen::Index j = 0; j < np; ++j) in.past(t * B + b, j) = static_cast<T>(w.past[static_cast<std::size_t>(t * np + j)]);
        for (Eigen::Index t = 0; t < H; ++t) {
            for (Eigen::Index j = 0; j < nf; ++j)
                in.future(t * B + b, j) = static_cast<T>(w.future[static_cast<std::size_t>(t * nf + j)]);
            for (Eigen::Index v = 0; v < V; ++v) {
                auto k = static_cast<std::size_t>(t * V + v);
                in.targets(b * H + t, v) = static_cast<T>(w.targets[k]);
                in.mask(b * H + t, v) = w.mask[k] ? T(1) : T(0);
            }
        }
    }
    return in;
}

/// Outputs of one forward pass.
struct NetworkOutput {
    Var prediction; ///< (B*H) x (V*Q), sample-major rows; column v*Q + q
    Var static_weights;
    Var past_weights;   ///< (P*B) x n_past, time-major
    Var future_weights; ///< (H*B) x n_future, time-major (invalid if no known-future inputs)
    std::vector<Var> attention; ///< per sample, H x (P+H)
};

/**
 * Network structure:
 *   input embedding -> static variable selection -> four static context
 *   vectors (selection, enrichment, LSTM h0, LSTM c0) -> per-step variable
 *   selection over past and future inputs -> LSTM encoder/decoder with gated
 *   skip -> static enrichment GRN -> causal interpretable attention over all
 *   P+H positions (queries at future positions) -> gated skip ->
 *   position-wise GRN -> gated skip to the LSTM layer -> dense head with
 *   V*Q outputs per future step.
 */
template <class T>
class TftNetwork {
public:
    explicit TftNetwork(ModelConfig cfg) : cfg_(std::move(cfg)) {
        cfg_.validate();
        const Eigen::Index P = cfg_.past_len, H = cfg_.horizon, S = P + H;
        causal_.resize(H, S);
        for (Eigen::Index i = 0; i < H; ++i)
            for (Eigen::Index j = 0; j < S; ++j) causal_(i, j) = j <= P + i;
    }

    const ModelConfig& config() const { return cfg_; }
    const ad::BoolMatrix& causal_mask() const { return causal_; }

    ParamStore<T> init_params(std::uint64_t seed) const {
        ParamStore<T> store;
        nn::Initializer<T> init(store, seed);
        const int d = cfg_.hidden_size;
        const int ns = static_cast<int>(cfg_.static_inputs.size());
        const int np = static_cast<int>(cfg_.past_inputs.size());
        const int nf = static_cast<int>(cfg_.future_inputs.size());
        if (ns > 0) init.vsn("static_vsn", ns, d, 0);
        for (const char* name : {"ctx_select", "ctx_enrich", "ctx_state_h", "ctx_state_c"}) init.grn(name, d, d, d);
        init.vsn("past_vsn", np, d, d);
        if (nf > 0) init.vsn("future_vsn", nf, d, d);
        init.lstm("encoder", d, d);
        init.lstm("decoder", d, d);
        init.gate("post_lstm", d, d);
        init.grn("enrichment", d, d, d, d);
        const int dk = d / cfg_.num_heads;
        init.dense("attention/query", d, d, false);
        init.dense("attention/key", d, d, false);
        init.dense("attention/value", d, dk, false);
        init.dense("attention/out", dk, d, false);
        init.gate("post_attention", d, d);
        init.grn("positionwise", d, d, d);
        init.gate("pre_output", d, d);
        init.dense("output", d, cfg_.output_width());
        return store;
    }

    NetworkOutput forward(Graph<T>& g, const BatchInput<T>& in, const nn::PassContext& pc) const {
        const Eigen::Index B = in.batch, P = cfg_.past_len, H = cfg_.horizon, S = P + H;
        const Eigen::Index d = cfg_.hidden_size;
        if (in.past.rows() != P * B || in.past.cols() != static_cast<Eigen::Index>(cfg_.past_inputs.size()))
            throw ShapeError("forward: past input shape does not match config");
        NetworkOutput out;

        // static covariate encoders
        Var static_repr;
        if (!cfg_.static_inputs.empty()) {
            auto emb = nn::embed_columns(g, "static_vsn", g.constant(in.statics));
            auto sel = nn::variable_selection(g, "static_vsn", emb, std::nullopt, pc);
            static_repr = sel.combined;
            out.static_weights = sel.weights;
        } else {
            static_repr = g.constant(Matrix<T>::Zero(B, d));
        }
        check(g, static_repr, "static_vsn");
        Var c_select = nn::grn(g, "ctx_select", static_repr, std::nullopt, pc);
        Var c_enrich = nn::grn(g, "ctx_enrich", static_repr, std::nullopt, pc);
        Var c_h = nn::grn(g, "ctx_state_h", static_repr, std::nullopt, pc);
        Var c_c = nn::grn(g, "ctx_state_c", static_repr, std::nullopt, pc);

        // temporal variable selection
        Var past_ctx = g.gather_rows(c_select, time_major_sample_index(P, B));
        auto past_sel = nn::variable_selection(g, "past_vsn", nn::embed_columns(g, "past_vsn", g.constant(in.past)),
                                               past_ctx, pc);
        out.past_weights = past_sel.weights;
        check(g, past_sel.combined, "past_vsn");
        Var future_selected;
        if (!cfg_.future_inputs.empty()) {
            Var fut_ctx = g.gather_rows(c_select, time_major_sample_index(H, B));
            auto fut_sel = nn::variable_selection(g, "future_vsn",
                                                  nn::embed_columns(g, "future_vsn", g.constant(in.future)), fut_ctx, pc);
            future_selected = fut_sel.combined;
            out.future_weights = fut_sel.weights;
        } else {
            future_selected = g.constant(Matrix<T>::Zero(H * B, d));
        }

        // sequence-to-sequence
        auto enc = nn::lstm(g, "encoder", past_sel.combined, c_h, c_c, P, B);
        auto dec = nn::lstm(g, "decoder", future_selected, enc.h, enc.c, H, B);
        Var lstm_out = g.stack_rows({enc.outputs, dec.outputs});
        Var selected = g.stack_rows({past_sel.combined, future_selected});
        Var temporal = nn::gate_add_norm(g, "post_lstm", lstm_out, selected, pc);
        check(g, temporal, "post_lstm");

        // static enrichment
        Var enriched = nn::grn(g, "enrichment", temporal, g.gather_rows(c_enrich, time_major_sample_index(S, B)), pc);
        check(g, enriched, "enrichment");

        // attention: queries at future positions, keys/values over the full sequence
        auto future_rows = future_sample_major_index(B);
        Var enriched_future = g.gather_rows(enriched, future_rows);
        Var queries = g.matmul(enriched_future, g.param("attention/query/w"));
        Var keys = g.matmul(enriched, g.param("attention/key/w"));
        Var values = g.matmul(enriched, g.param("attention/value/w"));
        std::vector<Var> per_sample;
        per_sample.reserve(static_cast<std::size_t>(B));
        out.attention.reserve(static_cast<std::size_t>(B));
        for (Eigen::Index b = 0; b < B; ++b) {
            auto seq = sequence_index(b, B);
            auto att = nn::interpretable_attention(g, g.slice_rows(queries, b * H, H), g.gather_rows(keys, seq),
                                                   g.gather_rows(values, seq), causal_, cfg_.num_heads);
            per_sample.push_back(att.outputs);
            out.attention.push_back(att.weights);
        }
        Var attended = g.matmul(g.stack_rows(per_sample), g.param("attention/out/w"));
        Var post_att = nn::gate_add_norm(g, "post_attention", attended, enriched_future, pc);
        check(g, post_att, "attention");

        Var pw = nn::grn(g, "positionwise", post_att, std::nullopt, pc);
        Var fused = nn::gate_add_norm(g, "pre_output", pw, g.gather_rows(temporal, future_rows), nn::PassContext{});
        out.prediction = nn::dense(g, "output", fused);
        check(g, out.prediction, "output");
        return out;
    }

    /// row t*B + b  ->  b
    static std::vector<int> time_major_sample_index(Eigen::Index steps, Eigen::Index B) {
        std::vector<int> idx(static_cast<std::size_t>(steps * B));
        for (Eigen::Index t = 0; t < steps; ++t)
            for (Eigen::Index b = 0; b < B; ++b) idx[static_cast<std::size_t>(t * B + b)] = static_cast<int>(b);
        return idx;
    }

private:
    /// sample-major future rows b*H + i  ->  time-major row (P+i)*B + b
    std::vector<int> future_sample_major_index(Eigen::Index B) const {
        const Eigen::Index P = cfg_.past_len, H = cfg_.horizon;
        std::vector<int> idx(static_cast<std::size_t>(B * H));
        for (Eigen::Index b = 0; b < B; ++b)
            for (Eigen::Index i = 0; i < H; ++i) idx[static_cast<std::size_t>(b * H + i)] = static_cast<int>((P + i) * B + b);
        return idx;
    }

    std::vector<int> sequence_index(Eigen::Index b, Eigen::Index B) const {
        const Eigen::Index S = cfg_.sequence_len();
        std::vector<int> idx(static_cast<std::size_t>(S));
        for (Eigen::Index t = 0; t < S; ++t) idx[static_cast<std::size_t>(t)] = static_cast<int>(t * B + b);
        return idx;
    }

    static void check(const Graph<T>& g, Var v, const char* where) {
        if (!g.value(v).allFinite()) throw NumericError(where, "non-finite activation");
    }

    ModelConfig cfg_;
    ad::BoolMatrix causal_;
};

/**
 * Forecast for one window in original units.
 * values is laid out [target][quantile][step].
 */
struct ForecastSet {
    std::string encounter_id;
    std::vector<std::string> targets;
    std::vector<double> quantiles;
    std::size_t horizon = 0;
    std::vector<double> values;

    std::vector<double> static_weights;  ///< n_static
    std::vector<double> past_weights;    ///< P x n_past
    std::vector<double> future_weights;  ///< H x n_future
    std::vector<double> attention;       ///< H x (P+H)

    double at(std::size_t v, std::size_t q, std::size_t t) const {
        return values[(v * quantiles.size() + q) * horizon + t];
    }
    double& at(std::size_t v, std::size_t q, std::size_t t) { return values[(v * quantiles.size() + q) * horizon + t]; }

    std::vector<double> trajectory(std::size_t v, std::size_t q) const {
        auto begin = values.begin() + static_cast<std::ptrdiff_t>((v * quantiles.size() + q) * horizon);
        return {begin, begin + static_cast<std::ptrdiff_t>(horizon)};
    }

    std::size_t target_index(const std::string& name) const {
        for (std::size_t v = 0; v < targets.size(); ++v)
            if (targets[v] == name) return v;
        throw SchemaError("forecast has no target '" + name + "'");
    }

    /// Index of the quantile closest to q.
    std::size_t quantile_index(double q) const {
        std::size_t best = 0;
        for (std::size_t i = 1; i < quantiles.size(); ++i)
            if (std::abs(quantiles[i] - q) < std::abs(quantiles[best] - q)) best = i;
        return best;
    }
};

/// Network weights together with everything needed to map raw windows to forecasts.
template <class T>
struct TrainedModel {
    ModelConfig config;
    NormStats norm;
    std::map<std::string, double> fallbacks; ///< leading-gap fill values (original units)
    ParamStore<T> params;

    std::string fingerprint() const { return config.fingerprint(); }

    /// Fill (if needed), normalise and encode one window given in original units.
    EncodedWindow encode(const WindowSample& raw) const {
        return encode_window(apply_normalizer(fill_window(raw, fallbacks), norm), config);
    }

    std::vector<ForecastSet> predict(const std::vector<WindowSample>& windows, std::size_t batch_size = 256) const {
        std::vector<EncodedWindow> enc;
        enc.reserve(windows.size());
        for (const auto& w : windows) enc.push_back(encode(w));
        return predict_encoded(enc, batch_size);
    }

    std::vector<ForecastSet> predict_encoded(const std::vector<EncodedWindow>& enc, std::size_t batch_size = 256) const {
        TftNetwork<T> net(config);
        std::vector<ForecastSet> out;
        out.reserve(enc.size());
        for (std::size_t start = 0; start < enc.size(); start += batch_size) {
            std::size_t end = std::min(enc.size(), start + batch_size);
            std::vector<const EncodedWindow*> ptrs;
            for (std::size_t i = start; i < end; ++i) ptrs.push_back(&enc[i]);
            auto batch = make_batch<T>(ptrs, config);
            Graph<T> g(&params);
            auto res = net.forward(g, batch, nn::PassContext{});
            for (std::size_t b = 0; b < ptrs.size(); ++b) out.push_back(to_forecast(g, res, batch, b, ptrs[b]->id));
        }
        return out;
    }

private:
    ForecastSet to_forecast(const Graph<T>& g, const NetworkOutput& res, const BatchInput<T>& batch, std::size_t b,
                            const std::string& id) const {
        const auto B = static_cast<std::size_t>(batch.batch);
        const auto H = static_cast<std::size_t>(config.horizon), P = static_cast<std::size_t>(config.past_len);
        const auto Q = config.quantiles.size();
        ForecastSet f;
        f.encounter_id = id;
        f.targets = config.targets;
        f.quantiles = config.quantiles;
        f.horizon = H;
        f.values.resize(config.targets.size() * Q * H);
        const auto& pred = g.value(res.prediction);
        for (std::size_t v = 0; v < config.targets.size(); ++v)
            for (std::size_t q = 0; q < Q; ++q)
                for (std::size_t t = 0; t < H; ++t)
                    f.at(v, q, t) = norm.invert(config.targets[v],
                                                static_cast<double>(pred(static_cast<Eigen::Index>(b * H + t),
                                                                         static_cast<Eigen::Index>(v * Q + q))));
        if (res.static_weights.valid()) {
            const auto& w = g.value(res.static_weights);
            for (Eigen::Index j = 0; j < w.cols(); ++j) f.static_weights.push_back(static_cast<double>(w(static_cast<Eigen::Index>(b), j)));
        }
        {
            const auto& w = g.value(res.past_weights);
            for (std::size_t t = 0; t < P; ++t)
                for (Eigen::Index j = 0; j < w.cols(); ++j)
                    f.past_weights.push_back(static_cast<double>(w(static_cast<Eigen::Index>(t * B + b), j)));
        }
        if (res.future_weights.valid()) {
            const auto& w = g.value(res.future_weights);
            for (std::size_t t = 0; t < H; ++t)
                for (Eigen::Index j = 0; j < w.cols(); ++j)
                    f.future_weights.push_back(static_cast<double>(w(static_cast<Eigen::Index>(t * B + b), j)));
        }
        const auto& a = g.value(res.attention[b]);
        f.attention.assign(a.data(), a.data() + a.size());
        return f;
    }
};

} // namespace tftm
