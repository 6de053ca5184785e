#pragma once

// Building blocks of the temporal fusion network. Every block is a free
// function over a Graph; its weights live in the ParamStore under a path
// prefix ("past_vsn/flat/fc1/w" and so on).

#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "tftm/autodiff.hpp"

namespace tftm::nn {

using ad::BoolMatrix;
using ad::Graph;
using ad::Matrix;
using ad::ParamStore;
using ad::Var;

enum class Mode { Train, Eval };

/// Per-pass settings shared by all blocks.
struct PassContext {
    Mode mode = Mode::Eval;
    double dropout = 0.0;
    std::mt19937_64* rng = nullptr;

    bool training() const { return mode == Mode::Train && dropout > 0.0 && rng != nullptr; }
};

template <class T>
Var maybe_dropout(Graph<T>& g, Var x, const PassContext& pc) {
    return pc.training() ? g.dropout(x, pc.dropout, *pc.rng) : x;
}

// ---- initialisation -----------------------------------------------------

/// Adds parameters with Glorot-uniform weights, zero biases and unit LN gains.
template <class T>
class Initializer {
public:
    Initializer(ParamStore<T>& store, std::uint64_t seed) : store_(store), rng_(seed) {}

    void dense(const std::string& p, int in, int out, bool bias = true) {
        store_.add(p + "/w", uniform(in, out, std::sqrt(6.0 / static_cast<double>(in + out))));
        if (bias) store_.add(p + "/b", Matrix<T>::Zero(1, out));
    }

    /// Scalar-to-vector embedding. The bias plays the role of an embedding
    /// row and starts random, so a zero input never yields a zero vector.
    void embedding(const std::string& p, int d) {
        double limit = std::sqrt(6.0 / static_cast<double>(1 + d));
        store_.add(p + "/w", uniform(1, d, limit));
        store_.add(p + "/b", uniform(1, d, limit));
    }

    void layer_norm(const std::string& p, int d) {
        store_.add(p + "/gamma", Matrix<T>::Ones(1, d));
        store_.add(p + "/beta", Matrix<T>::Zero(1, d));
    }

    void grn(const std::string& p, int in, int hidden, int out, int context = 0) {
        dense(p + "/fc1", in, hidden);
        if (context > 0) dense(p + "/ctx", context, hidden, false);
        dense(p + "/fc2", hidden, hidden);
        dense(p + "/glu", hidden, 2 * out);
        if (in != out) dense(p + "/skip", in, out);
        layer_norm(p + "/ln", out);
    }

    void gate(const std::string& p, int in, int out) {
        dense(p + "/glu", in, 2 * out);
        layer_norm(p + "/ln", out);
    }

    void vsn(const std::string& p, int n_vars, int d, int context) {
        for (int j = 0; j < n_vars; ++j) {
            embedding(p + "/emb" + std::to_string(j), d);
            grn(p + "/var" + std::to_string(j), d, d, d);
        }
        if (n_vars > 1) grn(p + "/flat", n_vars * d, d, n_vars, context);
    }

    void lstm(const std::string& p, int in, int d) {
        dense(p + "/wx", in, 4 * d);
        dense(p + "/wh", d, 4 * d, false);
        // forget-gate bias starts at 1
        store_.value(p + "/wx/b").middleCols(d, d).setOnes();
    }

private:
    Matrix<T> uniform(int rows, int cols, double limit) {
        std::uniform_real_distribution<double> u(-limit, limit);
        Matrix<T> w(rows, cols);
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<T>(u(rng_));
        return w;
    }

    ParamStore<T>& store_;
    std::mt19937_64 rng_;
};

// ---- blocks -------------------------------------------------------------

template <class T>
Var dense(Graph<T>& g, const std::string& p, Var x) {
    return g.add_row(g.matmul(x, g.param(p + "/w")), g.param(p + "/b"));
}

/// Gated linear unit: sigmoid(W4 x + b4) * (W5 x + b5), both maps fused in one dense layer.
template <class T>
Var glu(Graph<T>& g, const std::string& p, Var x) {
    Var z = dense(g, p, x);
    auto out = g.value(z).cols() / 2;
    return g.mul(g.sigmoid(g.slice_cols(z, 0, out)), g.slice_cols(z, out, out));
}

template <class T>
Var layer_norm(Graph<T>& g, const std::string& p, Var x) {
    return g.layer_norm(x, g.param(p + "/gamma"), g.param(p + "/beta"));
}

/**
 * Gated residual network:
 *   h = ELU(W1 x + b1 + Wc c);  h = W2 h + b2;  out = LayerNorm(skip(x) + GLU(dropout(h)))
 * skip is the identity when input and output widths agree, a dense map otherwise.
 */
template <class T>
Var grn(Graph<T>& g, const std::string& p, Var x, std::optional<Var> context, const PassContext& pc) {
    Var h = dense(g, p + "/fc1", x);
    if (context) h = g.add(h, g.matmul(*context, g.param(p + "/ctx/w")));
    h = g.elu(h);
    h = dense(g, p + "/fc2", h);
    h = maybe_dropout(g, h, pc);
    Var gated = glu(g, p + "/glu", h);
    Var skip = g.value(x).cols() == g.value(gated).cols() ? x : dense(g, p + "/skip", x);
    return layer_norm(g, p + "/ln", g.add(skip, gated));
}

/// LayerNorm(residual + GLU(dropout(x))).
template <class T>
Var gate_add_norm(Graph<T>& g, const std::string& p, Var x, Var residual, const PassContext& pc) {
    Var gated = glu(g, p + "/glu", maybe_dropout(g, x, pc));
    return layer_norm(g, p + "/ln", g.add(residual, gated));
}

/// Scalar input columns -> one d-wide embedding per variable.
template <class T>
std::vector<Var> embed_columns(Graph<T>& g, const std::string& p, Var inputs) {
    std::vector<Var> out;
    auto n = g.value(inputs).cols();
    for (Eigen::Index j = 0; j < n; ++j) out.push_back(dense(g, p + "/emb" + std::to_string(j), g.slice_cols(inputs, j, 1)));
    return out;
}

struct SelectionOutput {
    Var combined; ///< N x d
    Var weights;  ///< N x n_vars, rows on the simplex
};

/**
 * Variable selection: softmax over a GRN of the flattened embeddings
 * (optionally conditioned on a context), then a weighted sum of per-variable
 * GRN outputs. A single variable gets weight exactly 1.
 */
template <class T>
SelectionOutput variable_selection(Graph<T>& g, const std::string& p, const std::vector<Var>& embeddings,
                                   std::optional<Var> context, const PassContext& pc) {
    if (embeddings.empty()) throw ShapeError("variable_selection: no inputs");
    const auto n_rows = g.value(embeddings[0]).rows();
    if (embeddings.size() == 1) {
        Var w = g.constant(Matrix<T>::Ones(n_rows, 1));
        return {grn(g, p + "/var0", embeddings[0], std::nullopt, pc), w};
    }
    Var flat = g.concat_cols(embeddings);
    Var weights = g.softmax_rows(grn(g, p + "/flat", flat, context, pc));
    Var combined{};
    for (std::size_t j = 0; j < embeddings.size(); ++j) {
        Var processed = grn(g, p + "/var" + std::to_string(j), embeddings[j], std::nullopt, pc);
        Var term = g.mul_col(processed, g.slice_cols(weights, static_cast<Eigen::Index>(j), 1));
        combined = combined.valid() ? g.add(combined, term) : term;
    }
    return {combined, weights};
}

struct LstmOutput {
    Var outputs; ///< (steps*B) x d, time-major
    Var h, c;    ///< final states, B x d
};

/// Single-layer LSTM over a time-major input of `steps` blocks of `batch` rows.
template <class T>
LstmOutput lstm(Graph<T>& g, const std::string& p, Var inputs, Var h0, Var c0, Eigen::Index steps, Eigen::Index batch) {
    const auto d = g.value(h0).cols();
    Var xw = dense(g, p + "/wx", inputs);
    Var wh = g.param(p + "/wh/w");
    Var h = h0, c = c0;
    std::vector<Var> outs;
    outs.reserve(static_cast<std::size_t>(steps));
    for (Eigen::Index t = 0; t < steps; ++t) {
        Var z = g.add(g.slice_rows(xw, t * batch, batch), g.matmul(h, wh));
        Var i = g.sigmoid(g.slice_cols(z, 0, d));
        Var f = g.sigmoid(g.slice_cols(z, d, d));
        Var u = g.tanh(g.slice_cols(z, 2 * d, d));
        Var o = g.sigmoid(g.slice_cols(z, 3 * d, d));
        c = g.add(g.mul(f, c), g.mul(i, u));
        h = g.mul(o, g.tanh(c));
        outs.push_back(h);
    }
    return {g.stack_rows(outs), h, c};
}

struct AttentionOutput {
    Var outputs; ///< Nq x dv
    Var weights; ///< Nq x Nk, head-averaged; each row a distribution over permitted keys
};

/**
 * Interpretable multi-head attention on already-projected inputs.
 *
 * `queries` and `keys` hold `heads` column blocks of width dk; `values` is a
 * single projection shared by every head. Head weights are averaged before
 * being applied to the values, so the averaged matrix is the only mixing
 * that reaches the output. `mask(i, j)` permits query i to read key j.
 */
template <class T>
AttentionOutput interpretable_attention(Graph<T>& g, Var queries, Var keys, Var values, const BoolMatrix& mask,
                                        int heads) {
    const auto width = g.value(queries).cols();
    if (heads <= 0 || width % heads != 0 || g.value(keys).cols() != width)
        throw ShapeError("interpretable_attention: query/key widths must split evenly over heads");
    if (g.value(values).rows() != g.value(keys).rows()) throw ShapeError("interpretable_attention: key/value rows");
    const auto dk = width / heads;
    const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(dk));
    Var acc{};
    for (int h = 0; h < heads; ++h) {
        Var q = g.slice_cols(queries, h * dk, dk);
        Var k = g.slice_cols(keys, h * dk, dk);
        Var scores = g.scale(g.matmul(q, g.transpose(k)), inv_sqrt);
        Var a = g.softmax_rows(scores, &mask);
        acc = acc.valid() ? g.add(acc, a) : a;
    }
    Var weights = heads == 1 ? acc : g.scale(acc, T(1) / static_cast<T>(heads));
    return {g.matmul(weights, values), weights};
}

} // namespace tftm::nn
