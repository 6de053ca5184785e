#pragma once

// Tape-based reverse-mode differentiation over dense row-major matrices.
//
// A Graph records every operation of one forward pass. Each node owns its
// value and (lazily) its adjoint; backward() walks the tape in reverse.
// Parameters live in a ParamStore that is only read during a pass; their
// gradients accumulate inside the Graph so several graphs may share a store.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tftm/common.hpp"

namespace tftm::ad {

template <class T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Handle to a node on a Graph tape.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

/// Named learnable tensors, in insertion order.
template <class T>
class ParamStore {
public:
    std::size_t add(const std::string& name, Matrix<T> init) {
        if (index_.count(name)) throw ConfigError("duplicate parameter '" + name + "'");
        index_[name] = values_.size();
        names_.push_back(name);
        values_.push_back(std::move(init));
        return values_.size() - 1;
    }

    std::size_t index(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
        return it->second;
    }

    bool contains(const std::string& name) const { return index_.count(name) != 0; }

    Matrix<T>& value(std::size_t i) { return values_[i]; }
    const Matrix<T>& value(std::size_t i) const { return values_[i]; }
    Matrix<T>& value(const std::string& name) { return values_[index(name)]; }
    const Matrix<T>& value(const std::string& name) const { return values_[index(name)]; }

    const std::string& name(std::size_t i) const { return names_[i]; }
    const std::vector<std::string>& names() const { return names_; }
    std::size_t size() const { return values_.size(); }

    std::size_t scalar_count() const {
        std::size_t n = 0;
        for (const auto& v : values_) n += static_cast<std::size_t>(v.size());
        return n;
    }

    template <class U>
    ParamStore<U> cast() const {
        ParamStore<U> out;
        for (std::size_t i = 0; i < values_.size(); ++i) out.add(names_[i], values_[i].template cast<U>());
        return out;
    }

private:
    std::vector<std::string> names_;
    std::vector<Matrix<T>> values_;
    std::unordered_map<std::string, std::size_t> index_;
};

template <class T>
class Graph {
public:
    explicit Graph(const ParamStore<T>* params = nullptr) : params_(params) {
        if (params_) param_grads_.resize(params_->size());
        nodes_.reserve(1024);
    }

    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    // ---- leaves -----------------------------------------------------------

    Var constant(Matrix<T> value) { return push(std::move(value), false, {}); }

    Var param(const std::string& name) { return param(params_->index(name)); }

    Var param(std::size_t index) {
        Var out = push(params_->value(index), true, {});
        nodes_[static_cast<std::size_t>(out.id)].param_index = static_cast<long>(index);
        return out;
    }

    // ---- access -----------------------------------------------------------

    const Matrix<T>& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }

    /// Adjoint of a node after backward(); empty if nothing flowed into it.
    const Matrix<T>& grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].grad; }

    bool requires_grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].requires_grad; }

    /// Gradient for parameter `i` (empty when it did not take part).
    const Matrix<T>& param_grad(std::size_t i) const { return param_grads_[i]; }
    const std::vector<Matrix<T>>& param_grads() const { return param_grads_; }

    std::size_t size() const { return nodes_.size(); }

    /// Seeds d(root)/d(root) = 1 (root must be 1x1) and runs the tape backwards.
    void backward(Var root) {
        auto& r = node(root);
        if (r.value.rows() != 1 || r.value.cols() != 1) throw ShapeError("backward: root must be a scalar");
        r.grad = Matrix<T>::Ones(1, 1);
        for (int i = root.id; i >= 0; --i) {
            auto& n = nodes_[static_cast<std::size_t>(i)];
            if (!n.requires_grad || n.grad.size() == 0) continue;
            if (n.param_index >= 0) {
                auto& g = param_grads_[static_cast<std::size_t>(n.param_index)];
                if (g.size() == 0) g = n.grad;
                else g += n.grad;
            } else if (n.back) {
                n.back();
            }
        }
    }

    /// Low-level hook for custom ops: a new node with the given value whose
    /// backward closure receives the output adjoint.
    Var custom(Matrix<T> value, std::initializer_list<Var> inputs, std::function<void(const Matrix<T>&)> back) {
        bool rg = false;
        for (Var v : inputs) rg = rg || requires_grad(v);
        Var out = push(std::move(value), rg, {});
        if (rg) {
            int id = out.id;
            node(out).back = [this, id, back = std::move(back)]() { back(nodes_[static_cast<std::size_t>(id)].grad); };
        }
        return out;
    }

    /// Adds `delta` into the adjoint of `v` (no-op for constants).
    template <class Derived>
    void accumulate(Var v, const Eigen::MatrixBase<Derived>& delta) {
        auto& n = node(v);
        if (!n.requires_grad) return;
        if (n.grad.size() == 0) n.grad = delta;
        else n.grad += delta;
    }

    // ---- linear algebra ---------------------------------------------------

    Var matmul(Var a, Var b) {
        const auto& A = value(a);
        const auto& B = value(b);
        if (A.cols() != B.rows())
            throw ShapeError("matmul: " + dims(A) + " x " + dims(B));
        return unary_or_binary(A * B, a, b, [this, a, b](const Matrix<T>& g) {
            if (requires_grad(a)) accumulate(a, g * value(b).transpose());
            if (requires_grad(b)) accumulate(b, value(a).transpose() * g);
        });
    }

    Var transpose(Var a) {
        return unary_or_binary(value(a).transpose(), a, {}, [this, a](const Matrix<T>& g) { accumulate(a, g.transpose()); });
    }

    Var add(Var a, Var b) {
        same_shape("add", a, b);
        return unary_or_binary(value(a) + value(b), a, b, [this, a, b](const Matrix<T>& g) {
            accumulate(a, g);
            accumulate(b, g);
        });
    }

    Var sub(Var a, Var b) {
        same_shape("sub", a, b);
        return unary_or_binary(value(a) - value(b), a, b, [this, a, b](const Matrix<T>& g) {
            accumulate(a, g);
            accumulate(b, -g);
        });
    }

    /// Elementwise product.
    Var mul(Var a, Var b) {
        same_shape("mul", a, b);
        return unary_or_binary(value(a).cwiseProduct(value(b)), a, b, [this, a, b](const Matrix<T>& g) {
            if (requires_grad(a)) accumulate(a, g.cwiseProduct(value(b)));
            if (requires_grad(b)) accumulate(b, g.cwiseProduct(value(a)));
        });
    }

    /// a (N x d) + row (1 x d), broadcast over rows.
    Var add_row(Var a, Var row) {
        const auto& A = value(a);
        const auto& R = value(row);
        if (R.rows() != 1 || R.cols() != A.cols()) throw ShapeError("add_row: " + dims(A) + " + " + dims(R));
        Matrix<T> out = A.rowwise() + R.row(0);
        return unary_or_binary(std::move(out), a, row, [this, a, row](const Matrix<T>& g) {
            accumulate(a, g);
            if (requires_grad(row)) accumulate(row, g.colwise().sum());
        });
    }

    /// a (N x d) scaled row-wise by col (N x 1).
    Var mul_col(Var a, Var col) {
        const auto& A = value(a);
        const auto& C = value(col);
        if (C.cols() != 1 || C.rows() != A.rows()) throw ShapeError("mul_col: " + dims(A) + " * " + dims(C));
        Matrix<T> out = A.array().colwise() * C.col(0).array();
        return unary_or_binary(std::move(out), a, col, [this, a, col](const Matrix<T>& g) {
            if (requires_grad(a)) accumulate(a, Matrix<T>(g.array().colwise() * value(col).col(0).array()));
            if (requires_grad(col)) accumulate(col, Matrix<T>(g.cwiseProduct(value(a)).rowwise().sum()));
        });
    }

    Var scale(Var a, T s) {
        return unary_or_binary(value(a) * s, a, {}, [this, a, s](const Matrix<T>& g) { accumulate(a, g * s); });
    }

    Var sum(Var a) {
        Matrix<T> out(1, 1);
        out(0, 0) = value(a).sum();
        return unary_or_binary(std::move(out), a, {}, [this, a](const Matrix<T>& g) {
            accumulate(a, Matrix<T>::Constant(value(a).rows(), value(a).cols(), g(0, 0)));
        });
    }

    // ---- pointwise nonlinearities -------------------------------------------

    Var sigmoid(Var a) {
        Matrix<T> out = value(a).unaryExpr([](T x) { return T(1) / (T(1) + std::exp(-x)); });
        Var o = unary_or_binary(std::move(out), a, {}, {});
        set_back(o, [this, a, o](const Matrix<T>& g) {
            const auto& y = value(o);
            accumulate(a, Matrix<T>(g.array() * y.array() * (T(1) - y.array())));
        });
        return o;
    }

    Var tanh(Var a) {
        Matrix<T> out = value(a).array().tanh().matrix();
        Var o = unary_or_binary(std::move(out), a, {}, {});
        set_back(o, [this, a, o](const Matrix<T>& g) {
            const auto& y = value(o);
            accumulate(a, Matrix<T>(g.array() * (T(1) - y.array().square())));
        });
        return o;
    }

    Var elu(Var a) {
        Matrix<T> out = value(a).unaryExpr([](T x) { return x > T(0) ? x : std::expm1(x); });
        return unary_or_binary(std::move(out), a, {}, [this, a](const Matrix<T>& g) {
            Matrix<T> d = value(a).unaryExpr([](T x) { return x > T(0) ? T(1) : std::exp(x); });
            accumulate(a, g.cwiseProduct(d));
        });
    }

    /// Inverted dropout with a fixed Bernoulli mask drawn from `rng`.
    template <class Rng>
    Var dropout(Var a, double rate, Rng& rng) {
        if (rate <= 0.0) return a;
        const auto& A = value(a);
        std::bernoulli_distribution keep(1.0 - rate);
        const T scale_kept = T(1.0 / (1.0 - rate));
        Matrix<T> mask(A.rows(), A.cols());
        for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? scale_kept : T(0);
        Matrix<T> out = A.cwiseProduct(mask);
        return unary_or_binary(std::move(out), a, {}, [this, a, mask = std::move(mask)](const Matrix<T>& g) {
            accumulate(a, g.cwiseProduct(mask));
        });
    }

    // ---- normalisation ----------------------------------------------------

    /// Row softmax. With a mask, entries where mask is false get exactly zero
    /// probability. A row with no permitted entry is an error.
    Var softmax_rows(Var a, const BoolMatrix* mask = nullptr) {
        const auto& A = value(a);
        if (mask && (mask->rows() != A.rows() || mask->cols() != A.cols())) throw ShapeError("softmax_rows: mask shape");
        Matrix<T> out = Matrix<T>::Zero(A.rows(), A.cols());
        for (Eigen::Index r = 0; r < A.rows(); ++r) {
            T mx = -std::numeric_limits<T>::infinity();
            for (Eigen::Index c = 0; c < A.cols(); ++c)
                if (!mask || (*mask)(r, c)) mx = std::max(mx, A(r, c));
            if (!std::isfinite(mx)) throw NumericError("softmax", "row without permitted entries or non-finite logits");
            T z = 0;
            for (Eigen::Index c = 0; c < A.cols(); ++c)
                if (!mask || (*mask)(r, c)) {
                    out(r, c) = std::exp(A(r, c) - mx);
                    z += out(r, c);
                }
            out.row(r) /= z;
        }
        Var o = unary_or_binary(std::move(out), a, {}, {});
        set_back(o, [this, a, o](const Matrix<T>& g) {
            const auto& y = value(o);
            Matrix<T> gy = g.cwiseProduct(y);
            Eigen::Matrix<T, Eigen::Dynamic, 1> dot = gy.rowwise().sum();
            Matrix<T> d = gy - (y.array().colwise() * dot.array()).matrix();
            accumulate(a, d);
        });
        return o;
    }

    /// Row-wise layer normalisation with affine gamma/beta (1 x d).
    Var layer_norm(Var a, Var gamma, Var beta, T eps = T(1e-5)) {
        const auto& X = value(a);
        const Eigen::Index n = X.rows(), d = X.cols();
        if (value(gamma).cols() != d || value(beta).cols() != d) throw ShapeError("layer_norm: affine shape");
        Matrix<T> xhat(n, d);
        Eigen::Matrix<T, Eigen::Dynamic, 1> inv_std(n);
        for (Eigen::Index r = 0; r < n; ++r) {
            T mu = X.row(r).mean();
            T var = (X.row(r).array() - mu).square().mean();
            inv_std(r) = T(1) / std::sqrt(var + eps);
            xhat.row(r) = (X.row(r).array() - mu) * inv_std(r);
        }
        Matrix<T> out = (xhat.array().rowwise() * value(gamma).row(0).array()).matrix();
        out.rowwise() += value(beta).row(0);
        bool rg = requires_grad(a) || requires_grad(gamma) || requires_grad(beta);
        Var o = push(std::move(out), rg, {});
        if (rg) {
            set_back(o, [this, a, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std)](const Matrix<T>& g) {
                const Eigen::Index d = xhat.cols();
                if (requires_grad(gamma)) accumulate(gamma, Matrix<T>(g.cwiseProduct(xhat).colwise().sum()));
                if (requires_grad(beta)) accumulate(beta, Matrix<T>(g.colwise().sum()));
                if (requires_grad(a)) {
                    Matrix<T> dxhat = g.array().rowwise() * value(gamma).row(0).array();
                    Matrix<T> dx(xhat.rows(), d);
                    for (Eigen::Index r = 0; r < xhat.rows(); ++r) {
                        T s1 = dxhat.row(r).sum();
                        T s2 = dxhat.row(r).dot(xhat.row(r));
                        dx.row(r) = (inv_std(r) / T(d)) *
                                    (T(d) * dxhat.row(r).array() - s1 - xhat.row(r).array() * s2);
                    }
                    accumulate(a, dx);
                }
            });
        }
        return o;
    }

    // ---- reshaping --------------------------------------------------------

    Var concat_cols(const std::vector<Var>& parts) {
        if (parts.empty()) throw ShapeError("concat_cols: no inputs");
        Eigen::Index rows = value(parts[0]).rows(), cols = 0;
        bool rg = false;
        for (Var p : parts) {
            if (value(p).rows() != rows) throw ShapeError("concat_cols: row mismatch");
            cols += value(p).cols();
            rg = rg || requires_grad(p);
        }
        Matrix<T> out(rows, cols);
        Eigen::Index c = 0;
        for (Var p : parts) {
            out.middleCols(c, value(p).cols()) = value(p);
            c += value(p).cols();
        }
        Var o = push(std::move(out), rg, {});
        if (rg)
            set_back(o, [this, parts](const Matrix<T>& g) {
                Eigen::Index c0 = 0;
                for (Var p : parts) {
                    auto w = value(p).cols();
                    if (requires_grad(p)) accumulate(p, g.middleCols(c0, w));
                    c0 += w;
                }
            });
        return o;
    }

    Var slice_cols(Var a, Eigen::Index start, Eigen::Index n) {
        const auto& A = value(a);
        if (start < 0 || start + n > A.cols()) throw ShapeError("slice_cols out of range");
        return unary_or_binary(A.middleCols(start, n), a, {}, [this, a, start, n](const Matrix<T>& g) {
            auto& gn = grad_buffer(a);
            gn.middleCols(start, n) += g;
        });
    }

    Var stack_rows(const std::vector<Var>& parts) {
        if (parts.empty()) throw ShapeError("stack_rows: no inputs");
        Eigen::Index cols = value(parts[0]).cols(), rows = 0;
        bool rg = false;
        for (Var p : parts) {
            if (value(p).cols() != cols) throw ShapeError("stack_rows: column mismatch");
            rows += value(p).rows();
            rg = rg || requires_grad(p);
        }
        Matrix<T> out(rows, cols);
        Eigen::Index r = 0;
        for (Var p : parts) {
            out.middleRows(r, value(p).rows()) = value(p);
            r += value(p).rows();
        }
        Var o = push(std::move(out), rg, {});
        if (rg)
            set_back(o, [this, parts](const Matrix<T>& g) {
                Eigen::Index r0 = 0;
                for (Var p : parts) {
                    auto h = value(p).rows();
                    if (requires_grad(p)) accumulate(p, g.middleRows(r0, h));
                    r0 += h;
                }
            });
        return o;
    }

    Var slice_rows(Var a, Eigen::Index start, Eigen::Index n) {
        const auto& A = value(a);
        if (start < 0 || start + n > A.rows()) throw ShapeError("slice_rows out of range");
        return unary_or_binary(A.middleRows(start, n), a, {}, [this, a, start, n](const Matrix<T>& g) {
            auto& gn = grad_buffer(a);
            gn.middleRows(start, n) += g;
        });
    }

    /// out.row(i) = a.row(index[i]); rows may repeat.
    Var gather_rows(Var a, std::vector<int> index) {
        const auto& A = value(a);
        Matrix<T> out(static_cast<Eigen::Index>(index.size()), A.cols());
        for (std::size_t i = 0; i < index.size(); ++i) {
            if (index[i] < 0 || index[i] >= A.rows()) throw ShapeError("gather_rows index out of range");
            out.row(static_cast<Eigen::Index>(i)) = A.row(index[i]);
        }
        return unary_or_binary(std::move(out), a, {}, [this, a, index = std::move(index)](const Matrix<T>& g) {
            auto& gn = grad_buffer(a);
            for (std::size_t i = 0; i < index.size(); ++i) gn.row(index[i]) += g.row(static_cast<Eigen::Index>(i));
        });
    }

private:
    struct Node {
        Matrix<T> value;
        Matrix<T> grad;
        std::function<void()> back;
        bool requires_grad = false;
        long param_index = -1;
    };

    Node& node(Var v) { return nodes_[static_cast<std::size_t>(v.id)]; }

    static std::string dims(const Matrix<T>& m) {
        return "(" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ")";
    }

    void same_shape(const char* op, Var a, Var b) const {
        const auto& A = value(a);
        const auto& B = value(b);
        if (A.rows() != B.rows() || A.cols() != B.cols())
            throw ShapeError(std::string(op) + ": " + dims(A) + " vs " + dims(B));
    }

    Var push(Matrix<T> value, bool requires_grad, std::function<void()> back) {
        nodes_.push_back(Node{std::move(value), {}, std::move(back), requires_grad, -1});
        return Var{static_cast<int>(nodes_.size() - 1)};
    }

    Matrix<T>& grad_buffer(Var v) {
        auto& n = node(v);
        if (n.grad.size() == 0) n.grad = Matrix<T>::Zero(n.value.rows(), n.value.cols());
        return n.grad;
    }

    template <class F>
    void set_back(Var out, F&& f) {
        if (!node(out).requires_grad) return;
        int id = out.id;
        node(out).back = [this, id, f = std::forward<F>(f)]() { f(nodes_[static_cast<std::size_t>(id)].grad); };
    }

    template <class F>
    Var unary_or_binary(Matrix<T> value, Var a, Var b, F&& f) {
        bool rg = requires_grad(a) || (b.valid() && requires_grad(b));
        Var out = push(std::move(value), rg, {});
        if constexpr (!std::is_same_v<std::decay_t<F>, std::nullptr_t>) {
            if (rg) set_back(out, std::forward<F>(f));
        }
        return out;
    }

    Var unary_or_binary(Matrix<T> value, Var a, Var b, std::nullptr_t) {
        bool rg = requires_grad(a) || (b.valid() && requires_grad(b));
        return push(std::move(value), rg, {});
    }

    const ParamStore<T>* params_;
    std::vector<Node> nodes_;
    std::vector<Matrix<T>> param_grads_;
};

} // namespace tftm::ad
