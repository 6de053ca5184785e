#pragma once

// Masked multi-target quantile loss.
//
// For every sample i, target v and quantile q the pinball losses over the
// real (non-imputed) future steps are averaged by that sample-variable's
// real count and summed over q and v. A sample-variable without any real
// step contributes 0. Reduction over samples is a sum or a mean.

#include <cstddef>
#include <string>
#include <vector>

#include "tftm/autodiff.hpp"
#include "tftm/common.hpp"

namespace tftm {

/// Pinball loss: q*max(0, y - yhat) + (1 - q)*max(0, yhat - y).
template <class T>
T quantile_loss(T y, T y_hat, T q) {
    T diff = y - y_hat;
    return diff > T(0) ? q * diff : (T(1) - q) * (-diff);
}

/// d quantile_loss / d y_hat (0 at the kink).
template <class T>
T quantile_loss_grad(T y, T y_hat, T q) {
    if (y > y_hat) return -q;
    if (y_hat > y) return T(1) - q;
    return T(0);
}

enum class Reduction { Sum, Mean };

struct LossBreakdown {
    double total = 0.0;
    std::vector<double> per_variable;       ///< indexed like the targets
    std::vector<double> per_quantile;       ///< indexed like the quantiles
    std::vector<std::size_t> real_counts;   ///< real future steps per target, over the batch
};

/**
 * Layout: pred is (B*H) x (V*Q) with row b*H + t and column v*Q + q;
 * targets/mask are (B*H) x V. Accumulation runs b, v, q, t in that order.
 */
template <class T>
LossBreakdown masked_loss(const ad::Matrix<T>& pred, const ad::Matrix<T>& targets, const ad::Matrix<T>& mask,
                          std::size_t horizon, const std::vector<double>& quantiles, Reduction reduction = Reduction::Mean) {
    const auto Q = static_cast<Eigen::Index>(quantiles.size());
    const auto V = targets.cols();
    const auto H = static_cast<Eigen::Index>(horizon);
    if (H <= 0 || targets.rows() % H != 0) throw ShapeError("masked_loss: rows are not a multiple of the horizon");
    if (pred.rows() != targets.rows() || pred.cols() != V * Q || mask.rows() != targets.rows() || mask.cols() != V)
        throw ShapeError("masked_loss: prediction/target/mask shapes do not align");
    const Eigen::Index B = targets.rows() / H;
    LossBreakdown out;
    out.per_variable.assign(static_cast<std::size_t>(V), 0.0);
    out.per_quantile.assign(static_cast<std::size_t>(Q), 0.0);
    out.real_counts.assign(static_cast<std::size_t>(V), 0);
    const double norm = reduction == Reduction::Mean && B > 0 ? 1.0 / static_cast<double>(B) : 1.0;
    for (Eigen::Index b = 0; b < B; ++b) {
        for (Eigen::Index v = 0; v < V; ++v) {
            std::size_t count = 0;
            for (Eigen::Index t = 0; t < H; ++t)
                if (mask(b * H + t, v) != T(0)) ++count;
            out.real_counts[static_cast<std::size_t>(v)] += count;
            if (count == 0) continue;
            for (Eigen::Index q = 0; q < Q; ++q) {
                double acc = 0.0;
                for (Eigen::Index t = 0; t < H; ++t) {
                    if (mask(b * H + t, v) == T(0)) continue;
                    acc += static_cast<double>(quantile_loss<T>(targets(b * H + t, v), pred(b * H + t, v * Q + q),
                                                                static_cast<T>(quantiles[static_cast<std::size_t>(q)])));
                }
                double term = acc / static_cast<double>(count) * norm;
                out.per_variable[static_cast<std::size_t>(v)] += term;
                out.per_quantile[static_cast<std::size_t>(q)] += term;
            }
        }
    }
    for (double x : out.per_variable) out.total += x;
    return out;
}

/// The same loss as a differentiable tape node (1x1) of the predictions.
template <class T>
ad::Var masked_loss_node(ad::Graph<T>& g, ad::Var pred, const ad::Matrix<T>& targets, const ad::Matrix<T>& mask,
                         std::size_t horizon, const std::vector<double>& quantiles, Reduction reduction = Reduction::Mean,
                         LossBreakdown* breakdown = nullptr) {
    LossBreakdown lb = masked_loss<T>(g.value(pred), targets, mask, horizon, quantiles, reduction);
    if (breakdown) *breakdown = lb;
    ad::Matrix<T> value(1, 1);
    value(0, 0) = static_cast<T>(lb.total);
    return g.custom(std::move(value), {pred}, [&g, pred, targets, mask, horizon, quantiles, reduction](const ad::Matrix<T>& gout) {
        const auto& P = g.value(pred);
        const auto Q = static_cast<Eigen::Index>(quantiles.size());
        const auto V = targets.cols();
        const auto H = static_cast<Eigen::Index>(horizon);
        const Eigen::Index B = targets.rows() / H;
        const T norm = reduction == Reduction::Mean ? T(1) / static_cast<T>(B) : T(1);
        ad::Matrix<T> d = ad::Matrix<T>::Zero(P.rows(), P.cols());
        for (Eigen::Index b = 0; b < B; ++b)
            for (Eigen::Index v = 0; v < V; ++v) {
                Eigen::Index count = 0;
                for (Eigen::Index t = 0; t < H; ++t)
                    if (mask(b * H + t, v) != T(0)) ++count;
                if (count == 0) continue;
                const T w = gout(0, 0) * norm / static_cast<T>(count);
                for (Eigen::Index q = 0; q < Q; ++q)
                    for (Eigen::Index t = 0; t < H; ++t) {
                        if (mask(b * H + t, v) == T(0)) continue;
                        d(b * H + t, v * Q + q) = w * quantile_loss_grad<T>(targets(b * H + t, v), P(b * H + t, v * Q + q),
                                                                            static_cast<T>(quantiles[static_cast<std::size_t>(q)]));
                    }
            }
        g.accumulate(pred, d);
    });
}

} // namespace tftm
