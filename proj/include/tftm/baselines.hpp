#pragma once

// Vector autoregression by equation-wise least squares, AIC order selection,
// iterated forecasts and pairwise Granger-causality F tests.
//
// Series are T x k matrices (row = time). Several independent segments (one
// per encounter) can be pooled: lags never reach across segment borders.

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/fisher_f.hpp>

#include "tftm/common.hpp"

namespace tftm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct VarModel {
    int order = 0;
    int dims = 0;
    std::vector<MatrixXd> A; ///< A[j] is the k x k matrix of lag j+1
    VectorXd c;              ///< intercept
    MatrixXd sigma;          ///< residual covariance, divided by n - (1 + k p)
    MatrixXd sigma_ml;       ///< residual covariance, divided by n
    MatrixXd coef;           ///< (1 + k p) x k stacked [c'; A_1'; ...; A_p']
    MatrixXd std_errors;     ///< same layout as coef
    std::size_t nobs = 0;    ///< regression rows used

    /// Standard error of A[lag](row, col).
    double a_std_error(int lag, int row, int col) const { return std_errors(1 + lag * dims + col, row); }
};

namespace detail {

struct LaggedDesign {
    MatrixXd Z; ///< n x (1 + k p)
    MatrixXd Y; ///< n x k
};

/// Rows t >= start of every segment; columns [1, x_{t-1}, ..., x_{t-p}].
inline LaggedDesign lagged_design(const std::vector<MatrixXd>& segments, int p, int start) {
    if (segments.empty()) throw ShapeError("VAR: no data");
    const auto k = segments.front().cols();
    Eigen::Index n = 0;
    for (const auto& s : segments) {
        if (s.cols() != k) throw ShapeError("VAR: segments differ in dimension");
        if (!s.allFinite()) throw NumericError("baselines", "VAR input contains non-finite values");
        n += std::max<Eigen::Index>(0, s.rows() - start);
    }
    LaggedDesign d;
    d.Z.resize(n, 1 + k * p);
    d.Y.resize(n, k);
    Eigen::Index r = 0;
    for (const auto& s : segments) {
        for (Eigen::Index t = start; t < s.rows(); ++t, ++r) {
            d.Z(r, 0) = 1.0;
            for (int j = 0; j < p; ++j) d.Z.row(r).segment(1 + j * k, k) = s.row(t - 1 - j);
            d.Y.row(r) = s.row(t);
        }
    }
    return d;
}

struct OlsFit {
    MatrixXd coef;
    MatrixXd residuals;
    MatrixXd xtx_inv;
};

inline OlsFit ols(const MatrixXd& Z, const MatrixXd& Y, const char* what) {
    if (Z.rows() <= Z.cols()) throw RankDeficiencyError(std::string(what) + ": too few observations for the number of regressors");
    Eigen::ColPivHouseholderQR<MatrixXd> qr(Z);
    qr.setThreshold(1e-10);
    if (qr.rank() < Z.cols())
        throw RankDeficiencyError(std::string(what) + ": singular design matrix (rank " + std::to_string(qr.rank()) + " < " +
                                  std::to_string(Z.cols()) + "); try a smaller lag order");
    OlsFit f;
    f.coef = qr.solve(Y);
    f.residuals = Y - Z * f.coef;
    f.xtx_inv = (Z.transpose() * Z).inverse();
    return f;
}

inline VarModel fit_var_from_design(const LaggedDesign& d, int p, Eigen::Index k) {
    VarModel m;
    m.order = p;
    m.dims = static_cast<int>(k);
    m.nobs = static_cast<std::size_t>(d.Z.rows());
    OlsFit f = ols(d.Z, d.Y, "fit_var");
    m.coef = f.coef;
    const double n = static_cast<double>(d.Z.rows());
    const double dof = n - static_cast<double>(d.Z.cols());
    MatrixXd ete = f.residuals.transpose() * f.residuals;
    m.sigma = ete / dof;
    m.sigma_ml = ete / n;
    m.c = f.coef.row(0).transpose();
    for (int j = 0; j < p; ++j) m.A.push_back(f.coef.block(1 + j * k, 0, k, k).transpose());
    m.std_errors.resize(f.coef.rows(), f.coef.cols());
    for (Eigen::Index i = 0; i < f.coef.rows(); ++i)
        for (Eigen::Index e = 0; e < k; ++e) m.std_errors(i, e) = std::sqrt(f.xtx_inv(i, i) * m.sigma(e, e));
    return m;
}

} // namespace detail

/**
 * @brief Least-squares VAR(p): x_t = c + sum_j A_j x_{t-j} + e_t.
 * p = 0 gives the mean model. Throws RankDeficiencyError on a singular design.
 */
inline VarModel fit_var(const std::vector<MatrixXd>& segments, int p) {
    if (p < 0) throw ConfigError("VAR order must be non-negative");
    auto d = detail::lagged_design(segments, p, p);
    return detail::fit_var_from_design(d, p, segments.front().cols());
}

inline VarModel fit_var(const MatrixXd& series, int p) { return fit_var(std::vector<MatrixXd>{series}, p); }

/// ln det(Sigma_ml) + 2 p k^2 / n.
inline double var_aic(const VarModel& m) {
    double logdet = std::log(m.sigma_ml.determinant());
    return logdet + 2.0 * m.order * m.dims * m.dims / static_cast<double>(m.nobs);
}

struct OrderSelection {
    int order = 1;
    std::vector<double> aic; ///< aic[p-1] for p = 1..p_max
};

/// AIC-minimising order in 1..p_max, every candidate fitted on the same rows (t >= p_max).
inline OrderSelection select_order(const std::vector<MatrixXd>& segments, int p_max) {
    if (p_max < 1) throw ConfigError("select_order: p_max must be >= 1");
    OrderSelection sel;
    double best = std::numeric_limits<double>::infinity();
    for (int p = 1; p <= p_max; ++p) {
        auto d = detail::lagged_design(segments, p, p_max);
        auto m = detail::fit_var_from_design(d, p, segments.front().cols());
        double a = var_aic(m);
        sel.aic.push_back(a);
        if (a < best) {
            best = a;
            sel.order = p;
        }
    }
    return sel;
}

inline OrderSelection select_order(const MatrixXd& series, int p_max) {
    return select_order(std::vector<MatrixXd>{series}, p_max);
}

/// k x H iterated forecasts following the last rows of `history`.
inline MatrixXd var_forecast(const VarModel& m, const MatrixXd& history, int horizon) {
    if (history.cols() != m.dims) throw ShapeError("var_forecast: history dimension differs from the model");
    if (history.rows() < m.order) throw ShapeError("var_forecast: history shorter than the model order");
    const int k = m.dims, p = m.order;
    // lags[j] = x_{t-1-j}
    std::vector<VectorXd> lags;
    for (int j = 0; j < p; ++j) lags.push_back(history.row(history.rows() - 1 - j).transpose());
    MatrixXd out(k, horizon);
    for (int h = 0; h < horizon; ++h) {
        VectorXd x = m.c;
        for (int j = 0; j < p; ++j) x += m.A[static_cast<std::size_t>(j)] * lags[static_cast<std::size_t>(j)];
        out.col(h) = x;
        if (p > 0) {
            lags.insert(lags.begin(), x);
            lags.pop_back();
        }
    }
    return out;
}

/// Forecast-error variances (k x H): diagonals of sum_{i<h} Phi_i Sigma Phi_i'.
inline MatrixXd var_forecast_variance(const VarModel& m, int horizon) {
    const int k = m.dims, p = m.order;
    std::vector<MatrixXd> phi{MatrixXd::Identity(k, k)};
    for (int i = 1; i < horizon; ++i) {
        MatrixXd next = MatrixXd::Zero(k, k);
        for (int j = 1; j <= std::min(i, p); ++j) next += phi[static_cast<std::size_t>(i - j)] * m.A[static_cast<std::size_t>(j - 1)];
        phi.push_back(next);
    }
    MatrixXd out(k, horizon);
    MatrixXd acc = MatrixXd::Zero(k, k);
    for (int h = 0; h < horizon; ++h) {
        acc += phi[static_cast<std::size_t>(h)] * m.sigma * phi[static_cast<std::size_t>(h)].transpose();
        out.col(h) = acc.diagonal();
    }
    return out;
}

struct GrangerResult {
    double F = 0.0;
    double p_value = 1.0;
    double df1 = 0.0;
    double df2 = 0.0;
    double rss_restricted = 0.0;
    double rss_unrestricted = 0.0;
};

/**
 * @brief Does x Granger-cause y? F test of y on its own p lags (restricted)
 * against y on p lags of y and p lags of x (unrestricted).
 *
 * With n regression rows the degrees of freedom are (p, n - 2p - 1); for a
 * single series of length T, n = T - p.
 */
inline GrangerResult granger_test(const std::vector<VectorXd>& x, const std::vector<VectorXd>& y, int p) {
    if (p < 1) throw ConfigError("granger_test: lag order must be >= 1");
    if (x.size() != y.size() || x.empty()) throw ShapeError("granger_test: x and y must have the same segments");
    std::vector<MatrixXd> joint, own;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i].size() != y[i].size()) throw ShapeError("granger_test: x and y lengths differ");
        MatrixXd s(y[i].size(), 2);
        s.col(0) = y[i];
        s.col(1) = x[i];
        joint.push_back(s);
        own.push_back(y[i]);
    }
    auto du = detail::lagged_design(joint, p, p);
    auto dr = detail::lagged_design(own, p, p);
    const double n = static_cast<double>(du.Z.rows());
    GrangerResult r;
    r.df1 = p;
    r.df2 = n - 2.0 * p - 1.0;
    if (r.df2 < 1) throw ShapeError("granger_test: series too short for the lag order");
    MatrixXd yu = du.Y.col(0);
    auto fu = detail::ols(du.Z, yu, "granger_test");
    auto fr = detail::ols(dr.Z, dr.Y, "granger_test");
    r.rss_unrestricted = fu.residuals.squaredNorm();
    r.rss_restricted = fr.residuals.squaredNorm();
    double tss = (yu.array() - yu.mean()).matrix().squaredNorm();
    if (!(r.rss_unrestricted > 1e-12 * std::max(tss, 1e-300)))
        throw DegenerateError("granger_test: unrestricted residual variance is zero");
    r.F = ((r.rss_restricted - r.rss_unrestricted) / r.df1) / (r.rss_unrestricted / r.df2);
    if (r.F < 0) r.F = 0;
    boost::math::fisher_f dist(r.df1, r.df2);
    r.p_value = boost::math::cdf(boost::math::complement(dist, r.F));
    return r;
}

inline GrangerResult granger_test(const VectorXd& x, const VectorXd& y, int p) {
    return granger_test(std::vector<VectorXd>{x}, std::vector<VectorXd>{y}, p);
}

struct GrangerPair {
    std::string cause, effect;
    GrangerResult result;
    bool significant = false;
};

struct GrangerScreen {
    std::vector<GrangerPair> pairs;
    std::vector<std::string> retained;
    std::vector<std::string> excluded;
};

/**
 * Pairwise tests over all ordered pairs of columns. A variable is excluded
 * when none of its tests, in either direction, is significant at `alpha`.
 */
inline GrangerScreen granger_screen(const std::vector<MatrixXd>& segments, const std::vector<std::string>& names, int p,
                                    double alpha = 0.05) {
    const auto k = static_cast<Eigen::Index>(names.size());
    if (segments.empty() || segments.front().cols() != k) throw ShapeError("granger_screen: names do not match columns");
    GrangerScreen s;
    std::vector<bool> linked(static_cast<std::size_t>(k), false);
    for (Eigen::Index a = 0; a < k; ++a)
        for (Eigen::Index b = 0; b < k; ++b) {
            if (a == b) continue;
            std::vector<VectorXd> xs, ys;
            for (const auto& seg : segments) {
                xs.push_back(seg.col(a));
                ys.push_back(seg.col(b));
            }
            GrangerPair gp{names[static_cast<std::size_t>(a)], names[static_cast<std::size_t>(b)], {}, false};
            try {
                gp.result = granger_test(xs, ys, p);
                gp.significant = gp.result.p_value < alpha;
            } catch (const DegenerateError&) {
                gp.result.p_value = 1.0;
            } catch (const RankDeficiencyError&) {
                gp.result.p_value = 1.0;
            }
            if (gp.significant) linked[static_cast<std::size_t>(a)] = linked[static_cast<std::size_t>(b)] = true;
            s.pairs.push_back(gp);
        }
    for (Eigen::Index v = 0; v < k; ++v)
        (linked[static_cast<std::size_t>(v)] ? s.retained : s.excluded).push_back(names[static_cast<std::size_t>(v)]);
    return s;
}

} // namespace tftm
