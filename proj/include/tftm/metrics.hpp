#pragma once

// Masked evaluation metrics. Every function looks only at positions whose
// mask is set; values stored at other positions never influence a result.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <nlohmann/json.hpp>

#include "tftm/common.hpp"

namespace tftm {

namespace detail {

inline void require_same_size(std::size_t a, std::size_t b, std::size_t c, const char* what) {
    if (a != b || a != c) throw ShapeError(std::string(what) + ": input lengths differ");
}

} // namespace detail

/// Pooled mean absolute error over real positions; empty when nothing is real.
inline std::optional<double> masked_mae(const std::vector<double>& pred, const std::vector<double>& truth,
                                        const std::vector<bool>& mask) {
    detail::require_same_size(pred.size(), truth.size(), mask.size(), "masked_mae");
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (!mask[i]) continue;
        sum += std::abs(truth[i] - pred[i]);
        ++n;
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

struct MapeResult {
    std::optional<double> percent;
    std::size_t used = 0;
    std::size_t excluded_zero_truth = 0;
};

/// Mean absolute percentage error (x100) over real positions with nonzero truth.
inline MapeResult masked_mape(const std::vector<double>& pred, const std::vector<double>& truth,
                              const std::vector<bool>& mask) {
    detail::require_same_size(pred.size(), truth.size(), mask.size(), "masked_mape");
    MapeResult r;
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (!mask[i]) continue;
        if (truth[i] == 0.0) {
            ++r.excluded_zero_truth;
            continue;
        }
        sum += std::abs(truth[i] - pred[i]) / std::abs(truth[i]);
        ++r.used;
    }
    if (r.used) r.percent = sum / static_cast<double>(r.used) * 100.0;
    return r;
}

/// Fraction of real points inside the closed band [lower, upper]; empty without real points.
inline std::optional<double> coverage_fraction(const std::vector<double>& lower, const std::vector<double>& upper,
                                               const std::vector<double>& truth, const std::vector<bool>& mask) {
    detail::require_same_size(lower.size(), upper.size(), truth.size(), "coverage_fraction");
    if (mask.size() != truth.size()) throw ShapeError("coverage_fraction: input lengths differ");
    std::size_t inside = 0, n = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (!mask[i]) continue;
        ++n;
        if (lower[i] <= truth[i] && truth[i] <= upper[i]) ++inside;
    }
    if (n == 0) return std::nullopt;
    return static_cast<double>(inside) / static_cast<double>(n);
}

/// Linear-interpolation quantile of a sample (the usual "type 7" definition).
inline double sample_quantile(std::vector<double> xs, double q) {
    if (xs.empty()) throw DegenerateError("sample_quantile of an empty sample");
    std::sort(xs.begin(), xs.end());
    double h = (static_cast<double>(xs.size()) - 1.0) * q;
    auto lo = static_cast<std::size_t>(std::floor(h));
    auto hi = std::min(lo + 1, xs.size() - 1);
    return xs[lo] + (h - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

struct CoverageBand {
    std::string subject;
    std::vector<double> lower, upper, truth;
    std::vector<bool> mask;
};

struct CoverageSummary {
    std::vector<std::string> subjects;
    std::vector<double> fractions; ///< one per subject with real points
    std::size_t excluded = 0;      ///< subjects without any real point
    double q1 = 0.0, median = 0.0, q3 = 0.0;
};

/// Per-subject coverage and its quartiles.
inline CoverageSummary coverage_distribution(const std::vector<CoverageBand>& bands) {
    CoverageSummary s;
    for (const auto& b : bands) {
        auto f = coverage_fraction(b.lower, b.upper, b.truth, b.mask);
        if (!f) {
            ++s.excluded;
            continue;
        }
        s.subjects.push_back(b.subject);
        s.fractions.push_back(*f);
    }
    if (!s.fractions.empty()) {
        s.q1 = sample_quantile(s.fractions, 0.25);
        s.median = sample_quantile(s.fractions, 0.5);
        s.q3 = sample_quantile(s.fractions, 0.75);
    }
    return s;
}

struct BlandAltman {
    double mean_diff = 0.0;
    double sd = 0.0;
    double loa_low = 0.0;
    double loa_high = 0.0;
    std::size_t n = 0;
    std::vector<double> means; ///< (pred + truth) / 2 per real point
    std::vector<double> diffs; ///< pred - truth per real point
};

/// Differences pred - truth at real points; limits are mean +/- 1.96 sample sd.
inline BlandAltman bland_altman(const std::vector<double>& pred, const std::vector<double>& truth,
                                const std::vector<bool>& mask) {
    detail::require_same_size(pred.size(), truth.size(), mask.size(), "bland_altman");
    BlandAltman r;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (!mask[i]) continue;
        r.diffs.push_back(pred[i] - truth[i]);
        r.means.push_back(0.5 * (pred[i] + truth[i]));
    }
    r.n = r.diffs.size();
    if (r.n < 2) throw DegenerateError("bland_altman needs at least 2 real points");
    double sum = 0.0;
    for (double d : r.diffs) sum += d;
    r.mean_diff = sum / static_cast<double>(r.n);
    double ss = 0.0;
    for (double d : r.diffs) ss += (d - r.mean_diff) * (d - r.mean_diff);
    r.sd = std::sqrt(ss / static_cast<double>(r.n - 1));
    r.loa_low = r.mean_diff - 1.96 * r.sd;
    r.loa_high = r.mean_diff + 1.96 * r.sd;
    return r;
}

struct TTestResult {
    double statistic = 0.0;
    double p_value = 1.0;
    double df = 0.0;
    double mean_diff = 0.0;
    std::size_t n = 0;
};

/// Two-sided p-value of a Student t statistic.
inline double t_two_sided_p(double t, double df) {
    boost::math::students_t dist(df);
    return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

/// Paired two-sided t-test of mean(a - b) = 0.
inline TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw ShapeError("paired_t_test: lengths differ");
    if (a.size() < 2) throw DegenerateError("paired_t_test needs at least 2 pairs");
    TTestResult r;
    r.n = a.size();
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] - b[i];
    r.mean_diff = sum / static_cast<double>(r.n);
    double ss = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i] - r.mean_diff;
        ss += d * d;
    }
    double var = ss / static_cast<double>(r.n - 1);
    // relative threshold: differences that agree to rounding count as constant
    double scale = std::max(1.0, std::abs(r.mean_diff));
    if (!(var > 1e-24 * scale * scale)) throw DegenerateError("paired_t_test: differences have zero variance");
    r.df = static_cast<double>(r.n - 1);
    r.statistic = r.mean_diff / std::sqrt(var / static_cast<double>(r.n));
    r.p_value = t_two_sided_p(r.statistic, r.df);
    return r;
}

/// Fraction of cells where consecutive quantiles are strictly inverted.
/// `cells[i]` holds the quantile predictions of one (variable, step) cell in ascending-q order.
inline double crossing_rate(const std::vector<std::vector<double>>& cells) {
    if (cells.empty()) return 0.0;
    std::size_t crossed = 0;
    for (const auto& c : cells)
        for (std::size_t q = 1; q < c.size(); ++q)
            if (c[q - 1] > c[q]) {
                ++crossed;
                break;
            }
    return static_cast<double>(crossed) / static_cast<double>(cells.size());
}

/// One line of a prediction file: a (subject, variable, step) cell.
struct PredictionRow {
    std::string subject;
    std::string variable;
    int step = 0;
    double truth = 0.0;
    bool mask = false;
    std::vector<double> quantiles; ///< ascending q
};

struct VariableMetrics {
    std::optional<double> mae;
    MapeResult mape;
    std::size_t real_count = 0;
    std::optional<BlandAltman> bland_altman;
    CoverageSummary coverage; ///< per subject, this variable only
};

/// Everything `evaluate` reports. Lower/upper are the outermost quantiles, the median the middle one.
struct EvalReport {
    std::vector<std::string> variables;
    std::map<std::string, VariableMetrics> per_variable;
    CoverageSummary coverage; ///< per subject, pooled over variables
    double crossing_rate = 0.0;
    std::size_t subjects = 0;
    std::size_t cells = 0;

    nlohmann::json to_json() const {
        auto opt = [](const std::optional<double>& x) { return x ? nlohmann::json(*x) : nlohmann::json(nullptr); };
        auto cov = [](const CoverageSummary& c) {
            return nlohmann::json{{"q1", c.q1}, {"median", c.median}, {"q3", c.q3},
                                  {"subjects", c.fractions.size()}, {"excluded", c.excluded}};
        };
        nlohmann::json vars = nlohmann::json::object();
        for (const auto& name : variables) {
            const auto& m = per_variable.at(name);
            nlohmann::json j{{"mae", opt(m.mae)},
                             {"mape_percent", opt(m.mape.percent)},
                             {"mape_excluded_zero_truth", m.mape.excluded_zero_truth},
                             {"real_count", m.real_count},
                             {"coverage", cov(m.coverage)}};
            if (m.bland_altman)
                j["bland_altman"] = {{"mean_diff", m.bland_altman->mean_diff},
                                     {"sd", m.bland_altman->sd},
                                     {"loa_low", m.bland_altman->loa_low},
                                     {"loa_high", m.bland_altman->loa_high},
                                     {"n", m.bland_altman->n}};
            else
                j["bland_altman"] = nullptr;
            vars[name] = j;
        }
        return {{"variables", vars},        {"coverage", cov(coverage)}, {"crossing_rate", crossing_rate},
                {"subjects", subjects},     {"cells", cells}};
    }
};

/// Builds the report from prediction rows (any order; grouping keeps first-seen order).
inline EvalReport evaluate_rows(const std::vector<PredictionRow>& rows) {
    EvalReport rep;
    std::map<std::string, std::vector<const PredictionRow*>> by_var;
    std::vector<std::string> subject_order;
    std::map<std::string, CoverageBand> pooled;
    std::vector<std::vector<double>> cells;
    for (const auto& r : rows) {
        if (r.quantiles.empty()) throw FormatError("prediction row without quantile columns");
        if (!by_var.count(r.variable)) rep.variables.push_back(r.variable);
        by_var[r.variable].push_back(&r);
        if (!pooled.count(r.subject)) {
            subject_order.push_back(r.subject);
            pooled[r.subject].subject = r.subject;
        }
        auto& band = pooled[r.subject];
        band.lower.push_back(r.quantiles.front());
        band.upper.push_back(r.quantiles.back());
        band.truth.push_back(r.truth);
        band.mask.push_back(r.mask);
        cells.push_back(r.quantiles);
    }
    for (const auto& name : rep.variables) {
        std::vector<double> med, truth;
        std::vector<bool> mask;
        std::vector<std::string> subj_order;
        std::map<std::string, CoverageBand> bands;
        for (const auto* r : by_var[name]) {
            med.push_back(r->quantiles[r->quantiles.size() / 2]);
            truth.push_back(r->truth);
            mask.push_back(r->mask);
            if (!bands.count(r->subject)) {
                subj_order.push_back(r->subject);
                bands[r->subject].subject = r->subject;
            }
            auto& b = bands[r->subject];
            b.lower.push_back(r->quantiles.front());
            b.upper.push_back(r->quantiles.back());
            b.truth.push_back(r->truth);
            b.mask.push_back(r->mask);
        }
        VariableMetrics m;
        m.mae = masked_mae(med, truth, mask);
        m.mape = masked_mape(med, truth, mask);
        m.real_count = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
        if (m.real_count >= 2) m.bland_altman = bland_altman(med, truth, mask);
        std::vector<CoverageBand> ordered;
        for (const auto& s : subj_order) ordered.push_back(bands[s]);
        m.coverage = coverage_distribution(ordered);
        rep.per_variable[name] = std::move(m);
    }
    std::vector<CoverageBand> ordered;
    for (const auto& s : subject_order) ordered.push_back(pooled[s]);
    rep.coverage = coverage_distribution(ordered);
    rep.crossing_rate = crossing_rate(cells);
    rep.subjects = subject_order.size();
    rep.cells = rows.size();
    return rep;
}

} // namespace tftm
