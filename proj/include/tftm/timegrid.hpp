#pragma once

// Irregular clinical events -> fixed-width bins with provenance masks,
// windowing, cohort split and z-score normalisation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "tftm/common.hpp"
#include "tftm/config.hpp"

namespace tftm {

enum class VariableKind { Continuous, Binary };
enum class VariableRole { Static, Observed, KnownFuture, Target };

inline const char* to_string(VariableKind k) { return k == VariableKind::Continuous ? "continuous" : "binary"; }

inline const char* to_string(VariableRole r) {
    switch (r) {
    case VariableRole::Static: return "static";
    case VariableRole::Observed: return "observed";
    case VariableRole::KnownFuture: return "known_future";
    case VariableRole::Target: return "target";
    }
    return "?";
}

struct VariableSpec {
    std::string name;
    VariableKind kind = VariableKind::Continuous;
    VariableRole role = VariableRole::Observed;
};

/// Declared feature set. Targets are implicitly past-observed as well.
class VariableSchema {
public:
    VariableSchema() = default;
    explicit VariableSchema(std::vector<VariableSpec> vars) : vars_(std::move(vars)) { validate(); }

    /// Reads the [schema] section: `name = <continuous|binary> <static|observed|known_future|target>`.
    static VariableSchema from_config(const Config& cfg) {
        const ConfigSection* sec = cfg.section("schema");
        if (!sec) throw ConfigError(cfg.origin() + ": missing [schema] section");
        std::vector<VariableSpec> vars;
        for (const auto& e : sec->entries) {
            auto toks = detail::split_ws(e.value);
            if (toks.size() != 2)
                throw ConfigError(cfg.where(e.line) + ": schema entry '" + e.key + "' expects '<kind> <role>'");
            VariableSpec v{e.key, {}, {}};
            if (toks[0] == "continuous") v.kind = VariableKind::Continuous;
            else if (toks[0] == "binary" || toks[0] == "categorical") v.kind = VariableKind::Binary;
            else throw ConfigError(cfg.where(e.line) + ": unknown variable kind '" + toks[0] + "'");
            if (toks[1] == "static") v.role = VariableRole::Static;
            else if (toks[1] == "observed") v.role = VariableRole::Observed;
            else if (toks[1] == "known_future") v.role = VariableRole::KnownFuture;
            else if (toks[1] == "target") v.role = VariableRole::Target;
            else throw ConfigError(cfg.where(e.line) + ": unknown variable role '" + toks[1] + "'");
            vars.push_back(v);
        }
        try {
            return VariableSchema(std::move(vars));
        } catch (const SchemaError& err) {
            throw ConfigError(cfg.where(sec->line) + ": " + err.what());
        }
    }

    const std::vector<VariableSpec>& variables() const { return vars_; }

    const VariableSpec* find(const std::string& name) const {
        for (const auto& v : vars_)
            if (v.name == name) return &v;
        return nullptr;
    }

    const VariableSpec& at(const std::string& name) const {
        if (auto* v = find(name)) return *v;
        throw SchemaError("unknown variable '" + name + "'");
    }

    std::vector<std::string> names_with(VariableRole role) const {
        std::vector<std::string> out;
        for (const auto& v : vars_)
            if (v.role == role) out.push_back(v.name);
        return out;
    }

    std::vector<std::string> statics() const { return names_with(VariableRole::Static); }
    std::vector<std::string> targets() const { return names_with(VariableRole::Target); }
    std::vector<std::string> observed() const { return names_with(VariableRole::Observed); }
    std::vector<std::string> known_future() const { return names_with(VariableRole::KnownFuture); }

    /// Inputs seen at past positions: targets, then observed covariates, then known-future covariates.
    std::vector<std::string> past_inputs() const {
        auto out = targets();
        for (auto& n : observed()) out.push_back(n);
        for (auto& n : known_future()) out.push_back(n);
        return out;
    }

    /// Every non-static variable, in declaration order.
    std::vector<std::string> temporal() const {
        std::vector<std::string> out;
        for (const auto& v : vars_)
            if (v.role != VariableRole::Static) out.push_back(v.name);
        return out;
    }

    bool is_binary(const std::string& name) const { return at(name).kind == VariableKind::Binary; }

    /// Copy keeping `keep` as the only target; other targets are removed entirely.
    VariableSchema with_single_target(const std::string& keep) const {
        std::vector<VariableSpec> vars;
        for (const auto& v : vars_) {
            if (v.role == VariableRole::Target && v.name != keep) continue;
            vars.push_back(v);
        }
        return VariableSchema(std::move(vars));
    }

    /// Copy with `name` moved to a new role.
    VariableSchema with_role(const std::string& name, VariableRole role) const {
        auto vars = vars_;
        bool found = false;
        for (auto& v : vars)
            if (v.name == name) {
                v.role = role;
                found = true;
            }
        if (!found) throw SchemaError("unknown variable '" + name + "'");
        return VariableSchema(std::move(vars));
    }

private:
    void validate() const {
        if (vars_.empty()) throw SchemaError("schema declares no variables");
        for (std::size_t i = 0; i < vars_.size(); ++i) {
            if (vars_[i].name.empty()) throw SchemaError("empty variable name");
            for (std::size_t j = 0; j < i; ++j)
                if (vars_[i].name == vars_[j].name) throw SchemaError("duplicate variable '" + vars_[i].name + "'");
        }
        bool any_target = false;
        for (const auto& v : vars_) {
            if (v.role == VariableRole::Target) {
                any_target = true;
                if (v.kind != VariableKind::Continuous)
                    throw SchemaError("target '" + v.name + "' must be continuous");
            }
        }
        if (!any_target) throw SchemaError("schema declares no target variable");
    }

    std::vector<VariableSpec> vars_;
};

struct RawEvent {
    std::string encounter_id;
    std::string variable;
    double timestamp = 0.0; ///< minutes since encounter start
    double value = 0.0;
};

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

/// Values on a regular grid plus the "was actually recorded" indicator.
/// Missing bins hold NaN until forward_fill runs.
struct MaskedSeries {
    std::vector<double> values;
    std::vector<bool> is_real;

    MaskedSeries() = default;
    explicit MaskedSeries(std::size_t n) : values(n, kMissing), is_real(n, false) {}
    MaskedSeries(std::vector<double> v, std::vector<bool> r) : values(std::move(v)), is_real(std::move(r)) {
        if (values.size() != is_real.size()) throw ShapeError("MaskedSeries: values/is_real length mismatch");
    }

    std::size_t size() const { return values.size(); }

    std::size_t real_count() const { return static_cast<std::size_t>(std::count(is_real.begin(), is_real.end(), true)); }

    MaskedSeries slice(std::size_t begin, std::size_t n) const {
        return MaskedSeries({values.begin() + begin, values.begin() + begin + n},
                            {is_real.begin() + begin, is_real.begin() + begin + n});
    }

    bool operator==(const MaskedSeries& o) const {
        if (is_real != o.is_real || values.size() != o.values.size()) return false;
        for (std::size_t i = 0; i < values.size(); ++i) {
            bool a = std::isnan(values[i]), b = std::isnan(o.values[i]);
            if (a != b || (!a && values[i] != o.values[i])) return false;
        }
        return true;
    }
};

using SeriesMap = std::map<std::string, MaskedSeries>;

/**
 * @brief Bin the events of one encounter onto a grid of `bin_minutes`.
 *
 * The grid is anchored at the earliest event; bin k covers [k*bin, (k+1)*bin).
 * Continuous bins hold the arithmetic mean, binary/categorical bins the median
 * code (upper middle for even counts). Every temporal schema variable gets a
 * series; bins without events are NaN with is_real=false.
 *
 * `n_bins` forces the grid length (events beyond it are ignored).
 */
inline SeriesMap resample(std::vector<RawEvent> events, const VariableSchema& schema, int bin_minutes = 15,
                          std::optional<std::size_t> n_bins = {}) {
    if (bin_minutes <= 0) throw ConfigError("bin_minutes must be positive");
    for (const auto& e : events) {
        const VariableSpec* spec = schema.find(e.variable);
        if (!spec) throw SchemaError("event for unknown variable '" + e.variable + "'");
        if (spec->role == VariableRole::Static)
            throw SchemaError("static variable '" + e.variable + "' cannot appear as a timed event");
        if (!std::isfinite(e.value) || !std::isfinite(e.timestamp))
            throw SchemaError("rejected event: non-finite value for '" + e.variable + "' in encounter '" + e.encounter_id + "'");
        if (e.timestamp < 0)
            throw SchemaError("rejected event: negative timestamp for '" + e.variable + "'");
    }
    std::stable_sort(events.begin(), events.end(),
                     [](const RawEvent& a, const RawEvent& b) { return a.timestamp < b.timestamp; });

    double anchor = events.empty() ? 0.0 : events.front().timestamp;
    std::size_t bins = 0;
    if (n_bins) bins = *n_bins;
    else if (!events.empty())
        bins = static_cast<std::size_t>(std::floor((events.back().timestamp - anchor) / bin_minutes)) + 1;

    SeriesMap out;
    std::map<std::string, std::vector<std::vector<double>>> buckets;
    for (const auto& name : schema.temporal()) {
        out.emplace(name, MaskedSeries(bins));
        buckets[name].resize(bins);
    }
    for (const auto& e : events) {
        auto k = static_cast<std::size_t>(std::floor((e.timestamp - anchor) / bin_minutes));
        if (k >= bins) continue;
        buckets[e.variable][k].push_back(e.value);
    }
    for (auto& [name, per_bin] : buckets) {
        bool binary = schema.is_binary(name);
        MaskedSeries& s = out[name];
        for (std::size_t k = 0; k < bins; ++k) {
            auto& xs = per_bin[k];
            if (xs.empty()) continue;
            if (binary) {
                std::sort(xs.begin(), xs.end());
                s.values[k] = xs[xs.size() / 2];
            } else {
                double sum = 0.0;
                for (double x : xs) sum += x;
                s.values[k] = sum / static_cast<double>(xs.size());
            }
            s.is_real[k] = true;
        }
    }
    return out;
}

/// Missing bins take the latest real value; leading missing bins take `fallback`.
inline MaskedSeries forward_fill(const MaskedSeries& series, double fallback) {
    MaskedSeries out = series;
    double last = fallback;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (out.is_real[i] && std::isfinite(out.values[i])) last = out.values[i];
        else out.values[i] = last;
    }
    return out;
}

/// One encounter after resampling. Missing statics are NaN.
struct EncounterGrid {
    std::string encounter_id;
    std::map<std::string, double> statics;
    SeriesMap series;

    std::size_t bins() const { return series.empty() ? 0 : series.begin()->second.size(); }
};

struct WindowSample {
    std::string encounter_id;
    std::map<std::string, double> statics;
    SeriesMap past;                                          ///< every past input, length P
    std::map<std::string, std::vector<double>> future_known; ///< length H
    SeriesMap targets_future;                                ///< length H

    std::size_t past_len() const { return past.empty() ? 0 : past.begin()->second.size(); }
    std::size_t horizon() const { return targets_future.empty() ? 0 : targets_future.begin()->second.size(); }
};

struct WindowBuildResult {
    std::vector<WindowSample> windows;
    std::size_t dropped_short = 0;          ///< fewer than P+H bins
    std::size_t dropped_missing_static = 0; ///< a numeric static was missing
    std::vector<std::string> dropped_ids;
};

/// One window per encounter from its first P+H bins.
inline WindowBuildResult build_windows(const std::vector<EncounterGrid>& encounters, const VariableSchema& schema,
                                       std::size_t past_bins, std::size_t horizon) {
    if (past_bins == 0 || horizon == 0) throw ConfigError("past and horizon lengths must be positive");
    WindowBuildResult res;
    const auto statics = schema.statics();
    const auto past_names = schema.past_inputs();
    const auto known = schema.known_future();
    const auto targets = schema.targets();
    for (const auto& enc : encounters) {
        if (enc.bins() < past_bins + horizon) {
            ++res.dropped_short;
            res.dropped_ids.push_back(enc.encounter_id);
            continue;
        }
        WindowSample w;
        w.encounter_id = enc.encounter_id;
        bool drop = false;
        for (const auto& name : statics) {
            auto it = enc.statics.find(name);
            double v = it == enc.statics.end() ? kMissing : it->second;
            if (!std::isfinite(v)) {
                if (schema.is_binary(name)) v = 0.0;
                else {
                    drop = true;
                    break;
                }
            }
            w.statics[name] = v;
        }
        if (drop) {
            ++res.dropped_missing_static;
            res.dropped_ids.push_back(enc.encounter_id);
            continue;
        }
        auto series_of = [&](const std::string& name) -> const MaskedSeries& {
            auto it = enc.series.find(name);
            if (it == enc.series.end()) throw SchemaError("encounter '" + enc.encounter_id + "' lacks series '" + name + "'");
            return it->second;
        };
        for (const auto& name : past_names) w.past[name] = series_of(name).slice(0, past_bins);
        for (const auto& name : known) w.future_known[name] = series_of(name).slice(past_bins, horizon).values;
        for (const auto& name : targets) w.targets_future[name] = series_of(name).slice(past_bins, horizon);
        res.windows.push_back(std::move(w));
    }
    return res;
}

namespace detail {

// splitmix64; used for seeded shuffles so partitions do not depend on the
// standard library's distribution implementations.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::uint64_t state = seed;
    for (std::size_t i = n; i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(splitmix64(state) % i);
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

} // namespace detail

/**
 * Random split by encounter. |train| = round(ratio*N), clamped so both sides
 * keep at least one window. Order within each side follows the input order.
 */
template <class Item>
std::pair<std::vector<Item>, std::vector<Item>> split_cohort(const std::vector<Item>& items, double ratio,
                                                             std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("split ratio must be in (0, 1)");
    const std::size_t n = items.size();
    if (n < 2) throw ConfigError("split_cohort needs at least 2 encounters");
    auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
    n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
    auto perm = detail::seeded_permutation(n, seed);
    std::vector<bool> in_train(n, false);
    for (std::size_t i = 0; i < n_train; ++i) in_train[perm[i]] = true;
    std::pair<std::vector<Item>, std::vector<Item>> out;
    for (std::size_t i = 0; i < n; ++i) (in_train[i] ? out.first : out.second).push_back(items[i]);
    return out;
}

/// Value used before the first real observation of each temporal variable:
/// the training median of real values, or 0 for binary channels (missing
/// medication means "not given").
inline std::map<std::string, double> fit_fallbacks(const std::vector<WindowSample>& train, const VariableSchema& schema) {
    std::map<std::string, double> out;
    for (const auto& name : schema.temporal()) {
        if (schema.is_binary(name)) {
            out[name] = 0.0;
            continue;
        }
        std::vector<double> xs;
        for (const auto& w : train) {
            if (auto it = w.past.find(name); it != w.past.end())
                for (std::size_t i = 0; i < it->second.size(); ++i)
                    if (it->second.is_real[i]) xs.push_back(it->second.values[i]);
            if (auto it = w.targets_future.find(name); it != w.targets_future.end())
                for (std::size_t i = 0; i < it->second.size(); ++i)
                    if (it->second.is_real[i]) xs.push_back(it->second.values[i]);
        }
        if (xs.empty()) {
            out[name] = 0.0;
            continue;
        }
        std::sort(xs.begin(), xs.end());
        std::size_t m = xs.size() / 2;
        out[name] = xs.size() % 2 ? xs[m] : 0.5 * (xs[m - 1] + xs[m]);
    }
    return out;
}

/// Forward-fills every temporal channel of a window across the past/future boundary.
inline WindowSample fill_window(const WindowSample& w, const std::map<std::string, double>& fallbacks) {
    WindowSample out = w;
    auto fallback_of = [&](const std::string& name) {
        auto it = fallbacks.find(name);
        return it == fallbacks.end() ? 0.0 : it->second;
    };
    for (auto& [name, past] : out.past) {
        past = forward_fill(past, fallback_of(name));
        double carry = past.size() ? past.values.back() : fallback_of(name);
        if (auto it = out.targets_future.find(name); it != out.targets_future.end())
            it->second = forward_fill(it->second, carry);
        if (auto it = out.future_known.find(name); it != out.future_known.end()) {
            for (double& x : it->second) {
                if (std::isfinite(x)) carry = x;
                else x = carry;
            }
        }
    }
    return out;
}

struct NormStat {
    double mean = 0.0;
    double std = 1.0;
};

/// z-score statistics for continuous variables. Binary variables are left as is.
struct NormStats {
    std::map<std::string, NormStat> stats;

    bool has(const std::string& name) const { return stats.count(name) != 0; }

    double apply(const std::string& name, double x) const {
        auto it = stats.find(name);
        return it == stats.end() ? x : (x - it->second.mean) / it->second.std;
    }

    double invert(const std::string& name, double z) const {
        auto it = stats.find(name);
        return it == stats.end() ? z : z * it->second.std + it->second.mean;
    }

    /// Inverse for a scale-only quantity (differences, MAE).
    double invert_scale(const std::string& name, double z) const {
        auto it = stats.find(name);
        return it == stats.end() ? z : z * it->second.std;
    }
};

inline constexpr double kMinStd = 1e-8;

/// Mean and sample standard deviation over real bins (temporal) or all
/// windows (statics) of the training set.
inline NormStats fit_normalizer(const std::vector<WindowSample>& train, const VariableSchema& schema) {
    if (train.empty()) throw ConfigError("fit_normalizer needs a non-empty training set");
    NormStats ns;
    for (const auto& spec : schema.variables()) {
        if (spec.kind != VariableKind::Continuous) continue;
        std::vector<double> xs;
        for (const auto& w : train) {
            if (spec.role == VariableRole::Static) {
                if (auto it = w.statics.find(spec.name); it != w.statics.end() && std::isfinite(it->second))
                    xs.push_back(it->second);
                continue;
            }
            if (auto it = w.past.find(spec.name); it != w.past.end())
                for (std::size_t i = 0; i < it->second.size(); ++i)
                    if (it->second.is_real[i]) xs.push_back(it->second.values[i]);
            if (auto it = w.targets_future.find(spec.name); it != w.targets_future.end())
                for (std::size_t i = 0; i < it->second.size(); ++i)
                    if (it->second.is_real[i]) xs.push_back(it->second.values[i]);
        }
        NormStat st;
        if (!xs.empty()) {
            double sum = 0.0;
            for (double x : xs) sum += x;
            st.mean = sum / static_cast<double>(xs.size());
            double ss = 0.0;
            for (double x : xs) ss += (x - st.mean) * (x - st.mean);
            st.std = xs.size() > 1 ? std::sqrt(ss / static_cast<double>(xs.size() - 1)) : 0.0;
        }
        if (!(st.std >= kMinStd)) st.std = 1.0;
        ns.stats[spec.name] = st;
    }
    return ns;
}

namespace detail {

template <class F>
WindowSample map_window(const WindowSample& w, F&& f) {
    WindowSample out = w;
    for (auto& [name, v] : out.statics) v = f(name, v);
    for (auto& [name, s] : out.past)
        for (double& v : s.values) v = f(name, v);
    for (auto& [name, xs] : out.future_known)
        for (double& v : xs) v = f(name, v);
    for (auto& [name, s] : out.targets_future)
        for (double& v : s.values) v = f(name, v);
    return out;
}

} // namespace detail

inline WindowSample apply_normalizer(const WindowSample& w, const NormStats& ns) {
    return detail::map_window(w, [&](const std::string& n, double v) { return ns.apply(n, v); });
}

inline WindowSample invert_normalizer(const WindowSample& w, const NormStats& ns) {
    return detail::map_window(w, [&](const std::string& n, double v) { return ns.invert(n, v); });
}

} // namespace tftm
