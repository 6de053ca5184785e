#pragma once

// Dataset-level feature importance from variable-selection weights, plus the
// mean attention profile over sequence positions.

#include <algorithm>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tftm/model.hpp"

namespace tftm {

enum class ImportanceScope { Static, Temporal, Future };

inline const char* to_string(ImportanceScope s) {
    switch (s) {
    case ImportanceScope::Static: return "static";
    case ImportanceScope::Temporal: return "temporal";
    case ImportanceScope::Future: return "future";
    }
    return "?";
}

struct ImportanceEntry {
    std::string feature;
    double weight = 0.0;
};

/// Features ranked by mean selection weight (descending; ties keep input order).
struct ImportanceTable {
    ImportanceScope scope = ImportanceScope::Temporal;
    std::vector<ImportanceEntry> ranked;
    std::size_t samples = 0;

    double weight_of(const std::string& name) const {
        for (const auto& e : ranked)
            if (e.feature == name) return e.weight;
        throw SchemaError("no feature '" + name + "' in importance table");
    }

    nlohmann::json to_json() const {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& e : ranked) arr.push_back({{"feature", e.feature}, {"weight", e.weight}});
        return {{"scope", to_string(scope)}, {"samples", samples}, {"ranked", arr}};
    }

    std::string to_csv() const {
        std::string out = "feature,weight\n";
        for (const auto& e : ranked) out += e.feature + "," + std::to_string(e.weight) + "\n";
        return out;
    }
};

/**
 * @brief Arithmetic mean of the selection weights per feature, over all
 * forecasts and (for temporal scopes) all their time steps.
 *
 * Static uses the static selection, Temporal the past-input selection and
 * Future the known-future selection. Returns an empty table when the scope has
 * no features.
 */
inline ImportanceTable aggregate_importance(const std::vector<ForecastSet>& forecasts, const ModelConfig& cfg,
                                            ImportanceScope scope) {
    if (forecasts.empty()) throw ConfigError("aggregate_importance needs at least one forecast");
    const std::vector<std::string>* names = &cfg.static_inputs;
    if (scope == ImportanceScope::Temporal) names = &cfg.past_inputs;
    if (scope == ImportanceScope::Future) names = &cfg.future_inputs;
    ImportanceTable table;
    table.scope = scope;
    table.samples = forecasts.size();
    const std::size_t n = names->size();
    if (n == 0) return table;
    std::vector<double> sums(n, 0.0);
    double rows = 0.0;
    for (const auto& f : forecasts) {
        const std::vector<double>& w = scope == ImportanceScope::Static     ? f.static_weights
                                       : scope == ImportanceScope::Temporal ? f.past_weights
                                                                            : f.future_weights;
        if (w.size() % n != 0 || w.empty()) throw ShapeError("aggregate_importance: weight count does not match the feature count");
        for (std::size_t r = 0; r < w.size() / n; ++r) {
            for (std::size_t j = 0; j < n; ++j) sums[j] += w[r * n + j];
            rows += 1.0;
        }
    }
    for (std::size_t j = 0; j < n; ++j) table.ranked.push_back({(*names)[j], sums[j] / rows});
    std::stable_sort(table.ranked.begin(), table.ranked.end(),
                     [](const ImportanceEntry& a, const ImportanceEntry& b) { return a.weight > b.weight; });
    return table;
}

/// Mean attention weight per key position (0 .. P+H-1), averaged over forecasts and query steps.
inline std::vector<double> attention_profile(const std::vector<ForecastSet>& forecasts, const ModelConfig& cfg) {
    const auto S = static_cast<std::size_t>(cfg.sequence_len()), H = static_cast<std::size_t>(cfg.horizon);
    std::vector<double> prof(S, 0.0);
    if (forecasts.empty()) return prof;
    for (const auto& f : forecasts) {
        if (f.attention.size() != H * S) throw ShapeError("attention_profile: unexpected attention shape");
        for (std::size_t i = 0; i < H; ++i)
            for (std::size_t j = 0; j < S; ++j) prof[j] += f.attention[i * S + j];
    }
    for (double& x : prof) x /= static_cast<double>(forecasts.size() * H);
    return prof;
}

} // namespace tftm
