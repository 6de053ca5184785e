#pragma once

// What-if forecasting under alternative future treatment schedules.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "tftm/metrics.hpp"
#include "tftm/model.hpp"

namespace tftm {

/// A future schedule for the treatment channel. Names: truth, all_ones, all_zeros, custom.
struct ScenarioSpec {
    std::string name;
    std::vector<double> schedule;

    static ScenarioSpec all_ones(std::size_t horizon) { return {"all_ones", std::vector<double>(horizon, 1.0)}; }
    static ScenarioSpec all_zeros(std::size_t horizon) { return {"all_zeros", std::vector<double>(horizon, 0.0)}; }
    static ScenarioSpec custom(std::vector<double> s, std::string name = "custom") { return {std::move(name), std::move(s)}; }

    /// The schedule observed in the window; unrecorded bins count as "not given".
    static ScenarioSpec truth(const WindowSample& w, const std::string& channel) {
        auto it = w.future_known.find(channel);
        if (it == w.future_known.end()) throw ConfigError("window '" + w.encounter_id + "' has no known-future '" + channel + "'");
        ScenarioSpec s{"truth", it->second};
        for (double& x : s.schedule)
            if (!std::isfinite(x)) x = 0.0;
        return s;
    }

    void validate(std::size_t horizon) const {
        if (schedule.size() != horizon)
            throw SchemaError("scenario '" + name + "': schedule has " + std::to_string(schedule.size()) +
                              " entries, expected " + std::to_string(horizon));
        for (double x : schedule)
            if (x != 0.0 && x != 1.0) throw SchemaError("scenario '" + name + "': schedule entries must be 0 or 1");
    }
};

struct ScenarioResult {
    std::string encounter_id;
    std::vector<ScenarioSpec> specs;
    std::vector<ForecastSet> forecasts;        ///< one per spec
    std::vector<std::optional<double>> target_mae; ///< masked MAE of the target's median, one per spec
    std::vector<double> observed_schedule;     ///< truth schedule (for conditioned contrasts)
    std::vector<EncodedWindow> inputs;         ///< the encoded network inputs, one per spec

    const ForecastSet& forecast(const std::string& name) const {
        for (std::size_t i = 0; i < specs.size(); ++i)
            if (specs[i].name == name) return forecasts[i];
        throw ConfigError("no scenario named '" + name + "'");
    }
};

/**
 * @brief One eval-mode forward pass per scenario, differing only in the
 * future values of `channel`.
 *
 * The model must carry `channel` as a known-future input (ConfigError
 * otherwise). Encoded past inputs are asserted identical across scenarios.
 */
template <class T>
ScenarioResult forecast_scenarios(const TrainedModel<T>& model, const WindowSample& window,
                                  const std::vector<ScenarioSpec>& specs, const std::string& channel,
                                  const std::string& target) {
    if (!model.config.has_future_input(channel))
        throw ConfigError("model was not trained with '" + channel + "' as a known-future input");
    const auto H = static_cast<std::size_t>(model.config.horizon);
    const auto v = std::find(model.config.targets.begin(), model.config.targets.end(), target);
    if (v == model.config.targets.end()) throw ConfigError("model has no target '" + target + "'");
    ScenarioResult res;
    res.encounter_id = window.encounter_id;
    res.specs = specs;
    res.observed_schedule = ScenarioSpec::truth(window, channel).schedule;
    for (const auto& s : specs) {
        s.validate(H);
        WindowSample w = window;
        w.future_known[channel] = s.schedule;
        res.inputs.push_back(model.encode(w));
    }
    for (std::size_t i = 1; i < res.inputs.size(); ++i)
        if (res.inputs[i].past != res.inputs[0].past || res.inputs[i].statics != res.inputs[0].statics)
            throw NumericError("scenarios", "past inputs differ between scenarios");
    res.forecasts = model.predict_encoded(res.inputs, 1);
    const auto vi = static_cast<std::size_t>(v - model.config.targets.begin());
    const auto& truth = window.targets_future.at(target);
    for (const auto& f : res.forecasts) {
        auto med = f.trajectory(vi, f.quantile_index(0.5));
        res.target_mae.push_back(masked_mae(med, truth.values, truth.is_real));
    }
    return res;
}

struct ContrastRow {
    std::string label;           ///< "all", "observed_on", "observed_off"
    std::size_t subjects = 0;
    std::optional<TTestResult> test; ///< absent when the stratum is too small or degenerate
    std::string note;
};

/**
 * @brief Paired t-tests of per-subject mean median-forecast of `target`
 * between the all_ones and all_zeros scenarios.
 *
 * Row "all" averages over the whole horizon; "observed_on"/"observed_off"
 * only over steps where the observed schedule is 1 (resp. 0), using the
 * subjects that have such steps.
 */
inline std::vector<ContrastRow> scenario_contrasts(const std::vector<ScenarioResult>& results, const std::string& target) {
    std::vector<ContrastRow> rows;
    for (int kind = 0; kind < 3; ++kind) {
        ContrastRow row;
        row.label = kind == 0 ? "all" : kind == 1 ? "observed_on" : "observed_off";
        std::vector<double> ones, zeros;
        for (const auto& r : results) {
            const auto& f1 = r.forecast("all_ones");
            const auto& f0 = r.forecast("all_zeros");
            const auto vi = f1.target_index(target);
            const auto qi = f1.quantile_index(0.5);
            double s1 = 0.0, s0 = 0.0;
            std::size_t n = 0;
            for (std::size_t t = 0; t < f1.horizon; ++t) {
                if (kind == 1 && r.observed_schedule[t] != 1.0) continue;
                if (kind == 2 && r.observed_schedule[t] != 0.0) continue;
                s1 += f1.at(vi, qi, t);
                s0 += f0.at(vi, qi, t);
                ++n;
            }
            if (n == 0) continue;
            ones.push_back(s1 / static_cast<double>(n));
            zeros.push_back(s0 / static_cast<double>(n));
        }
        row.subjects = ones.size();
        if (ones.size() < 2) {
            row.note = "fewer than 2 subjects in stratum";
        } else {
            try {
                row.test = paired_t_test(ones, zeros);
            } catch (const DegenerateError& e) {
                row.note = e.what();
            }
        }
        rows.push_back(row);
    }
    return rows;
}

} // namespace tftm
