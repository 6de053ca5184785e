#pragma once

// Request handling for the forecast service, independent of any HTTP library.
//
//   GET  /health      status, model fingerprint, library version
//   GET  /subjects    available windows with short summaries
//   GET  /importance  ranked selection weights per scope + attention profile
//   POST /forecast    scenario forecasts for a stored subject or an inline window
//
// Responses are JSON. Errors carry {"error": message} with status 400 (bad
// request), 404 (unknown subject or route), 405 (wrong method) or 409 (the
// model lacks the treatment channel as a known-future input).

#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tftm/importance.hpp"
#include "tftm/io.hpp"
#include "tftm/model.hpp"
#include "tftm/scenarios.hpp"

namespace tftm {

struct HttpResult {
    int status = 200;
    std::string body;
};

struct ServiceOptions {
    std::string channel = "pressor";
    std::string target = "map";
    int bin_minutes = 15;
    std::map<std::string, std::string> units{{"map", "mmHg"}, {"pulse", "beats/min"}, {"spo2", "%"},
                                             {"resp", "breaths/min"}, {"temp", "degC"}};
};

namespace detail {

inline nlohmann::json nullable(const std::vector<double>& xs) {
    nlohmann::json a = nlohmann::json::array();
    for (double x : xs) a.push_back(std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr));
    return a;
}

inline nlohmann::json bools(const std::vector<bool>& xs) {
    nlohmann::json a = nlohmann::json::array();
    for (bool x : xs) a.push_back(x);
    return a;
}

struct BadRequest : Error {
    using Error::Error;
};

inline std::vector<double> numbers_of(const nlohmann::json& arr, const std::string& what) {
    if (!arr.is_array()) throw BadRequest(what + " must be an array");
    std::vector<double> out;
    for (const auto& x : arr) {
        if (x.is_null()) out.push_back(kMissing);
        else if (x.is_number()) out.push_back(x.get<double>());
        else throw BadRequest(what + " must contain numbers or null");
    }
    return out;
}

inline MaskedSeries series_of(const nlohmann::json& j, const std::string& what) {
    if (!j.is_object() || !j.contains("values")) throw BadRequest(what + " needs a 'values' array");
    auto values = numbers_of(j.at("values"), what + ".values");
    std::vector<bool> real(values.size());
    if (j.contains("is_real")) {
        const auto& r = j.at("is_real");
        if (!r.is_array() || r.size() != values.size()) throw BadRequest(what + ".is_real must match values in length");
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (!r[i].is_boolean()) throw BadRequest(what + ".is_real must contain booleans");
            real[i] = r[i].get<bool>();
        }
    } else {
        for (std::size_t i = 0; i < values.size(); ++i) real[i] = std::isfinite(values[i]);
    }
    for (std::size_t i = 0; i < values.size(); ++i)
        if (real[i] && !std::isfinite(values[i])) throw BadRequest(what + ": a real entry has no value");
    return MaskedSeries(std::move(values), std::move(real));
}

} // namespace detail

/// Stateless request handler over one read-only model.
class ForecastService {
public:
    ForecastService(TrainedModel<float> model, std::vector<WindowSample> subjects, ServiceOptions opts = {})
        : model_(std::move(model)), subjects_(std::move(subjects)), opts_(std::move(opts)) {
        for (std::size_t i = 0; i < subjects_.size(); ++i) index_[subjects_[i].encounter_id] = i;
        if (!subjects_.empty()) {
            auto fc = model_.predict(subjects_);
            nlohmann::json imp = nlohmann::json::object();
            for (auto scope : {ImportanceScope::Static, ImportanceScope::Temporal, ImportanceScope::Future})
                imp[to_string(scope)] = aggregate_importance(fc, model_.config, scope).to_json();
            imp["attention_profile"] = attention_profile(fc, model_.config);
            importance_ = imp;
        } else {
            importance_ = {{"error", "no subjects loaded"}};
        }
    }

    const TrainedModel<float>& model() const { return model_; }

    HttpResult handle(const std::string& method, const std::string& path, const std::string& body = {}) const {
        try {
            if (path == "/health") return method == "GET" ? ok(health()) : not_allowed();
            if (path == "/subjects") return method == "GET" ? ok(subjects()) : not_allowed();
            if (path == "/importance") return method == "GET" ? ok(importance_) : not_allowed();
            if (path == "/forecast") return method == "POST" ? forecast(body) : not_allowed();
            return error(404, "unknown route '" + path + "'");
        } catch (const detail::BadRequest& e) {
            return error(400, e.what());
        } catch (const SchemaError& e) {
            return error(400, e.what());
        } catch (const ShapeError& e) {
            return error(400, e.what());
        } catch (const nlohmann::json::exception& e) {
            return error(400, std::string("malformed JSON: ") + e.what());
        } catch (const std::exception& e) {
            return error(500, e.what());
        }
    }

private:
    static HttpResult ok(const nlohmann::json& j) { return {200, j.dump()}; }
    static HttpResult error(int status, const std::string& msg) { return {status, nlohmann::json{{"error", msg}}.dump()}; }
    static HttpResult not_allowed() { return error(405, "method not allowed"); }

    nlohmann::json health() const {
        return {{"status", "ok"},
                {"version", kVersion},
                {"fingerprint", model_.fingerprint()},
                {"horizon", model_.config.horizon},
                {"past_len", model_.config.past_len},
                {"targets", model_.config.targets},
                {"treatment_channel", opts_.channel},
                {"scenario_capable", model_.config.has_future_input(opts_.channel)},
                {"subjects", subjects_.size()}};
    }

    nlohmann::json subjects() const {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& w : subjects_) {
            nlohmann::json s{{"id", w.encounter_id}};
            nlohmann::json real = nlohmann::json::object();
            for (const auto& t : model_.config.targets)
                if (auto it = w.past.find(t); it != w.past.end()) real[t] = it->second.real_count();
            s["past_real_counts"] = real;
            if (auto it = w.past.find(opts_.target); it != w.past.end()) {
                double sum = 0.0;
                std::size_t n = 0;
                for (std::size_t i = 0; i < it->second.size(); ++i)
                    if (it->second.is_real[i]) {
                        sum += it->second.values[i];
                        ++n;
                    }
                s["past_target_mean"] = n ? nlohmann::json(sum / static_cast<double>(n)) : nlohmann::json(nullptr);
            }
            if (auto it = w.future_known.find(opts_.channel); it != w.future_known.end()) {
                double on = 0.0;
                for (double x : it->second) on += x == 1.0 ? 1.0 : 0.0;
                s["observed_treatment_bins"] = on;
            }
            arr.push_back(s);
        }
        return {{"subjects", arr}, {"target", opts_.target}, {"fingerprint", model_.fingerprint()}};
    }

    WindowSample inline_window(const nlohmann::json& j) const {
        if (!j.is_object()) throw detail::BadRequest("'window' must be an object");
        const auto P = static_cast<std::size_t>(model_.config.past_len), H = static_cast<std::size_t>(model_.config.horizon);
        WindowSample w;
        w.encounter_id = j.value("id", std::string("inline"));
        const auto statics = j.value("statics", nlohmann::json::object());
        for (const auto& name : model_.config.static_inputs) {
            if (!statics.contains(name) || !statics.at(name).is_number())
                throw detail::BadRequest("window.statics." + name + " is required");
            w.statics[name] = statics.at(name).get<double>();
        }
        const auto past = j.value("past", nlohmann::json::object());
        for (const auto& name : model_.config.past_inputs) {
            if (!past.contains(name)) throw detail::BadRequest("window.past." + name + " is required");
            auto s = detail::series_of(past.at(name), "window.past." + name);
            if (s.size() != P)
                throw detail::BadRequest("window.past." + name + " must have " + std::to_string(P) + " entries");
            w.past[name] = std::move(s);
        }
        const auto fut = j.value("future_known", nlohmann::json::object());
        for (const auto& name : model_.config.future_inputs) {
            std::vector<double> xs = fut.contains(name) ? detail::numbers_of(fut.at(name), "window.future_known." + name)
                                                        : std::vector<double>(H, kMissing);
            if (xs.size() != H)
                throw detail::BadRequest("window.future_known." + name + " must have " + std::to_string(H) + " entries");
            w.future_known[name] = std::move(xs);
        }
        const auto tf = j.value("targets_future", nlohmann::json::object());
        for (const auto& name : model_.config.targets) {
            MaskedSeries s = tf.contains(name) ? detail::series_of(tf.at(name), "window.targets_future." + name) : MaskedSeries(H);
            if (s.size() != H)
                throw detail::BadRequest("window.targets_future." + name + " must have " + std::to_string(H) + " entries");
            w.targets_future[name] = std::move(s);
        }
        return w;
    }

    HttpResult forecast(const std::string& body) const {
        const auto req = nlohmann::json::parse(body.empty() ? "{}" : body);
        if (!req.is_object()) throw detail::BadRequest("request body must be a JSON object");
        if (!model_.config.has_future_input(opts_.channel))
            return error(409, "the loaded model does not carry '" + opts_.channel + "' as a known-future input");
        const auto H = static_cast<std::size_t>(model_.config.horizon);

        WindowSample window;
        if (req.contains("window")) {
            window = inline_window(req.at("window"));
        } else if (req.contains("subject")) {
            if (!req.at("subject").is_string()) throw detail::BadRequest("'subject' must be a string");
            auto it = index_.find(req.at("subject").get<std::string>());
            if (it == index_.end()) return error(404, "unknown subject '" + req.at("subject").get<std::string>() + "'");
            window = subjects_[it->second];
        } else {
            throw detail::BadRequest("request needs 'subject' or 'window'");
        }

        std::vector<ScenarioSpec> specs;
        const auto sc = req.value("scenarios", nlohmann::json::array({{{"name", "truth"}}, {{"name", "all_ones"}}, {{"name", "all_zeros"}}}));
        if (!sc.is_array() || sc.empty()) throw detail::BadRequest("'scenarios' must be a non-empty array");
        std::set<std::string> names;
        for (const auto& s : sc) {
            if (!s.is_object() || !s.contains("name") || !s.at("name").is_string())
                throw detail::BadRequest("every scenario needs a string 'name'");
            const std::string name = s.at("name");
            if (!names.insert(name).second) throw detail::BadRequest("duplicate scenario name '" + name + "'");
            ScenarioSpec spec;
            if (s.contains("schedule")) spec = ScenarioSpec::custom(detail::numbers_of(s.at("schedule"), "schedule"), name);
            else if (name == "truth") spec = ScenarioSpec::truth(window, opts_.channel);
            else if (name == "all_ones") spec = ScenarioSpec::all_ones(H);
            else if (name == "all_zeros") spec = ScenarioSpec::all_zeros(H);
            else throw detail::BadRequest("scenario '" + name + "' needs a 'schedule'");
            spec.name = name;
            spec.validate(H);
            specs.push_back(std::move(spec));
        }

        auto res = forecast_scenarios(model_, window, specs, opts_.channel, opts_.target);
        nlohmann::json out{{"fingerprint", model_.fingerprint()},
                           {"subject", window.encounter_id},
                           {"horizon", model_.config.horizon},
                           {"past_len", model_.config.past_len},
                           {"bin_minutes", opts_.bin_minutes},
                           {"target", opts_.target},
                           {"channel", opts_.channel}};
        nlohmann::json units = nlohmann::json::object();
        for (const auto& t : model_.config.targets) {
            auto it = opts_.units.find(t);
            units[t] = it == opts_.units.end() ? "original" : it->second;
        }
        out["units"] = units;
        nlohmann::json past = nlohmann::json::object();
        for (const auto& [name, s] : window.past) past[name] = {{"values", detail::nullable(s.values)}, {"is_real", detail::bools(s.is_real)}};
        out["past"] = past;
        nlohmann::json masks = nlohmann::json::object(), truth = nlohmann::json::object();
        for (const auto& [name, s] : window.targets_future) {
            masks[name] = detail::bools(s.is_real);
            truth[name] = detail::nullable(s.values);
        }
        out["masks"] = masks;
        out["truth"] = truth;
        nlohmann::json scen = nlohmann::json::object(), schedules = nlohmann::json::object(), maes = nlohmann::json::object();
        for (std::size_t i = 0; i < res.specs.size(); ++i) {
            const auto& f = res.forecasts[i];
            nlohmann::json per_var = nlohmann::json::object();
            for (std::size_t v = 0; v < f.targets.size(); ++v) {
                nlohmann::json qs = nlohmann::json::object();
                for (std::size_t q = 0; q < f.quantiles.size(); ++q) qs[quantile_column(f.quantiles[q])] = f.trajectory(v, q);
                per_var[f.targets[v]] = qs;
            }
            scen[res.specs[i].name] = per_var;
            schedules[res.specs[i].name] = res.specs[i].schedule;
            maes[res.specs[i].name] = res.target_mae[i] ? nlohmann::json(*res.target_mae[i]) : nlohmann::json(nullptr);
        }
        out["scenarios"] = scen;
        out["schedules"] = schedules;
        out["target_mae"] = maes;
        return ok(out);
    }

    TrainedModel<float> model_;
    std::vector<WindowSample> subjects_;
    ServiceOptions opts_;
    std::map<std::string, std::size_t> index_;
    nlohmann::json importance_;
};

} // namespace tftm
