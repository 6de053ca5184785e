#pragma once

// The command surface behind the `tftm` tool. Each run_* function reads the
// settings of one config file, writes its artifacts under out_dir and leaves
// a manifest (config hash, seed, library version, artifact list) next to them.
//
// Config layout (relative paths resolve against the config file's directory):
//
//   [data]      events, statics, dataset, out_dir, bin_minutes, past_len, horizon, split_ratio, split_seed
//   [schema]    <name> = <continuous|binary> <static|observed|known_future|target>
//   [model]     hidden_size, num_heads, dropout
//   [train]     learning_rate, batch_size, max_epochs, patience, validation_fraction, seed
//   [baseline]  max_order, granger_lag, alpha
//   [scenario]  channel, target
//   [synth]     see SynthConfig::apply
//   [serve]     host, port

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <nlohmann/json.hpp>

#include "tftm/baselines.hpp"
#include "tftm/config.hpp"
#include "tftm/importance.hpp"
#include "tftm/io.hpp"
#include "tftm/metrics.hpp"
#include "tftm/scenarios.hpp"
#include "tftm/synthdata.hpp"
#include "tftm/trainer.hpp"

namespace tftm {

struct Settings {
    Config config;
    std::string config_path;
    std::string config_hash;

    std::string events, statics, dataset, out_dir;
    int bin_minutes = 15;
    int past_len = 75;
    int horizon = 25;
    double split_ratio = 0.8;
    std::uint64_t split_seed = 7;

    int hidden_size = 64;
    int num_heads = 4;
    double dropout = 0.3;
    TrainConfig train;

    int var_max_order = 4;
    int granger_lag = 2;
    double granger_alpha = 0.05;

    std::string channel = "pressor";
    std::string target = "map";

    std::string host = "127.0.0.1";
    int port = 8080;

    SynthConfig synth;

    std::string out(const std::string& name) const { return (std::filesystem::path(out_dir) / name).string(); }
    std::string checkpoint() const { return out("model.ckpt"); }

    VariableSchema schema() const { return VariableSchema::from_config(config); }

    static Settings from_config(const Config& cfg, const std::string& path = {}) {
        Settings s;
        s.config = cfg;
        s.config_path = path;
        s.config_hash = hex64(fnv1a64(cfg.canonical()));
        auto base = path.empty() ? std::filesystem::path(".") : std::filesystem::path(path).parent_path();
        auto resolve = [&](const std::string& p) {
            std::filesystem::path fp(p);
            return fp.is_absolute() ? fp.string() : (base / fp).lexically_normal().string();
        };
        s.out_dir = resolve(cfg.get_string("data", "out_dir", std::string("out")));
        s.events = resolve(cfg.get_string("data", "events", std::string("events.csv")));
        s.statics = resolve(cfg.get_string("data", "statics", std::string("statics.csv")));
        s.dataset = resolve(cfg.get_string("data", "dataset", (std::filesystem::path(s.out_dir) / "dataset.tftm").string()));
        s.bin_minutes = static_cast<int>(cfg.get_int("data", "bin_minutes", 15));
        s.past_len = static_cast<int>(cfg.get_int("data", "past_len", 75));
        s.horizon = static_cast<int>(cfg.get_int("data", "horizon", 25));
        s.split_ratio = cfg.get_double("data", "split_ratio", 0.8);
        s.split_seed = static_cast<std::uint64_t>(cfg.get_int("data", "split_seed", 7));
        s.hidden_size = static_cast<int>(cfg.get_int("model", "hidden_size", 64));
        s.num_heads = static_cast<int>(cfg.get_int("model", "num_heads", 4));
        s.dropout = cfg.get_double("model", "dropout", 0.3);
        s.train.learning_rate = cfg.get_double("train", "learning_rate", 1e-3);
        s.train.batch_size = static_cast<std::size_t>(cfg.get_int("train", "batch_size", 800));
        s.train.max_epochs = static_cast<int>(cfg.get_int("train", "max_epochs", 2000));
        s.train.patience = static_cast<int>(cfg.get_int("train", "patience", 50));
        s.train.validation_fraction = cfg.get_double("train", "validation_fraction", 0.1);
        s.train.seed = static_cast<std::uint64_t>(cfg.get_int("train", "seed", 0));
        s.var_max_order = static_cast<int>(cfg.get_int("baseline", "max_order", 4));
        s.granger_lag = static_cast<int>(cfg.get_int("baseline", "granger_lag", 2));
        s.granger_alpha = cfg.get_double("baseline", "alpha", 0.05);
        s.channel = cfg.get_string("scenario", "channel", std::string("pressor"));
        s.target = cfg.get_string("scenario", "target", std::string("map"));
        s.host = cfg.get_string("serve", "host", std::string("127.0.0.1"));
        s.port = static_cast<int>(cfg.get_int("serve", "port", 8080));
        s.synth.apply(cfg);
        if (s.past_len <= 0 || s.horizon <= 0 || s.bin_minutes <= 0) throw ConfigError(cfg.origin() + ": [data] lengths must be positive");
        if (!(s.split_ratio > 0.0 && s.split_ratio < 1.0)) throw ConfigError(cfg.origin() + ": [data] split_ratio must be in (0, 1)");
        return s;
    }

    static Settings load(const std::string& path) { return from_config(Config::load(path), path); }

    ModelConfig model_config(const VariableSchema& schema) const {
        return ModelConfig::from_schema(schema, past_len, horizon, hidden_size, num_heads, dropout);
    }
};

/// Records what a command produced and with which inputs.
class Manifest {
public:
    Manifest(const Settings& s, std::string command) : s_(s), command_(std::move(command)), start_(now()) {}

    void artifact(const std::string& path) { artifacts_.push_back(path); }
    void note(const std::string& key, nlohmann::json value) { extra_[key] = std::move(value); }

    std::string write() const {
        nlohmann::json j{{"command", command_},
                         {"library_version", kVersion},
                         {"config_path", s_.config_path},
                         {"config_hash", s_.config_hash},
                         {"seeds", {{"train", s_.train.seed}, {"split", s_.split_seed}, {"synth", s_.synth.seed}}},
                         {"started_utc", start_},
                         {"finished_utc", now()},
                         {"artifacts", artifacts_},
                         {"details", extra_}};
        std::string path = s_.out("manifests/" + command_ + ".json");
        write_text(path, j.dump(2) + "\n");
        return path;
    }

private:
    static std::string now() {
        auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        char buf[32];
        std::tm tm{};
        gmtime_r(&t, &tm);
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
        return buf;
    }

    const Settings& s_;
    std::string command_;
    std::string start_;
    std::vector<std::string> artifacts_;
    nlohmann::json extra_ = nlohmann::json::object();
};

using Logger = std::function<void(const std::string&)>;

inline void say(const Logger& log, const std::string& msg) {
    if (log) log(msg);
}

// ---- synth ----------------------------------------------------------------------------

inline std::string run_synth(const Settings& s, const Logger& log = {}) {
    Manifest man(s, "synth");
    auto cohort = generate_cohort(s.synth);
    write_events_csv(s.events, cohort.events);
    write_statics_csv(s.statics, {s.synth.sex_static, s.synth.age_static}, statics_of(cohort));
    man.artifact(s.events);
    man.artifact(s.statics);
    man.note("encounters", cohort.encounters.size());
    man.note("events", cohort.events.size());
    say(log, "synth: " + std::to_string(cohort.encounters.size()) + " encounters, " + std::to_string(cohort.events.size()) +
                 " events");
    return man.write();
}

// ---- prepare --------------------------------------------------------------------------

/// Windows and split for events already in memory (the file-free path of `prepare`).
inline SplitDataset make_split_dataset(const std::vector<RawEvent>& events, const StaticsTable& statics,
                                       const VariableSchema& schema, int bin_minutes, int past_len, int horizon,
                                       double split_ratio, std::uint64_t split_seed, WindowBuildResult* drops = nullptr) {
    auto grids = grids_from_events(events, statics, schema, bin_minutes);
    auto built = build_windows(grids, schema, static_cast<std::size_t>(past_len), static_cast<std::size_t>(horizon));
    if (built.windows.size() < 2) throw ConfigError("prepare: fewer than 2 usable encounters after windowing");
    auto [train, test] = split_cohort(built.windows, split_ratio, split_seed);
    SplitDataset ds;
    for (auto* part : {&ds.train, &ds.test}) {
        part->schema = schema;
        part->past_len = past_len;
        part->horizon = horizon;
        part->bin_minutes = bin_minutes;
    }
    ds.train.windows = std::move(train);
    ds.test.windows = std::move(test);
    if (drops) {
        built.windows.clear();
        *drops = std::move(built);
    }
    return ds;
}

/// Synthetic cohort straight to a split dataset. Events of variables the schema does not declare are dropped.
inline SplitDataset synth_split_dataset(const SynthConfig& sc, const VariableSchema& schema, int past_len, int horizon,
                                        double split_ratio = 0.8, std::uint64_t split_seed = 7) {
    auto cohort = generate_cohort(sc);
    std::erase_if(cohort.events, [&](const RawEvent& e) { return schema.find(e.variable) == nullptr; });
    return make_split_dataset(cohort.events, statics_of(cohort), schema, sc.bin_minutes, past_len, horizon, split_ratio,
                              split_seed);
}

inline std::string run_prepare(const Settings& s, const Logger& log = {}) {
    Manifest man(s, "prepare");
    VariableSchema schema = s.schema();
    auto events = read_events_csv(s.events);
    auto statics = read_statics_csv(s.statics);
    WindowBuildResult built;
    auto ds = make_split_dataset(events, statics, schema, s.bin_minutes, s.past_len, s.horizon, s.split_ratio, s.split_seed,
                                 &built);
    const std::size_t n_windows = ds.train.windows.size() + ds.test.windows.size();
    save_dataset(s.dataset, ds);
    std::string report = "encounters " + std::to_string(n_windows + built.dropped_short + built.dropped_missing_static) +
                         "\nwindows " + std::to_string(n_windows) +
                         "\ndropped_short " + std::to_string(built.dropped_short) + "\ndropped_missing_static " +
                         std::to_string(built.dropped_missing_static) + "\ntrain " + std::to_string(ds.train.windows.size()) +
                         "\ntest " + std::to_string(ds.test.windows.size()) + "\n";
    for (const auto& id : built.dropped_ids) report += "dropped " + id + "\n";
    write_text(s.out("prepare_report.txt"), report);
    man.artifact(s.dataset);
    man.artifact(s.out("prepare_report.txt"));
    man.note("train_windows", ds.train.windows.size());
    man.note("test_windows", ds.test.windows.size());
    man.note("dropped_short", built.dropped_short);
    man.note("dropped_missing_static", built.dropped_missing_static);
    say(log, "prepare: " + std::to_string(ds.train.windows.size()) + " train / " + std::to_string(ds.test.windows.size()) +
                 " test windows, " + std::to_string(built.dropped_short + built.dropped_missing_static) + " dropped");
    return man.write();
}

// ---- train ----------------------------------------------------------------------------

inline std::string run_train(const Settings& s, const Logger& log = {}) {
    Manifest man(s, "train");
    auto ds = load_dataset(s.dataset);
    auto cfg = s.model_config(ds.train.schema);
    const std::string ckpt = s.checkpoint(), log_path = s.out("train_log.jsonl");
    auto log_file = detail::open_out(log_path);
    auto result = train<float>(
        ds.train, cfg, s.train,
        [&](const EpochRecord& r) {
            log_file << r.to_line() << '\n';
            log_file.flush();
            say(log, "epoch " + std::to_string(r.epoch) + " train " + std::to_string(r.train_loss) + " val " +
                         std::to_string(r.val_loss) + (r.clipped_batches ? " (clipped " + std::to_string(r.clipped_batches) + ")" : ""));
        },
        [&](const TrainedModel<float>& m, const EpochRecord& r) {
            save_checkpoint(ckpt, m, {{"epoch", r.epoch}, {"val_loss", r.val_loss}});
        });
    save_checkpoint(ckpt, result.model, {{"epoch", result.best_epoch}, {"val_loss", result.best_val_loss}});
    man.artifact(ckpt);
    man.artifact(log_path);
    man.note("best_epoch", result.best_epoch);
    man.note("best_val_loss", result.best_val_loss);
    man.note("epochs_run", result.log.size());
    man.note("stop_reason", result.stop_reason);
    man.note("fingerprint", result.model.fingerprint());
    say(log, "train: best epoch " + std::to_string(result.best_epoch) + ", val loss " + std::to_string(result.best_val_loss) +
                 " (" + result.stop_reason + ")");
    return man.write();
}

// ---- evaluate -------------------------------------------------------------------------

inline void write_report_tables(const Settings& s, const EvalReport& rep, const std::string& prefix, Manifest& man) {
    std::string ba = "variable,mean,diff\n";
    for (const auto& v : rep.variables)
        if (const auto& b = rep.per_variable.at(v).bland_altman)
            for (std::size_t i = 0; i < b->n; ++i)
                ba += v + "," + detail::format_number(b->means[i]) + "," + detail::format_number(b->diffs[i]) + "\n";
    std::string cov = "subject,coverage\n";
    for (std::size_t i = 0; i < rep.coverage.subjects.size(); ++i)
        cov += rep.coverage.subjects[i] + "," + detail::format_number(rep.coverage.fractions[i]) + "\n";
    write_text(s.out(prefix + "report.json"), rep.to_json().dump(2) + "\n");
    write_text(s.out(prefix + "bland_altman.csv"), ba);
    write_text(s.out(prefix + "coverage.csv"), cov);
    for (const char* f : {"report.json", "bland_altman.csv", "coverage.csv"}) man.artifact(s.out(prefix + f));
}

/// Evaluates the trained model on the test split, or an existing prediction file when `predictions` is set.
inline std::string run_evaluate(const Settings& s, const std::string& predictions = {}, const std::string& checkpoint = {},
                                const Logger& log = {}) {
    Manifest man(s, predictions.empty() ? "evaluate" : "evaluate_predictions");
    std::vector<PredictionRow> rows;
    if (!predictions.empty()) {
        rows = read_predictions_csv(predictions);
        man.note("predictions_input", predictions);
        write_report_tables(s, evaluate_rows(rows), "external_", man);
    } else {
        auto ds = load_dataset(s.dataset);
        auto model = load_checkpoint<float>(checkpoint.empty() ? s.checkpoint() : checkpoint);
        auto fc = model.predict(ds.test.windows);
        rows = prediction_rows(fc, ds.test.windows);
        write_predictions_csv(s.out("predictions.csv"), rows, model.config.quantiles);
        man.artifact(s.out("predictions.csv"));
        man.note("fingerprint", model.fingerprint());
        write_report_tables(s, evaluate_rows(rows), "", man);
    }
    auto rep = evaluate_rows(rows);
    for (const auto& v : rep.variables) {
        const auto& m = rep.per_variable.at(v);
        say(log, "evaluate: " + v + " MAE " + (m.mae ? std::to_string(*m.mae) : std::string("n/a")) + " MAPE " +
                     (m.mape.percent ? std::to_string(*m.mape.percent) + "%" : std::string("n/a")));
    }
    say(log, "evaluate: median subject coverage " + std::to_string(rep.coverage.median));
    return man.write();
}

// ---- baseline -------------------------------------------------------------------------

namespace detail {

/// Filled series (past + future) of the named targets, one T x k segment per window.
inline std::vector<MatrixXd> filled_segments(const std::vector<WindowSample>& windows, const std::vector<std::string>& names,
                                             const std::map<std::string, double>& fallbacks, bool include_future) {
    std::vector<MatrixXd> out;
    for (const auto& raw : windows) {
        WindowSample w = fill_window(raw, fallbacks);
        const auto P = static_cast<Eigen::Index>(w.past_len()), H = static_cast<Eigen::Index>(w.horizon());
        MatrixXd seg(include_future ? P + H : P, static_cast<Eigen::Index>(names.size()));
        for (std::size_t j = 0; j < names.size(); ++j) {
            const auto& p = w.past.at(names[j]);
            for (Eigen::Index t = 0; t < P; ++t) seg(t, static_cast<Eigen::Index>(j)) = p.values[static_cast<std::size_t>(t)];
            if (include_future) {
                const auto& f = w.targets_future.at(names[j]);
                for (Eigen::Index t = 0; t < H; ++t) seg(P + t, static_cast<Eigen::Index>(j)) = f.values[static_cast<std::size_t>(t)];
            }
        }
        out.push_back(std::move(seg));
    }
    return out;
}

} // namespace detail

struct VarBaselineResult {
    GrangerScreen screen;
    std::vector<std::vector<std::string>> groups; ///< jointly modelled variable groups
    std::vector<VarModel> models;                 ///< one per group
    std::vector<PredictionRow> rows;
};

/**
 * @brief VAR baseline on forward-filled training trajectories.
 *
 * Targets passing the pairwise Granger screen share one VAR; every excluded
 * target gets its own autoregression. Orders are chosen by AIC. Bands are
 * Gaussian forecast-error quantiles.
 */
inline VarBaselineResult var_baseline(const Dataset& train, const Dataset& test, const std::vector<double>& quantiles,
                                      int max_order, int granger_lag, double alpha) {
    VarBaselineResult res;
    const auto targets = train.schema.targets();
    auto fallbacks = fit_fallbacks(train.windows, train.schema);
    auto segs = detail::filled_segments(train.windows, targets, fallbacks, true);
    res.screen = granger_screen(segs, targets, granger_lag, alpha);
    if (!res.screen.retained.empty()) res.groups.push_back(res.screen.retained);
    for (const auto& v : res.screen.excluded) res.groups.push_back({v});
    boost::math::normal normal;
    std::map<std::string, std::size_t> col;
    for (std::size_t j = 0; j < targets.size(); ++j) col[targets[j]] = j;
    // per test window, per target: H x Q predictions
    std::map<std::string, std::vector<std::vector<double>>> per_target_q; // key subject|var -> [t][q]
    const auto H = test.horizon;
    for (const auto& group : res.groups) {
        std::vector<MatrixXd> gsegs;
        for (const auto& s : segs) {
            MatrixXd g(s.rows(), static_cast<Eigen::Index>(group.size()));
            for (std::size_t j = 0; j < group.size(); ++j) g.col(static_cast<Eigen::Index>(j)) = s.col(static_cast<Eigen::Index>(col[group[j]]));
            gsegs.push_back(std::move(g));
        }
        int p = select_order(gsegs, max_order).order;
        VarModel m;
        for (;; --p) {
            try {
                m = fit_var(gsegs, p);
                break;
            } catch (const RankDeficiencyError&) {
                if (p == 0) throw;
            }
        }
        res.models.push_back(m);
        MatrixXd var = var_forecast_variance(m, H);
        auto hist = detail::filled_segments(test.windows, group, fallbacks, false);
        for (std::size_t i = 0; i < test.windows.size(); ++i) {
            MatrixXd fc = var_forecast(m, hist[i], H);
            for (std::size_t j = 0; j < group.size(); ++j) {
                auto& cells = per_target_q[test.windows[i].encounter_id + "|" + group[j]];
                cells.assign(static_cast<std::size_t>(H), {});
                for (int t = 0; t < H; ++t)
                    for (double q : quantiles)
                        cells[static_cast<std::size_t>(t)].push_back(
                            fc(static_cast<Eigen::Index>(j), t) +
                            boost::math::quantile(normal, q) * std::sqrt(var(static_cast<Eigen::Index>(j), t)));
            }
        }
    }
    for (const auto& w : test.windows)
        for (const auto& v : targets) {
            const auto& truth = w.targets_future.at(v);
            const auto& cells = per_target_q.at(w.encounter_id + "|" + v);
            for (int t = 0; t < H; ++t) {
                PredictionRow r;
                r.subject = w.encounter_id;
                r.variable = v;
                r.step = t + 1;
                r.truth = truth.values[static_cast<std::size_t>(t)];
                r.mask = truth.is_real[static_cast<std::size_t>(t)];
                r.quantiles = cells[static_cast<std::size_t>(t)];
                res.rows.push_back(std::move(r));
            }
        }
    return res;
}

inline std::string run_baseline(const Settings& s, const Logger& log = {}) {
    Manifest man(s, "baseline");
    auto ds = load_dataset(s.dataset);
    const std::vector<double> quantiles{0.1, 0.5, 0.9};
    auto res = var_baseline(ds.train, ds.test, quantiles, s.var_max_order, s.granger_lag, s.granger_alpha);
    write_predictions_csv(s.out("var_predictions.csv"), res.rows, quantiles);
    std::string g = "cause,effect,F,p_value,df1,df2,significant\n";
    for (const auto& p : res.screen.pairs)
        g += p.cause + "," + p.effect + "," + detail::format_number(p.result.F) + "," + detail::format_number(p.result.p_value) +
             "," + detail::format_number(p.result.df1) + "," + detail::format_number(p.result.df2) + "," +
             (p.significant ? "1" : "0") + "\n";
    write_text(s.out("granger.csv"), g);
    man.artifact(s.out("var_predictions.csv"));
    man.artifact(s.out("granger.csv"));
    auto rep = evaluate_rows(res.rows);
    write_report_tables(s, rep, "var_", man);
    nlohmann::json groups = nlohmann::json::array();
    for (std::size_t i = 0; i < res.groups.size(); ++i) groups.push_back({{"variables", res.groups[i]}, {"order", res.models[i].order}});
    man.note("groups", groups);
    man.note("granger_excluded", res.screen.excluded);
    say(log, "baseline: " + std::to_string(res.groups.size()) + " VAR group(s); excluded by Granger screen: " +
                 std::to_string(res.screen.excluded.size()));
    return man.write();
}

// ---- importance -----------------------------------------------------------------------

inline std::string run_importance(const Settings& s, const std::string& checkpoint = {}, const Logger& log = {}) {
    Manifest man(s, "importance");
    auto ds = load_dataset(s.dataset);
    auto model = load_checkpoint<float>(checkpoint.empty() ? s.checkpoint() : checkpoint);
    auto fc = model.predict(ds.test.windows);
    nlohmann::json all = nlohmann::json::object();
    for (auto scope : {ImportanceScope::Static, ImportanceScope::Temporal, ImportanceScope::Future}) {
        auto t = aggregate_importance(fc, model.config, scope);
        all[to_string(scope)] = t.to_json();
        std::string path = s.out(std::string("importance_") + to_string(scope) + ".csv");
        write_text(path, t.to_csv());
        man.artifact(path);
        if (!t.ranked.empty()) say(log, std::string("importance: top ") + to_string(scope) + " feature " + t.ranked.front().feature);
    }
    auto prof = attention_profile(fc, model.config);
    all["attention_profile"] = prof;
    std::string ap = "position,offset_from_forecast_start,weight\n";
    for (std::size_t j = 0; j < prof.size(); ++j)
        ap += std::to_string(j) + "," + std::to_string(static_cast<long>(j) - model.config.past_len) + "," +
              detail::format_number(prof[j]) + "\n";
    write_text(s.out("attention_profile.csv"), ap);
    write_text(s.out("importance.json"), all.dump(2) + "\n");
    man.artifact(s.out("attention_profile.csv"));
    man.artifact(s.out("importance.json"));
    return man.write();
}

// ---- whatif ---------------------------------------------------------------------------

inline nlohmann::json contrasts_to_json(const std::vector<ContrastRow>& rows) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : rows) {
        nlohmann::json j{{"label", r.label}, {"subjects", r.subjects}};
        if (r.test)
            j.update({{"statistic", r.test->statistic}, {"p_value", r.test->p_value}, {"df", r.test->df},
                      {"mean_diff", r.test->mean_diff}});
        else
            j.update({{"statistic", nullptr}, {"p_value", nullptr}, {"note", r.note}});
        arr.push_back(j);
    }
    return arr;
}

/// Truth / all-ones / all-zeros forecasts for every test subject (or the first `limit`).
inline std::string run_whatif(const Settings& s, const std::string& checkpoint = {}, std::size_t limit = 0,
                              const Logger& log = {}) {
    Manifest man(s, "whatif");
    auto ds = load_dataset(s.dataset);
    auto model = load_checkpoint<float>(checkpoint.empty() ? s.checkpoint() : checkpoint);
    const auto H = static_cast<std::size_t>(model.config.horizon);
    std::vector<ScenarioResult> results;
    std::string mae = "subject,scenario,target_mae\n";
    std::size_t n = limit ? std::min(limit, ds.test.windows.size()) : ds.test.windows.size();
    for (std::size_t i = 0; i < n; ++i) {
        const auto& w = ds.test.windows[i];
        std::vector<ScenarioSpec> specs{ScenarioSpec::truth(w, s.channel), ScenarioSpec::all_ones(H), ScenarioSpec::all_zeros(H)};
        auto r = forecast_scenarios(model, w, specs, s.channel, s.target);
        for (std::size_t k = 0; k < specs.size(); ++k) {
            const auto& f = r.forecasts[k];
            std::string csv = "variable,step," + s.channel;
            for (double q : f.quantiles) csv += "," + quantile_column(q);
            csv += "\n";
            for (std::size_t v = 0; v < f.targets.size(); ++v)
                for (std::size_t t = 0; t < H; ++t) {
                    csv += f.targets[v] + "," + std::to_string(t + 1) + "," + detail::format_number(specs[k].schedule[t]);
                    for (std::size_t q = 0; q < f.quantiles.size(); ++q) csv += "," + detail::format_number(f.at(v, q, t));
                    csv += "\n";
                }
            std::string path = s.out("whatif/" + w.encounter_id + "__" + specs[k].name + ".csv");
            write_text(path, csv);
            man.artifact(path);
            mae += w.encounter_id + "," + specs[k].name + "," +
                   (r.target_mae[k] ? detail::format_number(*r.target_mae[k]) : std::string("")) + "\n";
        }
        results.push_back(std::move(r));
    }
    auto rows = scenario_contrasts(results, s.target);
    write_text(s.out("whatif_contrasts.json"), contrasts_to_json(rows).dump(2) + "\n");
    write_text(s.out("whatif_mae.csv"), mae);
    man.artifact(s.out("whatif_contrasts.json"));
    man.artifact(s.out("whatif_mae.csv"));
    for (const auto& r : rows)
        say(log, "whatif: " + r.label + (r.test ? " t=" + std::to_string(r.test->statistic) + " p=" + std::to_string(r.test->p_value)
                                                : " absent (" + r.note + ")"));
    return man.write();
}

} // namespace tftm
