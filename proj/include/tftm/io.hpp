#pragma once

// File formats.
//
//   events CSV      encounter_id,variable,timestamp_minutes,value
//   statics CSV     encounter_id,<static 1>,<static 2>,...   (empty cell = missing)
//   prediction CSV  subject,variable,step,truth,mask,q10,q50,q90   (one row per cell)
//
// Binary containers (dataset and checkpoint) share one layout:
//   8-byte magic | u32 format version | u64 header length | JSON header | blobs
// All integers and floats are little-endian. Blob order is given in the header.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tftm/common.hpp"
#include "tftm/metrics.hpp"
#include "tftm/model.hpp"
#include "tftm/synthdata.hpp"
#include "tftm/trainer.hpp"
#include "tftm/timegrid.hpp"

namespace tftm {

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(trim(cur));
    return out;
}

inline double parse_number(const std::string& tok, const std::string& where) {
    if (tok.empty() || tok == "nan" || tok == "NaN" || tok == "NA") return kMissing;
    try {
        std::size_t used = 0;
        double v = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw FormatError(where + ": expected a number, got '" + tok + "'");
    }
}

inline std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    std::ostringstream os;
    os << std::setprecision(17) << x;
    return os.str();
}

inline std::ifstream open_in(const std::string& path, bool binary = false) {
    std::ifstream f(path, binary ? std::ios::binary : std::ios::in);
    if (!f) throw FormatError("cannot open '" + path + "' for reading");
    return f;
}

inline std::ofstream open_out(const std::string& path, bool binary = false) {
    auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream f(path, binary ? std::ios::binary : std::ios::out);
    if (!f) throw FormatError("cannot open '" + path + "' for writing");
    return f;
}

template <class T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& is, const std::string& what) {
    T v{};
    if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw FormatError(what + ": truncated file");
    return v;
}

inline void write_container(std::ostream& os, const char (&magic)[9], std::uint32_t version, const nlohmann::json& header) {
    os.write(magic, 8);
    put<std::uint32_t>(os, version);
    std::string h = header.dump();
    put<std::uint64_t>(os, h.size());
    os.write(h.data(), static_cast<std::streamsize>(h.size()));
}

inline nlohmann::json read_container(std::istream& is, const char (&magic)[9], std::uint32_t version, const std::string& path) {
    char m[8];
    if (!is.read(m, 8) || std::memcmp(m, magic, 8) != 0)
        throw FormatError("'" + path + "' is not a " + std::string(magic, 8) + " file");
    auto v = get<std::uint32_t>(is, path);
    if (v != version)
        throw FormatError("'" + path + "' has format version " + std::to_string(v) + ", this build reads version " +
                          std::to_string(version) + "; refusing to load");
    auto n = get<std::uint64_t>(is, path);
    if (n > (1ull << 32)) throw FormatError("'" + path + "': implausible header length");
    std::string h(n, '\0');
    if (!is.read(h.data(), static_cast<std::streamsize>(n))) throw FormatError("'" + path + "': truncated header");
    try {
        return nlohmann::json::parse(h);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("'" + path + "': corrupt header: " + e.what());
    }
}

} // namespace detail

// ---- CSV: events and statics --------------------------------------------------------

inline void write_events_csv(const std::string& path, const std::vector<RawEvent>& events) {
    auto f = detail::open_out(path);
    f << "encounter_id,variable,timestamp_minutes,value\n";
    for (const auto& e : events)
        f << e.encounter_id << ',' << e.variable << ',' << detail::format_number(e.timestamp) << ','
          << detail::format_number(e.value) << '\n';
}

inline std::vector<RawEvent> read_events_csv(const std::string& path) {
    auto f = detail::open_in(path);
    std::string line;
    if (!std::getline(f, line)) throw FormatError(path + ": empty file");
    auto header = detail::split_csv(line);
    if (header != std::vector<std::string>{"encounter_id", "variable", "timestamp_minutes", "value"})
        throw FormatError(path + ":1: expected header 'encounter_id,variable,timestamp_minutes,value'");
    std::vector<RawEvent> out;
    int lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        auto cols = detail::split_csv(line);
        std::string where = path + ":" + std::to_string(lineno);
        if (cols.size() != 4) throw FormatError(where + ": expected 4 columns");
        RawEvent e{cols[0], cols[1], detail::parse_number(cols[2], where), detail::parse_number(cols[3], where)};
        if (e.encounter_id.empty()) throw FormatError(where + ": empty encounter_id");
        out.push_back(std::move(e));
    }
    return out;
}

using StaticsTable = std::map<std::string, std::map<std::string, double>>;

inline void write_statics_csv(const std::string& path, const std::vector<std::string>& names, const StaticsTable& table,
                              const std::vector<std::string>& order = {}) {
    auto f = detail::open_out(path);
    f << "encounter_id";
    for (const auto& n : names) f << ',' << n;
    f << '\n';
    auto write_row = [&](const std::string& id, const std::map<std::string, double>& row) {
        f << id;
        for (const auto& n : names) {
            auto it = row.find(n);
            f << ',';
            if (it != row.end() && std::isfinite(it->second)) f << detail::format_number(it->second);
        }
        f << '\n';
    };
    if (order.empty())
        for (const auto& [id, row] : table) write_row(id, row);
    else
        for (const auto& id : order) write_row(id, table.at(id));
}

inline StaticsTable read_statics_csv(const std::string& path) {
    auto f = detail::open_in(path);
    std::string line;
    if (!std::getline(f, line)) throw FormatError(path + ": empty file");
    auto header = detail::split_csv(line);
    if (header.empty() || header[0] != "encounter_id") throw FormatError(path + ":1: first column must be encounter_id");
    StaticsTable out;
    int lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        auto cols = detail::split_csv(line);
        std::string where = path + ":" + std::to_string(lineno);
        if (cols.size() != header.size()) throw FormatError(where + ": expected " + std::to_string(header.size()) + " columns");
        auto& row = out[cols[0]];
        for (std::size_t j = 1; j < cols.size(); ++j) row[header[j]] = detail::parse_number(cols[j], where);
    }
    return out;
}

/// Resamples every encounter found in the events; statics come from `statics` (missing -> NaN).
inline std::vector<EncounterGrid> grids_from_events(const std::vector<RawEvent>& events, const StaticsTable& statics,
                                                    const VariableSchema& schema, int bin_minutes) {
    std::map<std::string, std::vector<RawEvent>> by_enc;
    std::vector<std::string> order;
    for (const auto& e : events) {
        auto [it, fresh] = by_enc.try_emplace(e.encounter_id);
        if (fresh) order.push_back(e.encounter_id);
        it->second.push_back(e);
    }
    std::vector<EncounterGrid> out;
    for (const auto& id : order) {
        EncounterGrid g;
        g.encounter_id = id;
        g.series = resample(by_enc[id], schema, bin_minutes);
        auto st = statics.find(id);
        for (const auto& name : schema.statics()) {
            double v = kMissing;
            if (st != statics.end())
                if (auto it = st->second.find(name); it != st->second.end()) v = it->second;
            g.statics[name] = v;
        }
        out.push_back(std::move(g));
    }
    return out;
}

inline StaticsTable statics_of(const SynthCohort& cohort) {
    StaticsTable t;
    for (const auto& e : cohort.encounters) t[e.id] = e.statics;
    return t;
}

// ---- dataset container --------------------------------------------------------------

inline constexpr char kDatasetMagic[9] = "TFTMDSET";
inline constexpr std::uint32_t kDatasetVersion = 1;

inline nlohmann::json schema_to_json(const VariableSchema& s) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& v : s.variables()) arr.push_back({{"name", v.name}, {"kind", to_string(v.kind)}, {"role", to_string(v.role)}});
    return arr;
}

inline VariableSchema schema_from_json(const nlohmann::json& j) {
    std::vector<VariableSpec> vars;
    for (const auto& e : j) {
        VariableSpec v;
        v.name = e.at("name");
        std::string kind = e.at("kind"), role = e.at("role");
        v.kind = kind == "binary" ? VariableKind::Binary : VariableKind::Continuous;
        if (role == "static") v.role = VariableRole::Static;
        else if (role == "observed") v.role = VariableRole::Observed;
        else if (role == "known_future") v.role = VariableRole::KnownFuture;
        else if (role == "target") v.role = VariableRole::Target;
        else throw FormatError("unknown role '" + role + "' in stored schema");
        vars.push_back(v);
    }
    return VariableSchema(std::move(vars));
}

/// A prepared dataset: train and test windows in original units (not yet filled).
struct SplitDataset {
    Dataset train;
    Dataset test;
};

/**
 * Dataset blob layout, per window in header order:
 *   statics (f64 each, schema order) | past inputs: P x f64 values, P x u8 is_real |
 *   known-future: H x f64 | targets: H x f64 values, H x u8 is_real
 * Missing values are stored as NaN.
 */
inline void save_dataset(const std::string& path, const SplitDataset& ds) {
    const auto& schema = ds.train.schema;
    nlohmann::json header{{"library_version", kVersion},
                          {"schema", schema_to_json(schema)},
                          {"past_len", ds.train.past_len},
                          {"horizon", ds.train.horizon},
                          {"bin_minutes", ds.train.bin_minutes}};
    nlohmann::json windows = nlohmann::json::array();
    for (const auto* part : {&ds.train, &ds.test})
        for (const auto& w : part->windows) windows.push_back({{"id", w.encounter_id}, {"split", part == &ds.train ? "train" : "test"}});
    header["windows"] = windows;
    auto f = detail::open_out(path, true);
    detail::write_container(f, kDatasetMagic, kDatasetVersion, header);
    for (const auto* part : {&ds.train, &ds.test})
        for (const auto& w : part->windows) {
            for (const auto& n : schema.statics()) detail::put<double>(f, w.statics.at(n));
            for (const auto& n : schema.past_inputs()) {
                const auto& s = w.past.at(n);
                for (double x : s.values) detail::put<double>(f, x);
                for (bool r : s.is_real) detail::put<std::uint8_t>(f, r ? 1 : 0);
            }
            for (const auto& n : schema.known_future())
                for (double x : w.future_known.at(n)) detail::put<double>(f, x);
            for (const auto& n : schema.targets()) {
                const auto& s = w.targets_future.at(n);
                for (double x : s.values) detail::put<double>(f, x);
                for (bool r : s.is_real) detail::put<std::uint8_t>(f, r ? 1 : 0);
            }
        }
    if (!f) throw FormatError("write failed for '" + path + "'");
}

inline SplitDataset load_dataset(const std::string& path) {
    auto f = detail::open_in(path, true);
    auto header = detail::read_container(f, kDatasetMagic, kDatasetVersion, path);
    SplitDataset ds;
    VariableSchema schema = schema_from_json(header.at("schema"));
    for (auto* part : {&ds.train, &ds.test}) {
        part->schema = schema;
        part->past_len = header.at("past_len");
        part->horizon = header.at("horizon");
        part->bin_minutes = header.at("bin_minutes");
    }
    const auto P = static_cast<std::size_t>(ds.train.past_len), H = static_cast<std::size_t>(ds.train.horizon);
    auto read_series = [&](std::size_t n) {
        MaskedSeries s(n);
        for (std::size_t i = 0; i < n; ++i) s.values[i] = detail::get<double>(f, path);
        for (std::size_t i = 0; i < n; ++i) s.is_real[i] = detail::get<std::uint8_t>(f, path) != 0;
        return s;
    };
    for (const auto& wj : header.at("windows")) {
        WindowSample w;
        w.encounter_id = wj.at("id");
        for (const auto& n : schema.statics()) w.statics[n] = detail::get<double>(f, path);
        for (const auto& n : schema.past_inputs()) w.past[n] = read_series(P);
        for (const auto& n : schema.known_future()) {
            std::vector<double> xs(H);
            for (double& x : xs) x = detail::get<double>(f, path);
            w.future_known[n] = std::move(xs);
        }
        for (const auto& n : schema.targets()) w.targets_future[n] = read_series(H);
        (wj.at("split") == "train" ? ds.train : ds.test).windows.push_back(std::move(w));
    }
    return ds;
}

// ---- checkpoint container -----------------------------------------------------------

inline constexpr char kCheckpointMagic[9] = "TFTMCKPT";
inline constexpr std::uint32_t kCheckpointVersion = 1;

template <class T>
constexpr const char* scalar_name() {
    return sizeof(T) == 4 ? "float32" : "float64";
}

/**
 * Header: config, its fingerprint, normalisation statistics, fill values, the
 * stored scalar type and every parameter's name and shape. Blobs: the
 * parameters in header order, row-major.
 */
template <class T>
void save_checkpoint(const std::string& path, const TrainedModel<T>& m, const nlohmann::json& extra = {}) {
    nlohmann::json norm = nlohmann::json::object();
    for (const auto& [name, st] : m.norm.stats) norm[name] = {{"mean", st.mean}, {"std", st.std}};
    nlohmann::json params = nlohmann::json::array();
    for (std::size_t i = 0; i < m.params.size(); ++i)
        params.push_back({{"name", m.params.name(i)}, {"rows", m.params.value(i).rows()}, {"cols", m.params.value(i).cols()}});
    nlohmann::json header{{"library_version", kVersion}, {"config", m.config.to_json()}, {"fingerprint", m.fingerprint()},
                          {"norm", norm},                {"fallbacks", m.fallbacks}, {"scalar", scalar_name<T>()},
                          {"params", params},            {"extra", extra.is_null() ? nlohmann::json::object() : extra}};
    auto tmp = path + ".tmp";
    {
        auto f = detail::open_out(tmp, true);
        detail::write_container(f, kCheckpointMagic, kCheckpointVersion, header);
        for (std::size_t i = 0; i < m.params.size(); ++i) {
            const auto& v = m.params.value(i);
            f.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
        }
        if (!f) throw FormatError("write failed for '" + path + "'");
    }
    std::filesystem::rename(tmp, path);
}

/// Loads a checkpoint; optionally insists on a specific config fingerprint.
template <class T>
TrainedModel<T> load_checkpoint(const std::string& path, const std::string& expected_fingerprint = {},
                                nlohmann::json* extra = nullptr) {
    auto f = detail::open_in(path, true);
    auto header = detail::read_container(f, kCheckpointMagic, kCheckpointVersion, path);
    TrainedModel<T> m;
    m.config = ModelConfig::from_json(header.at("config"));
    const std::string stored = header.at("fingerprint");
    if (stored != m.config.fingerprint())
        throw FormatError("'" + path + "': config fingerprint mismatch (stored " + stored + ", recomputed " +
                          m.config.fingerprint() + ")");
    if (!expected_fingerprint.empty() && stored != expected_fingerprint)
        throw FormatError("'" + path + "': checkpoint fingerprint " + stored + " does not match expected " + expected_fingerprint);
    for (const auto& [name, st] : header.at("norm").items()) m.norm.stats[name] = {st.at("mean"), st.at("std")};
    m.fallbacks = header.at("fallbacks").get<std::map<std::string, double>>();
    const std::string scalar = header.at("scalar");
    for (const auto& p : header.at("params")) {
        const Eigen::Index rows = p.at("rows"), cols = p.at("cols");
        Matrix<T> v(rows, cols);
        for (Eigen::Index k = 0; k < v.size(); ++k) {
            if (scalar == "float32") v.data()[k] = static_cast<T>(detail::get<float>(f, path));
            else if (scalar == "float64") v.data()[k] = static_cast<T>(detail::get<double>(f, path));
            else throw FormatError("'" + path + "': unknown scalar type '" + scalar + "'");
        }
        m.params.add(p.at("name").template get<std::string>(), std::move(v));
    }
    // shapes must match what this build would create for the config
    auto fresh = TftNetwork<T>(m.config).init_params(0);
    if (fresh.size() != m.params.size()) throw FormatError("'" + path + "': parameter set does not match the model config");
    for (std::size_t i = 0; i < fresh.size(); ++i)
        if (fresh.name(i) != m.params.name(i) || fresh.value(i).rows() != m.params.value(i).rows() ||
            fresh.value(i).cols() != m.params.value(i).cols())
            throw FormatError("'" + path + "': parameter '" + m.params.name(i) + "' does not match the model config");
    if (extra) *extra = header.value("extra", nlohmann::json::object());
    return m;
}

// ---- prediction files ---------------------------------------------------------------

inline std::string quantile_column(double q) { return "q" + std::to_string(static_cast<int>(std::lround(q * 100))); }

/// One row per (subject, target, step). Truth and mask come from the raw windows (original units).
inline std::vector<PredictionRow> prediction_rows(const std::vector<ForecastSet>& forecasts,
                                                  const std::vector<WindowSample>& windows) {
    if (forecasts.size() != windows.size()) throw ShapeError("prediction_rows: forecasts and windows differ in number");
    std::vector<PredictionRow> rows;
    for (std::size_t i = 0; i < forecasts.size(); ++i) {
        const auto& f = forecasts[i];
        const auto& w = windows[i];
        for (std::size_t v = 0; v < f.targets.size(); ++v) {
            const auto& truth = w.targets_future.at(f.targets[v]);
            for (std::size_t t = 0; t < f.horizon; ++t) {
                PredictionRow r;
                r.subject = w.encounter_id;
                r.variable = f.targets[v];
                r.step = static_cast<int>(t) + 1;
                r.truth = truth.values[t];
                r.mask = truth.is_real[t];
                for (std::size_t q = 0; q < f.quantiles.size(); ++q) r.quantiles.push_back(f.at(v, q, t));
                rows.push_back(std::move(r));
            }
        }
    }
    return rows;
}

inline void write_predictions_csv(const std::string& path, const std::vector<PredictionRow>& rows,
                                  const std::vector<double>& quantiles) {
    auto f = detail::open_out(path);
    f << "subject,variable,step,truth,mask";
    for (double q : quantiles) f << ',' << quantile_column(q);
    f << '\n';
    for (const auto& r : rows) {
        if (r.quantiles.size() != quantiles.size()) throw ShapeError("write_predictions_csv: quantile count mismatch");
        f << r.subject << ',' << r.variable << ',' << r.step << ',' << detail::format_number(r.truth) << ','
          << (r.mask ? 1 : 0);
        for (double x : r.quantiles) f << ',' << detail::format_number(x);
        f << '\n';
    }
}

inline std::vector<PredictionRow> read_predictions_csv(const std::string& path, std::vector<double>* quantiles = nullptr) {
    auto f = detail::open_in(path);
    std::string line;
    if (!std::getline(f, line)) throw FormatError(path + ": empty file");
    auto header = detail::split_csv(line);
    const std::vector<std::string> fixed{"subject", "variable", "step", "truth", "mask"};
    if (header.size() < 6 || !std::equal(fixed.begin(), fixed.end(), header.begin()))
        throw FormatError(path + ":1: expected header 'subject,variable,step,truth,mask,q..'");
    std::vector<double> qs;
    for (std::size_t j = 5; j < header.size(); ++j) {
        if (header[j].size() < 2 || header[j][0] != 'q') throw FormatError(path + ":1: bad quantile column '" + header[j] + "'");
        qs.push_back(detail::parse_number(header[j].substr(1), path + ":1") / 100.0);
    }
    if (quantiles) *quantiles = qs;
    std::vector<PredictionRow> rows;
    int lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        auto cols = detail::split_csv(line);
        std::string where = path + ":" + std::to_string(lineno);
        if (cols.size() != header.size()) throw FormatError(where + ": expected " + std::to_string(header.size()) + " columns");
        PredictionRow r;
        r.subject = cols[0];
        r.variable = cols[1];
        r.step = static_cast<int>(detail::parse_number(cols[2], where));
        r.truth = detail::parse_number(cols[3], where);
        if (cols[4] != "0" && cols[4] != "1") throw FormatError(where + ": mask must be 0 or 1");
        r.mask = cols[4] == "1";
        for (std::size_t j = 5; j < cols.size(); ++j) r.quantiles.push_back(detail::parse_number(cols[j], where));
        rows.push_back(std::move(r));
    }
    return rows;
}

/// Quantile cells of a forecast, for crossing_rate.
inline std::vector<std::vector<double>> forecast_cells(const ForecastSet& f) {
    std::vector<std::vector<double>> cells;
    for (std::size_t v = 0; v < f.targets.size(); ++v)
        for (std::size_t t = 0; t < f.horizon; ++t) {
            std::vector<double> c;
            for (std::size_t q = 0; q < f.quantiles.size(); ++q) c.push_back(f.at(v, q, t));
            cells.push_back(std::move(c));
        }
    return cells;
}

inline double crossing_rate(const ForecastSet& f) { return crossing_rate(forecast_cells(f)); }

// ---- small text helpers -------------------------------------------------------------

inline void write_text(const std::string& path, const std::string& text) {
    auto f = detail::open_out(path);
    f << text;
    if (!f) throw FormatError("write failed for '" + path + "'");
}

inline std::string read_text(const std::string& path) {
    auto f = detail::open_in(path);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

} // namespace tftm
