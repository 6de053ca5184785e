#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <unistd.h>

#include "tftm/baselines.hpp"
#include "tftm/config.hpp"
#include "tftm/io.hpp"
#include "tftm/pipeline.hpp"
#include "tftm/synthdata.hpp"
#include "tftm/timegrid.hpp"

using namespace tftm;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("tftm_data_" + std::to_string(::getpid())) / name;
    fs::create_directories(p.parent_path());
    return p;
}

VariableSchema vitals_schema() {
    return VariableSchema({{"female", VariableKind::Binary, VariableRole::Static},
                           {"age", VariableKind::Continuous, VariableRole::Static},
                           {"pulse", VariableKind::Continuous, VariableRole::Target},
                           {"temp", VariableKind::Continuous, VariableRole::Target},
                           {"pressor", VariableKind::Binary, VariableRole::KnownFuture}});
}

EncounterGrid grid_of_length(const std::string& id, std::size_t bins, const VariableSchema& schema) {
    EncounterGrid g;
    g.encounter_id = id;
    g.statics = {{"female", 1.0}, {"age", 60.0}};
    for (const auto& n : schema.temporal()) {
        MaskedSeries s(bins);
        for (std::size_t i = 0; i < bins; ++i) {
            s.values[i] = static_cast<double>(i);
            s.is_real[i] = true;
        }
        g.series[n] = s;
    }
    return g;
}

} // namespace

// ---- config -----------------------------------------------------------------------

TEST(Config, ParsesSectionsCommentsAndTypes) {
    auto cfg = Config::parse("# top\n[data]\npast_len = 12   # inline\nratio=0.5\n\n[synth]\nmissing = 0.1 0.2\n", "x.ini");
    EXPECT_EQ(cfg.get_int("data", "past_len"), 12);
    EXPECT_EQ(cfg.get_double("data", "ratio"), 0.5);
    EXPECT_EQ(cfg.get_doubles("synth", "missing"), (std::vector<double>{0.1, 0.2}));
    EXPECT_EQ(cfg.get_int("data", "absent", 7), 7);
    EXPECT_TRUE(cfg.has("data", "ratio"));
    EXPECT_FALSE(cfg.has("model", "ratio"));
}

TEST(Config, ErrorsNameTheLine) {
    auto message = [](const std::string& text) {
        try {
            Config::parse(text, "bad.ini");
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
        return std::string("no error");
    };
    EXPECT_NE(message("[data]\npast_len 12\n").find("bad.ini:2"), std::string::npos);
    EXPECT_NE(message("[data\n").find("bad.ini:1"), std::string::npos);
    EXPECT_NE(message("x = 1\n").find("bad.ini:1"), std::string::npos);
    EXPECT_NE(message("[a]\nk=1\n\n[a]\n").find("bad.ini:4"), std::string::npos);
    EXPECT_NE(message("[a]\nk=1\nk=2\n").find("bad.ini:3"), std::string::npos);

    auto cfg = Config::parse("[data]\n\npast_len = twelve\n", "t.ini");
    try {
        cfg.get_int("data", "past_len");
        FAIL() << "expected a ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("t.ini:3"), std::string::npos);
    }
    EXPECT_THROW(cfg.get_int("data", "horizon"), ConfigError);
}

TEST(Config, SchemaSectionErrorsAreLinePrecise) {
    auto cfg = Config::parse("[schema]\nmap = continuous target\npressor = binary sometimes\n", "s.ini");
    try {
        VariableSchema::from_config(cfg);
        FAIL() << "expected a ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("s.ini:3"), std::string::npos);
    }
    auto no_target = Config::parse("[schema]\nage = continuous static\n", "n.ini");
    EXPECT_THROW(VariableSchema::from_config(no_target), ConfigError);
}

TEST(Settings, RelativePathsResolveAgainstTheConfigDirectory) {
    auto dir = scratch("cfgdir");
    fs::create_directories(dir);
    std::ofstream(dir / "run.ini") << "[data]\nout_dir = out\nevents = ../ev.csv\n[schema]\nmap = continuous target\n";
    auto s = Settings::load((dir / "run.ini").string());
    EXPECT_EQ(fs::path(s.out_dir), (dir / "out").lexically_normal());
    EXPECT_EQ(fs::path(s.events), (dir / "../ev.csv").lexically_normal());
    EXPECT_EQ(s.past_len, 75);
    EXPECT_EQ(s.horizon, 25);
}

// ---- timegrid ---------------------------------------------------------------------

TEST(Resample, ContinuousMeanAndEmptyBins) {
    VariableSchema schema({{"pulse", VariableKind::Continuous, VariableRole::Target},
                           {"temp", VariableKind::Continuous, VariableRole::Observed}});
    std::vector<RawEvent> ev{{"e", "pulse", 0, 10}, {"e", "pulse", 5, 20}, {"e", "pulse", 10, 30}, {"e", "pulse", 20, 1}};
    auto s = resample(ev, schema, 15);
    EXPECT_EQ(s["pulse"].values[0], 20.0);
    EXPECT_TRUE(s["pulse"].is_real[0]);
    ASSERT_EQ(s["temp"].size(), 2u);
    EXPECT_FALSE(s["temp"].is_real[0]);
    EXPECT_FALSE(s["temp"].is_real[1]);
    EXPECT_TRUE(std::isnan(s["temp"].values[0]));
}

TEST(Resample, CategoricalMedianRoundsUp) {
    VariableSchema schema({{"map", VariableKind::Continuous, VariableRole::Target},
                           {"pressor", VariableKind::Binary, VariableRole::Observed}});
    auto s = resample({{"e", "pressor", 2, 1}, {"e", "pressor", 9, 0}, {"e", "pressor", 12, 1}}, schema, 15);
    EXPECT_EQ(s["pressor"].values[0], 1.0);
    auto tie = resample({{"e", "pressor", 2, 1}, {"e", "pressor", 9, 0}}, schema, 15);
    EXPECT_EQ(tie["pressor"].values[0], 1.0);
}

TEST(Resample, RejectsBadEvents) {
    VariableSchema schema({{"map", VariableKind::Continuous, VariableRole::Target},
                           {"age", VariableKind::Continuous, VariableRole::Static}});
    EXPECT_THROW(resample({{"e", "nope", 0, 1}}, schema), SchemaError);
    EXPECT_THROW(resample({{"e", "map", 0, std::nan("")}}, schema), SchemaError);
    EXPECT_THROW(resample({{"e", "map", -1, 1}}, schema), SchemaError);
    EXPECT_THROW(resample({{"e", "age", 0, 1}}, schema), SchemaError);
    EXPECT_THROW(resample({{"e", "map", 0, 1}}, schema, 0), ConfigError);
}

TEST(Resample, ConservesMass) {
    VariableSchema schema({{"map", VariableKind::Continuous, VariableRole::Target}});
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> t(0, 600), v(40, 120);
    std::vector<RawEvent> ev;
    double raw = 0;
    for (int i = 0; i < 500; ++i) {
        ev.push_back({"e", "map", t(rng), v(rng)});
        raw += ev.back().value;
    }
    auto s = resample(ev, schema, 15);
    double anchor = ev.front().timestamp;
    for (const auto& e : ev) anchor = std::min(anchor, e.timestamp);
    std::vector<int> counts(s["map"].size(), 0);
    for (const auto& e : ev) ++counts[static_cast<std::size_t>(std::floor((e.timestamp - anchor) / 15))];
    double mass = 0;
    for (std::size_t k = 0; k < counts.size(); ++k)
        if (counts[k]) mass += s["map"].values[k] * counts[k];
    EXPECT_NEAR(mass, raw, 1e-9 * raw);
}

TEST(Resample, GridIsAnchoredAtTheFirstEvent) {
    VariableSchema schema({{"map", VariableKind::Continuous, VariableRole::Target}});
    auto s = resample({{"e", "map", 100, 1}, {"e", "map", 114, 3}, {"e", "map", 115, 5}}, schema, 15);
    ASSERT_EQ(s["map"].size(), 2u);
    EXPECT_EQ(s["map"].values[0], 2.0);
    EXPECT_EQ(s["map"].values[1], 5.0);
}

TEST(ForwardFill, Examples) {
    MaskedSeries s({kMissing, 5, kMissing, kMissing, 9}, {false, true, false, false, true});
    auto f = forward_fill(s, 7);
    EXPECT_EQ(f.values, (std::vector<double>{7, 5, 5, 5, 9}));
    EXPECT_EQ(f.is_real, s.is_real);
    auto empty = forward_fill(MaskedSeries(4), 3);
    EXPECT_EQ(empty.values, std::vector<double>(4, 3.0));
    EXPECT_EQ(empty.real_count(), 0u);
    MaskedSeries full({1, 2, 3}, {true, true, true});
    EXPECT_EQ(forward_fill(full, 0), full);
}

TEST(BuildWindows, LengthsDropsAndIndexing) {
    auto schema = vitals_schema();
    std::vector<EncounterGrid> grids{grid_of_length("a", 100, schema), grid_of_length("b", 80, schema)};
    auto r = build_windows(grids, schema, 75, 25);
    ASSERT_EQ(r.windows.size(), 1u);
    EXPECT_EQ(r.dropped_short, 1u);
    EXPECT_EQ(r.dropped_ids, std::vector<std::string>{"b"});
    EXPECT_EQ(r.windows[0].past_len(), 75u);
    EXPECT_EQ(r.windows[0].horizon(), 25u);

    auto r12 = build_windows(grids, schema, 12, 25);
    ASSERT_EQ(r12.windows.size(), 2u);
    const auto& w = r12.windows[0];
    EXPECT_EQ(w.past.at("pulse").values.front(), 0.0);
    EXPECT_EQ(w.past.at("pulse").values.back(), 11.0);
    EXPECT_EQ(w.targets_future.at("pulse").values.front(), 12.0);
    EXPECT_EQ(w.targets_future.at("pulse").values.back(), 36.0);
    EXPECT_EQ(w.future_known.at("pressor").size(), 25u);
    EXPECT_EQ(w.past.count("pressor"), 1u);
}

TEST(BuildWindows, MissingStatics) {
    auto schema = vitals_schema();
    auto g1 = grid_of_length("a", 40, schema);
    g1.statics["female"] = kMissing;
    auto g2 = grid_of_length("b", 40, schema);
    g2.statics["age"] = kMissing;
    auto r = build_windows({g1, g2}, schema, 12, 25);
    ASSERT_EQ(r.windows.size(), 1u);
    EXPECT_EQ(r.windows[0].statics.at("female"), 0.0);
    EXPECT_EQ(r.dropped_missing_static, 1u);
}

TEST(SplitCohort, SizesDeterminismAndPartition) {
    std::vector<int> ids(10);
    for (int i = 0; i < 10; ++i) ids[i] = i;
    auto [tr, te] = split_cohort(ids, 0.8, 5);
    EXPECT_EQ(tr.size(), 8u);
    EXPECT_EQ(te.size(), 2u);
    auto again = split_cohort(ids, 0.8, 5);
    EXPECT_EQ(again.first, tr);
    EXPECT_EQ(again.second, te);
    auto half = split_cohort(std::vector<int>{1, 2, 3, 4}, 0.5, 1);
    EXPECT_EQ(half.first.size(), 2u);
    bool differs = false;
    for (std::uint64_t seed = 6; seed < 16; ++seed) {
        auto other = split_cohort(ids, 0.8, seed);
        std::set<int> all(other.first.begin(), other.first.end());
        all.insert(other.second.begin(), other.second.end());
        EXPECT_EQ(all.size(), 10u);
        differs |= other.first != tr;
    }
    EXPECT_TRUE(differs);
    EXPECT_THROW(split_cohort(std::vector<int>{1}, 0.8, 1), ConfigError);
    EXPECT_THROW(split_cohort(ids, 1.0, 1), ConfigError);
}

TEST(Normalizer, ConstantSymmetricAndRoundTrip) {
    VariableSchema schema({{"map", VariableKind::Continuous, VariableRole::Target},
                           {"temp", VariableKind::Continuous, VariableRole::Target},
                           {"pressor", VariableKind::Binary, VariableRole::Observed}});
    WindowSample w;
    w.encounter_id = "a";
    w.past["map"] = MaskedSeries({0, 10, 99}, {true, true, false});
    w.past["temp"] = MaskedSeries({37, 37, 37}, {true, true, true});
    w.past["pressor"] = MaskedSeries({0, 1, 1}, {true, true, true});
    w.targets_future["map"] = MaskedSeries({kMissing}, {false});
    w.targets_future["temp"] = MaskedSeries({37}, {true});
    auto ns = fit_normalizer({w}, schema);
    EXPECT_EQ(ns.stats.at("map").mean, 5.0);
    EXPECT_DOUBLE_EQ(ns.stats.at("map").std, std::sqrt(50.0));
    EXPECT_EQ(ns.stats.at("temp").std, 1.0);
    EXPECT_FALSE(ns.has("pressor"));
    auto z = apply_normalizer(w, ns);
    EXPECT_DOUBLE_EQ(z.past["map"].values[0], -z.past["map"].values[1]);
    EXPECT_EQ(z.past["temp"].values[0], 0.0);
    EXPECT_EQ(z.past["pressor"].values, w.past["pressor"].values);
    EXPECT_EQ(z.past["map"].is_real, w.past["map"].is_real);
    auto back = invert_normalizer(z, ns);
    for (std::size_t i = 0; i < 3; ++i)
        EXPECT_NEAR(back.past["map"].values[i], w.past["map"].values[i], 1e-9 * std::max(1.0, std::abs(w.past["map"].values[i])));
    EXPECT_THROW(fit_normalizer({}, schema), ConfigError);
}

TEST(Fallbacks, MedianForContinuousZeroForBinary) {
    VariableSchema schema({{"map", VariableKind::Continuous, VariableRole::Target},
                           {"pressor", VariableKind::Binary, VariableRole::KnownFuture}});
    WindowSample w;
    w.past["map"] = MaskedSeries({kMissing, 4, 8}, {false, true, true});
    w.past["pressor"] = MaskedSeries({kMissing, kMissing, 1}, {false, false, true});
    w.targets_future["map"] = MaskedSeries({1, kMissing}, {true, false});
    w.future_known["pressor"] = {kMissing, 1};
    auto fb = fit_fallbacks({w}, schema);
    EXPECT_EQ(fb.at("map"), 4.0);
    EXPECT_EQ(fb.at("pressor"), 0.0);
    auto filled = fill_window(w, fb);
    EXPECT_EQ(filled.past["map"].values, (std::vector<double>{4, 4, 8}));
    EXPECT_EQ(filled.past["pressor"].values, (std::vector<double>{0, 0, 1}));
    EXPECT_EQ(filled.targets_future["map"].values, (std::vector<double>{1, 1}));
    EXPECT_EQ(filled.targets_future["map"].is_real, (std::vector<bool>{true, false}));
    EXPECT_EQ(filled.future_known["pressor"], (std::vector<double>{1, 1}));
}

// ---- synthdata --------------------------------------------------------------------

TEST(Synth, SeedDeterminismIsByteIdentical) {
    SynthConfig sc;
    sc.n_encounters = 20;
    auto a = scratch("a.csv"), b = scratch("b.csv");
    write_events_csv(a.string(), generate_cohort(sc).events);
    write_events_csv(b.string(), generate_cohort(sc).events);
    EXPECT_EQ(read_text(a.string()), read_text(b.string()));
    sc.seed = 2;
    write_events_csv(b.string(), generate_cohort(sc).events);
    EXPECT_NE(read_text(a.string()), read_text(b.string()));
}

TEST(Synth, ConstantCaseIsConstant) {
    SynthConfig sc;
    sc.n_encounters = 3;
    sc.ar.setZero();
    for (auto* v : {&sc.noise_sd, &sc.level_sd}) std::fill(v->begin(), v->end(), 0.0);
    sc.pressor_effect = 0;
    sc.sex_pulse_shift = 0;
    for (const auto& e : generate_cohort(sc).encounters)
        for (Eigen::Index i = 0; i < e.latent.cols(); ++i)
            EXPECT_EQ(e.latent.col(i).maxCoeff(), e.latent.col(i).minCoeff());
}

TEST(Synth, NoMissingnessReproducesLatentValues) {
    SynthConfig sc;
    sc.n_encounters = 5;
    std::fill(sc.missing.begin(), sc.missing.end(), 0.0);
    auto cohort = generate_cohort(sc);
    auto grids = grids_from_events(cohort.events, statics_of(cohort), sc.schema(false), sc.bin_minutes);
    for (std::size_t e = 0; e < grids.size(); ++e)
        for (std::size_t v = 0; v < sc.vitals.size(); ++v) {
            const auto& s = grids[e].series.at(sc.vitals[v]);
            ASSERT_EQ(s.size(), sc.bins);
            for (std::size_t t = 0; t < sc.bins; ++t) {
                EXPECT_TRUE(s.is_real[t]);
                EXPECT_EQ(s.values[t], cohort.encounters[e].latent(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(v)));
            }
        }
}

TEST(Synth, MissingnessRateMatchesConfiguration) {
    SynthConfig sc;
    sc.n_encounters = 1000;
    auto cohort = generate_cohort(sc);
    std::map<std::string, double> counts;
    for (const auto& e : cohort.events) counts[e.variable] += 1;
    const double total = static_cast<double>(sc.n_encounters * sc.bins);
    for (std::size_t v = 0; v < sc.vitals.size(); ++v)
        EXPECT_NEAR(1.0 - counts[sc.vitals[v]] / total, sc.missing[v], 0.01) << sc.vitals[v];
}

TEST(Synth, PressorShiftsMeanBpByDelta) {
    SynthConfig sc;
    sc.n_encounters = 2000;
    sc.treated_fraction = 1.0;
    sc.pressor_on_rate = 0.5;
    sc.pressor_off_rate = 0.5;
    auto cohort = generate_cohort(sc);
    std::vector<double> diffs;
    for (const auto& e : cohort.encounters) {
        double s1 = 0, s0 = 0, n1 = 0, n0 = 0;
        for (std::size_t t = 0; t < sc.bins; ++t) {
            double x = e.latent(static_cast<Eigen::Index>(t), 0);
            if (e.pressor[t]) {
                s1 += x;
                ++n1;
            } else {
                s0 += x;
                ++n0;
            }
        }
        if (n1 > 0 && n0 > 0) diffs.push_back(s1 / n1 - s0 / n0);
    }
    ASSERT_GT(diffs.size(), 1000u);
    double m = 0, ss = 0;
    for (double d : diffs) m += d;
    m /= static_cast<double>(diffs.size());
    for (double d : diffs) ss += (d - m) * (d - m);
    double se = std::sqrt(ss / static_cast<double>(diffs.size() - 1) / static_cast<double>(diffs.size()));
    EXPECT_NEAR(m, sc.pressor_effect, 3 * se);
}

TEST(Synth, FittedVarRecoversConfiguredDynamics) {
    Eigen::MatrixXd A = SynthConfig::default_ar();
    SynthConfig sc;
    std::vector<double> sd = sc.noise_sd;
    auto x = simulate_var1(A, Eigen::VectorXd::Zero(5), sd, 10000, 99);
    auto m = fit_var(x, 1);
    for (Eigen::Index i = 0; i < 5; ++i)
        for (Eigen::Index j = 0; j < 5; ++j)
            EXPECT_LT(std::abs(m.A[0](i, j) - A(i, j)), 4 * m.std_errors(1 + j, i)) << i << "," << j;
}

TEST(Synth, RejectsUnstableOrInvalidConfig) {
    SynthConfig sc;
    sc.ar(0, 0) = 1.2;
    EXPECT_THROW(generate_cohort(sc), ConfigError);
    SynthConfig m;
    m.missing[0] = 1.0;
    EXPECT_THROW(m.validate(), ConfigError);
    auto cfg = Config::parse("[synth]\nar = 1 2 3\n", "syn.ini");
    SynthConfig fromcfg;
    EXPECT_THROW(fromcfg.apply(cfg), ConfigError);
}

// ---- file formats -----------------------------------------------------------------

TEST(Files, EventsAndStaticsRoundTrip) {
    SynthConfig sc;
    sc.n_encounters = 4;
    auto cohort = generate_cohort(sc);
    auto ev = scratch("ev.csv"), st = scratch("st.csv");
    write_events_csv(ev.string(), cohort.events);
    write_statics_csv(st.string(), {"female", "age"}, statics_of(cohort));
    auto back = read_events_csv(ev.string());
    ASSERT_EQ(back.size(), cohort.events.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        EXPECT_EQ(back[i].timestamp, cohort.events[i].timestamp);
        EXPECT_EQ(back[i].value, cohort.events[i].value);
        EXPECT_EQ(back[i].variable, cohort.events[i].variable);
    }
    EXPECT_EQ(read_statics_csv(st.string()), statics_of(cohort));
}

TEST(Files, MalformedCsvIsAFormatError) {
    auto p = scratch("bad.csv");
    std::ofstream(p) << "encounter_id,variable,timestamp_minutes,value\ne1,map,abc,3\n";
    try {
        read_events_csv(p.string());
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos);
    }
    std::ofstream(p) << "id,var,t,v\n";
    EXPECT_THROW(read_events_csv(p.string()), FormatError);
    EXPECT_THROW(read_events_csv(scratch("missing.csv").string()), FormatError);
}

TEST(Files, DatasetRoundTripAndVersionRefusal) {
    SynthConfig sc;
    sc.n_encounters = 12;
    sc.bins = 40;
    auto ds = synth_split_dataset(sc, sc.schema(true), 12, 25);
    auto p = scratch("ds.tftm");
    save_dataset(p.string(), ds);
    auto back = load_dataset(p.string());
    ASSERT_EQ(back.train.windows.size(), ds.train.windows.size());
    ASSERT_EQ(back.test.windows.size(), ds.test.windows.size());
    for (std::size_t i = 0; i < ds.test.windows.size(); ++i) {
        const auto& a = ds.test.windows[i];
        const auto& b = back.test.windows[i];
        EXPECT_EQ(a.encounter_id, b.encounter_id);
        EXPECT_EQ(a.statics, b.statics);
        EXPECT_EQ(a.past, b.past);
        EXPECT_EQ(a.targets_future, b.targets_future);
        EXPECT_EQ(a.future_known, b.future_known);
    }
    EXPECT_EQ(back.train.schema.past_inputs(), ds.train.schema.past_inputs());

    auto bytes = read_text(p.string());
    bytes[8] = static_cast<char>(bytes[8] + 1);
    write_text(p.string(), bytes);
    EXPECT_THROW(load_dataset(p.string()), FormatError);
    write_text(p.string(), "not a dataset");
    EXPECT_THROW(load_dataset(p.string()), FormatError);
}

TEST(Files, PredictionsRoundTrip) {
    std::vector<PredictionRow> rows{{"s1", "map", 1, 70.5, true, {60, 70, 80}}, {"s1", "map", 2, kMissing, false, {61, 71, 81}}};
    auto p = scratch("pred.csv");
    write_predictions_csv(p.string(), rows, {0.1, 0.5, 0.9});
    std::vector<double> qs;
    auto back = read_predictions_csv(p.string(), &qs);
    EXPECT_EQ(qs, (std::vector<double>{0.1, 0.5, 0.9}));
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].truth, 70.5);
    EXPECT_TRUE(std::isnan(back[1].truth));
    EXPECT_FALSE(back[1].mask);
    EXPECT_EQ(back[1].quantiles, rows[1].quantiles);
    EXPECT_EQ(read_text(p.string()).substr(0, 35), "subject,variable,step,truth,mask,q1");
}

TEST(Prepare, DropsReportedAndWindowsBuilt) {
    SynthConfig sc;
    sc.n_encounters = 10;
    sc.bins = 40;
    auto cohort = generate_cohort(sc);
    WindowBuildResult drops;
    auto ds = make_split_dataset(cohort.events, statics_of(cohort), sc.schema(false), 15, 12, 25, 0.8, 7, &drops);
    EXPECT_EQ(drops.dropped_short, 0u);
    EXPECT_EQ(ds.train.windows.size(), 8u);
    EXPECT_EQ(ds.test.windows.size(), 2u);
    EXPECT_EQ(ds.train.past_len, 12u);
    sc.bins = 30;
    auto short_cohort = generate_cohort(sc);
    EXPECT_THROW(make_split_dataset(short_cohort.events, statics_of(short_cohort), sc.schema(false), 15, 12, 25, 0.8, 7),
                 ConfigError);
}
