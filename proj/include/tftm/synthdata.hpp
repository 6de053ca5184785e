#pragma once

// Synthetic ICU-like cohort with known dynamics.
//
// Five vitals follow a coupled VAR(1) around an encounter-specific level.
// A binary pressor schedule adds `pressor_effect` to mean BP at the bins where
// it is on, a binary static shifts the pulse level, and every vital is
// observed through per-variable Bernoulli missingness plus measurement noise.

#include <cmath>
#include <cstdio>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "tftm/common.hpp"
#include "tftm/config.hpp"
#include "tftm/timegrid.hpp"

namespace tftm {

struct SynthConfig {
    std::size_t n_encounters = 256;
    std::size_t bins = 100;
    int bin_minutes = 15;
    std::vector<std::string> vitals{"map", "pulse", "spo2", "resp", "temp"};
    std::vector<double> means{75.0, 85.0, 96.0, 18.0, 37.0};
    /// VAR(1) coefficients of the deviations from the encounter level, rows = equations.
    Eigen::MatrixXd ar = default_ar();
    std::vector<double> noise_sd{1.5, 2.0, 0.6, 1.0, 0.1};       ///< innovation sd
    std::vector<double> level_sd{6.0, 6.0, 1.5, 2.0, 0.3};       ///< per-encounter level offset sd
    std::vector<double> obs_noise_sd{0.0, 0.0, 0.0, 0.0, 0.0};   ///< measurement noise sd
    std::vector<double> missing{0.1, 0.1, 0.7, 0.2, 0.5};
    std::string pressor = "pressor";
    double pressor_effect = 5.0;   ///< added to the first vital while the pressor is on
    double treated_fraction = 0.5; ///< encounters that can receive the pressor at all
    double pressor_on_rate = 0.08; ///< per-bin off -> on probability
    double pressor_off_rate = 0.12;
    std::string sex_static = "female";
    std::string age_static = "age";
    double sex_pulse_shift = 8.0;  ///< added to the pulse level when the binary static is 1
    double age_mean = 65.0, age_sd = 12.0;
    std::uint64_t seed = 1;

    static Eigen::MatrixXd default_ar() {
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(5, 5);
        a(0, 0) = 0.8;
        a(0, 1) = 0.1;
        a(1, 1) = 0.85;
        a(2, 2) = 0.3;
        a(2, 3) = 0.6;
        a(3, 3) = 0.9;
        a(4, 4) = 0.95;
        return a;
    }

    std::size_t k() const { return vitals.size(); }

    void validate() const {
        const auto k = vitals.size();
        if (k == 0) throw ConfigError("synth: no vitals");
        if (means.size() != k || noise_sd.size() != k || level_sd.size() != k || obs_noise_sd.size() != k ||
            missing.size() != k)
            throw ConfigError("synth: per-vital vectors must have one entry per vital");
        if (ar.rows() != static_cast<Eigen::Index>(k) || ar.cols() != static_cast<Eigen::Index>(k))
            throw ConfigError("synth: AR matrix must be k x k");
        if (spectral_radius(ar) >= 1.0) throw ConfigError("synth: AR matrix is not stable (spectral radius >= 1)");
        for (double m : missing)
            if (!(m >= 0.0 && m < 1.0)) throw ConfigError("synth: missingness rates must lie in [0, 1)");
        for (const auto* v : {&noise_sd, &level_sd, &obs_noise_sd})
            for (double s : *v)
                if (!(s >= 0.0)) throw ConfigError("synth: standard deviations must be non-negative");
        if (bins == 0 || n_encounters == 0 || bin_minutes <= 0) throw ConfigError("synth: sizes must be positive");
        for (double r : {treated_fraction, pressor_on_rate, pressor_off_rate})
            if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("synth: pressor rates must lie in [0, 1]");
    }

    static double spectral_radius(const Eigen::MatrixXd& a) {
        Eigen::EigenSolver<Eigen::MatrixXd> es(a);
        return es.eigenvalues().cwiseAbs().maxCoeff();
    }

    /// Schema matching the generated data; the pressor is observed or known-future.
    VariableSchema schema(bool pressor_known_future) const {
        std::vector<VariableSpec> vars;
        vars.push_back({sex_static, VariableKind::Binary, VariableRole::Static});
        vars.push_back({age_static, VariableKind::Continuous, VariableRole::Static});
        for (const auto& v : vitals) vars.push_back({v, VariableKind::Continuous, VariableRole::Target});
        vars.push_back({pressor, VariableKind::Binary,
                        pressor_known_future ? VariableRole::KnownFuture : VariableRole::Observed});
        return VariableSchema(std::move(vars));
    }

    /// Overrides from a [synth] config section (keys missing there keep their defaults).
    void apply(const Config& cfg) {
        const ConfigSection* sec = cfg.section("synth");
        if (!sec) return;
        n_encounters = static_cast<std::size_t>(cfg.get_int("synth", "n_encounters", static_cast<long long>(n_encounters)));
        bins = static_cast<std::size_t>(cfg.get_int("synth", "bins", static_cast<long long>(bins)));
        bin_minutes = static_cast<int>(cfg.get_int("synth", "bin_minutes", bin_minutes));
        seed = static_cast<std::uint64_t>(cfg.get_int("synth", "seed", static_cast<long long>(seed)));
        pressor_effect = cfg.get_double("synth", "pressor_effect", pressor_effect);
        treated_fraction = cfg.get_double("synth", "treated_fraction", treated_fraction);
        pressor_on_rate = cfg.get_double("synth", "pressor_on_rate", pressor_on_rate);
        pressor_off_rate = cfg.get_double("synth", "pressor_off_rate", pressor_off_rate);
        sex_pulse_shift = cfg.get_double("synth", "sex_pulse_shift", sex_pulse_shift);
        if (sec->find("missing")) missing = cfg.get_doubles("synth", "missing");
        if (sec->find("noise_sd")) noise_sd = cfg.get_doubles("synth", "noise_sd");
        if (sec->find("level_sd")) level_sd = cfg.get_doubles("synth", "level_sd");
        if (sec->find("obs_noise_sd")) obs_noise_sd = cfg.get_doubles("synth", "obs_noise_sd");
        if (sec->find("ar")) {
            auto flat = cfg.get_doubles("synth", "ar");
            const auto k = static_cast<Eigen::Index>(vitals.size());
            if (static_cast<Eigen::Index>(flat.size()) != k * k)
                throw ConfigError(cfg.where(sec->find("ar")->line) + ": ar needs k*k row-major values");
            for (Eigen::Index i = 0; i < k; ++i)
                for (Eigen::Index j = 0; j < k; ++j) ar(i, j) = flat[static_cast<std::size_t>(i * k + j)];
        }
        validate();
    }
};

struct SynthEncounter {
    std::string id;
    std::map<std::string, double> statics;
    Eigen::MatrixXd latent;        ///< bins x k, noise-free of measurement error, pressor effect included
    std::vector<int> pressor;      ///< per bin 0/1
};

struct SynthCohort {
    std::vector<RawEvent> events;
    std::vector<SynthEncounter> encounters;
};

/// Stationary-start simulation of x_t = c + A x_{t-1} + e_t, e ~ N(0, diag(noise_sd^2)); returns T x k.
inline Eigen::MatrixXd simulate_var1(const Eigen::MatrixXd& A, const Eigen::VectorXd& c, const std::vector<double>& noise_sd,
                                     std::size_t T, std::uint64_t seed, std::size_t burn_in = 200) {
    const auto k = A.rows();
    if (A.cols() != k || c.size() != k || static_cast<Eigen::Index>(noise_sd.size()) != k)
        throw ShapeError("simulate_var1: dimension mismatch");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(k);
    Eigen::MatrixXd out(static_cast<Eigen::Index>(T), k);
    for (std::size_t t = 0; t < T + burn_in; ++t) {
        Eigen::VectorXd e(k);
        for (Eigen::Index i = 0; i < k; ++i) e(i) = noise_sd[static_cast<std::size_t>(i)] * z(rng);
        x = c + A * x + e;
        if (t >= burn_in) out.row(static_cast<Eigen::Index>(t - burn_in)) = x.transpose();
    }
    return out;
}

/**
 * @brief Generates a cohort. Each encounter draws from its own seed stream
 * (derived from the config seed and its index), so results do not depend on
 * generation order.
 *
 * Pressor events are emitted at every bin start (value 0 or 1), which pins
 * every grid to t = 0. Vital events land uniformly inside their bin.
 */
inline SynthCohort generate_cohort(const SynthConfig& cfg) {
    cfg.validate();
    const auto k = static_cast<Eigen::Index>(cfg.k());
    SynthCohort out;
    for (std::size_t e = 0; e < cfg.n_encounters; ++e) {
        std::uint64_t state = cfg.seed * 0x100000001b3ull + e;
        std::mt19937_64 rng(detail::splitmix64(state));
        std::normal_distribution<double> z(0.0, 1.0);
        std::uniform_real_distribution<double> u(0.0, 1.0);

        SynthEncounter enc;
        char buf[32];
        std::snprintf(buf, sizeof buf, "enc%05zu", e);
        enc.id = buf;
        const bool female = u(rng) < 0.5;
        enc.statics[cfg.sex_static] = female ? 1.0 : 0.0;
        enc.statics[cfg.age_static] = std::round(cfg.age_mean + cfg.age_sd * z(rng));

        Eigen::VectorXd level(k);
        for (Eigen::Index i = 0; i < k; ++i)
            level(i) = cfg.means[static_cast<std::size_t>(i)] + cfg.level_sd[static_cast<std::size_t>(i)] * z(rng);
        if (k > 1 && female) level(1) += cfg.sex_pulse_shift;

        const bool treated = u(rng) < cfg.treated_fraction;
        int on = treated && u(rng) < cfg.pressor_on_rate / std::max(1e-12, cfg.pressor_on_rate + cfg.pressor_off_rate);
        Eigen::VectorXd dev = Eigen::VectorXd::Zero(k);
        // start from the stationary distribution of the deviations (approximately, by burn-in)
        for (int b = 0; b < 50; ++b) {
            Eigen::VectorXd eps(k);
            for (Eigen::Index i = 0; i < k; ++i) eps(i) = cfg.noise_sd[static_cast<std::size_t>(i)] * z(rng);
            dev = cfg.ar * dev + eps;
        }
        enc.latent.resize(static_cast<Eigen::Index>(cfg.bins), k);
        for (std::size_t t = 0; t < cfg.bins; ++t) {
            if (t > 0) {
                Eigen::VectorXd eps(k);
                for (Eigen::Index i = 0; i < k; ++i) eps(i) = cfg.noise_sd[static_cast<std::size_t>(i)] * z(rng);
                dev = cfg.ar * dev + eps;
                if (treated) {
                    double flip = u(rng);
                    if (on && flip < cfg.pressor_off_rate) on = 0;
                    else if (!on && flip < cfg.pressor_on_rate) on = 1;
                }
            }
            enc.pressor.push_back(on);
            Eigen::VectorXd x = level + dev;
            x(0) += on ? cfg.pressor_effect : 0.0;
            enc.latent.row(static_cast<Eigen::Index>(t)) = x.transpose();

            const double t0 = static_cast<double>(t) * cfg.bin_minutes;
            out.events.push_back({enc.id, cfg.pressor, t0, static_cast<double>(on)});
            for (Eigen::Index i = 0; i < k; ++i) {
                const auto iu = static_cast<std::size_t>(i);
                double draw = u(rng), jitter = u(rng), noise = z(rng);
                if (draw < cfg.missing[iu]) continue;
                out.events.push_back({enc.id, cfg.vitals[iu], t0 + jitter * cfg.bin_minutes * 0.999,
                                      x(i) + cfg.obs_noise_sd[iu] * noise});
            }
        }
        out.encounters.push_back(std::move(enc));
    }
    return out;
}

} // namespace tftm
