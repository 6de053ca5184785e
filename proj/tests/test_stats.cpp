#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "tftm/baselines.hpp"
#include "tftm/metrics.hpp"
#include "tftm/objective.hpp"
#include "tftm/synthdata.hpp"

using namespace tftm;
using Mat = ad::Matrix<double>;

namespace {

Mat mat(Eigen::Index r, Eigen::Index c, std::initializer_list<double> xs) {
    Mat m(r, c);
    auto it = xs.begin();
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = *it++;
    return m;
}

/// Two-sided Student t tail by Simpson integration of the density (independent of Boost).
double t_tail_by_quadrature(double t, double df, int intervals = 200000) {
    const double logc = std::lgamma((df + 1) / 2) - std::lgamma(df / 2) - 0.5 * std::log(df * M_PI);
    auto f = [&](double x) { return std::exp(logc - (df + 1) / 2 * std::log1p(x * x / df)); };
    const double a = 0.0, b = std::abs(t), h = (b - a) / intervals;
    double s = f(a) + f(b);
    for (int i = 1; i < intervals; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return 1.0 - 2.0 * (s * h / 3.0);
}

} // namespace

// ---- objective --------------------------------------------------------------------

TEST(QuantileLoss, HandExamples) {
    EXPECT_EQ(quantile_loss(1.0, 1.0, 0.5), 0.0);
    EXPECT_DOUBLE_EQ(quantile_loss(2.0, 0.0, 0.9), 1.8);
    EXPECT_DOUBLE_EQ(quantile_loss(0.0, 2.0, 0.9), 0.2);
}

TEST(QuantileLoss, NonNegativeAndZeroOnlyAtTruth) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> z;
    for (int i = 0; i < 1000; ++i) {
        double y = z(rng), yh = z(rng);
        for (double q : {0.1, 0.5, 0.9}) {
            EXPECT_GE(quantile_loss(y, yh, q), 0.0);
            EXPECT_GT(quantile_loss(y, yh, q), 0.0);
            EXPECT_EQ(quantile_loss(y, y, q), 0.0);
        }
    }
}

TEST(MaskedLoss, AllMaskedIsZero) {
    Mat pred = Mat::Random(4, 3), y = Mat::Random(4, 1), m = Mat::Zero(4, 1);
    auto lb = masked_loss<double>(pred, y, m, 2, {0.1, 0.5, 0.9});
    EXPECT_EQ(lb.total, 0.0);
    EXPECT_EQ(lb.real_counts, std::vector<std::size_t>{0});
}

TEST(MaskedLoss, HandEvaluatedSample) {
    auto lb = masked_loss<double>(mat(2, 1, {1, 1}), mat(2, 1, {1, 3}), mat(2, 1, {1, 1}), 2, {0.5});
    EXPECT_DOUBLE_EQ(lb.total, 0.5);
    EXPECT_EQ(lb.real_counts[0], 2u);
}

TEST(MaskedLoss, PerturbingMaskedPositionsIsBitExact) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> z;
    const std::size_t H = 5, B = 3;
    const Eigen::Index V = 2, Q = 3;
    Mat pred(B * H, V * Q), y(B * H, V), m(B * H, V);
    for (Eigen::Index i = 0; i < pred.size(); ++i) pred.data()[i] = z(rng);
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        y.data()[i] = z(rng);
        m.data()[i] = z(rng) > 0 ? 1 : 0;
    }
    const auto base = masked_loss<double>(pred, y, m, H, {0.1, 0.5, 0.9});
    Mat pred2 = pred, y2 = y;
    for (Eigen::Index r = 0; r < y.rows(); ++r)
        for (Eigen::Index v = 0; v < V; ++v)
            if (m(r, v) == 0) {
                y2(r, v) = 1e6 * z(rng);
                for (Eigen::Index q = 0; q < Q; ++q) pred2(r, v * Q + q) = -1e6 * z(rng);
            }
    const auto other = masked_loss<double>(pred2, y2, m, H, {0.1, 0.5, 0.9});
    EXPECT_EQ(base.total, other.total);
    EXPECT_EQ(base.per_variable, other.per_variable);
}

TEST(MaskedLoss, ScalesLinearlyAndBreakdownSums) {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> z;
    Mat pred(12, 6), y(12, 2), m(12, 2);
    for (Eigen::Index i = 0; i < pred.size(); ++i) pred.data()[i] = z(rng);
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        y.data()[i] = z(rng);
        m.data()[i] = z(rng) > -0.5 ? 1 : 0;
    }
    const std::vector<double> qs{0.1, 0.5, 0.9};
    auto base = masked_loss<double>(pred, y, m, 4, qs);
    auto x4 = masked_loss<double>(Mat(4 * pred), Mat(4 * y), m, 4, qs);
    EXPECT_EQ(x4.total, 4 * base.total);
    auto x3 = masked_loss<double>(Mat(3 * pred), Mat(3 * y), m, 4, qs);
    EXPECT_NEAR(x3.total, 3 * base.total, 1e-12 * base.total);
    double sv = 0, sq = 0;
    for (double x : base.per_variable) sv += x;
    for (double x : base.per_quantile) sq += x;
    EXPECT_DOUBLE_EQ(sv, base.total);
    EXPECT_NEAR(sq, base.total, 1e-12);
    auto sum = masked_loss<double>(pred, y, m, 4, qs, Reduction::Sum);
    EXPECT_NEAR(sum.total, 3 * base.total, 1e-12);
}

TEST(MaskedLoss, ZeroExactlyWhenPredictionsMatchRealTargets) {
    Mat y = mat(4, 1, {1, 2, 3, 4}), m = mat(4, 1, {1, 0, 1, 1});
    Mat pred(4, 3);
    for (int q = 0; q < 3; ++q) pred.col(q) = y.col(0);
    pred(1, 0) = 100;
    EXPECT_EQ(masked_loss<double>(pred, y, m, 2, {0.1, 0.5, 0.9}).total, 0.0);
    pred(2, 1) += 1e-9;
    EXPECT_GT(masked_loss<double>(pred, y, m, 2, {0.1, 0.5, 0.9}).total, 0.0);
}

TEST(MaskedLoss, ShapeMismatchThrows) {
    EXPECT_THROW(masked_loss<double>(Mat::Zero(4, 2), Mat::Zero(4, 1), Mat::Zero(4, 1), 2, {0.1, 0.5, 0.9}), ShapeError);
    EXPECT_THROW(masked_loss<double>(Mat::Zero(5, 3), Mat::Zero(5, 1), Mat::Zero(5, 1), 2, {0.1, 0.5, 0.9}), ShapeError);
}

TEST(MaskedLoss, ConstantScanMinimizerIsEmpiricalQuantile) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> z;
    std::vector<double> xs(1001);
    for (double& x : xs) x = z(rng);
    std::vector<double> sorted = xs;
    std::sort(sorted.begin(), sorted.end());
    for (double q : {0.1, 0.5, 0.9}) {
        std::size_t best = 0;
        double best_loss = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < sorted.size(); ++c) {
            double s = 0;
            for (double x : xs) s += quantile_loss(x, sorted[c], q);
            if (s < best_loss) {
                best_loss = s;
                best = c;
            }
        }
        auto expected = static_cast<std::size_t>(std::ceil(q * 1001.0)) - 1;
        EXPECT_EQ(best, expected) << "q=" << q;
    }
}

// ---- metrics ----------------------------------------------------------------------

TEST(MaskedMae, Examples) {
    EXPECT_DOUBLE_EQ(*masked_mae({1, 6, 9}, {2, 4, kMissing}, {true, true, false}), 1.5);
    EXPECT_EQ(*masked_mae({1, 2, 3}, {1, 2, 3}, {true, true, true}), 0.0);
    EXPECT_FALSE(masked_mae({1, 2}, {3, 4}, {false, false}).has_value());
    EXPECT_THROW(masked_mae({1}, {1, 2}, {true, true}), ShapeError);
}

TEST(MaskedMape, Examples) {
    EXPECT_DOUBLE_EQ(*masked_mape({9}, {10}, {true}).percent, 10.0);
    auto zero = masked_mape({5}, {0}, {true});
    EXPECT_FALSE(zero.percent.has_value());
    EXPECT_EQ(zero.excluded_zero_truth, 1u);
    EXPECT_DOUBLE_EQ(*masked_mape({5, 6}, {4, 8}, {true, true}).percent, 25.0);
}

TEST(Coverage, WideBandsBoundaryAndEmpty) {
    EXPECT_EQ(*coverage_fraction({-1e9, -1e9}, {1e9, 1e9}, {3, 4}, {true, true}), 1.0);
    EXPECT_EQ(*coverage_fraction({1, 0}, {2, 1}, {1, 1}, {true, true}), 1.0);
    EXPECT_EQ(*coverage_fraction({1, 2}, {2, 3}, {5, 2.5}, {true, true}), 0.5);
    EXPECT_FALSE(coverage_fraction({0}, {1}, {0.5}, {false}).has_value());
}

TEST(Coverage, SubjectsWithoutRealPointsAreExcluded) {
    std::vector<CoverageBand> bands{{"a", {0, 0}, {1, 1}, {0.5, 2}, {true, true}},
                                    {"b", {0}, {1}, {0.5}, {false}},
                                    {"c", {0}, {1}, {0.5}, {true}}};
    auto s = coverage_distribution(bands);
    EXPECT_EQ(s.excluded, 1u);
    ASSERT_EQ(s.fractions.size(), 2u);
    EXPECT_EQ(s.median, 0.75);
    EXPECT_EQ(s.q1, 0.625);
    EXPECT_EQ(s.q3, 0.875);
}

TEST(Coverage, CalibratedGaussianBandCoversEightyPercent) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> z;
    const double zq = 1.2815515655446004; // Phi^{-1}(0.9)
    const std::size_t n = 100000;
    std::vector<double> lo(n), hi(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        double mu = 10 * z(rng), sigma = 0.5 + std::abs(z(rng));
        lo[i] = mu - zq * sigma;
        hi[i] = mu + zq * sigma;
        y[i] = mu + sigma * z(rng);
    }
    EXPECT_NEAR(*coverage_fraction(lo, hi, y, std::vector<bool>(n, true)), 0.80, 0.01);
}

TEST(Coverage, WideningNeverDecreases) {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> z;
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> lo(20), hi(20), y(20), lo2(20), hi2(20);
        std::vector<bool> m(20);
        for (int i = 0; i < 20; ++i) {
            double c = z(rng);
            lo[i] = c - std::abs(z(rng));
            hi[i] = c + std::abs(z(rng));
            lo2[i] = lo[i] - std::abs(z(rng));
            hi2[i] = hi[i] + std::abs(z(rng));
            y[i] = z(rng);
            m[i] = i % 3 != 0;
        }
        EXPECT_LE(*coverage_fraction(lo, hi, y, m), *coverage_fraction(lo2, hi2, y, m));
    }
}

TEST(BlandAltman, Examples) {
    auto same = bland_altman({1, 2, 3}, {1, 2, 3}, {true, true, true});
    EXPECT_EQ(same.mean_diff, 0.0);
    EXPECT_EQ(same.loa_low, 0.0);
    EXPECT_EQ(same.loa_high, 0.0);
    auto pm = bland_altman({1, -1}, {0, 0}, {true, true});
    EXPECT_DOUBLE_EQ(pm.mean_diff, 0.0);
    EXPECT_DOUBLE_EQ(pm.sd, std::sqrt(2.0));
    EXPECT_DOUBLE_EQ(pm.loa_high, 1.96 * std::sqrt(2.0));
    EXPECT_DOUBLE_EQ(pm.loa_low, -1.96 * std::sqrt(2.0));
    auto off = bland_altman({4, 5, 6}, {1, 2, 3}, {true, true, true});
    EXPECT_DOUBLE_EQ(off.mean_diff, 3.0);
    EXPECT_NEAR(off.loa_high - off.loa_low, 0.0, 1e-12);
    EXPECT_THROW(bland_altman({1, 2}, {1, 2}, {true, false}), DegenerateError);
}

TEST(BlandAltman, LimitsContainAbout95PercentOfGaussianDifferences) {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> z(0.7, 2.0);
    const std::size_t n = 50000;
    std::vector<double> pred(n), truth(n, 0.0);
    for (auto& p : pred) p = z(rng);
    auto ba = bland_altman(pred, truth, std::vector<bool>(n, true));
    std::size_t inside = 0;
    for (double d : ba.diffs) inside += d >= ba.loa_low && d <= ba.loa_high;
    EXPECT_NEAR(static_cast<double>(inside) / n, 0.95, 0.015);
}

TEST(PairedTTest, ShiftedPairsAreHighlySignificant) {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> base(0, 1), eps(0.5, 0.1);
    std::vector<double> a(100), b(100);
    for (int i = 0; i < 100; ++i) {
        b[i] = base(rng);
        a[i] = b[i] + eps(rng);
    }
    auto r = paired_t_test(a, b);
    EXPECT_LT(r.p_value, 1e-10);
    EXPECT_GT(r.statistic, 0);
    EXPECT_EQ(r.df, 99);
}

TEST(PairedTTest, TypeOneErrorNearFivePercent) {
    int rejections = 0;
    for (int seed = 0; seed < 1000; ++seed) {
        std::mt19937_64 rng(1000 + seed);
        std::normal_distribution<double> z;
        std::vector<double> a(100), b(100);
        for (int i = 0; i < 100; ++i) {
            a[i] = z(rng);
            b[i] = z(rng);
        }
        rejections += paired_t_test(a, b).p_value < 0.05;
    }
    EXPECT_GE(rejections, 30);
    EXPECT_LE(rejections, 70);
}

TEST(PairedTTest, DegenerateAndShapeErrors) {
    EXPECT_THROW(paired_t_test({1, 2, 3}, {0, 1, 2}), DegenerateError);
    EXPECT_THROW(paired_t_test({1}, {0}), DegenerateError);
    EXPECT_THROW(paired_t_test({1, 2}, {0}), ShapeError);
}

TEST(PairedTTest, TailProbabilityMatchesQuadratureOracle) {
    for (double df : {9.0, 30.0, 99.0, 1000.0})
        for (double t : {0.5, 2.19, 3.12, 3.67}) {
            double oracle = t_tail_by_quadrature(t, df);
            EXPECT_NEAR(t_two_sided_p(t, df), oracle, 1e-6 * oracle + 1e-12) << "t=" << t << " df=" << df;
        }
    // reference magnitudes of the published treatment contrasts, large-sample df
    EXPECT_NEAR(t_tail_by_quadrature(3.67, 1000.0), 2e-4, 0.6e-4);
    EXPECT_NEAR(t_two_sided_p(3.67, 1000.0), 2e-4, 0.6e-4);
    EXPECT_NEAR(t_two_sided_p(2.19, 1000.0), 0.028, 0.0015);
}

TEST(CrossingRate, Examples) {
    std::vector<std::vector<double>> mono(100, {1, 2, 3});
    EXPECT_EQ(crossing_rate(mono), 0.0);
    mono[17] = {1, 0.5, 3};
    EXPECT_DOUBLE_EQ(crossing_rate(mono), 0.01);
    std::vector<std::vector<double>> ties(10, {2, 2, 2});
    EXPECT_EQ(crossing_rate(ties), 0.0);
}

TEST(EvaluateRows, MaskedValuesDoNotMatter) {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> z;
    std::vector<PredictionRow> rows;
    for (int s = 0; s < 4; ++s)
        for (const char* v : {"map", "pulse"})
            for (int t = 1; t <= 5; ++t) {
                PredictionRow r{"s" + std::to_string(s), v, t, 50 + z(rng), z(rng) > 0, {}};
                double c = 50 + z(rng);
                r.quantiles = {c - 1, c, c + 1};
                rows.push_back(r);
            }
    auto a = evaluate_rows(rows).to_json();
    for (auto& r : rows)
        if (!r.mask) {
            r.truth = 1e9;
            r.quantiles = {-5, 7, 3};
        }
    auto b = evaluate_rows(rows);
    auto bj = b.to_json();
    EXPECT_EQ(a["variables"], bj["variables"]);
    EXPECT_EQ(a["coverage"], bj["coverage"]);
    EXPECT_EQ(b.subjects, 4u);
    EXPECT_EQ(b.cells, 40u);
}

// ---- baselines --------------------------------------------------------------------

namespace {

Eigen::MatrixXd simulate_var2(const Eigen::MatrixXd& A1, const Eigen::MatrixXd& A2, std::size_t T, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    const auto k = A1.rows();
    Eigen::MatrixXd out(static_cast<Eigen::Index>(T), k);
    Eigen::VectorXd x1 = Eigen::VectorXd::Zero(k), x2 = Eigen::VectorXd::Zero(k);
    for (std::size_t t = 0; t < T + 200; ++t) {
        Eigen::VectorXd e(k);
        for (Eigen::Index i = 0; i < k; ++i) e(i) = z(rng);
        Eigen::VectorXd x = A1 * x1 + A2 * x2 + e;
        x2 = x1;
        x1 = x;
        if (t >= 200) out.row(static_cast<Eigen::Index>(t - 200)) = x.transpose();
    }
    return out;
}

} // namespace

TEST(FitVar, RecoversVar1Coefficients) {
    Eigen::MatrixXd A(2, 2);
    A << 0.5, 0.1, 0.0, 0.3;
    auto x = simulate_var1(A, Eigen::VectorXd::Zero(2), {1.0, 1.0}, 10000, 42);
    auto m = fit_var(x, 1);
    EXPECT_LT((m.A[0] - A).cwiseAbs().maxCoeff(), 0.05);
    EXPECT_TRUE(m.sigma.isApprox(m.sigma.transpose()));
}

TEST(FitVar, WhiteNoiseCoefficientsWithinThreeStandardErrors) {
    auto x = simulate_var1(Eigen::MatrixXd::Zero(3, 3), Eigen::VectorXd::Zero(3), {1, 2, 0.5}, 3000, 7);
    auto m = fit_var(x, 2);
    for (int lag = 0; lag < 2; ++lag)
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) EXPECT_LT(std::abs(m.A[lag](i, j)), 3 * m.a_std_error(lag, i, j));
}

TEST(FitVar, OrderZeroIsTheMeanModel) {
    Eigen::MatrixXd x(4, 2);
    x << 1, 10, 2, 20, 3, 30, 6, 40;
    auto m = fit_var(x, 0);
    EXPECT_TRUE(m.A.empty());
    EXPECT_NEAR(m.c(0), 3.0, 1e-12);
    EXPECT_NEAR(m.c(1), 25.0, 1e-12);
}

TEST(FitVar, ResidualsAreOrthogonalToTheDesign) {
    Eigen::MatrixXd A(3, 3);
    A << 0.4, 0.2, 0, 0, 0.5, 0.1, 0.1, 0, 0.3;
    auto x = simulate_var1(A, Eigen::VectorXd::Constant(3, 2.0), {1, 1, 1}, 2000, 3);
    auto d = detail::lagged_design({x}, 2, 2);
    auto f = detail::ols(d.Z, d.Y, "test");
    Eigen::MatrixXd g = d.Z.transpose() * f.residuals;
    double scale = d.Z.norm() * f.residuals.norm();
    EXPECT_LT(g.cwiseAbs().maxCoeff(), 1e-8 * scale);
}

TEST(FitVar, SingularDesignRaisesRankDeficiency) {
    Eigen::MatrixXd x(50, 2);
    for (int t = 0; t < 50; ++t) x.row(t) << t % 7, 3.0;
    EXPECT_THROW(fit_var(x, 1), RankDeficiencyError);
}

TEST(SelectOrder, PicksTwoForVar2DataInMostSeeds) {
    Eigen::MatrixXd A1(2, 2), A2(2, 2);
    A1 << 0.3, 0.1, 0.0, 0.2;
    A2 << 0.4, 0.0, 0.1, 0.4;
    int hits = 0;
    for (int seed = 0; seed < 20; ++seed) hits += select_order(simulate_var2(A1, A2, 2000, 100 + seed), 8).order == 2;
    EXPECT_GT(hits, 10);
}

TEST(SelectOrder, WhiteNoiseAndSingleCandidate) {
    auto x = simulate_var1(Eigen::MatrixXd::Zero(2, 2), Eigen::VectorXd::Zero(2), {1, 1}, 2000, 5);
    auto sel = select_order(x, 4);
    EXPECT_EQ(sel.aic.size(), 4u);
    EXPECT_EQ(sel.order, 1);
    EXPECT_EQ(select_order(x, 1).order, 1);
    EXPECT_THROW(select_order(x, 0), ConfigError);
}

TEST(VarForecast, DegenerateAndGeometricExamples) {
    VarModel flat;
    flat.order = 1;
    flat.dims = 2;
    flat.A = {Eigen::MatrixXd::Zero(2, 2)};
    flat.c = Eigen::Vector2d(3, -1);
    auto f = var_forecast(flat, Eigen::MatrixXd::Random(5, 2), 4);
    for (int h = 0; h < 4; ++h) {
        EXPECT_EQ(f(0, h), 3.0);
        EXPECT_EQ(f(1, h), -1.0);
    }
    VarModel scalar;
    scalar.order = 1;
    scalar.dims = 1;
    scalar.A = {Eigen::MatrixXd::Constant(1, 1, 0.5)};
    scalar.c = Eigen::VectorXd::Zero(1);
    auto g = var_forecast(scalar, Eigen::MatrixXd::Constant(1, 1, 8.0), 3);
    EXPECT_EQ(g(0, 0), 4.0);
    EXPECT_EQ(g(0, 1), 2.0);
    EXPECT_EQ(g(0, 2), 1.0);
}

TEST(VarForecast, MatchesStepByStepSimulation) {
    Eigen::MatrixXd A1(2, 2), A2(2, 2);
    A1 << 0.3, 0.1, 0.0, 0.2;
    A2 << 0.4, 0.0, 0.1, 0.4;
    auto x = simulate_var2(A1, A2, 3000, 9);
    auto m = fit_var(x, 2);
    auto f = var_forecast(m, x, 10);
    std::vector<Eigen::VectorXd> path{x.row(x.rows() - 2).transpose(), x.row(x.rows() - 1).transpose()};
    for (int h = 0; h < 10; ++h) {
        Eigen::VectorXd next = m.c;
        next.noalias() += m.A[0] * path[path.size() - 1];
        next.noalias() += m.A[1] * path[path.size() - 2];
        path.push_back(next);
        EXPECT_LT((f.col(h) - next).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(VarForecast, FirstStepVarianceIsResidualVariance) {
    Eigen::MatrixXd A(2, 2);
    A << 0.5, 0.1, 0.0, 0.3;
    auto m = fit_var(simulate_var1(A, Eigen::VectorXd::Zero(2), {1, 2}, 2000, 1), 1);
    auto v = var_forecast_variance(m, 5);
    EXPECT_NEAR(v(0, 0), m.sigma(0, 0), 1e-12);
    EXPECT_NEAR(v(1, 0), m.sigma(1, 1), 1e-12);
    for (int h = 1; h < 5; ++h) EXPECT_GE(v(0, h), v(0, h - 1));
}

TEST(Granger, CoupledPairRejects) {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> z;
    Eigen::VectorXd x(2000), y(2000);
    for (int t = 0; t < 2000; ++t) {
        x(t) = z(rng);
        y(t) = (t ? 0.8 * x(t - 1) : 0.0) + z(rng);
    }
    auto r = granger_test(x, y, 2);
    EXPECT_LT(r.p_value, 0.01);
    EXPECT_EQ(r.df1, 2);
    EXPECT_EQ(r.df2, 2000 - 2 - 2 * 2 - 1);
}

TEST(Granger, IndependentAutoregressionDoesNotReject) {
    auto y = simulate_var1(Eigen::MatrixXd::Constant(1, 1, 0.7), Eigen::VectorXd::Zero(1), {1}, 2000, 31);
    auto x = simulate_var1(Eigen::MatrixXd::Constant(1, 1, 0.7), Eigen::VectorXd::Zero(1), {1}, 2000, 32);
    EXPECT_GT(granger_test(x.col(0), y.col(0), 2).p_value, 0.05);
}

TEST(Granger, StatisticIsAffineInvariant) {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> z;
    Eigen::VectorXd x(500), y(500);
    for (int t = 0; t < 500; ++t) {
        x(t) = z(rng);
        y(t) = (t ? 0.2 * x(t - 1) + 0.3 * y(t - 1) : 0.0) + z(rng);
    }
    auto a = granger_test(x, y, 3);
    Eigen::VectorXd x2 = (x.array() * 250.0 - 17.0).matrix(), y2 = (y.array() * -0.01 + 3.0).matrix();
    auto b = granger_test(x2, y2, 3);
    EXPECT_NEAR(a.F, b.F, 1e-9 * a.F);
    EXPECT_NEAR(a.p_value, b.p_value, 1e-9);
}

TEST(Granger, DegenerateVarianceRaises) {
    Eigen::VectorXd x(100), y = Eigen::VectorXd::Zero(100);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> z;
    for (int t = 0; t < 100; ++t) x(t) = z(rng);
    for (int t = 1; t < 100; ++t) y(t) = x(t - 1);
    EXPECT_THROW(granger_test(x, y, 1), DegenerateError);
}

TEST(Granger, ScreenExcludesUnlinkedSeries) {
    std::mt19937_64 rng(77);
    std::normal_distribution<double> z;
    Eigen::MatrixXd s(3000, 3);
    for (int t = 0; t < 3000; ++t) {
        s(t, 0) = (t ? 0.5 * s(t - 1, 0) : 0) + z(rng);
        s(t, 1) = (t ? 0.7 * s(t - 1, 0) : 0) + z(rng);
        s(t, 2) = z(rng);
    }
    auto scr = granger_screen({s}, {"a", "b", "c"}, 2, 0.01);
    EXPECT_EQ(scr.pairs.size(), 6u);
    EXPECT_EQ(scr.retained, (std::vector<std::string>{"a", "b"}));
    EXPECT_EQ(scr.excluded, (std::vector<std::string>{"c"}));
}
