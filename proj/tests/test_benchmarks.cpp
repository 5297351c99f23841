#include "vfvol/benchmarks.hpp"
#include "vfvol/simgen.hpp"
#include "vfvol/vfmodels.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace vfvol;
using namespace testing_support;

namespace {

VaryingFrequencyDataset simulated(std::uint64_t seed, std::size_t T = 510) {
    ScenarioConfig sc;
    sc.T = T;
    sc.seed = seed;
    return generate(sc).dataset();
}

std::vector<double> zeros(std::size_t n) { return std::vector<double>(n, 0.0); }

double rmse_like(const std::vector<double>& e) {
    double s = 0.0;
    for (double x : e) s += x * x;
    return std::sqrt(s / static_cast<double>(e.size()));
}

}  // namespace

TEST(Benchmark, FittedPlusResiduals) {
    const auto ds = simulated(1);
    for (auto kind : {BenchmarkKind::Garch, BenchmarkKind::Gjr}) {
        const auto fit = fit_benchmark(ds, kind);
        for (std::size_t t = 0; t < ds.size(); ++t) EXPECT_NEAR(fit.fitted[t] + fit.residuals[t], ds.y[t], 1e-14);
        EXPECT_EQ(fit.armax.exog_cols, 2u);
    }
    EXPECT_EQ(fit_benchmark(ds, BenchmarkKind::Garch, ArmaxSpec{}, Aggregation::Drop).armax.exog_cols, 1u);
}

TEST(Benchmark, AggregateColumn) {
    const auto ds = simulated(2);
    const auto mean = benchmark_exog(ds, Aggregation::Mean, ds.size());
    const auto last = benchmark_exog(ds, Aggregation::Last, ds.size());
    for (Eigen::Index t = 0; t < 5; ++t) {
        EXPECT_DOUBLE_EQ(mean(t, 1), ds.x_lag.row(t).mean());
        EXPECT_EQ(last(t, 1), ds.x_lag(t, 4));
        EXPECT_EQ(mean(t, 0), ds.v[static_cast<std::size_t>(t)]);
    }
}

TEST(Benchmark, ZeroCovariatesReduceToArmaGarch) {
    const auto s = simulate_arma(0.01, 0.5, 0.3, 0.0, 300, 3, 0.02);
    VaryingFrequencyDataset ds;
    ds.y = s.y;
    ds.v = zeros(s.y.size());
    ds.x_lag = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(s.y.size()), 5);
    const auto fit = fit_benchmark(ds, BenchmarkKind::Garch);
    const auto plain = fit_armax(ds.y, no_exog(ds.size()), ArmaxSpec{});
    EXPECT_NEAR(fit.armax.sse, plain.sse, 1e-6 * plain.sse);
    EXPECT_NEAR(fit.armax.phi[0], plain.phi[0], 1e-3);
    EXPECT_NEAR(fit.armax.theta[0], plain.theta[0], 1e-3);
}

TEST(Benchmark, GarchAndGjrAgreeOnSymmetricData) {
    for (std::uint64_t seed = 4; seed < 8; ++seed) {
        const auto ds = simulated(seed, 255);
        const auto g = fit_benchmark(ds, BenchmarkKind::Garch);
        const auto j = fit_benchmark(ds, BenchmarkKind::Gjr);
        EXPECT_NEAR(rmse_like(g.residuals), rmse_like(j.residuals), 0.02 * rmse_like(g.residuals));
    }
}

TEST(Benchmark, ForecastZeroModel) {
    BenchmarkFit fit;
    fit.armax.spec = ArmaxSpec{1, 1, 0, true};
    fit.armax.exog_cols = 2;
    fit.armax.phi = {0.0};
    fit.armax.theta = {0.0};
    fit.armax.psi = {0.0, 0.0};
    fit.armax.fitted.assign(10, 0.0);
    fit.armax.residuals.assign(10, 0.0);
    VaryingFrequencyDataset test;
    test.y.assign(4, 0.0);
    test.v.assign(4, 0.3);
    test.x_lag = Eigen::MatrixXd::Constant(4, 5, 50.0);
    for (double f : forecast_benchmark(fit, test, 4)) EXPECT_EQ(f, 0.0);
}

TEST(Benchmark, OneStepForecastMatchesManualPredictor) {
    const auto ds = simulated(9);
    const auto [train, test] = split(ds, {ds.size() - 4, 4});
    const auto fit = fit_benchmark(train, BenchmarkKind::Gjr);
    const auto f = forecast_benchmark(fit, test, 4);
    const std::size_t n = train.size();
    const auto& a = fit.armax;
    const double manual = a.intercept + a.phi[0] * train.y[n - 1] + a.theta[0] * a.residuals[n - 1] +
                          a.psi[0] * test.v[0] + a.psi[1] * test.x_lag.row(0).mean() + fit.gjr.mean_const;
    EXPECT_NEAR(f[0], manual, 1e-12);
}

TEST(Benchmark, NoLossFromAggregatingConstantPeriods) {
    // When the 5 values inside each period are identical, the aggregate carries all the information.
    std::mt19937_64 rng(10);
    std::normal_distribution<double> z(0.0, 1.0);
    const std::size_t n = 200;
    VaryingFrequencyDataset ds;
    ds.x_lag.resize(n, 5);
    double level = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        level = 0.7 * level + z(rng);
        ds.x_lag.row(static_cast<Eigen::Index>(t)).setConstant(level);
        ds.v.push_back(z(rng));
        ds.y.push_back(0.05 * level + 0.02 * ds.v.back() + 0.05 * z(rng));
    }
    ds.fill_counts.assign(n, 0);
    const auto b = fit_benchmark(ds, BenchmarkKind::Garch);
    const auto vf = fit_vf(ds, VfConfig{});
    EXPECT_NEAR(rmse_like(vf.residuals), rmse_like(b.residuals), 0.1 * rmse_like(b.residuals));
}
