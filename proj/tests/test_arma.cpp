#include "vfvol/arma.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace vfvol;
using namespace testing_support;

TEST(FitArmax, ZeroSeriesGivesZeroFit) {
    const std::vector<double> y(60, 0.0), v(60, 0.0);
    const auto fit = fit_armax(y, v, ArmaxSpec{});
    EXPECT_EQ(fit.sse, 0.0);
    EXPECT_EQ(fit.intercept, 0.0);
    EXPECT_EQ(fit.phi[0], 0.0);
    EXPECT_EQ(fit.theta[0], 0.0);
    EXPECT_EQ(fit.psi[0], 0.0);
}

TEST(FitArmax, FittedPlusResidualsIsInput) {
    const auto s = simulate_arma(0.1, 0.4, 0.3, 0.5, 300, 11);
    const auto fit = fit_armax(s.y, s.v, ArmaxSpec{});
    for (std::size_t t = 0; t < s.y.size(); ++t) EXPECT_NEAR(fit.fitted[t] + fit.residuals[t], s.y[t], 1e-12);
    EXPECT_LT(detail::companion_radius(fit.phi), 1.0);
}

TEST(FitArmax, Ar1MatchesCssGridSearch) {
    const auto s = simulate_arma(0.0, 0.5, 0.0, 0.0, 2000, 2024);
    const ArmaxSpec spec{1, 0, 0, false};
    const auto fit = fit_armax(s.y, no_exog(s.y.size()), spec);
    // Oracle: exhaustive CSS search over phi.
    double best_phi = 0.0, best = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= 4000; ++k) {
        const double phi = -0.99 + k * (1.98 / 4000);
        double css = 0.0;
        for (std::size_t t = 1; t < s.y.size(); ++t) css += std::pow(s.y[t] - phi * s.y[t - 1], 2);
        if (css < best) {
            best = css;
            best_phi = phi;
        }
    }
    EXPECT_NEAR(fit.phi[0], best_phi, 1e-3);
    EXPECT_GE(fit.phi[0], 0.45);
    EXPECT_LE(fit.phi[0], 0.55);
}

TEST(FitArmax, RegressionMatchesOls) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> z(0.0, 1.0), e(0.0, 0.01);
    const std::size_t n = 400;
    std::vector<double> y(n), v(n);
    for (std::size_t t = 0; t < n; ++t) {
        v[t] = z(rng);
        y[t] = 2.0 * v[t] + e(rng);
    }
    const auto fit = fit_armax(y, v, ArmaxSpec{0, 0, 0, true});
    // Oracle: closed-form simple regression.
    double mv = 0.0, my = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        mv += v[t] / n;
        my += y[t] / n;
    }
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        sxy += (v[t] - mv) * (y[t] - my);
        sxx += (v[t] - mv) * (v[t] - mv);
    }
    const double slope = sxy / sxx;
    EXPECT_NEAR(fit.psi[0], slope, 1e-5);
    EXPECT_NEAR(fit.intercept, my - slope * mv, 1e-5);
    EXPECT_GE(fit.psi[0], 1.99);
    EXPECT_LE(fit.psi[0], 2.01);
}

TEST(FitArmax, NoiselessSeriesRefitsExactly) {
    const std::size_t n = 80;
    std::vector<double> y(n), v(n);
    y[0] = 1.0;
    for (std::size_t t = 0; t < n; ++t) v[t] = std::sin(0.3 * t);
    for (std::size_t t = 1; t < n; ++t) y[t] = 0.2 + 0.6 * y[t - 1] + 0.5 * v[t];
    const auto fit = fit_armax(y, v, ArmaxSpec{1, 0, 0, true});
    EXPECT_LT(fit.sse, 1e-10);
    EXPECT_NEAR(fit.phi[0], 0.6, 1e-4);
}

TEST(FitArmax, CssIsLocallyMinimal) {
    const auto s = simulate_arma(0.2, 0.5, 0.3, 0.8, 500, 77);
    const auto fit = fit_armax(s.y, s.v, ArmaxSpec{});
    const Eigen::MatrixXd x = Eigen::Map<const Eigen::VectorXd>(s.v.data(), static_cast<Eigen::Index>(s.v.size()));
    const double base = armax_css(fit, s.y, x);
    EXPECT_NEAR(base, fit.sse, 1e-9 * base);
    for (int which = 0; which < 4; ++which) {
        for (double d : {-1e-3, 1e-3}) {
            ArmaxFit p = fit;
            double& par = which == 0 ? p.intercept : which == 1 ? p.phi[0] : which == 2 ? p.theta[0] : p.psi[0];
            par += d;
            EXPECT_GE(armax_css(p, s.y, x), base * (1.0 - 1e-9)) << "parameter " << which << " step " << d;
        }
    }
}

TEST(FitArmax, RejectsBadInput) {
    std::vector<double> y(50, 1.0), v(49, 0.0);
    EXPECT_THROW(fit_armax(y, v, ArmaxSpec{}), std::invalid_argument);
    std::vector<double> shortv(5, 0.0), shorty(5, 0.0);
    EXPECT_THROW(fit_armax(shorty, shortv, ArmaxSpec{}), std::invalid_argument);
    y[10] = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(fit_armax(y, std::vector<double>(50, 0.0), ArmaxSpec{}), std::invalid_argument);
}

TEST(ForecastArmax, ConstantModelForecastsIntercept) {
    ArmaxFit fit;
    fit.spec = ArmaxSpec{0, 0, 0, true};
    fit.exog_cols = 1;
    fit.psi = {0.0};
    fit.intercept = 0.7;
    fit.fitted.assign(10, 0.7);
    fit.residuals.assign(10, 0.0);
    const std::vector<double> v(3, 5.0);
    for (double f : forecast_armax(fit, 3, v)) EXPECT_EQ(f, 0.7);
}

TEST(ForecastArmax, Ar1Recursion) {
    ArmaxFit fit;
    fit.spec = ArmaxSpec{1, 0, 0, false};
    fit.phi = {0.5};
    fit.fitted.assign(5, 0.0);
    fit.residuals = {0.0, 0.0, 0.0, 0.0, 1.0};  // last y = 1
    const auto f = forecast_armax(fit, 4, std::vector<double>{});
    ASSERT_EQ(f.size(), 4u);
    EXPECT_DOUBLE_EQ(f[0], 0.5);
    EXPECT_DOUBLE_EQ(f[1], 0.25);
    EXPECT_DOUBLE_EQ(f[2], 0.125);
    EXPECT_DOUBLE_EQ(f[3], 0.0625);
}

TEST(ForecastArmax, MaForecastIsInterceptBeyondOrder) {
    const auto s = simulate_arma(0.3, 0.0, 0.6, 0.0, 400, 9);
    const auto fit = fit_armax(s.y, no_exog(s.y.size()), ArmaxSpec{0, 1, 0, true});
    const auto f = forecast_armax(fit, 4, Eigen::MatrixXd(4, 0));
    EXPECT_NE(f[0], fit.intercept);
    for (std::size_t s2 = 1; s2 < 4; ++s2) EXPECT_EQ(f[s2], fit.intercept);
}

TEST(ForecastArmax, OneStepMatchesSimulatedContinuations) {
    const auto s = simulate_arma(0.1, 0.6, 0.4, 0.5, 600, 31, 0.5);
    const auto fit = fit_armax(s.y, s.v, ArmaxSpec{});
    const double v_next = 0.8;
    const double f = forecast_armax(fit, 1, std::vector<double>{v_next})[0];
    // Brute force: average y_{n+1} over simulated innovations under the fitted model.
    const double sigma = std::sqrt(fit.sse / static_cast<double>(s.y.size() - fit.start));
    std::mt19937_64 rng(99);
    std::normal_distribution<double> z(0.0, sigma);
    const std::size_t draws = 100000;
    double sum = 0.0;
    for (std::size_t i = 0; i < draws; ++i)
        sum += fit.intercept + fit.phi[0] * s.y.back() + fit.theta[0] * fit.residuals.back() + fit.psi[0] * v_next +
               z(rng);
    const double mc = sum / draws;
    EXPECT_NEAR(f, mc, 3.0 * sigma / std::sqrt(static_cast<double>(draws)));
}

TEST(ForecastArmax, MissingExogenousFuturesRejected) {
    const auto s = simulate_arma(0.1, 0.5, 0.2, 0.5, 200, 4);
    const auto fit = fit_armax(s.y, s.v, ArmaxSpec{});
    EXPECT_THROW(forecast_armax(fit, 4, std::vector<double>{1.0}), std::invalid_argument);
}

TEST(ArmaxApply, ReproducesFitOnSameData) {
    const auto s = simulate_arma(0.1, 0.5, 0.2, 0.5, 200, 8);
    const auto fit = fit_armax(s.y, s.v, ArmaxSpec{});
    const Eigen::MatrixXd x = Eigen::Map<const Eigen::VectorXd>(s.v.data(), static_cast<Eigen::Index>(s.v.size()));
    const auto again = armax_apply(fit, s.y, x);
    EXPECT_EQ(again.residuals, fit.residuals);
    EXPECT_EQ(again.sse, fit.sse);
}
