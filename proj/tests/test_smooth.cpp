#include "vfvol/smooth.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <numbers>
#include <random>

using namespace vfvol;
using namespace testing_support;

namespace {

std::vector<double> uniform(std::size_t n, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> x(n);
    for (auto& e : x) e = u(rng);
    return x;
}

SplineConfig fixed(double lambda) {
    SplineConfig c;
    c.lambda = lambda;
    return c;
}

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double e : v) s += e;
    return s / static_cast<double>(v.size());
}

}  // namespace

TEST(SmoothUnivariate, ZeroResponseGivesZeroFunction) {
    const auto x = uniform(100, 1);
    const std::vector<double> r(100, 0.0);
    const auto s = smooth_univariate(x, r);
    for (double f : s.fitted) EXPECT_EQ(f, 0.0);
    EXPECT_EQ(s.function(0.37), 0.0);
}

TEST(SmoothUnivariate, LinearIsUnpenalized) {
    const auto x = uniform(200, 2);
    std::vector<double> r(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) r[i] = 2.0 * x[i];
    for (double lambda : {1e-3, 1.0, 1e3}) {
        const auto s = smooth_univariate(x, r, fixed(lambda));
        EXPECT_LT(max_abs_diff(s.fitted, r), 1e-6) << "lambda " << lambda;
    }
}

TEST(SmoothUnivariate, RecoversSine) {
    const std::size_t n = 500;
    const auto x = uniform(n, 3);
    std::mt19937_64 rng(4);
    std::normal_distribution<double> noise(0.0, 0.1);
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i) r[i] = std::sin(2.0 * std::numbers::pi * x[i]) + noise(rng);
    const auto s = smooth_univariate(x, r);

    // Oracle: least squares with an oversized basis (degree-15 Chebyshev polynomials)
    // on the noisy data, evaluated on a dense grid.
    const int deg = 15;
    auto cheb = [&](double xi, Eigen::Index k) { return std::cos(static_cast<double>(k) * std::acos(2.0 * xi - 1.0)); };
    Eigen::MatrixXd A(static_cast<Eigen::Index>(n), deg + 1);
    Eigen::VectorXd b(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        for (Eigen::Index k = 0; k <= deg; ++k) A(static_cast<Eigen::Index>(i), k) = cheb(x[i], k);
        b(static_cast<Eigen::Index>(i)) = r[i];
    }
    const Eigen::VectorXd c = A.colPivHouseholderQr().solve(b);

    double err_truth = 0.0, err_oracle = 0.0;
    for (int g = 0; g <= 900; ++g) {
        const double xi = 0.05 + 0.9 * g / 900.0;
        double o = 0.0;
        for (Eigen::Index k = 0; k <= deg; ++k) o += c(k) * cheb(xi, k);
        err_truth = std::max(err_truth, std::abs(s.function(xi) - std::sin(2.0 * std::numbers::pi * xi)));
        err_oracle = std::max(err_oracle, std::abs(s.function(xi) - o));
    }
    EXPECT_LE(err_truth, 0.15);
    EXPECT_LE(err_oracle, 0.15);
}

TEST(SmoothUnivariate, IsLinearInResponse) {
    const std::size_t n = 150;
    const auto x = uniform(n, 5);
    const auto r1 = uniform(n, 6, -1.0, 1.0);
    const auto r2 = uniform(n, 7, -1.0, 1.0);
    std::vector<double> mix(n);
    for (std::size_t i = 0; i < n; ++i) mix[i] = 2.5 * r1[i] - 0.7 * r2[i];
    const auto cfg = fixed(0.3);
    const auto f1 = smooth_univariate(x, r1, cfg).fitted;
    const auto f2 = smooth_univariate(x, r2, cfg).fitted;
    const auto fm = smooth_univariate(x, mix, cfg).fitted;
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(fm[i], 2.5 * f1[i] - 0.7 * f2[i], 1e-9);
}

TEST(SmoothUnivariate, ConstantCovariateWarns) {
    const std::vector<double> x(30, 1.0);
    const auto r = uniform(30, 9);
    const auto s = smooth_univariate(x, r);
    EXPECT_FALSE(s.warning.empty());
    for (double f : s.fitted) EXPECT_EQ(f, 0.0);
}

TEST(Backfit, ConstantResponse) {
    const std::size_t n = 120;
    Eigen::MatrixXd X(n, 2);
    const auto a = uniform(n, 10), b = uniform(n, 11);
    for (std::size_t i = 0; i < n; ++i) {
        X(static_cast<Eigen::Index>(i), 0) = a[i];
        X(static_cast<Eigen::Index>(i), 1) = b[i];
    }
    const std::vector<double> r(n, 3.25);
    const auto fit = backfit_additive(X, r);
    EXPECT_NEAR(fit.s0, 3.25, 1e-12);
    for (const auto& cf : fit.component_fitted)
        for (double f : cf) EXPECT_NEAR(f, 0.0, 1e-10);
}

TEST(Backfit, RecoversTwoComponents) {
    const std::size_t n = 1000;
    const auto x1 = uniform(n, 12, -1.0, 1.0), x2 = uniform(n, 13, -1.0, 1.0);
    std::mt19937_64 rng(14);
    std::normal_distribution<double> noise(0.0, 0.05);
    Eigen::MatrixXd X(n, 2);
    std::vector<double> r(n), f1(n), f2(n);
    for (std::size_t i = 0; i < n; ++i) {
        X(static_cast<Eigen::Index>(i), 0) = x1[i];
        X(static_cast<Eigen::Index>(i), 1) = x2[i];
        f1[i] = x1[i];
        f2[i] = x2[i] * x2[i];
        r[i] = f1[i] + f2[i] + noise(rng);
    }
    const auto fit = backfit_additive(X, r);
    // Oracle: each function smoothed separately from noiseless values, then centered.
    for (int j = 0; j < 2; ++j) {
        const auto& xj = j == 0 ? x1 : x2;
        auto oracle = smooth_univariate(xj, j == 0 ? f1 : f2).fitted;
        const double m = mean(oracle);
        for (auto& o : oracle) o -= m;
        EXPECT_LE(max_abs_diff(fit.component_fitted[static_cast<std::size_t>(j)], oracle), 0.2) << "component " << j;
    }
}

TEST(Backfit, CenteringAndDecomposition) {
    const std::size_t n = 200;
    Eigen::MatrixXd X(n, 5);
    std::mt19937_64 rng(15);
    std::normal_distribution<double> z(0.0, 1.0);
    double level = 100.0;
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i)
        for (Eigen::Index j = 0; j < 5; ++j) X(i, j) = (level += z(rng));  // collinear price-like columns
    std::vector<double> r(n);
    for (auto& e : r) e = z(rng);
    const auto fit = backfit_additive(X, r);
    for (const auto& cf : fit.component_fitted) EXPECT_NEAR(mean(cf), 0.0, 1e-8);
    for (std::size_t i = 0; i < n; ++i) {
        double s = fit.s0;
        for (const auto& cf : fit.component_fitted) s += cf[i];
        EXPECT_NEAR(fit.fitted[i], s, 1e-10);
        EXPECT_NEAR(fit.fitted[i] + fit.residuals[i], r[i], 1e-12);
    }
    for (std::size_t k = 1; k < fit.rss_trace.size(); ++k) EXPECT_LE(fit.rss_trace[k], fit.rss_trace[k - 1] + 1e-10);
}

TEST(Backfit, SingleColumnEqualsUnivariateSmooth) {
    const std::size_t n = 150;
    const auto x = uniform(n, 16);
    auto r = uniform(n, 17, -1.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) r[i] += std::exp(x[i]);
    Eigen::MatrixXd X = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(n));
    for (std::optional<double> lambda : {std::optional<double>{0.5}, std::optional<double>{}}) {
        SplineConfig cfg;
        cfg.lambda = lambda;
        const auto add = backfit_additive(X, r, cfg);
        const auto uni = smooth_univariate(x, r, cfg);
        EXPECT_LT(max_abs_diff(add.fitted, uni.fitted), 1e-8);
    }
}

TEST(Backfit, EvaluateAtTrainingRowsAndZeroFit) {
    const std::size_t n = 100;
    Eigen::MatrixXd X(n, 2);
    const auto a = uniform(n, 18), b = uniform(n, 19);
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i) {
        X(static_cast<Eigen::Index>(i), 0) = a[i];
        X(static_cast<Eigen::Index>(i), 1) = b[i];
        r[i] = std::sin(3.0 * a[i]) + b[i] * b[i];
    }
    const auto fit = backfit_additive(X, r);
    EXPECT_LT(max_abs_diff(evaluate_additive(fit, X), fit.fitted), 1e-10);

    AdditiveFit zero;
    zero.s0 = 1.5;
    zero.components.resize(2);
    for (double e : evaluate_additive(zero, X)) EXPECT_EQ(e, 1.5);
}

TEST(Backfit, LinearComponentExtrapolates) {
    const std::size_t n = 100;
    const auto x = uniform(n, 20);
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i) r[i] = 2.0 * x[i];
    Eigen::MatrixXd X = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(n));
    const auto fit = backfit_additive(X, r);
    Eigen::MatrixXd out(3, 1);
    out << -0.5, 1.5, 3.0;
    const auto e = evaluate_additive(fit, out);
    EXPECT_NEAR(e[0], -1.0, 1e-6);
    EXPECT_NEAR(e[1], 3.0, 1e-6);
    EXPECT_NEAR(e[2], 6.0, 1e-6);
}

TEST(Backfit, RejectsBadInput) {
    Eigen::MatrixXd X(10, 1);
    X.setRandom();
    EXPECT_THROW(backfit_additive(X, std::vector<double>(9, 0.0)), std::invalid_argument);
    X(3, 0) = std::numeric_limits<double>::infinity();
    EXPECT_THROW(backfit_additive(X, std::vector<double>(10, 0.0)), std::invalid_argument);
}

TEST(Whitened, EmptyThetaMatchesBackfit) {
    const std::size_t n = 120;
    Eigen::MatrixXd X(n, 3);
    std::vector<double> r(n);
    const auto a = uniform(n, 21), b = uniform(n, 22), c = uniform(n, 23);
    for (std::size_t i = 0; i < n; ++i) {
        X(static_cast<Eigen::Index>(i), 0) = a[i];
        X(static_cast<Eigen::Index>(i), 1) = b[i];
        X(static_cast<Eigen::Index>(i), 2) = c[i];
        r[i] = a[i] * a[i] - std::cos(4.0 * b[i]) + 0.1 * c[i];
    }
    for (std::optional<double> lambda : {std::optional<double>{2.0}, std::optional<double>{}}) {
        SplineConfig cfg;
        cfg.lambda = lambda;
        const auto w = fit_additive_whitened(X, r, {}, 0, cfg);
        const auto f = backfit_additive(X, r, cfg);
        EXPECT_LT(max_abs_diff(w.fitted, f.fitted), 1e-6);
        for (const auto& cf : w.component_fitted) EXPECT_NEAR(mean(cf), 0.0, 1e-8);
    }
}

TEST(Whitened, MaNoiseIsAccountedFor) {
    // z = g(x) + a_t + 0.8 a_{t-1}; with theta known the fit is at least as close to g as without.
    const std::size_t n = 400;
    const auto x = uniform(n, 24);
    std::mt19937_64 rng(25);
    std::normal_distribution<double> z(0.0, 0.3);
    std::vector<double> r(n), g(n);
    double a_prev = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = z(rng);
        g[i] = std::sin(2.0 * std::numbers::pi * x[i]);
        r[i] = g[i] + a + 0.8 * a_prev;
        a_prev = a;
    }
    Eigen::MatrixXd X = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(n));
    const std::vector<double> theta{0.8};
    const auto w = fit_additive_whitened(X, r, theta, 1, fixed(1.0));
    const double gm = mean(g);
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) err = std::max(err, std::abs(w.s0 + w.component_fitted[0][i] - g[i]));
    EXPECT_LT(err, 0.35);
    EXPECT_NEAR(w.s0, gm, 0.1);
}
