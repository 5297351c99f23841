#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace testing_support {

/// ARMA(1,1) with intercept and one exogenous column: y_t = c + phi y_{t-1} + theta a_{t-1} + psi v_t + a_t.
struct ArmaSim {
    std::vector<double> y, v, a;
};

inline ArmaSim simulate_arma(double c, double phi, double theta, double psi, std::size_t n, std::uint64_t seed,
                             double sd = 1.0, std::size_t burn = 200) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, sd), zv(0.0, 1.0);
    ArmaSim s;
    double y_prev = c / (1.0 - phi), a_prev = 0.0;
    for (std::size_t t = 0; t < n + burn; ++t) {
        const double a = z(rng), v = zv(rng);
        const double y = c + phi * y_prev + theta * a_prev + psi * v + a;
        if (t >= burn) {
            s.y.push_back(y);
            s.v.push_back(v);
            s.a.push_back(a);
        }
        y_prev = y;
        a_prev = a;
    }
    return s;
}

/// GJR(1,1) innovations with standard normal shocks.
inline std::vector<double> simulate_gjr(double omega, double alpha, double gamma, double beta, std::size_t n,
                                        std::uint64_t seed, std::size_t burn = 500) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<double> out;
    double s2 = omega / (1.0 - alpha - beta - 0.5 * gamma), a_prev = 0.0;
    for (std::size_t t = 0; t < n + burn; ++t) {
        if (t > 0) s2 = omega + (alpha + (a_prev < 0.0 ? gamma : 0.0)) * a_prev * a_prev + beta * s2;
        const double a = std::sqrt(s2) * z(rng);
        if (t >= burn) out.push_back(a);
        a_prev = a;
    }
    return out;
}

inline Eigen::MatrixXd no_exog(std::size_t n) { return Eigen::MatrixXd(static_cast<Eigen::Index>(n), 0); }

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace testing_support
