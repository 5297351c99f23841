#pragma once

#include "vfvol/arma.hpp"
#include "vfvol/dataset.hpp"
#include "vfvol/garch.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace vfvol {

enum class BenchmarkKind { Garch, Gjr };

/// How the m high-frequency values of a period enter the benchmark mean equation.
enum class Aggregation { Mean, Last, Drop };

inline std::string to_string(BenchmarkKind k) { return k == BenchmarkKind::Garch ? "garch" : "gjr"; }
inline std::string to_string(Aggregation a) {
    switch (a) {
        case Aggregation::Mean: return "mean";
        case Aggregation::Last: return "last";
        case Aggregation::Drop: return "drop";
    }
    return "?";
}

struct BenchmarkFit {
    BenchmarkKind kind = BenchmarkKind::Garch;
    Aggregation aggregation = Aggregation::Mean;
    ArmaxFit armax;
    GjrFit gjr;
    std::vector<double> fitted;
    std::vector<double> residuals;

    [[nodiscard]] std::size_t size() const noexcept { return fitted.size(); }
};

/// Exogenous matrix [v, aggregate(x_lag)] (or just [v] for Aggregation::Drop).
inline Eigen::MatrixXd benchmark_exog(const VaryingFrequencyDataset& ds, Aggregation agg,
                                      std::size_t rows) {
    const auto n = static_cast<Eigen::Index>(rows);
    Eigen::MatrixXd X(n, agg == Aggregation::Drop ? 1 : 2);
    for (Eigen::Index t = 0; t < n; ++t) {
        X(t, 0) = ds.v[static_cast<std::size_t>(t)];
        if (agg == Aggregation::Mean) X(t, 1) = ds.x_lag.row(t).mean();
        if (agg == Aggregation::Last) X(t, 1) = ds.x_lag(t, ds.x_lag.cols() - 1);
    }
    return X;
}

/**
 * @brief Aggregated-covariate benchmark: ARMAX with v and the period aggregate
 * of x_lag, then GARCH(1,1) or GJR(1,1) on the ARMAX residuals.
 */
inline BenchmarkFit fit_benchmark(const VaryingFrequencyDataset& ds, BenchmarkKind kind,
                                  const ArmaxSpec& spec = {}, Aggregation agg = Aggregation::Mean) {
    const std::size_t n = ds.size();
    BenchmarkFit fit;
    fit.kind = kind;
    fit.aggregation = agg;
    fit.armax = fit_armax(ds.y, benchmark_exog(ds, agg, n), spec);
    GjrOptions gopt;
    gopt.estimate_mean = !spec.include_intercept;
    fit.gjr = fit_gjr(fit.armax.residuals, kind == BenchmarkKind::Gjr, gopt);
    fit.fitted.resize(n);
    fit.residuals.resize(n);
    for (std::size_t t = 0; t < n; ++t) {
        fit.fitted[t] = fit.armax.fitted[t] + fit.gjr.mean_const;
        fit.residuals[t] = ds.y[t] - fit.fitted[t];
    }
    return fit;
}

inline std::vector<double> forecast_benchmark(const BenchmarkFit& fit,
                                              const VaryingFrequencyDataset& ds_test, std::size_t h) {
    if (h > ds_test.size())
        throw std::invalid_argument("missing covariate rows: horizon " + std::to_string(h) +
                                    " exceeds test length " + std::to_string(ds_test.size()));
    auto out = forecast_armax(fit.armax, h, benchmark_exog(ds_test, fit.aggregation, h));
    for (double& f : out) f += fit.gjr.mean_const;
    return out;
}

}  // namespace vfvol
