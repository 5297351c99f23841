#pragma once

#include "vfvol/arma.hpp"
#include "vfvol/dataset.hpp"
#include "vfvol/garch.hpp"
#include "vfvol/smooth.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <exception>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vfvol {

enum class ModelKind { VfArma, VfGarch };

/**
 * @brief How the working response is rebuilt between stages.
 *
 * PartialResidual removes the fitted values of the other stages from the
 * original response (backfitting). Literal applies the update equations as
 * written in the algorithm description, i.e. the original response minus the
 * latest stage residuals.
 */
enum class UpdateRule { PartialResidual, Literal };

inline std::string to_string(ModelKind k) { return k == ModelKind::VfArma ? "vf-arma" : "vf-garch"; }
inline std::string to_string(UpdateRule r) {
    return r == UpdateRule::PartialResidual ? "partial" : "literal";
}

struct VfConfig {
    ModelKind model_kind = ModelKind::VfArma;
    ArmaxSpec armax_spec{};
    SplineConfig spline_cfg{};
    double mse_tol = 0.005;
    int max_iter = 50;
    UpdateRule update_rule = UpdateRule::PartialResidual;
    /// Consecutive MSE increases treated as divergence.
    int divergence_run = 3;
};

enum class Stage { Armax, Gjr, Gam };

inline std::string to_string(Stage s) {
    switch (s) {
        case Stage::Armax: return "armax";
        case Stage::Gjr: return "gjr";
        case Stage::Gam: return "gam";
    }
    return "?";
}

/// A component estimator failed; carries the stage and outer iteration.
class StageError : public std::runtime_error {
public:
    StageError(Stage stage, int iteration, const std::string& what)
        : std::runtime_error(to_string(stage) + " stage failed at iteration " +
                             std::to_string(iteration) + ": " + what),
          stage_(stage),
          iteration_(iteration) {}
    [[nodiscard]] Stage stage() const noexcept { return stage_; }
    [[nodiscard]] int iteration() const noexcept { return iteration_; }

private:
    Stage stage_;
    int iteration_;
};

struct VfModelFit {
    ModelKind kind = ModelKind::VfArma;
    VfConfig config;
    ArmaxFit armax;
    GjrFit gjr;
    AdditiveFit gam;
    /// Series the ARMAX stage was fitted to (the working response of the last iteration).
    std::vector<double> armax_input;
    std::vector<double> fitted;
    std::vector<double> residuals;
    std::vector<double> mse_trace;
    bool converged = false;
    bool diverged_increasing = false;
    int iterations = 0;

    [[nodiscard]] std::size_t size() const noexcept { return fitted.size(); }
    /// Stage fitted values on the training rows.
    [[nodiscard]] std::vector<double> armax_fitted() const { return armax.fitted; }
    [[nodiscard]] double gjr_fitted() const noexcept { return gjr.mean_const; }
};

namespace detail {

template <class F>
auto run_stage(Stage stage, int iteration, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(stage, iteration, e.what());
    }
}

inline double mean_square(std::span<const double> e) {
    double s = 0.0;
    for (double x : e) s += x * x;
    return e.empty() ? 0.0 : s / static_cast<double>(e.size());
}

inline void check_dataset(const VaryingFrequencyDataset& ds, const VfConfig& cfg) {
    if (ds.size() < 30) throw std::invalid_argument("VF fit needs at least 30 observations");
    if (ds.v.size() != ds.size() || static_cast<std::size_t>(ds.x_lag.rows()) != ds.size())
        throw std::invalid_argument("dataset columns have different lengths");
    if (!(cfg.mse_tol > 0.0)) throw std::invalid_argument("mse_tol must be positive");
    if (cfg.max_iter < 1) throw std::invalid_argument("max_iter must be at least 1");
}

/// The constant mean is the ARMAX intercept when one is fitted; the GJR stage then keeps a zero mean.
inline GjrOptions gjr_options(const ArmaxSpec& spec) {
    GjrOptions o;
    o.estimate_mean = !spec.include_intercept;
    return o;
}

/// Later iterations also start the ARMAX search from the previous estimate.
inline ArmaxOptions armax_options(const VfModelFit& fit, int iteration) {
    ArmaxOptions o;
    if (iteration > 1) o.initial = armax_pack(fit.armax);
    return o;
}

/// Convergence bookkeeping shared by both estimators; returns true when iteration should stop.
inline bool record_iteration(VfModelFit& fit, double mse, int& increases) {
    fit.mse_trace.push_back(mse);
    fit.iterations = static_cast<int>(fit.mse_trace.size());
    const std::size_t k = fit.mse_trace.size();
    if (!std::isfinite(mse)) {
        fit.diverged_increasing = true;
        return true;
    }
    if (k < 2) return false;
    const double prev = fit.mse_trace[k - 2];
    if (std::abs(mse - prev) < fit.config.mse_tol) {
        fit.converged = true;
        return true;
    }
    increases = mse > prev ? increases + 1 : 0;
    if (increases >= fit.config.divergence_run) {
        fit.diverged_increasing = true;
        return true;
    }
    return false;
}

}  // namespace detail

namespace detail {

inline Eigen::MatrixXd column(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

/**
 * Smooth of y minus the fixed ARMAX terms (intercept, AR, exogenous) and the
 * GJR mean, under the ARMAX's MA error filter: the exact minimizer of the
 * stage objective with the ARMAX parameters held. Lambda is pinned to
 * @p lambda once chosen.
 */
inline AdditiveFit gam_given_armax(const VaryingFrequencyDataset& ds, const ArmaxFit& armax, double mu,
                                   const SplineConfig& cfg, const std::vector<double>& lambda) {
    const std::vector<double> sys = armax_systematic(armax, ds.y, column(ds.v));
    std::vector<double> z(ds.size());
    for (std::size_t t = 0; t < z.size(); ++t) z[t] = ds.y[t] - sys[t] - mu;
    SplineConfig c = cfg;
    if (!lambda.empty()) c.component_lambda = lambda;
    return fit_additive_whitened(ds.x_lag, z, armax.theta, armax.start, c);
}

inline void compose(VfModelFit& fit, const std::vector<double>& y_orig) {
    const std::size_t n = y_orig.size();
    fit.fitted.resize(n);
    fit.residuals.resize(n);
    for (std::size_t t = 0; t < n; ++t) {
        fit.fitted[t] = fit.armax.fitted[t] + fit.gjr.mean_const + fit.gam.fitted[t];
        fit.residuals[t] = y_orig[t] - fit.fitted[t];
    }
}

}  // namespace detail

/**
 * @brief VF-GARCH: ARMAX on the working response, GJR on the ARMAX residuals,
 * additive smooth of what remains on the lagged high-frequency panel; the
 * working response is then rebuilt and the cycle repeats.
 *
 * Under PartialResidual the AR terms lag the observed series, the smooth is
 * fitted to y minus the other stages (whitened by the MA polynomial when q > 0)
 * and the ARMAX search is warm-started, so every stage lowers the same
 * penalized conditional sum of squares. Lambda is chosen on the first pass and
 * then held. Literal follows the stated updates verbatim: ARMAX on the updated
 * series with its own lags, and the smooth fitted to the GJR residuals.
 *
 * Stops when |MSE_k - MSE_{k-1}| < mse_tol (converged), after max_iter
 * iterations, or after `divergence_run` consecutive MSE increases (both
 * reported with converged = false).
 */
inline VfModelFit fit_vf_garch(const VaryingFrequencyDataset& ds, const VfConfig& cfg) {
    detail::check_dataset(ds, cfg);
    const std::size_t n = ds.size();
    VfModelFit fit;
    fit.kind = ModelKind::VfGarch;
    fit.config = cfg;
    fit.config.model_kind = ModelKind::VfGarch;
    const bool partial = cfg.update_rule == UpdateRule::PartialResidual;

    const std::vector<double>& y_orig = ds.y;
    const Eigen::MatrixXd vcol = detail::column(ds.v);
    std::vector<double> y_cur = y_orig;
    std::vector<double> lambda;
    int increases = 0;
    for (int it = 1; it <= cfg.max_iter; ++it) {
        fit.armax = detail::run_stage(Stage::Armax, it, [&] {
            return fit_armax(y_cur, vcol, cfg.armax_spec, detail::armax_options(fit, it),
                             partial ? std::span<const double>(y_orig) : std::span<const double>{});
        });
        fit.armax_input = y_cur;
        fit.gjr = detail::run_stage(Stage::Gjr, it, [&] {
            return fit_gjr(fit.armax.residuals, true, detail::gjr_options(cfg.armax_spec));
        });
        fit.gam = detail::run_stage(Stage::Gam, it, [&] {
            if (partial) return detail::gam_given_armax(ds, fit.armax, fit.gjr.mean_const, cfg.spline_cfg, lambda);
            return backfit_additive(ds.x_lag, fit.gjr.resid, cfg.spline_cfg);
        });
        if (partial) {
            lambda = fit.gam.lambda;
            // The MA term depends on the new smooth; re-evaluate the ARMAX at its parameters.
            std::vector<double> y_next(n);
            for (std::size_t t = 0; t < n; ++t) y_next[t] = y_orig[t] - fit.gam.fitted[t];
            fit.armax = armax_apply(fit.armax, y_next, vcol, y_orig);
            fit.armax_input = y_next;
        }
        detail::compose(fit, y_orig);
        if (detail::record_iteration(fit, detail::mean_square(fit.residuals), increases)) break;

        for (std::size_t t = 0; t < n; ++t)
            y_cur[t] = partial ? y_orig[t] - fit.gam.fitted[t] : y_orig[t] - fit.gam.residuals[t];
    }
    return fit;
}

/**
 * @brief VF-ARMA: additive smooth of the working response on the lagged panel,
 * ARMAX on the response with the smooth removed, GJR on the ARMAX residuals;
 * the working response for the next smooth is then rebuilt.
 *
 * Update rules, convergence and divergence are as in fit_vf_garch.
 */
inline VfModelFit fit_vf_arma(const VaryingFrequencyDataset& ds, const VfConfig& cfg) {
    detail::check_dataset(ds, cfg);
    const std::size_t n = ds.size();
    VfModelFit fit;
    fit.kind = ModelKind::VfArma;
    fit.config = cfg;
    fit.config.model_kind = ModelKind::VfArma;
    const bool partial = cfg.update_rule == UpdateRule::PartialResidual;

    const std::vector<double>& y_orig = ds.y;
    const Eigen::MatrixXd vcol = detail::column(ds.v);
    std::vector<double> y_cur = y_orig;
    std::vector<double> y_upd(n);
    std::vector<double> lambda;
    int increases = 0;
    for (int it = 1; it <= cfg.max_iter; ++it) {
        fit.gam = detail::run_stage(Stage::Gam, it, [&] {
            if (partial && it > 1)
                return detail::gam_given_armax(ds, fit.armax, fit.gjr.mean_const, cfg.spline_cfg, lambda);
            return backfit_additive(ds.x_lag, y_cur, cfg.spline_cfg);
        });
        if (partial && it == 1) lambda = fit.gam.lambda;
        for (std::size_t t = 0; t < n; ++t)
            y_upd[t] = partial ? y_orig[t] - fit.gam.fitted[t] : y_orig[t] - fit.gam.residuals[t];
        fit.armax = detail::run_stage(Stage::Armax, it, [&] {
            return fit_armax(y_upd, vcol, cfg.armax_spec, detail::armax_options(fit, it),
                             partial ? std::span<const double>(y_orig) : std::span<const double>{});
        });
        fit.armax_input = y_upd;
        fit.gjr = detail::run_stage(Stage::Gjr, it, [&] {
            return fit_gjr(fit.armax.residuals, true, detail::gjr_options(cfg.armax_spec));
        });
        detail::compose(fit, y_orig);
        if (detail::record_iteration(fit, detail::mean_square(fit.residuals), increases)) break;

        for (std::size_t t = 0; t < n; ++t)
            y_cur[t] = partial ? y_orig[t] - fit.armax.fitted[t] - fit.gjr.mean_const
                               : y_orig[t] - fit.gjr.resid[t];
    }
    return fit;
}

inline VfModelFit fit_vf(const VaryingFrequencyDataset& ds, const VfConfig& cfg) {
    return cfg.model_kind == ModelKind::VfArma ? fit_vf_arma(ds, cfg) : fit_vf_garch(ds, cfg);
}

/**
 * @brief h-step forecasts for the rows following the training sample.
 *
 * Sum of the ARMAX recursion (future v taken from @p ds_test), the GJR
 * constant mean, and the additive model evaluated on each step's x_lag row
 * (previous-period values, so known one step ahead).
 */
inline std::vector<double> forecast_vf(const VfModelFit& fit, const VaryingFrequencyDataset& ds_test,
                                       std::size_t h) {
    if (h > ds_test.size())
        throw std::invalid_argument("missing covariate rows: horizon " + std::to_string(h) +
                                    " exceeds test length " + std::to_string(ds_test.size()));
    if (ds_test.v.size() < h || static_cast<std::size_t>(ds_test.x_lag.rows()) < h)
        throw std::invalid_argument("missing covariate rows for the forecast horizon");
    const auto gam = evaluate_additive(fit.gam, ds_test.x_lag.topRows(static_cast<Eigen::Index>(h)));
    std::vector<double> rest(h);
    for (std::size_t s = 0; s < h; ++s) rest[s] = fit.gjr.mean_const + gam[s];
    const auto arma = forecast_armax(fit.armax, h, std::span<const double>(ds_test.v.data(), h), rest);
    std::vector<double> out(h);
    for (std::size_t s = 0; s < h; ++s) out[s] = arma[s] + fit.gjr.mean_const + gam[s];
    return out;
}

}  // namespace vfvol
