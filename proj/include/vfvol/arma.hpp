#pragma once

#include "vfvol/optim.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vfvol {

/**
 * @brief Orders of the ARMAX mean equation
 *
 *   y_t = c + sum_i phi_i y_{t-i} + sum_j theta_j a_{t-j} + sum_k sum_l psi_{k,l} x_{k,t-l} + a_t
 *
 * where l runs over 0..exog_lags for every exogenous column k.
 */
struct ArmaxSpec {
    int p = 1;
    int q = 1;
    int exog_lags = 0;
    bool include_intercept = true;
};

struct ArmaxFit {
    ArmaxSpec spec;
    std::size_t exog_cols = 0;

    std::vector<double> phi;
    std::vector<double> theta;
    /// psi[k * (exog_lags + 1) + l] multiplies column k at lag l.
    std::vector<double> psi;
    double intercept = 0.0;

    std::vector<double> fitted;
    std::vector<double> residuals;
    double sse = 0.0;

    /// Index of the first observation with a full set of lags; earlier points
    /// are conditioning values (residual 0).
    std::size_t start = 0;
    /// Last exog_lags rows of the exogenous matrix, for forecasting.
    Eigen::MatrixXd exog_tail;
    /// Series the AR terms lag when it differs from the response (empty otherwise).
    std::vector<double> ar_history;

    bool converged = true;
    double grad_norm = 0.0;
    bool near_unit_root = false;

    [[nodiscard]] std::size_t size() const noexcept { return fitted.size(); }
};

struct ArmaxOptions {
    optim::NelderMeadOptions nm{};
    /// Companion-matrix spectral radius above which a fit is flagged near-unit-root.
    double unit_root_flag = 0.98;
    /// Gradient-norm threshold (relative to 1 + sse) used for the convergence flag.
    double grad_tol = 1e-4;
    /// Extra starting point in packed order (intercept, phi, theta, psi); ignored if empty.
    std::vector<double> initial;
};

namespace detail {

/// Spectral radius of the companion matrix of z^k - c_1 z^{k-1} - ... - c_k.
inline double companion_radius(std::span<const double> c) {
    const auto k = static_cast<Eigen::Index>(c.size());
    if (k == 0) return 0.0;
    if (k == 1) return std::abs(c[0]);
    Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(k, k);
    for (Eigen::Index i = 0; i < k; ++i) comp(0, i) = c[static_cast<std::size_t>(i)];
    for (Eigen::Index i = 1; i < k; ++i) comp(i, i - 1) = 1.0;
    Eigen::EigenSolver<Eigen::MatrixXd> es(comp, false);
    double r = 0.0;
    for (Eigen::Index i = 0; i < k; ++i) r = std::max(r, std::abs(es.eigenvalues()[i]));
    return r;
}

struct ArmaxLayout {
    std::size_t p, q, k, lags;
    bool icept;
    [[nodiscard]] std::size_t n_psi() const { return k * (lags + 1); }
    [[nodiscard]] std::size_t size() const { return (icept ? 1 : 0) + p + q + n_psi(); }
    [[nodiscard]] std::size_t off_phi() const { return icept ? 1 : 0; }
    [[nodiscard]] std::size_t off_theta() const { return off_phi() + p; }
    [[nodiscard]] std::size_t off_psi() const { return off_theta() + q; }
};

/// Conditional residuals; returns the sum of squares from `start` on.
inline double armax_residuals(const ArmaxLayout& L, std::span<const double> y,
                              std::span<const double> lag, const Eigen::MatrixXd& x,
                              const std::vector<double>& par, std::size_t start, std::vector<double>& a) {
    const std::size_t n = y.size();
    a.assign(n, 0.0);
    const double c = L.icept ? par[0] : 0.0;
    double sse = 0.0;
    for (std::size_t t = start; t < n; ++t) {
        double pred = c;
        for (std::size_t i = 1; i <= L.p; ++i) pred += par[L.off_phi() + i - 1] * lag[t - i];
        for (std::size_t j = 1; j <= L.q && j <= t; ++j)
            pred += par[L.off_theta() + j - 1] * a[t - j];
        for (std::size_t col = 0; col < L.k; ++col)
            for (std::size_t l = 0; l <= L.lags; ++l)
                pred += par[L.off_psi() + col * (L.lags + 1) + l] *
                        x(static_cast<Eigen::Index>(t - l), static_cast<Eigen::Index>(col));
        a[t] = y[t] - pred;
        sse += a[t] * a[t];
    }
    return sse;
}

/// Yule–Walker AR(p) estimate from sample autocovariances.
inline std::vector<double> yule_walker(std::span<const double> y, std::size_t p) {
    std::vector<double> phi(p, 0.0);
    if (p == 0 || y.size() <= p) return phi;
    const std::size_t n = y.size();
    double mean = 0.0;
    for (double e : y) mean += e;
    mean /= static_cast<double>(n);
    std::vector<double> acov(p + 1, 0.0);
    for (std::size_t h = 0; h <= p; ++h) {
        for (std::size_t t = h; t < n; ++t) acov[h] += (y[t] - mean) * (y[t - h] - mean);
        acov[h] /= static_cast<double>(n);
    }
    if (!(acov[0] > 0.0)) return phi;
    const auto P = static_cast<Eigen::Index>(p);
    Eigen::MatrixXd R(P, P);
    Eigen::VectorXd r(P);
    for (Eigen::Index i = 0; i < P; ++i) {
        r(i) = acov[static_cast<std::size_t>(i + 1)];
        for (Eigen::Index j = 0; j < P; ++j) R(i, j) = acov[static_cast<std::size_t>(std::abs(i - j))];
    }
    const Eigen::VectorXd sol = R.ldlt().solve(r);
    for (std::size_t i = 0; i < p; ++i) phi[i] = sol(static_cast<Eigen::Index>(i));
    return phi;
}

/// Least squares of `target` on [1?, lagged y (if use_ar), lagged exog], rows from `start`.
inline Eigen::VectorXd armax_ols(const ArmaxLayout& L, std::span<const double> target,
                                 std::span<const double> y, const Eigen::MatrixXd& x,
                                 std::size_t start, bool use_ar) {
    const std::size_t n = y.size();
    const std::size_t cols = (L.icept ? 1 : 0) + (use_ar ? L.p : 0) + L.n_psi();
    const auto rows = static_cast<Eigen::Index>(n - start);
    Eigen::MatrixXd A(rows, static_cast<Eigen::Index>(cols));
    Eigen::VectorXd b(rows);
    for (std::size_t t = start; t < n; ++t) {
        const auto r = static_cast<Eigen::Index>(t - start);
        Eigen::Index c = 0;
        if (L.icept) A(r, c++) = 1.0;
        if (use_ar)
            for (std::size_t i = 1; i <= L.p; ++i) A(r, c++) = y[t - i];
        for (std::size_t col = 0; col < L.k; ++col)
            for (std::size_t l = 0; l <= L.lags; ++l)
                A(r, c++) = x(static_cast<Eigen::Index>(t - l), static_cast<Eigen::Index>(col));
        b(r) = target[t];
    }
    if (cols == 0) return Eigen::VectorXd{};
    return A.completeOrthogonalDecomposition().solve(b);
}

}  // namespace detail

/**
 * @brief Conditional-sum-of-squares ARMAX estimate.
 *
 * Pre-sample innovations are zero and the first max(p, exog_lags) points are
 * conditioned on. The simplex search starts from the better (lower CSS) of a
 * Yule–Walker start and a least-squares ARX start; parameter sets whose AR or
 * MA polynomial has a root on or inside the unit circle are rejected.
 *
 * @param exog n x k matrix of exogenous columns (k may be 0).
 * @param ar_series series whose lags enter the AR terms; empty means @p y itself.
 */
inline ArmaxFit fit_armax(std::span<const double> y, const Eigen::MatrixXd& exog,
                          const ArmaxSpec& spec, const ArmaxOptions& opt = {},
                          std::span<const double> ar_series = {}) {
    if (spec.p < 0 || spec.q < 0 || spec.exog_lags < 0)
        throw std::invalid_argument("ARMAX orders must be non-negative");
    const std::size_t n = y.size();
    if (static_cast<std::size_t>(exog.rows()) != n)
        throw std::invalid_argument("exogenous matrix rows differ from series length");
    const detail::ArmaxLayout L{static_cast<std::size_t>(spec.p), static_cast<std::size_t>(spec.q),
                                static_cast<std::size_t>(exog.cols()),
                                static_cast<std::size_t>(spec.exog_lags), spec.include_intercept};
    if (L.p + L.q == 0 && L.k == 0)
        throw std::invalid_argument("ARMAX spec needs p + q >= 1 or an exogenous term");
    if (n < L.p + L.q + L.lags + 5)
        throw std::invalid_argument("series too short for ARMAX(" + std::to_string(L.p) + "," +
                                    std::to_string(L.q) + "): " + std::to_string(n));
    for (std::size_t t = 0; t < n; ++t)
        if (!std::isfinite(y[t])) throw std::invalid_argument("non-finite response at index " + std::to_string(t));
    if (!exog.allFinite()) throw std::invalid_argument("non-finite exogenous value");
    if (!ar_series.empty() && ar_series.size() != n)
        throw std::invalid_argument("AR source length differs from series length");
    const std::span<const double> lag = ar_series.empty() ? y : ar_series;
    for (double e : lag)
        if (!std::isfinite(e)) throw std::invalid_argument("non-finite AR source value");

    const std::size_t start = std::max(L.p, L.lags);
    std::vector<double> scratch;

    auto objective = [&](const std::vector<double>& par) {
        const std::span<const double> phi(par.data() + L.off_phi(), L.p);
        if (detail::companion_radius(phi) >= 1.0) return std::numeric_limits<double>::infinity();
        if (L.q > 0) {
            std::vector<double> neg(L.q);
            for (std::size_t j = 0; j < L.q; ++j) neg[j] = -par[L.off_theta() + j];
            if (detail::companion_radius(neg) >= 1.0) return std::numeric_limits<double>::infinity();
        }
        return detail::armax_residuals(L, y, lag, exog, par, start, scratch);
    };

    // Start 1: Yule–Walker AR, then OLS for intercept and exogenous terms.
    std::vector<double> start_yw(L.size(), 0.0);
    {
        const auto phi = detail::yule_walker(lag, L.p);
        for (std::size_t i = 0; i < L.p; ++i) start_yw[L.off_phi() + i] = phi[i];
        std::vector<double> target(y.begin(), y.end());
        for (std::size_t t = start; t < n; ++t)
            for (std::size_t i = 1; i <= L.p; ++i) target[t] -= phi[i - 1] * lag[t - i];
        const Eigen::VectorXd sol = detail::armax_ols(L, target, lag, exog, start, false);
        Eigen::Index c = 0;
        if (L.icept) start_yw[0] = sol(c++);
        for (std::size_t j = 0; j < L.n_psi(); ++j) start_yw[L.off_psi() + j] = sol(c++);
    }
    // Start 2: full ARX least squares.
    std::vector<double> start_ls(L.size(), 0.0);
    {
        const Eigen::VectorXd sol = detail::armax_ols(L, y, lag, exog, start, true);
        Eigen::Index c = 0;
        if (L.icept) start_ls[0] = sol(c++);
        for (std::size_t i = 0; i < L.p; ++i) start_ls[L.off_phi() + i] = sol(c++);
        for (std::size_t j = 0; j < L.n_psi(); ++j) start_ls[L.off_psi() + j] = sol(c++);
    }
    const double f_yw = objective(start_yw);
    const double f_ls = objective(start_ls);
    std::vector<double> x0 = (f_ls < f_yw) ? start_ls : start_yw;
    double f0 = std::min(f_yw, f_ls);
    if (opt.initial.size() == L.size()) {
        const double f_in = objective(opt.initial);
        if (f_in < f0) {
            f0 = f_in;
            x0 = opt.initial;
        }
    } else if (!opt.initial.empty()) {
        throw std::invalid_argument("ARMAX initial parameter vector has the wrong length");
    }
    if (!std::isfinite(f0))
        throw std::runtime_error("ARMAX: no finite starting point for the CSS objective");

    optim::NelderMeadOptions nm = opt.nm;
    const auto res = optim::nelder_mead(objective, x0, nm);

    ArmaxFit fit;
    fit.spec = spec;
    fit.exog_cols = L.k;
    fit.start = start;
    const auto& par = res.x;
    fit.intercept = L.icept ? par[0] : 0.0;
    fit.phi.assign(par.begin() + static_cast<std::ptrdiff_t>(L.off_phi()),
                   par.begin() + static_cast<std::ptrdiff_t>(L.off_theta()));
    fit.theta.assign(par.begin() + static_cast<std::ptrdiff_t>(L.off_theta()),
                     par.begin() + static_cast<std::ptrdiff_t>(L.off_psi()));
    fit.psi.assign(par.begin() + static_cast<std::ptrdiff_t>(L.off_psi()), par.end());
    fit.sse = detail::armax_residuals(L, y, lag, exog, par, start, fit.residuals);
    if (!ar_series.empty()) fit.ar_history.assign(ar_series.begin(), ar_series.end());
    fit.fitted.resize(n);
    for (std::size_t t = 0; t < n; ++t) fit.fitted[t] = y[t] - fit.residuals[t];
    if (L.lags > 0)
        fit.exog_tail = exog.bottomRows(static_cast<Eigen::Index>(L.lags));
    else
        fit.exog_tail.resize(0, static_cast<Eigen::Index>(L.k));

    fit.grad_norm = optim::norm2(optim::numeric_gradient(objective, par));
    fit.converged = res.converged && std::isfinite(fit.grad_norm) &&
                    fit.grad_norm <= opt.grad_tol * (1.0 + fit.sse) * static_cast<double>(n);
    std::vector<double> neg(L.q);
    for (std::size_t j = 0; j < L.q; ++j) neg[j] = -fit.theta[j];
    fit.near_unit_root = detail::companion_radius(fit.phi) > opt.unit_root_flag ||
                         detail::companion_radius(neg) > opt.unit_root_flag;
    return fit;
}

inline ArmaxFit fit_armax(std::span<const double> y, std::span<const double> v,
                          const ArmaxSpec& spec, const ArmaxOptions& opt = {},
                          std::span<const double> ar_series = {}) {
    if (y.size() != v.size()) throw std::invalid_argument("y and v lengths differ");
    const Eigen::MatrixXd x = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    return fit_armax(y, x, spec, opt, ar_series);
}

/// Parameters in the packed order used by the estimator: intercept (if any), phi, theta, psi.
inline std::vector<double> armax_pack(const ArmaxFit& fit) {
    std::vector<double> par;
    if (fit.spec.include_intercept) par.push_back(fit.intercept);
    par.insert(par.end(), fit.phi.begin(), fit.phi.end());
    par.insert(par.end(), fit.theta.begin(), fit.theta.end());
    par.insert(par.end(), fit.psi.begin(), fit.psi.end());
    return par;
}

namespace detail {
inline ArmaxLayout layout_of(const ArmaxFit& fit) {
    return ArmaxLayout{fit.phi.size(), fit.theta.size(), fit.exog_cols,
                       static_cast<std::size_t>(fit.spec.exog_lags), fit.spec.include_intercept};
}
}  // namespace detail

/**
 * @brief Re-evaluates the fitted parameters on a new response (same lag source
 * convention as the fit); fitted values, residuals and sse are recomputed.
 */
inline ArmaxFit armax_apply(const ArmaxFit& fit, std::span<const double> y, const Eigen::MatrixXd& exog,
                            std::span<const double> ar_series = {}) {
    const auto L = detail::layout_of(fit);
    if (static_cast<std::size_t>(exog.rows()) != y.size() || static_cast<std::size_t>(exog.cols()) != L.k)
        throw std::invalid_argument("exogenous matrix does not match the fitted model");
    const std::span<const double> lag = ar_series.empty() ? y : ar_series;
    if (lag.size() != y.size()) throw std::invalid_argument("AR source length differs from series length");
    ArmaxFit out = fit;
    out.sse = detail::armax_residuals(L, y, lag, exog, armax_pack(fit), fit.start, out.residuals);
    out.fitted.resize(y.size());
    for (std::size_t t = 0; t < y.size(); ++t) out.fitted[t] = y[t] - out.residuals[t];
    if (ar_series.empty()) out.ar_history.clear();
    else out.ar_history.assign(ar_series.begin(), ar_series.end());
    return out;
}

/// Intercept + AR + exogenous part of the predictor (no MA term); zero before `start`.
inline std::vector<double> armax_systematic(const ArmaxFit& fit, std::span<const double> lag,
                                            const Eigen::MatrixXd& exog) {
    const std::size_t n = lag.size();
    const std::size_t lags = static_cast<std::size_t>(fit.spec.exog_lags);
    std::vector<double> out(n, 0.0);
    for (std::size_t t = fit.start; t < n; ++t) {
        double s = fit.intercept;
        for (std::size_t i = 1; i <= fit.phi.size(); ++i) s += fit.phi[i - 1] * lag[t - i];
        for (std::size_t c = 0; c < fit.exog_cols; ++c)
            for (std::size_t l = 0; l <= lags; ++l)
                s += fit.psi[c * (lags + 1) + l] * exog(static_cast<Eigen::Index>(t - l), static_cast<Eigen::Index>(c));
        out[t] = s;
    }
    return out;
}

/// Conditional sum of squares of an already-fitted parameter set on (y, exog).
inline double armax_css(const ArmaxFit& fit, std::span<const double> y, const Eigen::MatrixXd& exog) {
    const auto L = detail::layout_of(fit);
    const std::vector<double> par = armax_pack(fit);
    std::vector<double> a;
    const std::span<const double> lag =
        fit.ar_history.empty() ? y : std::span<const double>(fit.ar_history);
    if (lag.size() != y.size()) throw std::invalid_argument("series length differs from the fitted AR source");
    return detail::armax_residuals(L, y, lag, exog, par, fit.start, a);
}

/**
 * @brief h-step conditional-expectation forecast; future innovations are zero.
 *
 * @param exog_future at least h rows of future exogenous values (k columns).
 * @param ar_offset when the AR terms lag a separate source series, the
 *        forecast of that series at step s is the ARMAX forecast plus ar_offset[s].
 */
inline std::vector<double> forecast_armax(const ArmaxFit& fit, std::size_t h,
                                          const Eigen::MatrixXd& exog_future,
                                          std::span<const double> ar_offset = {}) {
    if (fit.exog_cols > 0 &&
        (static_cast<std::size_t>(exog_future.rows()) < h ||
         static_cast<std::size_t>(exog_future.cols()) != fit.exog_cols))
        throw std::invalid_argument("missing exogenous future values: need " + std::to_string(h) +
                                    " rows of " + std::to_string(fit.exog_cols) + " columns");
    const std::size_t n = fit.size();
    const std::size_t lags = static_cast<std::size_t>(fit.spec.exog_lags);
    std::vector<double> yy(n + h), aa(n + h, 0.0);
    const bool separate = !fit.ar_history.empty();
    if (separate && fit.ar_history.size() != n) throw std::invalid_argument("AR history length mismatch");
    if (separate && !fit.phi.empty() && h > 1 && ar_offset.size() + 1 < h)
        throw std::invalid_argument("AR source offsets missing for the forecast horizon");
    for (std::size_t t = 0; t < n; ++t) {
        yy[t] = separate ? fit.ar_history[t] : fit.fitted[t] + fit.residuals[t];
        aa[t] = fit.residuals[t];
    }
    auto exog_at = [&](std::size_t t, std::size_t col) {
        if (t >= n) return exog_future(static_cast<Eigen::Index>(t - n), static_cast<Eigen::Index>(col));
        const std::size_t back = n - t;  // 1 = last in-sample row
        if (back > lags) throw std::logic_error("exogenous history not retained");
        return fit.exog_tail(static_cast<Eigen::Index>(lags - back), static_cast<Eigen::Index>(col));
    };
    std::vector<double> out(h);
    for (std::size_t s = 0; s < h; ++s) {
        const std::size_t t = n + s;
        double pred = fit.intercept;
        for (std::size_t i = 1; i <= fit.phi.size(); ++i)
            if (t >= i) pred += fit.phi[i - 1] * yy[t - i];
        for (std::size_t j = 1; j <= fit.theta.size(); ++j)
            if (t >= j) pred += fit.theta[j - 1] * aa[t - j];
        for (std::size_t col = 0; col < fit.exog_cols; ++col)
            for (std::size_t l = 0; l <= lags; ++l)
                pred += fit.psi[col * (lags + 1) + l] * exog_at(t - l, col);
        yy[t] = pred + (separate && s < ar_offset.size() ? ar_offset[s] : 0.0);
        out[s] = pred;
    }
    return out;
}

inline std::vector<double> forecast_armax(const ArmaxFit& fit, std::size_t h,
                                          std::span<const double> v_future,
                                          std::span<const double> ar_offset = {}) {
    if (fit.exog_cols > 1) throw std::invalid_argument("fit has more than one exogenous column");
    if (fit.exog_cols == 1 && v_future.size() < h)
        throw std::invalid_argument("missing exogenous future values: need " + std::to_string(h));
    Eigen::MatrixXd x(static_cast<Eigen::Index>(v_future.size()), static_cast<Eigen::Index>(fit.exog_cols));
    for (std::size_t i = 0; i < v_future.size() && fit.exog_cols == 1; ++i)
        x(static_cast<Eigen::Index>(i), 0) = v_future[i];
    return forecast_armax(fit, h, x, ar_offset);
}

}  // namespace vfvol
