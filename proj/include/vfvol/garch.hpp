#pragma once

#include "vfvol/optim.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vfvol {

/// GJR(1,1): sigma2_t = omega + (alpha + gamma * 1[a_{t-1} < 0]) a_{t-1}^2 + beta sigma2_{t-1}.
struct GjrParams {
    double omega = 0.0;
    double alpha = 0.0;
    double gamma = 0.0;
    double beta = 0.0;

    [[nodiscard]] double persistence() const noexcept { return alpha + beta + 0.5 * gamma; }

    [[nodiscard]] bool valid() const noexcept {
        return omega > 0.0 && alpha >= 0.0 && beta >= 0.0 && alpha + gamma >= 0.0 &&
               persistence() < 1.0;
    }

    /// omega / (1 - alpha - beta - gamma/2); infinite when not covariance-stationary.
    [[nodiscard]] double unconditional_variance() const noexcept {
        const double p = persistence();
        return p < 1.0 ? omega / (1.0 - p) : std::numeric_limits<double>::infinity();
    }
};

struct GjrFit {
    GjrParams params;
    bool leverage = true;
    /// Constant conditional mean; this is the stage's fitted value.
    double mean_const = 0.0;
    double sigma2_init = 0.0;
    std::vector<double> sigma2;
    std::vector<double> std_resid;
    /// Centered innovations a_t - mean_const.
    std::vector<double> resid;
    double loglik = 0.0;
    double loglik_init = 0.0;

    bool converged = true;
    bool alpha_at_bound = false;
    bool beta_at_bound = false;
    bool persistence_at_bound = false;

    [[nodiscard]] bool boundary() const noexcept {
        return alpha_at_bound || beta_at_bound || persistence_at_bound;
    }
};

struct GjrOptions {
    optim::NelderMeadOptions nm{};
    /// Estimate mean_const jointly; when false it is pinned at 0.
    bool estimate_mean = true;
    double bound_tol = 1e-4;
};

/// Variance recursion seeded with sigma2_init at the first observation.
inline std::vector<double> sigma2_path(const GjrParams& p, std::span<const double> a,
                                       double sigma2_init) {
    if (!(sigma2_init > 0.0)) throw std::invalid_argument("sigma2_init must be positive");
    std::vector<double> s2(a.size());
    if (a.empty()) return s2;
    s2[0] = sigma2_init;
    for (std::size_t t = 1; t < a.size(); ++t) {
        const double prev = a[t - 1];
        const double arch = p.alpha + (prev < 0.0 ? p.gamma : 0.0);
        s2[t] = p.omega + arch * prev * prev + p.beta * s2[t - 1];
    }
    return s2;
}

/// Gaussian quasi log-likelihood of innovations `e` (already centered).
inline double gjr_loglik(const GjrParams& p, std::span<const double> e, double sigma2_init) {
    constexpr double log2pi = 1.8378770664093454835606594728112;
    double ll = 0.0;
    double s2 = sigma2_init;
    for (std::size_t t = 0; t < e.size(); ++t) {
        if (t > 0) {
            const double prev = e[t - 1];
            s2 = p.omega + (p.alpha + (prev < 0.0 ? p.gamma : 0.0)) * prev * prev + p.beta * s2;
        }
        if (!(s2 > 0.0) || !std::isfinite(s2)) return -std::numeric_limits<double>::infinity();
        ll += -0.5 * (log2pi + std::log(s2) + e[t] * e[t] / s2);
    }
    return ll;
}

namespace detail {

inline double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

// Unconstrained vector -> (mean, params).
//   leverage:    [mu, log omega, logit P, logit(beta/P), logit(alpha/(2R))], R = P - beta
//   no leverage: [mu, log omega, logit P, logit(beta/P)],                    alpha = P - beta
// This covers exactly {omega > 0, alpha >= 0, beta >= 0, alpha + gamma >= 0, P < 1}.
constexpr double kMaxPersistence = 0.999999;

inline GjrParams gjr_from_free(const std::vector<double>& z, bool leverage) {
    GjrParams p;
    p.omega = std::exp(z[1]);
    const double P = kMaxPersistence * logistic(z[2]);
    p.beta = P * logistic(z[3]);
    const double R = P - p.beta;  // alpha + gamma/2
    if (leverage) {
        p.alpha = 2.0 * R * logistic(z[4]);
        p.gamma = 2.0 * (R - p.alpha);
    } else {
        p.alpha = R;
        p.gamma = 0.0;
    }
    return p;
}

inline std::vector<double> gjr_to_free(double mu, const GjrParams& p, bool leverage) {
    auto clamp01 = [](double x) { return std::clamp(x, 1e-6, 1.0 - 1e-6); };
    const double P = std::clamp(p.persistence(), 1e-6, kMaxPersistence * (1.0 - 1e-6));
    std::vector<double> z{mu, std::log(p.omega), logit(P / kMaxPersistence),
                          logit(clamp01(p.beta / P))};
    if (leverage) {
        const double R = std::max(P - p.beta, 1e-12);
        z.push_back(logit(clamp01(p.alpha / (2.0 * R))));
    }
    return z;
}

inline double sample_variance(std::span<const double> a) {
    if (a.size() < 2) return 0.0;
    double m = 0.0;
    for (double e : a) m += e;
    m /= static_cast<double>(a.size());
    double s = 0.0;
    for (double e : a) s += (e - m) * (e - m);
    return s / static_cast<double>(a.size() - 1);
}

}  // namespace detail

/**
 * @brief Gaussian QMLE of GJR(1,1) (or GARCH(1,1) with leverage = false) on innovations @p a.
 *
 * The recursion is seeded with the sample variance of @p a. Starting values
 * are the best of a small grid of persistence levels; the returned
 * log-likelihood is never below that of the starting point.
 */
inline GjrFit fit_gjr(std::span<const double> a, bool leverage, const GjrOptions& opt = {}) {
    const std::size_t n = a.size();
    if (n < 3) throw std::invalid_argument("GJR fit needs at least 3 observations");
    for (std::size_t t = 0; t < n; ++t)
        if (!std::isfinite(a[t])) throw std::invalid_argument("non-finite innovation at index " + std::to_string(t));

    double var = detail::sample_variance(a);
    if (!(var > 0.0)) var = std::numeric_limits<double>::min() * 1e10;
    double mean = 0.0;
    for (double e : a) mean += e;
    mean /= static_cast<double>(n);

    std::vector<double> centered(n);
    auto neg_loglik = [&](const std::vector<double>& z) {
        const GjrParams p = detail::gjr_from_free(z, leverage);
        const double mu = opt.estimate_mean ? z[0] : 0.0;
        for (std::size_t t = 0; t < n; ++t) centered[t] = a[t] - mu;
        const double ll = gjr_loglik(p, centered, var);
        return std::isfinite(ll) ? -ll : std::numeric_limits<double>::infinity();
    };

    // Starting grid over persistence and ARCH share.
    std::vector<double> best_start;
    double best_f = std::numeric_limits<double>::infinity();
    const double mu0 = opt.estimate_mean ? mean : 0.0;
    for (double P : {0.10, 0.50, 0.90, 0.97}) {
        for (double arch_share : {0.1, 0.3}) {
            GjrParams p;
            const double arch = P * arch_share;
            p.beta = P - arch;
            if (leverage) {
                p.alpha = arch * 0.5;
                p.gamma = arch;  // alpha + gamma/2 = arch
            } else {
                p.alpha = arch;
            }
            p.omega = var * (1.0 - P);
            auto z = detail::gjr_to_free(mu0, p, leverage);
            const double f = neg_loglik(z);
            if (f < best_f) {
                best_f = f;
                best_start = std::move(z);
            }
        }
    }
    if (!std::isfinite(best_f)) throw std::runtime_error("GJR: likelihood not finite at any start");

    optim::NelderMeadOptions nm = opt.nm;
    nm.initial_step = std::max(nm.initial_step, 0.5);
    nm.initial_step_rel = 0.05;
    std::vector<double> x0 = best_start;
    if (!opt.estimate_mean) x0[0] = 0.0;
    // With the mean pinned, its coordinate is inert; drop it from the search.
    optim::NelderMeadResult res;
    if (opt.estimate_mean) {
        // Mean moves on the data scale; give it a scale-appropriate initial step via rescaling.
        const double sd = std::sqrt(var);
        auto scaled = [&](const std::vector<double>& w) {
            std::vector<double> z = w;
            z[0] = w[0] * sd;
            return neg_loglik(z);
        };
        std::vector<double> w0 = x0;
        w0[0] = x0[0] / sd;
        res = optim::nelder_mead(scaled, w0, nm);
        res.x[0] *= sd;
    } else {
        auto reduced = [&](const std::vector<double>& w) {
            std::vector<double> z(w.size() + 1, 0.0);
            std::copy(w.begin(), w.end(), z.begin() + 1);
            return neg_loglik(z);
        };
        std::vector<double> w0(x0.begin() + 1, x0.end());
        res = optim::nelder_mead(reduced, w0, nm);
        res.x.insert(res.x.begin(), 0.0);
    }

    GjrFit fit;
    fit.leverage = leverage;
    fit.params = detail::gjr_from_free(res.x, leverage);
    fit.mean_const = opt.estimate_mean ? res.x[0] : 0.0;
    fit.sigma2_init = var;
    fit.resid.resize(n);
    for (std::size_t t = 0; t < n; ++t) fit.resid[t] = a[t] - fit.mean_const;
    fit.sigma2 = sigma2_path(fit.params, fit.resid, var);
    fit.std_resid.resize(n);
    for (std::size_t t = 0; t < n; ++t) fit.std_resid[t] = fit.resid[t] / std::sqrt(fit.sigma2[t]);
    fit.loglik = gjr_loglik(fit.params, fit.resid, var);
    fit.loglik_init = -best_f;
    fit.converged = res.converged;
    fit.alpha_at_bound = fit.params.alpha < opt.bound_tol;
    fit.beta_at_bound = fit.params.beta < opt.bound_tol;
    fit.persistence_at_bound = fit.params.persistence() > 1.0 - opt.bound_tol;
    return fit;
}

/**
 * @brief Variance forecasts for steps 1..h after the last observation.
 *
 * Step 1 is the exact recursion; later steps use E[(alpha + gamma I) a^2] =
 * (alpha + gamma/2) sigma2 under symmetric innovations.
 */
inline std::vector<double> forecast_sigma2(const GjrFit& fit, std::size_t h) {
    if (h < 1) throw std::invalid_argument("forecast horizon must be at least 1");
    std::vector<double> out(h);
    const auto& p = fit.params;
    if (fit.resid.empty()) throw std::invalid_argument("fit holds no observations");
    const double last = fit.resid.back();
    out[0] = p.omega + (p.alpha + (last < 0.0 ? p.gamma : 0.0)) * last * last +
             p.beta * fit.sigma2.back();
    for (std::size_t k = 1; k < h; ++k) out[k] = p.omega + p.persistence() * out[k - 1];
    return out;
}

}  // namespace vfvol
