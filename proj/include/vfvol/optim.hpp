#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace vfvol::optim {

/**
 * @brief Settings for the Nelder–Mead downhill simplex search.
 *
 * The search is unconstrained; callers express constraints either through a
 * reparameterization or by returning +inf from the objective for infeasible
 * points (an infeasible vertex is never accepted over a finite one).
 */
struct NelderMeadOptions {
    std::size_t max_evals = 20000;
    /// Stop when the spread of objective values over the simplex falls below
    /// f_tol * (|f_best| + f_tol).
    double f_tol = 1e-12;
    /// ... and the simplex diameter (max coordinate distance to the best vertex) below x_tol.
    double x_tol = 1e-9;
    /// Initial simplex edge per coordinate: max(initial_step, initial_step_rel * |x0_i|).
    double initial_step = 0.1;
    double initial_step_rel = 0.1;
    /// Number of restarts from the incumbent once the simplex has collapsed.
    int restarts = 2;

    double reflect = 1.0;
    double expand = 2.0;
    double contract = 0.5;
    double shrink = 0.5;
};

struct NelderMeadResult {
    std::vector<double> x;
    double value = std::numeric_limits<double>::infinity();
    std::size_t evaluations = 0;
    /// True when the tolerance test passed before the evaluation budget ran out.
    bool converged = false;
};

using Objective = std::function<double(const std::vector<double>&)>;

namespace detail {

inline double sanitize(double f) {
    return std::isnan(f) ? std::numeric_limits<double>::infinity() : f;
}

inline NelderMeadResult nelder_mead_pass(const Objective& f, const std::vector<double>& x0,
                                         const NelderMeadOptions& opt, std::size_t budget) {
    const std::size_t n = x0.size();
    NelderMeadResult out;
    out.x = x0;

    if (n == 0) {
        out.value = sanitize(f(x0));
        out.evaluations = 1;
        out.converged = true;
        return out;
    }

    std::size_t evals = 0;
    auto eval = [&](const std::vector<double>& x) {
        ++evals;
        return sanitize(f(x));
    };

    std::vector<std::vector<double>> simplex(n + 1, x0);
    std::vector<double> fv(n + 1);
    fv[0] = eval(x0);
    for (std::size_t i = 0; i < n; ++i) {
        const double h = std::max(opt.initial_step, opt.initial_step_rel * std::abs(x0[i]));
        simplex[i + 1][i] += h;
        fv[i + 1] = eval(simplex[i + 1]);
    }

    std::vector<std::size_t> order(n + 1);
    std::vector<double> centroid(n), xr(n), xe(n), xc(n);

    auto point = [&](const std::vector<double>& from, const std::vector<double>& to, double t,
                     std::vector<double>& dst) {
        for (std::size_t i = 0; i < n; ++i) dst[i] = from[i] + t * (to[i] - from[i]);
    };

    while (true) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
        const std::size_t best = order.front();
        const std::size_t worst = order.back();
        const std::size_t second_worst = order[n - 1];

        double diameter = 0.0;
        for (std::size_t j = 0; j <= n; ++j)
            for (std::size_t i = 0; i < n; ++i)
                diameter = std::max(diameter, std::abs(simplex[j][i] - simplex[best][i]));
        const double spread = std::abs(fv[worst] - fv[best]);
        if (std::isfinite(fv[best]) &&
            spread <= opt.f_tol * (std::abs(fv[best]) + opt.f_tol) && diameter <= opt.x_tol) {
            out.converged = true;
            break;
        }
        if (diameter == 0.0) {
            out.converged = true;
            break;
        }
        if (evals >= budget) break;

        std::fill(centroid.begin(), centroid.end(), 0.0);
        for (std::size_t k = 0; k < n; ++k) {
            const auto& v = simplex[order[k]];
            for (std::size_t i = 0; i < n; ++i) centroid[i] += v[i];
        }
        for (double& c : centroid) c /= static_cast<double>(n);

        point(centroid, simplex[worst], -opt.reflect, xr);
        const double fr = eval(xr);

        if (fr < fv[best]) {
            point(centroid, xr, opt.expand, xe);
            const double fe = eval(xe);
            if (fe < fr) {
                simplex[worst] = xe;
                fv[worst] = fe;
            } else {
                simplex[worst] = xr;
                fv[worst] = fr;
            }
            continue;
        }
        if (fr < fv[second_worst]) {
            simplex[worst] = xr;
            fv[worst] = fr;
            continue;
        }

        const bool outside = fr < fv[worst];
        if (outside)
            point(centroid, xr, opt.contract, xc);
        else
            point(centroid, simplex[worst], opt.contract, xc);
        const double fc = eval(xc);
        if (fc < (outside ? fr : fv[worst])) {
            simplex[worst] = xc;
            fv[worst] = fc;
            continue;
        }

        for (std::size_t k = 1; k <= n; ++k) {
            auto& v = simplex[order[k]];
            point(simplex[best], v, opt.shrink, v);
            fv[order[k]] = eval(v);
        }
    }

    const auto best_it = std::min_element(fv.begin(), fv.end());
    out.x = simplex[static_cast<std::size_t>(best_it - fv.begin())];
    out.value = *best_it;
    out.evaluations = evals;
    return out;
}

}  // namespace detail

/**
 * @brief Minimizes @p f starting from @p x0 with the Nelder–Mead simplex method.
 *
 * After the simplex collapses the search is restarted from the incumbent with a
 * fresh simplex (opt.restarts times), which guards against premature collapse on
 * ridges. The returned value never exceeds f(x0).
 */
inline NelderMeadResult nelder_mead(const Objective& f, const std::vector<double>& x0,
                                    const NelderMeadOptions& opt = {}) {
    NelderMeadResult best = detail::nelder_mead_pass(f, x0, opt, opt.max_evals);
    std::size_t used = best.evaluations;
    for (int r = 0; r < opt.restarts && used < opt.max_evals; ++r) {
        NelderMeadOptions again = opt;
        again.initial_step = std::max(opt.initial_step * 0.1, 1e-4);
        again.initial_step_rel = opt.initial_step_rel * 0.1;
        NelderMeadResult next = detail::nelder_mead_pass(f, best.x, again, opt.max_evals - used);
        used += next.evaluations;
        if (!(next.value < best.value)) break;
        best = std::move(next);
    }
    best.evaluations = used;
    return best;
}

/// Central-difference gradient; used for convergence diagnostics only.
inline std::vector<double> numeric_gradient(const Objective& f, const std::vector<double>& x,
                                            double rel_step = 1e-6) {
    std::vector<double> g(x.size());
    std::vector<double> xp = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double h = rel_step * std::max(1.0, std::abs(x[i]));
        xp[i] = x[i] + h;
        const double fp = f(xp);
        xp[i] = x[i] - h;
        const double fm = f(xp);
        xp[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

inline double norm2(const std::vector<double>& v) {
    double s = 0.0;
    for (double e : v) s += e * e;
    return std::sqrt(s);
}

}  // namespace vfvol::optim
