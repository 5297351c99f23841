#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vfvol {

/**
 * @brief Penalized regression spline settings.
 *
 * `lambda` is a relative smoothing weight: the penalty matrix is rescaled by
 * tr(B'B)/tr(P) before use, so the same value means roughly the same amount
 * of smoothing regardless of sample size or covariate units. An empty
 * optional selects lambda by generalized cross-validation.
 */
struct SplineConfig {
    int basis_size = 10;
    int degree = 3;
    int penalty_order = 2;
    std::optional<double> lambda;  // nullopt = "auto" (GCV)
    /// Per-component lambdas for backfit_additive; overrides `lambda` when non-empty.
    std::vector<double> component_lambda;
    /// log10 range and size of the GCV grid.
    double grid_lo = -6.0;
    double grid_hi = 6.0;
    int grid_points = 25;
    /// Degrees-of-freedom inflation in GCV; values above 1 guard against undersmoothing.
    double gcv_gamma = 1.4;
    int max_cycles = 100;
    double rss_rel_tol = 1e-6;
    /// Start backfitting from the joint penalized least-squares solution (its
    /// fixed point) rather than from zero components.
    bool joint_start = true;
};

/// Spline function stored as (knots, degree, coefficients); linear beyond the knot range.
struct SmoothFunction {
    std::vector<double> knots;
    int degree = 3;
    std::vector<double> coef;

    [[nodiscard]] bool is_zero() const noexcept { return coef.empty(); }
    [[nodiscard]] double lower() const { return knots.front(); }
    [[nodiscard]] double upper() const { return knots.back(); }

    [[nodiscard]] double operator()(double x) const;
    [[nodiscard]] std::vector<double> operator()(std::span<const double> xs) const {
        std::vector<double> out(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) out[i] = (*this)(xs[i]);
        return out;
    }
    /// Adds a constant; exact because the B-splines sum to one.
    void shift(double c) {
        for (double& b : coef) b += c;
    }
};

namespace spline {

/// Index s with knots[s] <= x < knots[s+1], clamped to the valid span range.
inline std::size_t find_span(const std::vector<double>& t, int degree, double x) {
    const std::size_t d = static_cast<std::size_t>(degree);
    const std::size_t n_basis = t.size() - d - 1;
    if (x >= t[n_basis]) return n_basis - 1;
    if (x <= t[d]) return d;
    const auto it = std::upper_bound(t.begin() + static_cast<std::ptrdiff_t>(d),
                                     t.begin() + static_cast<std::ptrdiff_t>(n_basis + 1), x);
    return static_cast<std::size_t>(it - t.begin()) - 1;
}

/// The degree+1 non-zero basis values at x (Cox–de Boor), for basis indices span-degree..span.
inline void basis_funs(const std::vector<double>& t, int degree, std::size_t span, double x,
                       std::vector<double>& N) {
    const std::size_t d = static_cast<std::size_t>(degree);
    N.assign(d + 1, 0.0);
    std::vector<double> left(d + 1), right(d + 1);
    N[0] = 1.0;
    for (std::size_t j = 1; j <= d; ++j) {
        left[j] = x - t[span + 1 - j];
        right[j] = t[span + j] - x;
        double saved = 0.0;
        for (std::size_t r = 0; r < j; ++r) {
            const double denom = right[r + 1] + left[j - r];
            const double temp = denom != 0.0 ? N[r] / denom : 0.0;
            N[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        N[j] = saved;
    }
}

inline double eval_inside(const std::vector<double>& t, int degree, const std::vector<double>& c,
                          double x) {
    const std::size_t span = find_span(t, degree, x);
    std::vector<double> N;
    basis_funs(t, degree, span, x, N);
    double s = 0.0;
    const std::size_t d = static_cast<std::size_t>(degree);
    for (std::size_t r = 0; r <= d; ++r) s += N[r] * c[span - d + r];
    return s;
}

/// Clamped knot vector with interior knots at quantiles of x (duplicates removed).
inline std::vector<double> quantile_knots(std::span<const double> x, int basis_size, int degree) {
    std::vector<double> xs(x.begin(), x.end());
    std::sort(xs.begin(), xs.end());
    const double a = xs.front();
    const double b = xs.back();
    const int n_interior = std::max(0, basis_size - degree - 1);
    std::vector<double> interior;
    for (int i = 1; i <= n_interior; ++i) {
        const double pos = static_cast<double>(i) / (n_interior + 1) * static_cast<double>(xs.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = std::min(lo + 1, xs.size() - 1);
        const double q = xs[lo] + (pos - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
        if (q > a && q < b && (interior.empty() || q > interior.back())) interior.push_back(q);
    }
    std::vector<double> t(static_cast<std::size_t>(degree + 1), a);
    t.insert(t.end(), interior.begin(), interior.end());
    t.insert(t.end(), static_cast<std::size_t>(degree + 1), b);
    return t;
}

inline std::vector<double> greville(const std::vector<double>& t, int degree) {
    const std::size_t d = static_cast<std::size_t>(degree);
    const std::size_t K = t.size() - d - 1;
    std::vector<double> g(K, 0.0);
    for (std::size_t j = 0; j < K; ++j) {
        for (std::size_t i = 1; i <= d; ++i) g[j] += t[j + i];
        g[j] /= static_cast<double>(d);
    }
    return g;
}

/**
 * @brief Difference penalty on coefficients taken at the Greville abscissae.
 *
 * Order-k differences are divided differences with respect to the Greville
 * points, so for non-uniform knots the null space is still exactly the
 * polynomials of degree < k (for k = 2: the linear functions). Rows are weighted
 * by the local spacing so the penalty approximates the integrated squared
 * k-th derivative.
 */
inline Eigen::MatrixXd difference_penalty(const std::vector<double>& t, int degree, int order) {
    const std::vector<double> g = greville(t, degree);
    const auto K = static_cast<Eigen::Index>(g.size());
    // D maps coefficients to divided differences, built recursively.
    Eigen::MatrixXd D = Eigen::MatrixXd::Identity(K, K);
    for (int k = 1; k <= order && D.rows() > 1; ++k) {
        const Eigen::Index r = D.rows() - 1;
        Eigen::MatrixXd next(r, K);
        for (Eigen::Index i = 0; i < r; ++i) {
            // Divided difference over the span of the k+1 underlying Greville points.
            const double h = g[static_cast<std::size_t>(i + k)] - g[static_cast<std::size_t>(i)];
            next.row(i) = (D.row(i + 1) - D.row(i)) / h * static_cast<double>(k);
        }
        D = std::move(next);
    }
    if (D.rows() == 0) return Eigen::MatrixXd::Zero(K, K);
    // Spacing weights.
    Eigen::VectorXd w(D.rows());
    for (Eigen::Index i = 0; i < D.rows(); ++i) {
        const double h = g[static_cast<std::size_t>(i + order)] - g[static_cast<std::size_t>(i)];
        w(i) = h / static_cast<double>(order);
    }
    return D.transpose() * w.asDiagonal() * D;
}

/// Dense n x K design matrix.
inline Eigen::MatrixXd design(const std::vector<double>& t, int degree, std::span<const double> x) {
    const std::size_t d = static_cast<std::size_t>(degree);
    const std::size_t K = t.size() - d - 1;
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(x.size()), static_cast<Eigen::Index>(K));
    std::vector<double> N;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double xi = std::clamp(x[i], t.front(), t.back());
        const std::size_t span = find_span(t, degree, xi);
        basis_funs(t, degree, span, xi, N);
        for (std::size_t r = 0; r <= d; ++r)
            B(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(span - d + r)) = N[r];
    }
    return B;
}

}  // namespace spline

inline double SmoothFunction::operator()(double x) const {
    if (coef.empty()) return 0.0;
    const double a = knots.front();
    const double b = knots.back();
    const std::size_t d = static_cast<std::size_t>(degree);
    const std::size_t K = coef.size();
    if (x < a) {
        const double slope = static_cast<double>(d) * (coef[1] - coef[0]) / (knots[d + 1] - knots[1]);
        return coef[0] + slope * (x - a);
    }
    if (x > b) {
        const double slope =
            static_cast<double>(d) * (coef[K - 1] - coef[K - 2]) / (knots[K + d - 1] - knots[K - 1]);
        return coef[K - 1] + slope * (x - b);
    }
    return spline::eval_inside(knots, degree, coef, x);
}

/**
 * @brief One covariate's penalized smoother, with factorizations cached per lambda.
 */
class PenalizedSmoother {
public:
    PenalizedSmoother(std::span<const double> x, const SplineConfig& cfg) : degree_(cfg.degree) {
        if (cfg.basis_size < cfg.degree + 1)
            throw std::invalid_argument("basis_size must be at least degree + 1");
        if (cfg.penalty_order < 1) throw std::invalid_argument("penalty_order must be positive");
        x_.assign(x.begin(), x.end());
        std::vector<double> sorted = x_;
        std::sort(sorted.begin(), sorted.end());
        distinct_ = static_cast<std::size_t>(std::unique(sorted.begin(), sorted.end()) - sorted.begin());
        if (distinct_ < 2 || !(sorted.back() > sorted.front())) {
            degenerate_ = true;
            return;
        }
        knots_ = spline::quantile_knots(x_, cfg.basis_size, cfg.degree);
        B_ = spline::design(knots_, cfg.degree, x_);
        BtB_ = B_.transpose() * B_;
        P_ = spline::difference_penalty(knots_, cfg.degree, cfg.penalty_order);
        const double trP = P_.trace();
        scale_ = trP > 0.0 ? BtB_.trace() / trP : 1.0;
        ridge_ = 1e-10 * BtB_.trace() / static_cast<double>(BtB_.rows());
    }

    [[nodiscard]] bool degenerate() const noexcept { return degenerate_; }
    [[nodiscard]] std::size_t distinct() const noexcept { return distinct_; }
    [[nodiscard]] std::size_t basis_size() const noexcept { return static_cast<std::size_t>(BtB_.rows()); }

    /// Prepares the solver for a relative lambda; returns tr(S).
    double set_lambda(double lambda) {
        if (degenerate_) {
            trace_ = 0.0;
            return 0.0;
        }
        lambda_ = lambda;
        const Eigen::MatrixXd M = BtB_ + (lambda * scale_) * P_ +
                                  ridge_ * Eigen::MatrixXd::Identity(BtB_.rows(), BtB_.cols());
        ldlt_.compute(M);
        trace_ = ldlt_.solve(BtB_).trace();
        return trace_;
    }

    [[nodiscard]] double lambda() const noexcept { return lambda_; }
    [[nodiscard]] double trace() const noexcept { return trace_; }
    [[nodiscard]] const Eigen::MatrixXd& design() const noexcept { return B_; }
    /// lambda * scale * P + ridge * I at the current lambda.
    [[nodiscard]] Eigen::MatrixXd penalty_matrix() const {
        return (lambda_ * scale_) * P_ + ridge_ * Eigen::MatrixXd::Identity(P_.rows(), P_.cols());
    }

    /// Coefficients and fitted values for response r.
    void fit(std::span<const double> r, Eigen::VectorXd& coef, Eigen::VectorXd& fitted) const {
        if (degenerate_) {
            coef.resize(0);
            fitted = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(r.size()));
            return;
        }
        const Eigen::Map<const Eigen::VectorXd> rv(r.data(), static_cast<Eigen::Index>(r.size()));
        coef = ldlt_.solve(B_.transpose() * rv);
        fitted = B_ * coef;
    }

    /// c' P c at the scaled lambda (penalty contribution).
    [[nodiscard]] double penalty(const Eigen::VectorXd& coef) const {
        if (degenerate_ || coef.size() == 0) return 0.0;
        return lambda_ * scale_ * coef.dot(P_ * coef);
    }

    [[nodiscard]] SmoothFunction function(const Eigen::VectorXd& coef) const {
        SmoothFunction f;
        if (degenerate_ || coef.size() == 0) return f;
        f.knots = knots_;
        f.degree = degree_;
        f.coef.assign(coef.data(), coef.data() + coef.size());
        return f;
    }

private:
    int degree_;
    std::vector<double> x_;
    std::size_t distinct_ = 0;
    bool degenerate_ = false;
    std::vector<double> knots_;
    Eigen::MatrixXd B_, BtB_, P_;
    double scale_ = 1.0;
    double ridge_ = 0.0;
    double lambda_ = 0.0;
    double trace_ = 0.0;
    Eigen::LDLT<Eigen::MatrixXd> ldlt_;
};

inline std::vector<double> lambda_grid(const SplineConfig& cfg) {
    std::vector<double> grid;
    const int k = std::max(cfg.grid_points, 2);
    for (int i = 0; i < k; ++i)
        grid.push_back(std::pow(10.0, cfg.grid_hi - (cfg.grid_hi - cfg.grid_lo) * i / (k - 1)));
    return grid;
}

struct UnivariateSmooth {
    SmoothFunction function;
    std::vector<double> fitted;
    double lambda = 0.0;
    double edf = 0.0;
    double gcv = 0.0;
    std::string warning;
};

/**
 * @brief Penalized least-squares spline fit of r on x (not centered).
 *
 * Constant x yields the zero function with a warning. With lambda unset, the
 * smoothing weight minimizes GCV = n RSS / (n - gamma tr S)^2 over the log grid.
 */
inline UnivariateSmooth smooth_univariate(std::span<const double> x, std::span<const double> r,
                                          const SplineConfig& cfg = {}) {
    if (x.size() != r.size()) throw std::invalid_argument("x and r lengths differ");
    if (x.empty()) throw std::invalid_argument("empty input");
    UnivariateSmooth out;
    PenalizedSmoother sm(x, cfg);
    const auto n = static_cast<double>(x.size());
    if (sm.degenerate()) {
        out.fitted.assign(x.size(), 0.0);
        out.warning = "covariate has fewer than 2 distinct values; returning the zero function";
        return out;
    }
    if (!cfg.lambda && sm.distinct() < static_cast<std::size_t>(cfg.basis_size))
        throw std::invalid_argument("GCV needs at least basis_size distinct covariate values");

    Eigen::VectorXd coef, fitted;
    const Eigen::Map<const Eigen::VectorXd> rv(r.data(), static_cast<Eigen::Index>(r.size()));
    auto evaluate = [&](double lam, double& gcv) {
        const double tr = sm.set_lambda(lam);
        sm.fit(r, coef, fitted);
        const double rss = (rv - fitted).squaredNorm();
        const double denom = n - cfg.gcv_gamma * tr;
        gcv = denom > 0.0 ? n * rss / (denom * denom) : std::numeric_limits<double>::infinity();
        return tr;
    };

    double lam = cfg.lambda.value_or(0.0);
    if (!cfg.lambda) {
        double best = std::numeric_limits<double>::infinity();
        for (double cand : lambda_grid(cfg)) {
            double g = 0.0;
            evaluate(cand, g);
            if (g < best) {
                best = g;
                lam = cand;
            }
        }
    }
    out.edf = evaluate(lam, out.gcv);
    out.lambda = lam;
    out.function = sm.function(coef);
    out.fitted.assign(fitted.data(), fitted.data() + fitted.size());
    return out;
}

/// s0 + sum_j s_j(x_j); every component has zero mean over the training rows.
struct AdditiveFit {
    double s0 = 0.0;
    std::vector<SmoothFunction> components;
    std::vector<std::vector<double>> component_fitted;
    std::vector<double> fitted;
    std::vector<double> residuals;
    /// RSS after each backfitting cycle.
    std::vector<double> rss_trace;
    /// Penalized RSS (RSS + sum of penalties) after each cycle.
    std::vector<double> prss_trace;
    std::vector<double> lambda;
    std::vector<double> edf;
    double gcv = 0.0;
    /// 1 + trace of the joint smoother matrix.
    double df = 0.0;
    int cycles = 0;
    bool converged = true;
    std::vector<std::string> warnings;

    [[nodiscard]] std::size_t size() const noexcept { return fitted.size(); }
};

namespace detail {

struct BackfitState {
    std::vector<Eigen::VectorXd> coef;
    std::vector<Eigen::VectorXd> comp;  // centered fitted values per component
};

/// Centered columns of a unit-row-sum basis are annihilated by the all-ones coefficient
/// vector; this rank-one term pins that direction at sum-zero without moving the fit.
inline Eigen::MatrixXd centering_penalty(const Eigen::MatrixXd& B) {
    const double k = static_cast<double>(B.cols());
    return Eigen::MatrixXd::Constant(B.cols(), B.cols(), B.squaredNorm() / (k * k));
}

/**
 * Minimizes ||r - s0 - sum_j C_j b_j||^2 + sum_j b_j' Pen_j b_j with C_j the
 * column-centered design, i.e. the backfitting fixed point. Returns the total
 * degrees of freedom 1 + tr(hat matrix) through @p df.
 */
inline BackfitState joint_solve(const std::vector<PenalizedSmoother>& smoothers, std::span<const double> r,
                                double& df) {
    const auto n = static_cast<Eigen::Index>(r.size());
    const std::size_t m = smoothers.size();
    std::vector<Eigen::Index> offset(m + 1, 0);
    for (std::size_t j = 0; j < m; ++j)
        offset[j + 1] = offset[j] + (smoothers[j].degenerate() ? 0 : smoothers[j].design().cols());
    const Eigen::Index total = offset[m];
    BackfitState st;
    st.coef.assign(m, Eigen::VectorXd{});
    st.comp.assign(m, Eigen::VectorXd::Zero(n));
    df = 1.0;
    if (total == 0) return st;

    Eigen::MatrixXd C(n, total);
    Eigen::MatrixXd pen = Eigen::MatrixXd::Zero(total, total);
    for (std::size_t j = 0; j < m; ++j) {
        if (smoothers[j].degenerate()) continue;
        const Eigen::MatrixXd& B = smoothers[j].design();
        const Eigen::RowVectorXd mean = B.colwise().mean();
        C.middleCols(offset[j], B.cols()) = B.rowwise() - mean;
        pen.block(offset[j], offset[j], B.cols(), B.cols()) =
            smoothers[j].penalty_matrix() + centering_penalty(B);
    }
    const Eigen::Map<const Eigen::VectorXd> rv(r.data(), n);
    const Eigen::VectorXd rc = rv.array() - rv.mean();
    const Eigen::MatrixXd CtC = C.transpose() * C;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(CtC + pen);
    const Eigen::VectorXd beta = ldlt.solve(C.transpose() * rc);
    df += ldlt.solve(CtC).trace();
    for (std::size_t j = 0; j < m; ++j) {
        if (smoothers[j].degenerate()) continue;
        const Eigen::Index k = offset[j + 1] - offset[j];
        const Eigen::VectorXd b = beta.segment(offset[j], k);
        Eigen::VectorXd fitted = smoothers[j].design() * b;
        // B has unit row sums, so shifting coefficients shifts the function.
        const double shift = fitted.mean();
        st.comp[j] = fitted.array() - shift;
        st.coef[j] = b.array() - shift;
    }
    return st;
}

inline AdditiveFit run_backfit(std::vector<PenalizedSmoother>& smoothers, std::span<const double> r,
                               const SplineConfig& cfg, const BackfitState* init = nullptr) {
    const std::size_t n = r.size();
    const std::size_t m = smoothers.size();
    AdditiveFit fit;
    double mean = 0.0;
    for (double e : r) mean += e;
    mean /= static_cast<double>(n);
    fit.s0 = mean;

    double var = 0.0;
    for (double e : r) var += (e - mean) * (e - mean);
    const double rss0 = var;
    var /= static_cast<double>(n);
    const double tol = cfg.rss_rel_tol * var;

    const Eigen::Map<const Eigen::VectorXd> rv(r.data(), static_cast<Eigen::Index>(n));
    BackfitState st;
    st.coef.assign(m, Eigen::VectorXd{});
    st.comp.assign(m, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n)));
    if (init) st = *init;
    Eigen::VectorXd total = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), mean);
    for (const auto& c : st.comp) total += c;

    BackfitState best = st;
    double best_rss = init ? (rv - total).squaredNorm() : rss0;
    double prev = best_rss;
    bool done = false;
    std::vector<double> partial(n);
    Eigen::VectorXd coef, fitted;
    for (int cycle = 1; cycle <= cfg.max_cycles; ++cycle) {
        for (std::size_t j = 0; j < m; ++j) {
            total -= st.comp[j];
            for (std::size_t i = 0; i < n; ++i) partial[i] = r[i] - total(static_cast<Eigen::Index>(i));
            smoothers[j].fit(partial, coef, fitted);
            const double shift = fitted.size() ? fitted.mean() : 0.0;
            fitted.array() -= shift;
            if (coef.size()) coef.array() -= shift;
            st.comp[j] = fitted;
            st.coef[j] = coef;
            total += st.comp[j];
        }
        const double rss = (rv - total).squaredNorm();
        double pen = 0.0;
        for (std::size_t j = 0; j < m; ++j) pen += smoothers[j].penalty(st.coef[j]);
        fit.rss_trace.push_back(rss);
        fit.prss_trace.push_back(rss + pen);
        fit.cycles = cycle;
        if (rss <= best_rss) {
            best_rss = rss;
            best = st;
        }
        if (std::abs(prev - rss) <= tol) {
            done = true;
            break;
        }
        prev = rss;
    }
    fit.converged = done;
    const BackfitState& use = done ? st : best;

    fit.components.resize(m);
    fit.component_fitted.resize(m);
    fit.fitted.assign(n, mean);
    for (std::size_t j = 0; j < m; ++j) {
        fit.components[j] = smoothers[j].function(use.coef[j]);
        fit.component_fitted[j].assign(use.comp[j].data(), use.comp[j].data() + n);
        for (std::size_t i = 0; i < n; ++i) fit.fitted[i] += use.comp[j](static_cast<Eigen::Index>(i));
    }
    fit.residuals.resize(n);
    for (std::size_t i = 0; i < n; ++i) fit.residuals[i] = r[i] - fit.fitted[i];
    if (!done) fit.warnings.push_back("backfitting did not converge within the cycle cap");
    return fit;
}

}  // namespace detail

/**
 * @brief Additive model r = s0 + sum_j s_j(X_j) + e by backfitting.
 *
 * Each cycle smooths the partial residuals of every column in turn and
 * re-centers the component. Cycles stop when the RSS change falls below
 * rss_rel_tol * var(r) or after max_cycles (flagged; the lowest-RSS iterate is
 * returned). With joint_start the cycles begin at the joint penalized
 * least-squares solution, which is their fixed point; strongly correlated
 * columns otherwise need very many cycles. With lambda unset, one lambda shared
 * by all components is chosen by GCV, df = 1 + trace of the joint hat matrix.
 */
inline AdditiveFit backfit_additive(const Eigen::MatrixXd& X, std::span<const double> r,
                                    const SplineConfig& cfg = {}) {
    const auto n = static_cast<std::size_t>(X.rows());
    const auto m = static_cast<std::size_t>(X.cols());
    if (r.size() != n) throw std::invalid_argument("response length differs from covariate rows");
    if (m == 0) throw std::invalid_argument("no covariate columns");
    if (n <= m * static_cast<std::size_t>(cfg.degree + 1))
        throw std::invalid_argument("backfit needs n > m * (degree + 1) observations");
    if (!X.allFinite()) throw std::invalid_argument("non-finite covariate value");
    for (double e : r)
        if (!std::isfinite(e)) throw std::invalid_argument("non-finite response value");
    if (!cfg.component_lambda.empty() && cfg.component_lambda.size() != m)
        throw std::invalid_argument("component_lambda size must equal the number of columns");

    std::vector<PenalizedSmoother> smoothers;
    smoothers.reserve(m);
    std::vector<std::string> warnings;
    std::vector<double> col(n);
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t i = 0; i < n; ++i) col[i] = X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        smoothers.emplace_back(col, cfg);
        if (smoothers.back().degenerate())
            warnings.push_back("column " + std::to_string(j + 1) +
                               " is constant; its component is the zero function");
    }

    auto set_all = [&](const std::vector<double>& lam) {
        double df = 1.0;
        for (std::size_t j = 0; j < m; ++j) {
            const double tr = smoothers[j].set_lambda(lam[j]);
            if (!smoothers[j].degenerate()) df += tr - 1.0;
        }
        return df;
    };
    auto gcv_of = [&](double rss, double df) {
        const double nn = static_cast<double>(n);
        const double denom = nn - cfg.gcv_gamma * df;
        return denom > 0.0 ? nn * rss / (denom * denom) : std::numeric_limits<double>::infinity();
    };
    const Eigen::Map<const Eigen::VectorXd> rv(r.data(), static_cast<Eigen::Index>(n));
    auto joint_rss = [&](const detail::BackfitState& st) {
        Eigen::VectorXd e = rv.array() - rv.mean();
        for (const auto& c : st.comp) e -= c;
        return e.squaredNorm();
    };

    std::vector<double> lam(m, cfg.lambda.value_or(0.0));
    if (!cfg.component_lambda.empty()) {
        lam = cfg.component_lambda;
    } else if (!cfg.lambda) {
        double best = std::numeric_limits<double>::infinity();
        double chosen = 1.0;
        for (double cand : lambda_grid(cfg)) {
            const std::vector<double> trial(m, cand);
            set_all(trial);
            double df = 0.0;
            const detail::BackfitState st = detail::joint_solve(smoothers, r, df);
            const double g = gcv_of(joint_rss(st), df);
            if (g < best) {
                best = g;
                chosen = cand;
            }
        }
        lam.assign(m, chosen);
    }

    set_all(lam);
    double df = 0.0;
    const detail::BackfitState start = detail::joint_solve(smoothers, r, df);
    AdditiveFit fit = detail::run_backfit(smoothers, r, cfg, cfg.joint_start ? &start : nullptr);
    fit.gcv = gcv_of(fit.rss_trace.empty() ? joint_rss(start) : fit.rss_trace.back(), df);
    fit.df = df;
    fit.lambda = lam;
    for (auto& s : smoothers) fit.edf.push_back(s.trace());
    fit.warnings.insert(fit.warnings.begin(), warnings.begin(), warnings.end());
    return fit;
}

namespace detail {

/// In place a_t = v_t - sum_j theta_j a_{t-j} for t >= start; a_t = 0 before start.
inline void ma_whiten(std::span<const double> theta, std::size_t start, Eigen::Ref<Eigen::VectorXd> v) {
    const auto n = static_cast<std::size_t>(v.size());
    for (std::size_t t = 0; t < n; ++t) {
        const auto i = static_cast<Eigen::Index>(t);
        if (t < start) {
            v(i) = 0.0;
            continue;
        }
        for (std::size_t j = 1; j <= theta.size() && j <= t; ++j)
            v(i) -= theta[j - 1] * v(static_cast<Eigen::Index>(t - j));
    }
}

}  // namespace detail

/**
 * @brief Additive fit with moving-average errors.
 *
 * Minimizes sum_{t >= start} a_t^2 + penalties, where
 * a = (1 + theta(L))^{-1} (z - s0 - sum_j s_j(X_j)) and a_t = 0 before start.
 * This is the conditional-sum-of-squares objective of an ARMAX model whose
 * other terms are held fixed in z. With empty theta and start 0 it coincides
 * with the fixed point of backfit_additive. Solved jointly; GCV (lambda unset)
 * uses the whitened residuals and the trace of the whitened hat matrix.
 */
inline AdditiveFit fit_additive_whitened(const Eigen::MatrixXd& X, std::span<const double> z,
                                         std::span<const double> theta, std::size_t start,
                                         const SplineConfig& cfg = {}) {
    const auto n = static_cast<std::size_t>(X.rows());
    const auto m = static_cast<std::size_t>(X.cols());
    if (z.size() != n) throw std::invalid_argument("response length differs from covariate rows");
    if (m == 0) throw std::invalid_argument("no covariate columns");
    if (start >= n || n - start <= m * static_cast<std::size_t>(cfg.degree + 1))
        throw std::invalid_argument("too few observations after the conditioning points");
    if (!X.allFinite()) throw std::invalid_argument("non-finite covariate value");
    for (double e : z)
        if (!std::isfinite(e)) throw std::invalid_argument("non-finite response value");
    if (!cfg.component_lambda.empty() && cfg.component_lambda.size() != m)
        throw std::invalid_argument("component_lambda size must equal the number of columns");

    AdditiveFit fit;
    std::vector<PenalizedSmoother> smoothers;
    smoothers.reserve(m);
    std::vector<double> col(n);
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t i = 0; i < n; ++i) col[i] = X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        smoothers.emplace_back(col, cfg);
        if (smoothers.back().degenerate())
            fit.warnings.push_back("column " + std::to_string(j + 1) +
                                   " is constant; its component is the zero function");
    }

    const auto N = static_cast<Eigen::Index>(n);
    std::vector<Eigen::Index> offset(m + 1, 1);
    for (std::size_t j = 0; j < m; ++j)
        offset[j + 1] = offset[j] + (smoothers[j].degenerate() ? 0 : smoothers[j].design().cols());
    const Eigen::Index P = offset[m];
    Eigen::MatrixXd C(N, P);
    C.col(0).setOnes();
    for (std::size_t j = 0; j < m; ++j) {
        if (smoothers[j].degenerate()) continue;
        const Eigen::MatrixXd& B = smoothers[j].design();
        const Eigen::RowVectorXd mean = B.colwise().mean();
        C.middleCols(offset[j], B.cols()) = B.rowwise() - mean;
    }
    Eigen::MatrixXd A = C;
    for (Eigen::Index c = 0; c < P; ++c) detail::ma_whiten(theta, start, A.col(c));
    Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(z.data(), N);
    detail::ma_whiten(theta, start, w);
    const Eigen::MatrixXd AtA = A.transpose() * A;
    const Eigen::VectorXd Atw = A.transpose() * w;
    const double rows = static_cast<double>(n - start);

    struct Solution {
        Eigen::VectorXd beta;
        double rss = 0.0, pen = 0.0, df = 0.0, gcv = 0.0;
    };
    auto solve = [&](const std::vector<double>& lam) {
        Eigen::MatrixXd pen = Eigen::MatrixXd::Zero(P, P);
        for (std::size_t j = 0; j < m; ++j) {
            smoothers[j].set_lambda(lam[j]);
            if (smoothers[j].degenerate()) continue;
            const Eigen::Index k = offset[j + 1] - offset[j];
            pen.block(offset[j], offset[j], k, k) =
                smoothers[j].penalty_matrix() + detail::centering_penalty(smoothers[j].design());
        }
        const Eigen::LDLT<Eigen::MatrixXd> ldlt(AtA + pen);
        Solution s;
        s.beta = ldlt.solve(Atw);
        s.rss = (w - A * s.beta).squaredNorm();
        s.pen = s.beta.dot(pen * s.beta);
        s.df = ldlt.solve(AtA).trace();
        const double denom = rows - cfg.gcv_gamma * s.df;
        s.gcv = denom > 0.0 ? rows * s.rss / (denom * denom) : std::numeric_limits<double>::infinity();
        return s;
    };

    std::vector<double> lam(m, cfg.lambda.value_or(0.0));
    if (!cfg.component_lambda.empty()) {
        lam = cfg.component_lambda;
    } else if (!cfg.lambda) {
        double best = std::numeric_limits<double>::infinity();
        double chosen = 1.0;
        for (double cand : lambda_grid(cfg)) {
            const double g = solve(std::vector<double>(m, cand)).gcv;
            if (g < best) {
                best = g;
                chosen = cand;
            }
        }
        lam.assign(m, chosen);
    }
    const Solution sol = solve(lam);

    fit.s0 = sol.beta(0);
    fit.components.resize(m);
    fit.component_fitted.assign(m, std::vector<double>(n, 0.0));
    fit.fitted.assign(n, fit.s0);
    for (std::size_t j = 0; j < m; ++j) {
        fit.edf.push_back(smoothers[j].trace());
        if (smoothers[j].degenerate()) continue;
        const Eigen::Index k = offset[j + 1] - offset[j];
        const Eigen::VectorXd b = sol.beta.segment(offset[j], k);
        const Eigen::VectorXd raw = smoothers[j].design() * b;
        const double shift = raw.mean();
        fit.components[j] = smoothers[j].function(b.array() - shift);
        for (std::size_t i = 0; i < n; ++i) {
            fit.component_fitted[j][i] = raw(static_cast<Eigen::Index>(i)) - shift;
            fit.fitted[i] += fit.component_fitted[j][i];
        }
    }
    fit.residuals.resize(n);
    for (std::size_t i = 0; i < n; ++i) fit.residuals[i] = z[i] - fit.fitted[i];
    fit.rss_trace = {sol.rss};
    fit.prss_trace = {sol.rss + sol.pen};
    fit.lambda = lam;
    fit.df = sol.df;
    fit.gcv = sol.gcv;
    return fit;
}

/// s0 + sum_j s_j(x_j) for each row of X_new; out-of-range inputs extrapolate linearly.
inline std::vector<double> evaluate_additive(const AdditiveFit& fit, const Eigen::MatrixXd& X_new) {
    if (static_cast<std::size_t>(X_new.cols()) != fit.components.size())
        throw std::invalid_argument("X_new has " + std::to_string(X_new.cols()) + " columns, fit has " +
                                    std::to_string(fit.components.size()));
    std::vector<double> out(static_cast<std::size_t>(X_new.rows()), fit.s0);
    for (Eigen::Index i = 0; i < X_new.rows(); ++i)
        for (std::size_t j = 0; j < fit.components.size(); ++j)
            out[static_cast<std::size_t>(i)] += fit.components[j](X_new(i, static_cast<Eigen::Index>(j)));
    return out;
}

}  // namespace vfvol
