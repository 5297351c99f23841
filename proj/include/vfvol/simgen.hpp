#pragma once

#include "vfvol/dataset.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace vfvol {

enum class Dependence { Independent, AR1 };
enum class FunctionalForm { Linear, Exponential };

inline constexpr double kTradingDaysPerYear = 252.0;
inline constexpr double kVolumeScale = 1'000'000.0;
inline constexpr double kAr1Coefficient = 0.5;

/// One cell of the simulation grid.
struct ScenarioConfig {
    std::size_t T = 255;
    double mu_annual = 0.20;
    double sigma_annual = 0.30;
    double psi_weight = 0.50;
    Dependence dependence = Dependence::Independent;
    FunctionalForm form = FunctionalForm::Linear;
    double x0 = 100.0;
    std::uint64_t seed = 1;
    std::size_t period = 5;
};

struct SimulatedData {
    std::vector<double> x;  // high-frequency prices, length T
    std::vector<double> u;  // covariate noise, length T
    std::vector<double> s;  // daily log increments, length T
    std::vector<double> y;  // length T/period - 1
    std::vector<double> v;
    Eigen::MatrixXd x_lag;  // (T/period - 1) x period
    ScenarioConfig scenario;
    /// Number of discarded draws (nonpositive price or zero period volume).
    int regenerations = 0;
    std::uint64_t seed_used = 0;

    [[nodiscard]] std::vector<double> volume() const {
        std::vector<double> w(u.size());
        for (std::size_t i = 0; i < u.size(); ++i) w[i] = kVolumeScale * std::abs(u[i]);
        return w;
    }
    [[nodiscard]] VaryingFrequencyDataset dataset() const {
        VaryingFrequencyDataset ds;
        ds.y = y;
        ds.v = v;
        ds.x_lag = x_lag;
        ds.m = scenario.period;
        ds.fill_counts.assign(y.size(), 0);
        return ds;
    }
};

inline std::string to_string(Dependence d) { return d == Dependence::Independent ? "iid" : "ar1"; }
inline std::string to_string(FunctionalForm f) {
    return f == FunctionalForm::Linear ? "linear" : "exponential";
}

/// Annual drift/volatility to daily levels: (mu / 252, sigma / sqrt(252)).
inline std::pair<double, double> convert_frequency(double mu_annual, double sigma_annual) {
    if (!(sigma_annual > 0.0)) throw std::invalid_argument("sigma_annual must be positive");
    return {mu_annual / kTradingDaysPerYear, sigma_annual / std::sqrt(kTradingDaysPerYear)};
}

inline void validate(const ScenarioConfig& cfg) {
    if (cfg.period == 0) throw std::invalid_argument("period must be positive");
    if (cfg.T % cfg.period != 0)
        throw std::invalid_argument("T = " + std::to_string(cfg.T) + " is not divisible by " +
                                    std::to_string(cfg.period));
    if (cfg.T / cfg.period < 3)
        throw std::invalid_argument("T must cover at least 3 periods");
    if (!(cfg.sigma_annual > 0.0)) throw std::invalid_argument("sigma_annual must be positive");
    if (!(cfg.psi_weight >= 0.0 && cfg.psi_weight < 1.0))
        throw std::invalid_argument("psi_weight must lie in [0, 1)");
    if (!(cfg.x0 > 0.0)) throw std::invalid_argument("x0 must be positive");
}

/// Stable identifier, e.g. "T255_mu0.20_sig0.30_psi0.50_iid_linear".
inline std::string scenario_id(const ScenarioConfig& c) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "T%zu_mu%.2f_sig%.2f_psi%.2f_%s_%s", c.T, c.mu_annual,
                  c.sigma_annual, c.psi_weight, to_string(c.dependence).c_str(),
                  to_string(c.form).c_str());
    return buf;
}

/// splitmix64 finalizer; used to derive independent seed streams.
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) {
    return mix_seed(mix_seed(mix_seed(master) ^ a) ^ (b * 0x2545F4914F6CDD1DULL));
}

/// Raw random draws for one attempt: daily increments s and covariate noise u.
struct SimDraws {
    std::vector<double> s;
    std::vector<double> u;
};

using DrawSource = std::function<SimDraws(const ScenarioConfig&, std::uint64_t seed)>;

inline SimDraws default_draws(const ScenarioConfig& cfg, std::uint64_t seed) {
    const auto [mu_d, sigma_d] = convert_frequency(cfg.mu_annual, cfg.sigma_annual);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(mu_d, sigma_d);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    SimDraws d;
    d.s.resize(cfg.T);
    d.u.resize(cfg.T);
    for (auto& e : d.s) e = normal(rng);
    const double innov_scale = std::sqrt(1.0 - kAr1Coefficient * kAr1Coefficient);
    for (std::size_t i = 0; i < cfg.T; ++i) {
        const double e = unif(rng);
        if (cfg.dependence == Dependence::Independent || i == 0)
            d.u[i] = e;
        else
            d.u[i] = kAr1Coefficient * d.u[i - 1] + innov_scale * e;
    }
    return d;
}

/**
 * @brief Builds prices, volume and the low-frequency series from given draws.
 *
 * Returns nullopt when a price is nonpositive/non-finite or a period's volume is
 * zero (v undefined).
 */
inline std::optional<SimulatedData> assemble(const ScenarioConfig& cfg, SimDraws draws) {
    const std::size_t T = cfg.T;
    const std::size_t m = cfg.period;
    if (draws.s.size() != T || draws.u.size() != T)
        throw std::invalid_argument("draw lengths must equal T");
    SimulatedData out;
    out.scenario = cfg;
    out.x.resize(T);
    double cum = 0.0;
    for (std::size_t i = 0; i < T; ++i) {
        cum += draws.s[i];
        const double shock = cfg.psi_weight * draws.u[i];
        out.x[i] = cfg.form == FunctionalForm::Linear ? cfg.x0 * std::exp(cum) - shock
                                                      : cfg.x0 * std::exp(cum - shock);
        if (!(out.x[i] > 0.0) || !std::isfinite(out.x[i])) return std::nullopt;
    }
    const std::size_t periods = T / m;
    std::vector<double> V(periods, 0.0);
    for (std::size_t k = 0; k < periods; ++k) {
        double total = 0.0;
        for (std::size_t i = 0; i < m; ++i) total += kVolumeScale * std::abs(draws.u[k * m + i]);
        if (!(total > 0.0)) return std::nullopt;
        V[k] = total;
    }
    const std::size_t n = periods - 1;
    out.y.resize(n);
    out.v.resize(n);
    out.x_lag.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    for (std::size_t t = 0; t < n; ++t) {
        const std::size_t k = t + 1;
        out.y[t] = std::log(out.x[k * m + m - 1] / out.x[(k - 1) * m + m - 1]);
        out.v[t] = std::log(V[k] / V[k - 1]);
        for (std::size_t i = 0; i < m; ++i)
            out.x_lag(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)) = out.x[(k - 1) * m + i];
    }
    out.s = std::move(draws.s);
    out.u = std::move(draws.u);
    return out;
}

/// Generates one replicate; degenerate draws are redrawn with seed + 1, seed + 2, ...
inline SimulatedData generate(const ScenarioConfig& cfg, const DrawSource& source = default_draws,
                              int max_regenerations = 1000) {
    validate(cfg);
    std::uint64_t seed = cfg.seed;
    for (int attempt = 0; attempt <= max_regenerations; ++attempt, ++seed) {
        auto data = assemble(cfg, source(cfg, seed));
        if (data) {
            data->regenerations = attempt;
            data->seed_used = seed;
            return std::move(*data);
        }
    }
    throw std::runtime_error("scenario " + scenario_id(cfg) + ": no valid draw after " +
                             std::to_string(max_regenerations) + " regenerations");
}

/// The full 3 x 3 x 3 x 2 x 2 = 108 cell simulation grid.
inline std::vector<ScenarioConfig> scenario_grid() {
    std::vector<ScenarioConfig> grid;
    for (std::size_t T : {255u, 510u, 1530u})
        for (auto [mu, sigma] : {std::pair{0.20, 0.30}, std::pair{0.40, 0.45}, std::pair{0.80, 0.60}})
            for (double psi : {0.20, 0.50, 0.70})
                for (Dependence dep : {Dependence::Independent, Dependence::AR1})
                    for (FunctionalForm form : {FunctionalForm::Linear, FunctionalForm::Exponential}) {
                        ScenarioConfig c;
                        c.T = T;
                        c.mu_annual = mu;
                        c.sigma_annual = sigma;
                        c.psi_weight = psi;
                        c.dependence = dep;
                        c.form = form;
                        grid.push_back(c);
                    }
    return grid;
}

/**
 * @brief Synthetic daily close/volume panel with a strong lagged daily-price effect.
 *
 * Each week's log return reverses a fraction of the previous week's last-day
 * move, so the previous week's daily closes carry information that a weekly
 * aggregate does not. Used as the shipped stand-in for proprietary market data.
 */
inline RawDailySeries synthetic_daily_fixture(std::size_t weeks = 104, std::uint64_t seed = 20160104) {
    using namespace std::chrono;
    constexpr double reversal = 0.8;
    constexpr double day_sd = 0.015;
    constexpr double week_noise_sd = 0.02;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> day(0.0, day_sd);
    std::normal_distribution<double> week_noise(0.0, week_noise_sd);
    std::lognormal_distribution<double> vol(std::log(10e6), 0.4);

    RawDailySeries out;
    sys_days date{year{2016} / January / 4};  // a Monday
    double log_price = std::log(30.0);
    double last_move = 0.0;
    for (std::size_t w = 0; w < weeks; ++w) {
        const double target = -reversal * last_move + week_noise(rng);
        double partial = 0.0;
        for (int d = 0; d < 5; ++d) {
            double step = 0.0;
            if (d < 4) {
                step = day(rng);
                partial += step;
            } else {
                step = target - partial;
                last_move = step;
            }
            log_price += step;
            const year_month_day ymd{date + days{d}};
            char buf[16];
            std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                          static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
            out.dates.emplace_back(buf);
            out.close.push_back(std::round(std::exp(log_price) * 100.0) / 100.0);
            out.volume.push_back(std::round(vol(rng)));
        }
        date += days{7};
    }
    return out;
}

}  // namespace vfvol
