#pragma once

#include "vfvol/benchmarks.hpp"
#include "vfvol/dataset.hpp"
#include "vfvol/simgen.hpp"
#include "vfvol/vfmodels.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace vfvol {

// ---------------------------------------------------------------------------
// Error metrics
// ---------------------------------------------------------------------------

namespace detail {
inline void check_pair(std::span<const double> y, std::span<const double> yhat) {
    if (y.size() != yhat.size()) throw std::invalid_argument("metric inputs differ in length");
    if (y.empty()) throw std::invalid_argument("metric inputs are empty");
}
}  // namespace detail

/// sqrt(mean((y - yhat)^2))
inline double rmse(std::span<const double> y, std::span<const double> yhat) {
    detail::check_pair(y, yhat);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - yhat[i]) * (y[i] - yhat[i]);
    return std::sqrt(s / static_cast<double>(y.size()));
}

/// Mean absolute deviation of the errors, mean(|y - yhat|).
inline double mad(std::span<const double> y, std::span<const double> yhat) {
    detail::check_pair(y, yhat);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += std::abs(y[i] - yhat[i]);
    return s / static_cast<double>(y.size());
}

struct MdapeResult {
    double value = 0.0;     // percent
    std::size_t excluded = 0;  // points with y == 0
};

/// Median of |(y - yhat) / y| * 100 over points with y != 0.
inline MdapeResult mdape(std::span<const double> y, std::span<const double> yhat) {
    detail::check_pair(y, yhat);
    std::vector<double> ape;
    MdapeResult out;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] == 0.0) {
            ++out.excluded;
            continue;
        }
        ape.push_back(std::abs((y[i] - yhat[i]) / y[i]) * 100.0);
    }
    if (ape.empty()) throw std::invalid_argument("MdAPE undefined: every actual value is zero");
    std::sort(ape.begin(), ape.end());
    const std::size_t k = ape.size();
    out.value = k % 2 == 1 ? ape[k / 2] : 0.5 * (ape[k / 2 - 1] + ape[k / 2]);
    return out;
}

// ---------------------------------------------------------------------------
// Monte Carlo experiments
// ---------------------------------------------------------------------------

enum class ModelId { VfArma, VfGarch, Garch, Gjr };

inline std::string to_string(ModelId m) {
    switch (m) {
        case ModelId::VfArma: return "vf-arma";
        case ModelId::VfGarch: return "vf-garch";
        case ModelId::Garch: return "garch";
        case ModelId::Gjr: return "gjr";
    }
    return "?";
}

inline ModelId parse_model(const std::string& s) {
    if (s == "vf-arma") return ModelId::VfArma;
    if (s == "vf-garch") return ModelId::VfGarch;
    if (s == "garch") return ModelId::Garch;
    if (s == "gjr") return ModelId::Gjr;
    throw std::invalid_argument("unknown model '" + s + "' (expected vf-arma, vf-garch, garch, gjr)");
}

enum class ReplicateStatus { Ok, Diverged, Failed };

inline std::string to_string(ReplicateStatus s) {
    switch (s) {
        case ReplicateStatus::Ok: return "ok";
        case ReplicateStatus::Diverged: return "diverged";
        case ReplicateStatus::Failed: return "failed";
    }
    return "?";
}

struct ReplicateRecord {
    std::string scenario_id;
    std::size_t replicate = 0;
    std::uint64_t seed = 0;
    ModelId model = ModelId::VfArma;
    ReplicateStatus status = ReplicateStatus::Ok;
    double rmse = std::numeric_limits<double>::quiet_NaN();
    double mad = std::numeric_limits<double>::quiet_NaN();
    double mdape = std::numeric_limits<double>::quiet_NaN();
    int iterations = 0;
    std::string message;
};

struct ReportRow {
    std::string scenario_id;
    ModelId model = ModelId::VfArma;
    double mean_rmse = std::numeric_limits<double>::quiet_NaN();
    double mean_mad = std::numeric_limits<double>::quiet_NaN();
    double mean_mdape = std::numeric_limits<double>::quiet_NaN();
    std::size_t diverged = 0;  // includes failed replicates
    std::size_t failed = 0;
    std::size_t replicates = 0;
    double runtime_seconds = 0.0;

    [[nodiscard]] std::size_t converged() const noexcept { return replicates - diverged; }
};

struct ExperimentReport {
    std::vector<ReportRow> rows;
    std::vector<ReplicateRecord> log;  // ordered by (scenario, replicate, model)
    double runtime_seconds = 0.0;

    [[nodiscard]] std::size_t failures() const {
        return static_cast<std::size_t>(std::count_if(log.begin(), log.end(), [](const auto& r) {
            return r.status == ReplicateStatus::Failed;
        }));
    }
    [[nodiscard]] const ReportRow* find(const std::string& scenario, ModelId model) const {
        for (const auto& r : rows)
            if (r.scenario_id == scenario && r.model == model) return &r;
        return nullptr;
    }
};

struct ExperimentOptions {
    std::size_t replicates = 100;
    std::uint64_t master_seed = 1;
    unsigned workers = 1;
    std::size_t horizon = 4;
    VfConfig vf{};
    Aggregation aggregation = Aggregation::Mean;
    std::function<void(std::size_t done, std::size_t total)> progress;
};

/// FNV-1a; keys seed streams by scenario identity rather than list position.
inline std::uint64_t hash_id(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t replicate_seed(std::uint64_t master, const ScenarioConfig& sc, std::size_t rep) {
    return derive_seed(master, hash_id(scenario_id(sc)), rep);
}

/// Mean with sorted summation, so the result does not depend on replicate order.
inline double order_free_mean(std::vector<double> xs) {
    if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(xs.begin(), xs.end());
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

namespace detail {

inline ReplicateRecord evaluate_model(ModelId model, const VaryingFrequencyDataset& train,
                                      const VaryingFrequencyDataset& test, const ExperimentOptions& opt) {
    ReplicateRecord rec;
    rec.model = model;
    const std::size_t h = opt.horizon;
    try {
        std::vector<double> residuals, forecast;
        if (model == ModelId::VfArma || model == ModelId::VfGarch) {
            VfConfig cfg = opt.vf;
            cfg.model_kind = model == ModelId::VfArma ? ModelKind::VfArma : ModelKind::VfGarch;
            const VfModelFit fit = fit_vf(train, cfg);
            rec.iterations = fit.iterations;
            if (!fit.converged) {
                rec.status = ReplicateStatus::Diverged;
                rec.message = fit.diverged_increasing ? "mse increasing" : "max_iter reached";
                return rec;
            }
            residuals = fit.residuals;
            forecast = forecast_vf(fit, test, h);
        } else {
            const auto kind = model == ModelId::Garch ? BenchmarkKind::Garch : BenchmarkKind::Gjr;
            const BenchmarkFit fit = fit_benchmark(train, kind, opt.vf.armax_spec, opt.aggregation);
            residuals = fit.residuals;
            forecast = forecast_benchmark(fit, test, h);
        }
        const std::vector<double> zeros(residuals.size(), 0.0);
        rec.rmse = rmse(residuals, zeros);
        rec.mad = mad(residuals, zeros);
        rec.mdape = mdape(std::span<const double>(test.y.data(), h), forecast).value;
    } catch (const std::exception& e) {
        rec.status = ReplicateStatus::Failed;
        rec.message = e.what();
    }
    return rec;
}

}  // namespace detail

/**
 * @brief Runs every (scenario, replicate) pair and aggregates per (scenario, model).
 *
 * Each replicate is generated from its own seed, fitted on all but the last
 * `horizon` low-frequency points, scored in-sample (RMSE, MAD of residuals) and
 * out-of-sample (MdAPE of the h-step forecast). Non-converged and failed fits
 * are counted and excluded from the means; failures never abort the run.
 * Results are independent of the worker count.
 */
inline ExperimentReport run_experiment(const std::vector<ScenarioConfig>& scenarios,
                                       const std::vector<ModelId>& models,
                                       const ExperimentOptions& opt) {
    if (opt.replicates < 1) throw std::invalid_argument("replicates must be at least 1");
    if (models.empty()) throw std::invalid_argument("no models requested");
    for (const auto& sc : scenarios) validate(sc);

    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t tasks = scenarios.size() * opt.replicates;
    std::vector<std::vector<ReplicateRecord>> results(tasks);
    std::vector<double> task_seconds(tasks, 0.0);
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> done{0};
    std::mutex progress_mutex;

    auto work = [&] {
        while (true) {
            const std::size_t task = next.fetch_add(1);
            if (task >= tasks) return;
            const auto ts = std::chrono::steady_clock::now();
            const std::size_t si = task / opt.replicates;
            const std::size_t rep = task % opt.replicates;
            ScenarioConfig sc = scenarios[si];
            sc.seed = replicate_seed(opt.master_seed, sc, rep);
            const std::string id = scenario_id(sc);
            std::vector<ReplicateRecord> recs;
            try {
                const SimulatedData sim = generate(sc);
                const VaryingFrequencyDataset ds = sim.dataset();
                if (ds.size() <= opt.horizon) throw std::invalid_argument("series shorter than horizon");
                const auto [train, test] = split(ds, SplitSpec{ds.size() - opt.horizon, opt.horizon});
                for (ModelId m : models) recs.push_back(detail::evaluate_model(m, train, test, opt));
            } catch (const std::exception& e) {
                recs.clear();
                for (ModelId m : models) {
                    ReplicateRecord r;
                    r.model = m;
                    r.status = ReplicateStatus::Failed;
                    r.message = std::string("generation: ") + e.what();
                    recs.push_back(r);
                }
            }
            for (auto& r : recs) {
                r.scenario_id = id;
                r.replicate = rep;
                r.seed = sc.seed;
            }
            results[task] = std::move(recs);
            task_seconds[task] =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - ts).count();
            const std::size_t d = done.fetch_add(1) + 1;
            if (opt.progress) {
                std::lock_guard lock(progress_mutex);
                opt.progress(d, tasks);
            }
        }
    };

    const unsigned workers = std::max(1u, std::min<unsigned>(opt.workers, static_cast<unsigned>(tasks)));
    if (workers == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    }

    ExperimentReport report;
    for (std::size_t si = 0; si < scenarios.size(); ++si) {
        const std::string id = scenario_id(scenarios[si]);
        double seconds = 0.0;
        for (std::size_t rep = 0; rep < opt.replicates; ++rep) seconds += task_seconds[si * opt.replicates + rep];
        for (ModelId m : models) {
            ReportRow row;
            row.scenario_id = id;
            row.model = m;
            row.replicates = opt.replicates;
            row.runtime_seconds = seconds;
            std::vector<double> r, a, p;
            for (std::size_t rep = 0; rep < opt.replicates; ++rep) {
                for (const auto& rec : results[si * opt.replicates + rep]) {
                    if (rec.model != m) continue;
                    if (rec.status == ReplicateStatus::Ok) {
                        r.push_back(rec.rmse);
                        a.push_back(rec.mad);
                        p.push_back(rec.mdape);
                    } else {
                        ++row.diverged;
                        if (rec.status == ReplicateStatus::Failed) ++row.failed;
                    }
                }
            }
            row.mean_rmse = order_free_mean(r);
            row.mean_mad = order_free_mean(a);
            row.mean_mdape = order_free_mean(p);
            report.rows.push_back(row);
        }
        for (std::size_t rep = 0; rep < opt.replicates; ++rep)
            for (auto& rec : results[si * opt.replicates + rep]) report.log.push_back(std::move(rec));
    }
    report.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

// ---------------------------------------------------------------------------
// Report output
// ---------------------------------------------------------------------------

inline void write_report_csv(std::ostream& out, const ExperimentReport& report) {
    out << "scenario_id,model,mean_rmse,mean_mad,mean_mdape,diverged,replicates\n";
    for (const auto& r : report.rows)
        out << r.scenario_id << ',' << to_string(r.model) << ',' << detail::format_double(r.mean_rmse)
            << ',' << detail::format_double(r.mean_mad) << ',' << detail::format_double(r.mean_mdape)
            << ',' << r.diverged << ',' << r.replicates << '\n';
}

/// One line per (scenario, replicate, model): scenario_id,replicate,seed,model,status,iterations,message
inline void write_replay_log(std::ostream& out, const ExperimentReport& report) {
    for (const auto& r : report.log) {
        std::string msg = r.message;
        std::replace(msg.begin(), msg.end(), ',', ';');
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        out << r.scenario_id << ',' << r.replicate << ',' << r.seed << ',' << to_string(r.model) << ','
            << to_string(r.status) << ',' << r.iterations << ',' << msg << '\n';
    }
}

inline void write_report_table(std::ostream& out, const ExperimentReport& report) {
    char line[256];
    std::snprintf(line, sizeof line, "%-44s %-9s %11s %11s %10s %9s %5s %8s\n", "scenario", "model",
                  "mean RMSE", "mean MAD", "MdAPE %", "diverged", "reps", "time s");
    out << line;
    for (const auto& r : report.rows) {
        std::snprintf(line, sizeof line, "%-44s %-9s %11.5f %11.5f %10.2f %9zu %5zu %8.1f\n",
                      r.scenario_id.c_str(), to_string(r.model).c_str(), r.mean_rmse, r.mean_mad,
                      r.mean_mdape, r.diverged, r.replicates, r.runtime_seconds);
        out << line;
    }
}

}  // namespace vfvol
