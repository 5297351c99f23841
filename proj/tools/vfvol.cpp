// vfvol command-line tool: simulate, fit, forecast, experiment, fixture.

#include "vfvol/vfvol.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace vfvol;

namespace {

constexpr int kExitError = 1;
constexpr int kExitPartial = 3;

const char* kDomains =
    "study grid: T in {255, 510, 1530}; (mu, sigma) in {(0.20, 0.30), (0.40, 0.45), (0.80, 0.60)}; "
    "psi in {0.20, 0.50, 0.70}; dep in {iid, ar1}; form in {linear, exponential}";

struct ScenarioFlags {
    std::size_t T = 255;
    double mu = 0.20;
    double sigma = 0.30;
    double psi = 0.50;
    std::string form = "linear";
    std::string dep = "iid";
    double x0 = 100.0;
};

ScenarioConfig to_scenario(const ScenarioFlags& f) {
    ScenarioConfig sc;
    sc.T = f.T;
    sc.mu_annual = f.mu;
    sc.sigma_annual = f.sigma;
    sc.psi_weight = f.psi;
    sc.x0 = f.x0;
    if (f.form == "linear") sc.form = FunctionalForm::Linear;
    else if (f.form == "exponential") sc.form = FunctionalForm::Exponential;
    else throw std::invalid_argument("unknown form '" + f.form + "'");
    if (f.dep == "iid") sc.dependence = Dependence::Independent;
    else if (f.dep == "ar1") sc.dependence = Dependence::AR1;
    else throw std::invalid_argument("unknown dep '" + f.dep + "'");
    validate(sc);
    return sc;
}

// Inverse of scenario_id(): "T255_mu0.20_sig0.30_psi0.50_iid_linear".
ScenarioConfig parse_scenario_id(const std::string& id) {
    ScenarioFlags f;
    char dep[16] = {}, form[16] = {};
    if (std::sscanf(id.c_str(), "T%zu_mu%lf_sig%lf_psi%lf_%15[a-z0-9]_%15[a-z]", &f.T, &f.mu, &f.sigma,
                    &f.psi, dep, form) != 6)
        throw std::invalid_argument("malformed scenario id '" + id +
                                    "' (expected e.g. T255_mu0.20_sig0.30_psi0.50_iid_linear)");
    f.dep = dep;
    f.form = form;
    return to_scenario(f);
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw std::runtime_error("cannot create output directory " + dir);
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream out(p);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    return out;
}

FitSettings load_settings(const std::string& config_path, const std::vector<std::string>& sets) {
    FitSettings s;
    if (!config_path.empty()) apply_config(s, read_key_values(config_path));
    if (!sets.empty()) {
        std::stringstream ss;
        for (const auto& kv : sets) ss << kv << '\n';
        apply_config(s, parse_key_values(ss));
    }
    return s;
}

void write_scenario_manifest(std::ostream& out, const ScenarioConfig& sc) {
    out << "scenario_id=" << scenario_id(sc) << "\nT=" << sc.T << "\nmu=" << detail::format_double(sc.mu_annual)
        << "\nsigma=" << detail::format_double(sc.sigma_annual) << "\npsi=" << detail::format_double(sc.psi_weight)
        << "\nform=" << to_string(sc.form) << "\ndep=" << to_string(sc.dependence)
        << "\nx0=" << detail::format_double(sc.x0) << '\n';
}

int cmd_simulate(const ScenarioFlags& flags, std::uint64_t seed, std::size_t replicates, const std::string& out_dir) {
    ScenarioConfig sc;
    try {
        sc = to_scenario(flags);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: invalid scenario: " << e.what() << "\n  " << kDomains << '\n';
        return kExitError;
    }
    ensure_dir(out_dir);
    const std::string id = scenario_id(sc);
    auto manifest = open_out(fs::path(out_dir) / "manifest.txt");
    manifest << "command=simulate\nmaster_seed=" << seed << "\nreplicates=" << replicates << '\n';
    write_scenario_manifest(manifest, sc);
    for (std::size_t r = 0; r < replicates; ++r) {
        ScenarioConfig rep = sc;
        rep.seed = replicate_seed(seed, sc, r);
        const SimulatedData sim = generate(rep);
        const std::string file = id + "_rep" + std::to_string(r + 1) + ".csv";
        auto out = open_out(fs::path(out_dir) / file);
        write_dataset_csv(out, sim.dataset());
        manifest << "replicate." << (r + 1) << "=" << file << " seed=" << rep.seed
                 << " regenerations=" << sim.regenerations << '\n';
    }
    std::cout << "wrote " << replicates << " replicate(s) of " << id << " to " << out_dir << '\n';
    return 0;
}

std::size_t resolve_train(const VaryingFrequencyDataset& ds, long train, std::size_t holdout) {
    if (train > 0) {
        if (static_cast<std::size_t>(train) > ds.size())
            throw std::invalid_argument("--train " + std::to_string(train) + " exceeds the " +
                                        std::to_string(ds.size()) + " available rows");
        return static_cast<std::size_t>(train);
    }
    if (holdout >= ds.size()) throw std::invalid_argument("--holdout leaves no training rows");
    return ds.size() - holdout;
}

int cmd_fit(const std::string& model_name, const std::string& data, const std::string& config,
            const std::vector<std::string>& sets, long train, std::size_t holdout, const std::string& out_path) {
    const ModelId id = parse_model(model_name);
    const FitSettings settings = load_settings(config, sets);
    const VaryingFrequencyDataset ds = load_dataset(data);
    const std::size_t n_train = resolve_train(ds, train, holdout);
    const VaryingFrequencyDataset tr = slice(ds, 0, n_train);

    SavedModel saved;
    saved.id = id;
    bool converged = true;
    if (id == ModelId::VfArma || id == ModelId::VfGarch) {
        VfConfig cfg = settings.vf;
        cfg.model_kind = id == ModelId::VfArma ? ModelKind::VfArma : ModelKind::VfGarch;
        VfModelFit fit;
        try {
            fit = fit_vf(tr, cfg);
        } catch (const StageError& e) {
            std::cerr << "error: " << to_string(id) << ": " << e.what() << '\n';
            return kExitError;
        }
        std::cout << "iteration,mse\n";
        for (std::size_t k = 0; k < fit.mse_trace.size(); ++k)
            std::printf("%zu,%.10g\n", k + 1, fit.mse_trace[k]);
        converged = fit.converged;
        std::cout << "converged=" << (fit.converged ? "true" : "false") << " iterations=" << fit.iterations;
        if (!fit.converged) std::cout << (fit.diverged_increasing ? " (mse increasing)" : " (max_iter reached)");
        std::cout << '\n';
        for (const auto& w : fit.gam.warnings) std::cerr << "warning: " << w << '\n';
        saved.fit = std::move(fit);
    } else {
        const auto kind = id == ModelId::Garch ? BenchmarkKind::Garch : BenchmarkKind::Gjr;
        BenchmarkFit fit = fit_benchmark(tr, kind, settings.vf.armax_spec, settings.aggregation);
        converged = fit.armax.converged && fit.gjr.converged;
        std::cout << "converged=" << (converged ? "true" : "false") << '\n';
        saved.fit = std::move(fit);
    }
    const auto& res = saved.residuals();
    const std::vector<double> zeros(res.size(), 0.0);
    std::printf("model=%s train_rows=%zu rmse=%.6g mad=%.6g\n", to_string(id).c_str(), n_train, rmse(res, zeros),
                mad(res, zeros));
    if (!out_path.empty()) {
        save_model(out_path, saved);
        std::cout << "model written to " << out_path << '\n';
    }
    return converged ? 0 : kExitPartial;
}

int cmd_forecast(const std::string& model_path, const std::string& data, std::size_t h, const std::string& out_path) {
    const SavedModel model = load_model(model_path);
    const VaryingFrequencyDataset ds = load_dataset(data);
    const std::size_t n_train = model.residuals().size();
    if (n_train + h > ds.size())
        throw std::invalid_argument("forecast needs " + std::to_string(h) + " rows after the " +
                                    std::to_string(n_train) + " training rows, data has " +
                                    std::to_string(ds.size()));
    const VaryingFrequencyDataset test = slice(ds, n_train, h);
    const std::vector<double> fc = model.forecast(test, h);
    std::ostringstream csv;
    csv << "step,point_forecast\n";
    for (std::size_t s = 0; s < fc.size(); ++s) csv << (s + 1) << ',' << detail::format_double(fc[s]) << '\n';
    if (out_path.empty()) {
        std::cout << csv.str();
    } else {
        auto out = open_out(out_path);
        out << csv.str();
    }
    return 0;
}

unsigned default_workers() {
    if (const char* env = std::getenv("VFVOL_WORKERS")) {
        try {
            const int w = std::stoi(env);
            if (w >= 1) return static_cast<unsigned>(w);
        } catch (const std::exception&) {
        }
        std::cerr << "warning: ignoring invalid VFVOL_WORKERS='" << env << "'\n";
    }
    return 1;
}

int cmd_experiment(const std::string& grid, const std::vector<std::string>& scenario_ids,
                   const std::vector<std::string>& model_names, std::size_t replicates, std::uint64_t seed,
                   unsigned workers, const std::string& config, const std::vector<std::string>& sets,
                   const std::string& out_dir, bool quiet) {
    std::vector<ScenarioConfig> scenarios;
    if (grid == "full") {
        scenarios = scenario_grid();
    } else if (!grid.empty()) {
        throw std::invalid_argument("--grid accepts only 'full'; use --scenario for explicit lists");
    }
    for (const auto& s : scenario_ids) scenarios.push_back(parse_scenario_id(s));
    if (scenarios.empty()) throw std::invalid_argument("no scenarios: pass --grid full or --scenario <id>");
    std::vector<ModelId> models;
    for (const auto& m : model_names) models.push_back(parse_model(m));

    const FitSettings settings = load_settings(config, sets);
    ExperimentOptions opt;
    opt.replicates = replicates;
    opt.master_seed = seed;
    opt.workers = workers;
    opt.vf = settings.vf;
    opt.aggregation = settings.aggregation;
    if (!quiet)
        opt.progress = [](std::size_t done, std::size_t total) {
            if (done == total || done % 10 == 0) std::fprintf(stderr, "\r%zu/%zu replicates", done, total);
            if (done == total) std::fputc('\n', stderr);
        };
    ensure_dir(out_dir);
    const ExperimentReport report = run_experiment(scenarios, models, opt);

    const fs::path dir(out_dir);
    {
        auto out = open_out(dir / "report.csv");
        write_report_csv(out, report);
    }
    {
        auto out = open_out(dir / "replay.log");
        write_replay_log(out, report);
    }
    {
        auto out = open_out(dir / "report.txt");
        write_report_table(out, report);
    }
    {
        auto out = open_out(dir / "manifest.txt");
        out << "command=experiment\nmaster_seed=" << seed << "\nreplicates=" << replicates << "\nmodels=";
        for (std::size_t i = 0; i < models.size(); ++i) out << (i ? "," : "") << to_string(models[i]);
        out << '\n';
        for (const auto& sc : scenarios) out << "scenario=" << scenario_id(sc) << '\n';
        write_config(out, settings);
    }
    write_report_table(std::cout, report);
    if (report.failures() > 0) {
        std::cerr << report.failures() << " replicate fit(s) failed; see " << (dir / "replay.log").string()
                  << " for seeds\n";
        return kExitPartial;
    }
    return 0;
}

int cmd_fixture(const std::string& out_path, std::size_t weeks, std::uint64_t seed) {
    const RawDailySeries daily = synthetic_daily_fixture(weeks, seed);
    auto out = open_out(out_path);
    write_daily_csv(out, daily);
    std::cout << "wrote " << daily.size() << " daily rows to " << out_path << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Varying-frequency volatility models: simulation, estimation and evaluation"};
    app.require_subcommand(1);

    auto* sim = app.add_subcommand("simulate", "Generate simulated datasets for one scenario");
    ScenarioFlags sflags;
    std::uint64_t sim_seed = 1;
    std::size_t sim_reps = 1;
    std::string sim_out = "simulated";
    sim->add_option("--T", sflags.T, "High-frequency length (multiple of 5)");
    sim->add_option("--mu", sflags.mu, "Annual drift");
    sim->add_option("--sigma", sflags.sigma, "Annual volatility");
    sim->add_option("--psi", sflags.psi, "Weight of the covariate noise");
    sim->add_option("--form", sflags.form, "linear | exponential");
    sim->add_option("--dep", sflags.dep, "iid | ar1");
    sim->add_option("--x0", sflags.x0, "Initial price");
    sim->add_option("--seed", sim_seed, "Master seed");
    sim->add_option("--replicates", sim_reps, "Number of replicates")->check(CLI::PositiveNumber);
    sim->add_option("--out", sim_out, "Output directory");

    auto* fit = app.add_subcommand("fit", "Fit a model to a daily or aligned dataset CSV");
    std::string fit_model = "vf-arma", fit_data, fit_config, fit_out;
    std::vector<std::string> fit_sets;
    long fit_train = 0;
    std::size_t fit_holdout = 4;
    fit->add_option("--model", fit_model, "vf-arma | vf-garch | garch | gjr");
    fit->add_option("--data", fit_data, "Input CSV")->required()->check(CLI::ExistingFile);
    fit->add_option("--config", fit_config, "key=value config file")->check(CLI::ExistingFile);
    fit->add_option("--set", fit_sets, "Override a config key (key=value), repeatable");
    fit->add_option("--train", fit_train, "Number of training rows (default: all but --holdout)");
    fit->add_option("--holdout", fit_holdout, "Rows held out at the end when --train is not given");
    fit->add_option("--out", fit_out, "Model file to write");

    auto* fc = app.add_subcommand("forecast", "Forecast the rows following a fitted model's training window");
    std::string fc_model, fc_data, fc_out;
    std::size_t fc_h = 4;
    fc->add_option("--model-file", fc_model, "Model file from 'fit'")->required()->check(CLI::ExistingFile);
    fc->add_option("--data", fc_data, "CSV used for fitting")->required()->check(CLI::ExistingFile);
    fc->add_option("--horizon", fc_h, "Horizon")->check(CLI::PositiveNumber);
    fc->add_option("--out", fc_out, "Output CSV (default stdout)");

    auto* exp = app.add_subcommand("experiment", "Monte Carlo comparison over simulated scenarios");
    std::string exp_grid, exp_config, exp_out = "experiment";
    std::vector<std::string> exp_scenarios, exp_sets;
    std::vector<std::string> exp_models{"vf-arma", "vf-garch", "garch", "gjr"};
    std::size_t exp_reps = 100;
    std::uint64_t exp_seed = 1;
    unsigned exp_workers = default_workers();
    bool exp_quiet = false;
    exp->add_option("--grid", exp_grid, "'full' for all 108 scenarios");
    exp->add_option("--scenario", exp_scenarios, "Scenario id, repeatable");
    exp->add_option("--models", exp_models, "Models to compare")->delimiter(',');
    exp->add_option("--replicates", exp_reps, "Replicates per scenario")->check(CLI::PositiveNumber);
    exp->add_option("--seed", exp_seed, "Master seed");
    exp->add_option("--workers", exp_workers, "Worker threads (default $VFVOL_WORKERS or 1)")
        ->check(CLI::PositiveNumber);
    exp->add_option("--config", exp_config, "key=value config file")->check(CLI::ExistingFile);
    exp->add_option("--set", exp_sets, "Override a config key (key=value), repeatable");
    exp->add_option("--out", exp_out, "Output directory");
    exp->add_flag("--quiet", exp_quiet, "No progress output");

    auto* fix = app.add_subcommand("fixture", "Write the synthetic daily close/volume fixture");
    std::string fix_out = "synthetic_daily.csv";
    std::size_t fix_weeks = 104;
    std::uint64_t fix_seed = 20160104;
    fix->add_option("--out", fix_out, "Output CSV");
    fix->add_option("--weeks", fix_weeks, "Number of weeks")->check(CLI::Range(3, 100000));
    fix->add_option("--seed", fix_seed, "Seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sim) return cmd_simulate(sflags, sim_seed, sim_reps, sim_out);
        if (*fit) return cmd_fit(fit_model, fit_data, fit_config, fit_sets, fit_train, fit_holdout, fit_out);
        if (*fc) return cmd_forecast(fc_model, fc_data, fc_h, fc_out);
        if (*exp)
            return cmd_experiment(exp_grid, exp_scenarios, exp_models, exp_reps, exp_seed, exp_workers, exp_config,
                                  exp_sets, exp_out, exp_quiet);
        if (*fix) return cmd_fixture(fix_out, fix_weeks, fix_seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    }
    return kExitError;
}
