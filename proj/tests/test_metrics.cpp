#include "vfvol/metrics.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

using namespace vfvol;

namespace {

std::string csv(const ExperimentReport& r) {
    std::ostringstream out;
    write_report_csv(out, r);
    return out.str();
}

ExperimentOptions small(std::size_t reps, unsigned workers = 1) {
    ExperimentOptions o;
    o.replicates = reps;
    o.master_seed = 99;
    o.workers = workers;
    return o;
}

const std::vector<ModelId> kAll{ModelId::VfArma, ModelId::VfGarch, ModelId::Garch, ModelId::Gjr};

}  // namespace

TEST(Metrics, RmseAndMad) {
    const std::vector<double> y{1.0, 2.0}, yhat{1.0, 3.0};
    EXPECT_DOUBLE_EQ(rmse(y, yhat), std::sqrt(0.5));
    EXPECT_DOUBLE_EQ(mad(y, yhat), 0.5);
    EXPECT_EQ(rmse(y, y), 0.0);
    EXPECT_EQ(mad(y, y), 0.0);
    EXPECT_THROW(rmse(y, std::vector<double>{1.0}), std::invalid_argument);
    EXPECT_THROW(mad(std::vector<double>{}, std::vector<double>{}), std::invalid_argument);
}

TEST(Metrics, RmseDominatesMad) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> z(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> a(20), b(20);
        for (auto& e : a) e = z(rng);
        for (auto& e : b) e = z(rng);
        EXPECT_GE(rmse(a, b), mad(a, b));
    }
}

TEST(Metrics, Mdape) {
    EXPECT_DOUBLE_EQ(mdape(std::vector<double>{1.0, 2.0, 4.0}, std::vector<double>{1.5, 2.0, 2.0}).value, 50.0);
    const std::vector<double> y{0.3, -0.2, 0.7, 1.1};
    EXPECT_EQ(mdape(y, y).value, 0.0);
    const std::vector<double> yhat{0.2, -0.1, 0.9, 1.0};
    std::vector<double> ys, yhs;
    for (std::size_t i = 0; i < y.size(); ++i) {
        ys.push_back(y[i] * 37.5);
        yhs.push_back(yhat[i] * 37.5);
    }
    EXPECT_NEAR(mdape(ys, yhs).value, mdape(y, yhat).value, 1e-10);
}

TEST(Metrics, MdapeExcludesZeros) {
    const auto r = mdape(std::vector<double>{0.0, 2.0, 4.0}, std::vector<double>{1.0, 1.0, 4.0});
    EXPECT_EQ(r.excluded, 1u);
    EXPECT_DOUBLE_EQ(r.value, 25.0);
    EXPECT_THROW(mdape(std::vector<double>{0.0, 0.0}, std::vector<double>{1.0, 1.0}), std::invalid_argument);
}

TEST(Metrics, ParseModel) {
    for (ModelId m : kAll) EXPECT_EQ(parse_model(to_string(m)), m);
    EXPECT_THROW(parse_model("arima"), std::invalid_argument);
}

TEST(Experiment, SingleRow) {
    const auto report = run_experiment({ScenarioConfig{}}, {ModelId::VfArma}, small(1));
    ASSERT_EQ(report.rows.size(), 1u);
    EXPECT_EQ(report.rows[0].replicates, 1u);
    EXPECT_EQ(report.log.size(), 1u);
}

TEST(Experiment, DeterministicAndWorkerIndependent) {
    ScenarioConfig a, b;
    b.dependence = Dependence::AR1;
    b.form = FunctionalForm::Exponential;
    const auto r1 = run_experiment({a, b}, kAll, small(4, 1));
    const auto r2 = run_experiment({a, b}, kAll, small(4, 1));
    const auto r3 = run_experiment({a, b}, kAll, small(4, 3));
    EXPECT_EQ(csv(r1), csv(r2));
    EXPECT_EQ(csv(r1), csv(r3));
    EXPECT_EQ(r1.rows.size(), 8u);
}

TEST(Experiment, AccountingMatchesReplayLog) {
    const auto report = run_experiment({ScenarioConfig{}}, kAll, small(5));
    std::size_t not_ok = 0;
    for (const auto& rec : report.log) not_ok += rec.status != ReplicateStatus::Ok;
    std::size_t diverged = 0;
    for (const auto& row : report.rows) {
        diverged += row.diverged;
        EXPECT_EQ(row.replicates, 5u);
    }
    EXPECT_EQ(diverged, not_ok);
    EXPECT_EQ(report.log.size(), 5u * kAll.size());
}

TEST(Experiment, FailuresAreLoggedNotFatal) {
    auto opt = small(3);
    opt.vf.armax_spec.p = -1;  // every ARMAX stage rejects this
    const auto report = run_experiment({ScenarioConfig{}}, kAll, opt);
    EXPECT_EQ(report.failures(), 3u * kAll.size());
    for (const auto& row : report.rows) {
        EXPECT_EQ(row.diverged, 3u);
        EXPECT_EQ(row.failed, 3u);
        EXPECT_TRUE(std::isnan(row.mean_rmse));
    }
    std::ostringstream log;
    write_replay_log(log, report);
    EXPECT_NE(log.str().find(std::to_string(report.log[0].seed)), std::string::npos);
}

TEST(Experiment, MeansArePermutationInvariant) {
    std::vector<double> xs{0.1, 1e-17, 3.0, -2.0, 1e16, 0.3};
    const double m = order_free_mean(xs);
    std::mt19937_64 rng(3);
    for (int k = 0; k < 10; ++k) {
        std::shuffle(xs.begin(), xs.end(), rng);
        EXPECT_EQ(order_free_mean(xs), m);
    }
}

TEST(Experiment, ReportSchema) {
    const auto report = run_experiment({ScenarioConfig{}}, {ModelId::Garch}, small(2));
    const auto text = csv(report);
    EXPECT_EQ(text.substr(0, text.find('\n')), "scenario_id,model,mean_rmse,mean_mad,mean_mdape,diverged,replicates");
    EXPECT_NE(text.find("T255_mu0.20_sig0.30_psi0.50_iid_linear,garch,"), std::string::npos);
}
