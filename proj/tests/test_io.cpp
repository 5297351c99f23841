#include "vfvol/config.hpp"
#include "vfvol/model_io.hpp"
#include "vfvol/simgen.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

using namespace vfvol;

namespace {

std::pair<VaryingFrequencyDataset, VaryingFrequencyDataset> data() {
    ScenarioConfig sc;
    sc.T = 510;
    sc.seed = 12;
    const auto ds = generate(sc).dataset();
    return split(ds, {ds.size() - 4, 4});
}

SavedModel fit_model(ModelId id, const VaryingFrequencyDataset& train) {
    SavedModel m;
    m.id = id;
    if (id == ModelId::VfArma || id == ModelId::VfGarch) {
        VfConfig cfg;
        cfg.model_kind = id == ModelId::VfArma ? ModelKind::VfArma : ModelKind::VfGarch;
        m.fit = fit_vf(train, cfg);
    } else {
        m.fit = fit_benchmark(train, id == ModelId::Garch ? BenchmarkKind::Garch : BenchmarkKind::Gjr);
    }
    return m;
}

std::string to_text(const SavedModel& m) {
    std::ostringstream out;
    save_model(out, m);
    return out.str();
}

}  // namespace

TEST(ModelIo, RoundTripPreservesForecasts) {
    const auto [train, test] = data();
    for (ModelId id : {ModelId::VfArma, ModelId::VfGarch, ModelId::Garch, ModelId::Gjr}) {
        const SavedModel m = fit_model(id, train);
        const std::string text = to_text(m);
        std::istringstream in(text);
        const SavedModel back = load_model(in);
        EXPECT_EQ(back.id, id);
        EXPECT_EQ(back.residuals(), m.residuals());
        EXPECT_EQ(back.forecast(test, 4), m.forecast(test, 4)) << to_string(id);
        EXPECT_EQ(to_text(back), text);
    }
}

TEST(ModelIo, RejectsMalformedFiles) {
    const auto [train, test] = data();
    const std::string text = to_text(fit_model(ModelId::Garch, train));
    {
        std::istringstream in("not-a-model 1\n");
        EXPECT_THROW(load_model(in), std::invalid_argument);
    }
    {
        std::istringstream in(text + "armax.intercept 0\n");
        try {
            load_model(in);
            FAIL() << "duplicate key accepted";
        } catch (const std::invalid_argument& e) {
            const std::string msg = e.what();
            const auto lines = std::count(text.begin(), text.end(), '\n');
            EXPECT_NE(msg.find("line " + std::to_string(lines + 1)), std::string::npos) << msg;
        }
    }
    {
        std::string cut = text;
        const auto pos = cut.find("gjr.omega");
        ASSERT_NE(pos, std::string::npos);
        cut.erase(pos, cut.find('\n', pos) - pos + 1);
        std::istringstream in(cut);
        EXPECT_THROW(load_model(in), std::invalid_argument);
    }
}

TEST(Config, AppliesKnownKeys) {
    std::istringstream in("# comment\np = 2\nq=0\nlambda = auto\nmse_tol = 1e-4\nupdate_rule = literal\n"
                          "aggregation = last\nintercept = false\n");
    FitSettings s;
    apply_config(s, parse_key_values(in));
    EXPECT_EQ(s.vf.armax_spec.p, 2);
    EXPECT_EQ(s.vf.armax_spec.q, 0);
    EXPECT_FALSE(s.vf.spline_cfg.lambda.has_value());
    EXPECT_EQ(s.vf.mse_tol, 1e-4);
    EXPECT_EQ(s.vf.update_rule, UpdateRule::Literal);
    EXPECT_EQ(s.aggregation, Aggregation::Last);
    EXPECT_FALSE(s.vf.armax_spec.include_intercept);
}

TEST(Config, RejectsUnknownKeyAndListsValidOnes) {
    FitSettings s;
    try {
        apply_config(s, KeyValues{{"lamda", "1"}});
        FAIL() << "unknown key accepted";
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("lamda"), std::string::npos);
        EXPECT_NE(msg.find("lambda"), std::string::npos);
    }
    EXPECT_THROW(apply_config(s, KeyValues{{"p", "x"}}), std::invalid_argument);
    EXPECT_THROW(apply_config(s, KeyValues{{"update_rule", "both"}}), std::invalid_argument);
    std::istringstream bad("p\n");
    EXPECT_THROW(parse_key_values(bad), std::invalid_argument);
}

TEST(Config, WriteThenReadRoundTrip) {
    FitSettings s;
    s.vf.armax_spec.q = 2;
    s.vf.spline_cfg.lambda = 0.25;
    s.vf.max_iter = 17;
    s.aggregation = Aggregation::Drop;
    std::stringstream ss;
    write_config(ss, s);
    FitSettings back;
    apply_config(back, parse_key_values(ss));
    std::stringstream again;
    write_config(again, back);
    EXPECT_EQ(again.str(), ss.str());
}
