#pragma once

#include "vfvol/benchmarks.hpp"
#include "vfvol/metrics.hpp"
#include "vfvol/vfmodels.hpp"

#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace vfvol {

inline constexpr int kModelFileVersion = 1;

/// A fitted VF model or benchmark, as stored in a model file.
struct SavedModel {
    ModelId id = ModelId::VfArma;
    std::variant<VfModelFit, BenchmarkFit> fit;

    [[nodiscard]] std::vector<double> forecast(const VaryingFrequencyDataset& ds_test, std::size_t h) const {
        if (const auto* vf = std::get_if<VfModelFit>(&fit)) return forecast_vf(*vf, ds_test, h);
        return forecast_benchmark(std::get<BenchmarkFit>(fit), ds_test, h);
    }
    [[nodiscard]] const std::vector<double>& residuals() const {
        if (const auto* vf = std::get_if<VfModelFit>(&fit)) return vf->residuals;
        return std::get<BenchmarkFit>(fit).residuals;
    }
};

namespace io {

// Line format: `<key> <value> [<value> ...]`, whitespace separated.
// Vectors are written as `<key> <count> v1 v2 ...`.

class Writer {
public:
    explicit Writer(std::ostream& out) : out_(out) {}

    void scalar(const std::string& key, double x) { out_ << key << ' ' << detail::format_double(x) << '\n'; }
    void integer(const std::string& key, long long x) { out_ << key << ' ' << x << '\n'; }
    void text(const std::string& key, const std::string& s) { out_ << key << ' ' << s << '\n'; }
    void vec(const std::string& key, const std::vector<double>& v) {
        out_ << key << ' ' << v.size();
        for (double x : v) out_ << ' ' << detail::format_double(x);
        out_ << '\n';
    }
    void matrix(const std::string& key, const Eigen::MatrixXd& m) {
        out_ << key << ' ' << m.rows() << ' ' << m.cols();
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) out_ << ' ' << detail::format_double(m(i, j));
        out_ << '\n';
    }

private:
    std::ostream& out_;
};

class Reader {
public:
    explicit Reader(std::istream& in) {
        std::string line;
        std::size_t no = 0;
        while (std::getline(in, line)) {
            ++no;
            if (detail::trim(line).empty() || line[0] == '#') continue;
            std::istringstream ls(line);
            std::string key;
            ls >> key;
            std::vector<std::string> toks;
            for (std::string t; ls >> t;) toks.push_back(t);
            if (!fields_.emplace(key, Entry{std::move(toks), no}).second)
                throw std::invalid_argument("model file line " + std::to_string(no) + ": duplicate key '" + key + "'");
        }
    }

    [[nodiscard]] bool has(const std::string& key) const { return fields_.count(key) > 0; }

    [[nodiscard]] std::string text(const std::string& key) const {
        const auto& e = get(key);
        if (e.toks.size() != 1) fail(key, e, "expected one value");
        return e.toks[0];
    }
    [[nodiscard]] double scalar(const std::string& key) const {
        return detail::parse_double(text(key), get(key).line);
    }
    [[nodiscard]] long long integer(const std::string& key) const {
        const std::string s = text(key);
        try {
            std::size_t pos = 0;
            const long long v = std::stoll(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            fail(key, get(key), "expected an integer");
        }
    }
    [[nodiscard]] std::vector<double> vec(const std::string& key) const {
        const auto& e = get(key);
        const std::size_t n = count(key, e, 0);
        if (e.toks.size() != n + 1) fail(key, e, "length does not match count");
        std::vector<double> out(n);
        for (std::size_t i = 0; i < n; ++i) out[i] = detail::parse_double(e.toks[i + 1], e.line);
        return out;
    }
    [[nodiscard]] Eigen::MatrixXd matrix(const std::string& key) const {
        const auto& e = get(key);
        if (e.toks.size() < 2) fail(key, e, "missing dimensions");
        const std::size_t r = count(key, e, 0), c = count(key, e, 1);
        if (e.toks.size() != r * c + 2) fail(key, e, "length does not match dimensions");
        Eigen::MatrixXd m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j)
                m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                    detail::parse_double(e.toks[2 + i * c + j], e.line);
        return m;
    }

private:
    struct Entry {
        std::vector<std::string> toks;
        std::size_t line;
    };
    std::map<std::string, Entry> fields_;

    [[noreturn]] static void fail(const std::string& key, const Entry& e, const std::string& msg) {
        throw std::invalid_argument("model file line " + std::to_string(e.line) + " (" + key + "): " + msg);
    }
    const Entry& get(const std::string& key) const {
        const auto it = fields_.find(key);
        if (it == fields_.end()) throw std::invalid_argument("model file: missing key '" + key + "'");
        return it->second;
    }
    static std::size_t count(const std::string& key, const Entry& e, std::size_t i) {
        if (e.toks.size() <= i) fail(key, e, "missing count");
        try {
            return static_cast<std::size_t>(std::stoull(e.toks[i]));
        } catch (const std::exception&) {
            fail(key, e, "bad count");
        }
    }
};

inline void write_armax(Writer& w, const ArmaxFit& a) {
    w.integer("armax.p", a.spec.p);
    w.integer("armax.q", a.spec.q);
    w.integer("armax.exog_lags", a.spec.exog_lags);
    w.integer("armax.include_intercept", a.spec.include_intercept ? 1 : 0);
    w.integer("armax.exog_cols", static_cast<long long>(a.exog_cols));
    w.integer("armax.start", static_cast<long long>(a.start));
    w.scalar("armax.intercept", a.intercept);
    w.vec("armax.phi", a.phi);
    w.vec("armax.theta", a.theta);
    w.vec("armax.psi", a.psi);
    w.scalar("armax.sse", a.sse);
    w.integer("armax.converged", a.converged ? 1 : 0);
    w.vec("armax.fitted", a.fitted);
    w.vec("armax.residuals", a.residuals);
    w.matrix("armax.exog_tail", a.exog_tail);
    w.vec("armax.ar_history", a.ar_history);
}

inline ArmaxFit read_armax(const Reader& r) {
    ArmaxFit a;
    a.spec.p = static_cast<int>(r.integer("armax.p"));
    a.spec.q = static_cast<int>(r.integer("armax.q"));
    a.spec.exog_lags = static_cast<int>(r.integer("armax.exog_lags"));
    a.spec.include_intercept = r.integer("armax.include_intercept") != 0;
    a.exog_cols = static_cast<std::size_t>(r.integer("armax.exog_cols"));
    a.start = static_cast<std::size_t>(r.integer("armax.start"));
    a.intercept = r.scalar("armax.intercept");
    a.phi = r.vec("armax.phi");
    a.theta = r.vec("armax.theta");
    a.psi = r.vec("armax.psi");
    a.sse = r.scalar("armax.sse");
    a.converged = r.integer("armax.converged") != 0;
    a.fitted = r.vec("armax.fitted");
    a.residuals = r.vec("armax.residuals");
    a.exog_tail = r.matrix("armax.exog_tail");
    a.ar_history = r.vec("armax.ar_history");
    if (!a.ar_history.empty() && a.ar_history.size() != a.fitted.size())
        throw std::invalid_argument("model file: ARMAX AR history length mismatch");
    if (a.fitted.size() != a.residuals.size()) throw std::invalid_argument("model file: ARMAX history lengths differ");
    if (a.psi.size() != a.exog_cols * static_cast<std::size_t>(a.spec.exog_lags + 1))
        throw std::invalid_argument("model file: ARMAX exogenous coefficient count mismatch");
    return a;
}

inline void write_gjr(Writer& w, const GjrFit& g) {
    w.integer("gjr.leverage", g.leverage ? 1 : 0);
    w.scalar("gjr.mean", g.mean_const);
    w.scalar("gjr.omega", g.params.omega);
    w.scalar("gjr.alpha", g.params.alpha);
    w.scalar("gjr.gamma", g.params.gamma);
    w.scalar("gjr.beta", g.params.beta);
    w.scalar("gjr.sigma2_init", g.sigma2_init);
    w.scalar("gjr.loglik", g.loglik);
    w.integer("gjr.converged", g.converged ? 1 : 0);
    w.vec("gjr.resid", g.resid);
    w.vec("gjr.sigma2", g.sigma2);
}

inline GjrFit read_gjr(const Reader& r) {
    GjrFit g;
    g.leverage = r.integer("gjr.leverage") != 0;
    g.mean_const = r.scalar("gjr.mean");
    g.params.omega = r.scalar("gjr.omega");
    g.params.alpha = r.scalar("gjr.alpha");
    g.params.gamma = r.scalar("gjr.gamma");
    g.params.beta = r.scalar("gjr.beta");
    g.sigma2_init = r.scalar("gjr.sigma2_init");
    g.loglik = r.scalar("gjr.loglik");
    g.converged = r.integer("gjr.converged") != 0;
    g.resid = r.vec("gjr.resid");
    g.sigma2 = r.vec("gjr.sigma2");
    g.std_resid.resize(g.resid.size());
    for (std::size_t t = 0; t < g.resid.size() && t < g.sigma2.size(); ++t)
        g.std_resid[t] = g.resid[t] / std::sqrt(g.sigma2[t]);
    return g;
}

inline void write_gam(Writer& w, const AdditiveFit& f) {
    w.scalar("gam.s0", f.s0);
    w.integer("gam.components", static_cast<long long>(f.components.size()));
    for (std::size_t j = 0; j < f.components.size(); ++j) {
        const std::string p = "gam." + std::to_string(j + 1) + ".";
        w.integer(p + "degree", f.components[j].degree);
        w.vec(p + "knots", f.components[j].knots);
        w.vec(p + "coef", f.components[j].coef);
    }
    w.vec("gam.lambda", f.lambda);
    w.vec("gam.edf", f.edf);
    w.integer("gam.cycles", f.cycles);
}

inline AdditiveFit read_gam(const Reader& r) {
    AdditiveFit f;
    f.s0 = r.scalar("gam.s0");
    const auto m = r.integer("gam.components");
    if (m < 0) throw std::invalid_argument("model file: negative component count");
    for (long long j = 0; j < m; ++j) {
        const std::string p = "gam." + std::to_string(j + 1) + ".";
        SmoothFunction s;
        s.degree = static_cast<int>(r.integer(p + "degree"));
        s.knots = r.vec(p + "knots");
        s.coef = r.vec(p + "coef");
        if (!s.coef.empty() && s.knots.size() != s.coef.size() + static_cast<std::size_t>(s.degree) + 1)
            throw std::invalid_argument("model file: component " + std::to_string(j + 1) +
                                        " knot/coefficient counts are inconsistent");
        f.components.push_back(std::move(s));
    }
    f.lambda = r.vec("gam.lambda");
    f.edf = r.vec("gam.edf");
    f.cycles = static_cast<int>(r.integer("gam.cycles"));
    return f;
}

inline void write_spline_config(Writer& w, const SplineConfig& c) {
    w.integer("config.basis_size", c.basis_size);
    w.integer("config.degree", c.degree);
    w.integer("config.penalty_order", c.penalty_order);
    if (c.lambda)
        w.scalar("config.lambda", *c.lambda);
    else
        w.text("config.lambda", "auto");
}

inline SplineConfig read_spline_config(const Reader& r) {
    SplineConfig c;
    c.basis_size = static_cast<int>(r.integer("config.basis_size"));
    c.degree = static_cast<int>(r.integer("config.degree"));
    c.penalty_order = static_cast<int>(r.integer("config.penalty_order"));
    if (r.text("config.lambda") != "auto") c.lambda = r.scalar("config.lambda");
    return c;
}

}  // namespace io

inline void save_model(std::ostream& out, const SavedModel& model) {
    io::Writer w(out);
    w.integer("vfvol-model", kModelFileVersion);
    w.text("model_kind", to_string(model.id));
    if (const auto* vf = std::get_if<VfModelFit>(&model.fit)) {
        const VfConfig& c = vf->config;
        w.scalar("config.mse_tol", c.mse_tol);
        w.integer("config.max_iter", c.max_iter);
        w.text("config.update_rule", to_string(c.update_rule));
        w.integer("config.divergence_run", c.divergence_run);
        io::write_spline_config(w, c.spline_cfg);
        io::write_armax(w, vf->armax);
        io::write_gjr(w, vf->gjr);
        io::write_gam(w, vf->gam);
        w.vec("fit.fitted", vf->fitted);
        w.vec("fit.residuals", vf->residuals);
        w.vec("convergence.mse_trace", vf->mse_trace);
        w.integer("convergence.converged", vf->converged ? 1 : 0);
        w.integer("convergence.diverged_increasing", vf->diverged_increasing ? 1 : 0);
        w.integer("convergence.iterations", vf->iterations);
    } else {
        const auto& b = std::get<BenchmarkFit>(model.fit);
        w.text("config.aggregation", to_string(b.aggregation));
        io::write_armax(w, b.armax);
        io::write_gjr(w, b.gjr);
        w.vec("fit.fitted", b.fitted);
        w.vec("fit.residuals", b.residuals);
    }
}

inline SavedModel load_model(std::istream& in) {
    const io::Reader r(in);
    if (!r.has("vfvol-model")) throw std::invalid_argument("not a vfvol model file");
    const auto version = r.integer("vfvol-model");
    if (version != kModelFileVersion)
        throw std::invalid_argument("unsupported model file version " + std::to_string(version));
    SavedModel model;
    model.id = parse_model(r.text("model_kind"));
    if (model.id == ModelId::VfArma || model.id == ModelId::VfGarch) {
        VfModelFit vf;
        vf.kind = model.id == ModelId::VfArma ? ModelKind::VfArma : ModelKind::VfGarch;
        vf.config.model_kind = vf.kind;
        vf.config.mse_tol = r.scalar("config.mse_tol");
        vf.config.max_iter = static_cast<int>(r.integer("config.max_iter"));
        const std::string rule = r.text("config.update_rule");
        if (rule != "partial" && rule != "literal")
            throw std::invalid_argument("model file: unknown update_rule '" + rule + "'");
        vf.config.update_rule = rule == "partial" ? UpdateRule::PartialResidual : UpdateRule::Literal;
        vf.config.divergence_run = static_cast<int>(r.integer("config.divergence_run"));
        vf.config.spline_cfg = io::read_spline_config(r);
        vf.armax = io::read_armax(r);
        vf.config.armax_spec = vf.armax.spec;
        vf.gjr = io::read_gjr(r);
        vf.gam = io::read_gam(r);
        vf.fitted = r.vec("fit.fitted");
        vf.residuals = r.vec("fit.residuals");
        vf.mse_trace = r.vec("convergence.mse_trace");
        vf.converged = r.integer("convergence.converged") != 0;
        vf.diverged_increasing = r.integer("convergence.diverged_increasing") != 0;
        vf.iterations = static_cast<int>(r.integer("convergence.iterations"));
        model.fit = std::move(vf);
    } else {
        BenchmarkFit b;
        b.kind = model.id == ModelId::Garch ? BenchmarkKind::Garch : BenchmarkKind::Gjr;
        const std::string agg = r.text("config.aggregation");
        if (agg == "mean") b.aggregation = Aggregation::Mean;
        else if (agg == "last") b.aggregation = Aggregation::Last;
        else if (agg == "drop") b.aggregation = Aggregation::Drop;
        else throw std::invalid_argument("model file: unknown aggregation '" + agg + "'");
        b.armax = io::read_armax(r);
        b.gjr = io::read_gjr(r);
        b.fitted = r.vec("fit.fitted");
        b.residuals = r.vec("fit.residuals");
        model.fit = std::move(b);
    }
    return model;
}

inline void save_model(const std::string& path, const SavedModel& model) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write model file " + path);
    save_model(out, model);
}

inline SavedModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open model file " + path);
    return load_model(in);
}

}  // namespace vfvol
