#pragma once

#include "vfvol/benchmarks.hpp"
#include "vfvol/dataset.hpp"
#include "vfvol/vfmodels.hpp"

#include <fstream>
#include <istream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace vfvol {

/// Settings shared by the VF estimators and the benchmarks.
struct FitSettings {
    VfConfig vf{};
    Aggregation aggregation = Aggregation::Mean;
};

using KeyValues = std::map<std::string, std::string>;

/// Flat `key = value` text; `#` starts a comment.
inline KeyValues parse_key_values(std::istream& in) {
    KeyValues kv;
    std::string line;
    std::size_t no = 0;
    while (std::getline(in, line)) {
        ++no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto body = detail::trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string_view::npos)
            throw std::invalid_argument("config line " + std::to_string(no) + ": expected key=value");
        const std::string key(detail::trim(body.substr(0, eq)));
        const std::string value(detail::trim(body.substr(eq + 1)));
        if (key.empty() || value.empty())
            throw std::invalid_argument("config line " + std::to_string(no) + ": empty key or value");
        kv[key] = value;
    }
    return kv;
}

inline KeyValues read_key_values(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file " + path);
    return parse_key_values(in);
}

inline const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys{
        "p",          "q",           "exog_lags",     "intercept",  "basis_size", "degree",
        "penalty_order", "lambda",   "mse_tol",       "max_iter",   "update_rule", "divergence_run",
        "aggregation"};
    return keys;
}

namespace detail {

inline int parse_int_value(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const int x = std::stoi(v, &pos);
        if (pos == v.size()) return x;
    } catch (const std::exception&) {
    }
    throw std::invalid_argument("config key '" + key + "': '" + v + "' is not an integer");
}

inline double parse_real_value(const std::string& key, const std::string& v) {
    try {
        return parse_double(v, 0);
    } catch (const std::exception&) {
        throw std::invalid_argument("config key '" + key + "': '" + v + "' is not a number");
    }
}

}  // namespace detail

/// Applies known keys to @p s; unknown keys are rejected with the list of valid ones.
inline void apply_config(FitSettings& s, const KeyValues& kv) {
    for (const auto& [key, value] : kv) {
        auto& vf = s.vf;
        if (key == "p") vf.armax_spec.p = detail::parse_int_value(key, value);
        else if (key == "q") vf.armax_spec.q = detail::parse_int_value(key, value);
        else if (key == "exog_lags") vf.armax_spec.exog_lags = detail::parse_int_value(key, value);
        else if (key == "intercept") {
            if (value != "true" && value != "false")
                throw std::invalid_argument("config key 'intercept' must be true or false");
            vf.armax_spec.include_intercept = value == "true";
        } else if (key == "basis_size") vf.spline_cfg.basis_size = detail::parse_int_value(key, value);
        else if (key == "degree") vf.spline_cfg.degree = detail::parse_int_value(key, value);
        else if (key == "penalty_order") vf.spline_cfg.penalty_order = detail::parse_int_value(key, value);
        else if (key == "lambda") {
            if (value == "auto") vf.spline_cfg.lambda.reset();
            else vf.spline_cfg.lambda = detail::parse_real_value(key, value);
        } else if (key == "mse_tol") vf.mse_tol = detail::parse_real_value(key, value);
        else if (key == "max_iter") vf.max_iter = detail::parse_int_value(key, value);
        else if (key == "divergence_run") vf.divergence_run = detail::parse_int_value(key, value);
        else if (key == "update_rule") {
            if (value == "partial") vf.update_rule = UpdateRule::PartialResidual;
            else if (value == "literal") vf.update_rule = UpdateRule::Literal;
            else throw std::invalid_argument("config key 'update_rule' must be partial or literal");
        } else if (key == "aggregation") {
            if (value == "mean") s.aggregation = Aggregation::Mean;
            else if (value == "last") s.aggregation = Aggregation::Last;
            else if (value == "drop") s.aggregation = Aggregation::Drop;
            else throw std::invalid_argument("config key 'aggregation' must be mean, last or drop");
        } else {
            std::string valid;
            for (const auto& k : config_keys()) valid += (valid.empty() ? "" : ", ") + k;
            throw std::invalid_argument("unknown config key '" + key + "' (valid: " + valid + ")");
        }
    }
}

inline void write_config(std::ostream& out, const FitSettings& s) {
    const auto& vf = s.vf;
    out << "p=" << vf.armax_spec.p << "\nq=" << vf.armax_spec.q << "\nexog_lags=" << vf.armax_spec.exog_lags
        << "\nintercept=" << (vf.armax_spec.include_intercept ? "true" : "false")
        << "\nbasis_size=" << vf.spline_cfg.basis_size << "\ndegree=" << vf.spline_cfg.degree
        << "\npenalty_order=" << vf.spline_cfg.penalty_order << "\nlambda="
        << (vf.spline_cfg.lambda ? detail::format_double(*vf.spline_cfg.lambda) : std::string("auto"))
        << "\nmse_tol=" << detail::format_double(vf.mse_tol) << "\nmax_iter=" << vf.max_iter
        << "\nupdate_rule=" << to_string(vf.update_rule) << "\ndivergence_run=" << vf.divergence_run
        << "\naggregation=" << to_string(s.aggregation) << '\n';
}

}  // namespace vfvol
