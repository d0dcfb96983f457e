/*
   Copyright 2026 The tilted-sim Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

        http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tilted_sim/feature_recovery.hpp"
#include "tilted_sim/polynomial.hpp"
#include "tilted_sim/presets.hpp"
#include "tilted_sim/reward_model.hpp"
#include "tilted_sim/weighted_ridge.hpp"

namespace tilted_sim {

using Json = nlohmann::json;

/// Invalid configuration; the message starts with the offending field path.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& path, const std::string& what)
        : std::runtime_error(path + ": " + what), path_(path) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

/// A preset name or raw monomial coefficients.
struct LinkSpec {
    std::string name;  ///< preset name, or "custom"
    PolynomialLink poly{0.0, 1.0};
};

struct RecoverySection {
    Eigen::Index d = 64;
    Eigen::Index neurons = 8;
    double beta1 = 10.0;
    std::vector<Eigen::Index> dims{32, 64};
    std::vector<double> beta1s{10.0};
    std::optional<double> eta1;
    double s_init = 0.1;
    double c_wk = 0.7;
    double epsilon = 0.1;
    std::uint64_t t_max = 1'000'000;
    InitMode init = InitMode::uniform;
    bool compatible_readout = false;
    bool stop_after_weak = false;
    std::size_t repeats = 5;
};

struct RidgeSection {
    std::vector<std::uint64_t> t2{10'000};
    std::vector<double> beta2{0.3};
    std::vector<WeightRule> schemes{WeightRule::label};
    double c_lambda = 0.1;
    double delta0 = 0.05;
    double c_b = 1.0;
    double radius_slack = 2.0;
    std::optional<double> radius;
    std::size_t shift_samples = 20'000;
    std::size_t shift_replicates = 20;
};

struct PolicySection {
    double beta_star = 0.3;
    std::size_t mc_samples = 1'000'000;
    std::size_t mc_shard = 1 << 16;
    std::size_t t_points = 17;
};

struct AdmissibleSection {
    double eta = 1.0;
    std::vector<double> beta_grid{0.05, 0.1, 0.2, 0.3, 0.5};
    std::optional<std::vector<double>> envelope;
    double envelope_factor = 1.5;
    std::vector<std::uint64_t> calibration_seeds{1000, 1001, 1002};
    std::optional<double> rho_n;  ///< defaults to 1/N + ε
    std::optional<double> alpha0; ///< surrogate exponent; defaults to d_S
};

struct ExponentSection {
    std::size_t i_max = 8;
    std::vector<double> beta1s{1.0, 10.0, 100.0};
};

struct ExperimentConfig {
    std::string experiment = "experiment";
    LinkSpec link;
    LinkSpec activation;
    double tau = 0.0;
    std::vector<std::uint64_t> seeds{0};
    RecoverySection recovery;
    RidgeSection ridge;
    PolicySection policy;
    AdmissibleSection admissible;
    ExponentSection exponents;
};

namespace detail {

class ConfigReader {
public:
    ConfigReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
    }

    std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }
    const Json& raw(const std::string& key) const {
        seen_.insert(key);
        return j_.at(key);
    }
    void mark(const std::string& key) const { seen_.insert(key); }

    double number(const std::string& key, double def) const {
        if (!has(key)) return mark(key), def;
        const auto& v = raw(key);
        if (!v.is_number()) throw ConfigError(at(key), "expected a number");
        return v.get<double>();
    }
    double positive(const std::string& key, double def) const {
        const double v = number(key, def);
        if (!(v > 0.0)) throw ConfigError(at(key), "must be positive");
        return v;
    }
    double unit_open(const std::string& key, double def) const {
        const double v = number(key, def);
        if (!(v > 0.0 && v < 1.0)) throw ConfigError(at(key), "must lie in (0, 1)");
        return v;
    }
    std::uint64_t count(const std::string& key, std::uint64_t def, std::uint64_t min = 1) const {
        if (!has(key)) return mark(key), def;
        return to_count(raw(key), at(key), min);
    }
    bool flag(const std::string& key, bool def) const {
        if (!has(key)) return mark(key), def;
        const auto& v = raw(key);
        if (!v.is_boolean()) throw ConfigError(at(key), "expected true or false");
        return v.get<bool>();
    }
    std::string text(const std::string& key, const std::string& def) const {
        if (!has(key)) return mark(key), def;
        const auto& v = raw(key);
        if (!v.is_string()) throw ConfigError(at(key), "expected a string");
        return v.get<std::string>();
    }
    std::vector<double> numbers(const std::string& key, const std::vector<double>& def, bool positive_only) const {
        if (!has(key)) return mark(key), def;
        const auto& v = raw(key);
        if (!v.is_array() || v.empty()) throw ConfigError(at(key), "expected a nonempty list of numbers");
        std::vector<double> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            const std::string p = at(key) + "[" + std::to_string(i) + "]";
            if (!v[i].is_number()) throw ConfigError(p, "expected a number");
            out.push_back(v[i].get<double>());
            if (positive_only && !(out.back() > 0.0)) throw ConfigError(p, "must be positive");
        }
        return out;
    }
    std::vector<std::uint64_t> counts(const std::string& key, const std::vector<std::uint64_t>& def,
                                      std::uint64_t min) const {
        if (!has(key)) return mark(key), def;
        const auto& v = raw(key);
        if (!v.is_array() || v.empty()) throw ConfigError(at(key), "expected a nonempty list of integers");
        std::vector<std::uint64_t> out;
        for (std::size_t i = 0; i < v.size(); ++i)
            out.push_back(to_count(v[i], at(key) + "[" + std::to_string(i) + "]", min));
        return out;
    }
    ConfigReader section(const std::string& key) const {
        if (!has(key)) {
            mark(key);
            return ConfigReader(empty(), at(key));
        }
        return ConfigReader(raw(key), at(key));
    }

    void reject_unknown() const {
        for (const auto& [k, _] : j_.items())
            if (!seen_.count(k)) throw ConfigError(at(k), "unknown field");
    }

private:
    static const Json& empty() {
        static const Json e = Json::object();
        return e;
    }
    static std::uint64_t to_count(const Json& v, const std::string& path, std::uint64_t min) {
        if (v.is_number_unsigned()) {
            const auto x = v.get<std::uint64_t>();
            if (x >= min) return x;
        } else if (v.is_number_integer()) {
            const auto x = v.get<std::int64_t>();
            if (x >= 0 && static_cast<std::uint64_t>(x) >= min) return static_cast<std::uint64_t>(x);
        } else if (v.is_number_float()) {
            const double x = v.get<double>();
            if (x == std::floor(x) && x >= static_cast<double>(min) && x < 1.8e19) return static_cast<std::uint64_t>(x);
        }
        throw ConfigError(path, "expected an integer >= " + std::to_string(min));
    }

    const Json& j_;
    std::string path_;
    mutable std::set<std::string> seen_;
};

inline LinkSpec parse_link(const Json& v, const std::string& path, LinkRole role) {
    LinkSpec s;
    if (v.is_string()) {
        s.name = v.get<std::string>();
        if (!is_preset(s.name)) {
            std::string names;
            for (auto n : kPresetNames) names += (names.empty() ? "" : ", ") + std::string(n);
            throw ConfigError(path, "unknown preset '" + s.name + "' (available: " + names + ")");
        }
        s.poly = link_preset(s.name);
    } else if (v.is_array() && !v.empty()) {
        std::vector<double> c;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number()) throw ConfigError(path + "[" + std::to_string(i) + "]", "expected a number");
            c.push_back(v[i].get<double>());
        }
        s.name = "custom";
        s.poly = PolynomialLink(std::move(c));
    } else {
        throw ConfigError(path, "expected a preset name or a list of monomial coefficients");
    }
    if (auto ok = validate_link(s.poly, role); !ok) throw ConfigError(path, ok.reason);
    return s;
}

inline Json link_to_json(const LinkSpec& s) {
    if (s.name != "custom") return s.name;
    return s.poly.coeffs();
}

template <class T>
Json optional_json(const std::optional<T>& v) {
    return v ? Json(*v) : Json(nullptr);
}

}  // namespace detail

/// Parses and validates a configuration document. Unknown fields are errors.
inline ExperimentConfig parse_config(const Json& root) {
    detail::ConfigReader r(root, "");
    ExperimentConfig c;
    c.experiment = r.text("experiment", c.experiment);
    if (c.experiment.empty()) throw ConfigError("experiment", "must be nonempty");
    if (!r.has("link")) throw ConfigError("link", "required field missing");
    c.link = detail::parse_link(r.raw("link"), "link", LinkRole::target);
    if (r.has("activation")) {
        c.activation = detail::parse_link(r.raw("activation"), "activation", LinkRole::activation);
    } else {
        r.mark("activation");
        const std::string name = c.link.name == "custom" ? "quad-down" : std::string(default_activation_name(c.link.name));
        c.activation = {name, link_preset(name)};
    }
    c.tau = r.number("tau", c.tau);
    if (!(c.tau >= 0.0)) throw ConfigError("tau", "must be nonnegative");
    c.seeds = r.counts("seeds", c.seeds, 0);
    {
        std::set<std::uint64_t> uniq(c.seeds.begin(), c.seeds.end());
        if (uniq.size() != c.seeds.size()) throw ConfigError("seeds", "seeds must be distinct");
    }

    {
        const auto s = r.section("recovery");
        auto& o = c.recovery;
        o.d = static_cast<Eigen::Index>(s.count("d", static_cast<std::uint64_t>(o.d), 2));
        o.neurons = static_cast<Eigen::Index>(s.count("neurons", static_cast<std::uint64_t>(o.neurons), 1));
        o.beta1 = s.positive("beta1", o.beta1);
        std::vector<std::uint64_t> dims;
        for (auto v : o.dims) dims.push_back(static_cast<std::uint64_t>(v));
        o.dims.clear();
        for (auto v : s.counts("dims", dims, 2)) o.dims.push_back(static_cast<Eigen::Index>(v));
        o.beta1s = s.numbers("beta1s", o.beta1s, true);
        if (s.has("eta1")) {
            o.eta1 = s.number("eta1", 0.0);
            if (!(*o.eta1 >= 0.0)) throw ConfigError(s.at("eta1"), "must be nonnegative");
        } else {
            s.mark("eta1");
        }
        o.s_init = s.positive("s_init", o.s_init);
        o.c_wk = s.unit_open("c_wk", o.c_wk);
        o.epsilon = s.unit_open("epsilon", o.epsilon);
        o.t_max = s.count("t_max", o.t_max, 1);
        const std::string init = s.text("init", o.init == InitMode::uniform ? "uniform" : "exact_overlap");
        if (init == "uniform") o.init = InitMode::uniform;
        else if (init == "exact_overlap") o.init = InitMode::exact_overlap;
        else throw ConfigError(s.at("init"), "expected 'uniform' or 'exact_overlap'");
        o.compatible_readout = s.flag("compatible_readout", o.compatible_readout);
        o.stop_after_weak = s.flag("stop_after_weak", o.stop_after_weak);
        o.repeats = s.count("repeats", o.repeats, 1);
        s.reject_unknown();
    }
    {
        const auto s = r.section("ridge");
        auto& o = c.ridge;
        o.t2 = s.counts("t2", o.t2, 2);
        o.beta2 = s.numbers("beta2", o.beta2, true);
        for (std::size_t i = 0; i < o.beta2.size(); ++i)
            if (o.beta2[i] > 1.0) throw ConfigError(s.at("beta2") + "[" + std::to_string(i) + "]", "must lie in (0, 1]");
        if (s.has("schemes")) {
            const auto& v = s.raw("schemes");
            if (!v.is_array() || v.empty()) throw ConfigError(s.at("schemes"), "expected a nonempty list");
            o.schemes.clear();
            for (std::size_t i = 0; i < v.size(); ++i) {
                const std::string p = s.at("schemes") + "[" + std::to_string(i) + "]";
                if (!v[i].is_string()) throw ConfigError(p, "expected 'label', 'surrogate' or 'uniform'");
                try {
                    o.schemes.push_back(parse_weight_rule(v[i].get<std::string>()));
                } catch (const std::invalid_argument& e) {
                    throw ConfigError(p, e.what());
                }
            }
        } else {
            s.mark("schemes");
        }
        o.c_lambda = s.positive("c_lambda", o.c_lambda);
        o.delta0 = s.unit_open("delta0", o.delta0);
        o.c_b = s.positive("c_b", o.c_b);
        o.radius_slack = s.positive("radius_slack", o.radius_slack);
        if (s.has("radius")) o.radius = s.positive("radius", 1.0);
        else s.mark("radius");
        o.shift_samples = s.count("shift_samples", o.shift_samples, 10);
        o.shift_replicates = s.count("shift_replicates", o.shift_replicates, 2);
        s.reject_unknown();
    }
    {
        const auto s = r.section("policy");
        auto& o = c.policy;
        o.beta_star = s.positive("beta_star", o.beta_star);
        o.mc_samples = s.count("mc_samples", o.mc_samples, 100);
        o.mc_shard = s.count("mc_shard", o.mc_shard, 1);
        o.t_points = s.count("t_points", o.t_points, 2);
        s.reject_unknown();
    }
    {
        const auto s = r.section("admissible");
        auto& o = c.admissible;
        o.eta = s.positive("eta", o.eta);
        o.beta_grid = s.numbers("beta_grid", o.beta_grid, true);
        if (s.has("envelope")) {
            o.envelope = s.numbers("envelope", {}, true);
            if (o.envelope->size() != o.beta_grid.size())
                throw ConfigError(s.at("envelope"), "must have one entry per beta_grid point");
        } else {
            s.mark("envelope");
        }
        o.envelope_factor = s.positive("envelope_factor", o.envelope_factor);
        o.calibration_seeds = s.counts("calibration_seeds", o.calibration_seeds, 0);
        if (s.has("rho_n")) o.rho_n = s.positive("rho_n", 1.0);
        else s.mark("rho_n");
        if (s.has("alpha0")) o.alpha0 = s.positive("alpha0", 1.0);
        else s.mark("alpha0");
        s.reject_unknown();
    }
    {
        const auto s = r.section("exponents");
        auto& o = c.exponents;
        o.i_max = s.count("i_max", o.i_max, 1);
        o.beta1s = s.numbers("beta1s", o.beta1s, true);
        s.reject_unknown();
    }
    r.reject_unknown();
    return c;
}

/// Fully expanded configuration, defaults included; keys come out sorted.
inline Json to_json(const ExperimentConfig& c) {
    using detail::optional_json;
    Json j;
    j["experiment"] = c.experiment;
    j["link"] = detail::link_to_json(c.link);
    j["activation"] = detail::link_to_json(c.activation);
    j["tau"] = c.tau;
    j["seeds"] = c.seeds;
    const auto& r = c.recovery;
    j["recovery"] = {{"d", r.d},
                     {"neurons", r.neurons},
                     {"beta1", r.beta1},
                     {"dims", r.dims},
                     {"beta1s", r.beta1s},
                     {"eta1", optional_json(r.eta1)},
                     {"s_init", r.s_init},
                     {"c_wk", r.c_wk},
                     {"epsilon", r.epsilon},
                     {"t_max", r.t_max},
                     {"init", r.init == InitMode::uniform ? "uniform" : "exact_overlap"},
                     {"compatible_readout", r.compatible_readout},
                     {"stop_after_weak", r.stop_after_weak},
                     {"repeats", r.repeats}};
    const auto& g = c.ridge;
    Json schemes = Json::array();
    for (auto s : g.schemes) schemes.push_back(std::string(to_string(s)));
    j["ridge"] = {{"t2", g.t2},
                  {"beta2", g.beta2},
                  {"schemes", schemes},
                  {"c_lambda", g.c_lambda},
                  {"delta0", g.delta0},
                  {"c_b", g.c_b},
                  {"radius_slack", g.radius_slack},
                  {"radius", optional_json(g.radius)},
                  {"shift_samples", g.shift_samples},
                  {"shift_replicates", g.shift_replicates}};
    const auto& p = c.policy;
    j["policy"] = {{"beta_star", p.beta_star},
                   {"mc_samples", p.mc_samples},
                   {"mc_shard", p.mc_shard},
                   {"t_points", p.t_points}};
    const auto& a = c.admissible;
    j["admissible"] = {{"eta", a.eta},
                       {"beta_grid", a.beta_grid},
                       {"envelope", optional_json(a.envelope)},
                       {"envelope_factor", a.envelope_factor},
                       {"calibration_seeds", a.calibration_seeds},
                       {"rho_n", optional_json(a.rho_n)},
                       {"alpha0", optional_json(a.alpha0)}};
    j["exponents"] = {{"i_max", c.exponents.i_max}, {"beta1s", c.exponents.beta1s}};
    return j;
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

/// Hash of the canonical serialization: sorted keys, no whitespace, defaults
/// expanded. Key order and formatting in the source file do not matter.
inline std::string config_hash(const ExperimentConfig& c) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(to_json(c).dump())));
    return buf;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path, "cannot open configuration file");
    Json j;
    try {
        j = Json::parse(in, nullptr, true, true);
    } catch (const Json::parse_error& e) {
        throw ConfigError(path, std::string("parse error: ") + e.what());
    }
    return parse_config(j);
}

/// Shifts every seed by k (independent replications of a config).
inline void apply_seed_offset(ExperimentConfig& c, std::uint64_t k) {
    for (auto& s : c.seeds) s += k;
    for (auto& s : c.admissible.calibration_seeds) s += k;
}

}  // namespace tilted_sim
