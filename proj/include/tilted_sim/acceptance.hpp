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

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "tilted_sim/coverage.hpp"
#include "tilted_sim/feature_recovery.hpp"
#include "tilted_sim/hermite.hpp"
#include "tilted_sim/pipeline.hpp"
#include "tilted_sim/presets.hpp"
#include "tilted_sim/quadrature.hpp"
#include "tilted_sim/stats.hpp"
#include "tilted_sim/tilted_policy.hpp"

namespace tilted_sim {

struct CheckResult {
    int id = 0;
    std::string name;
    bool passed = false;
    std::string summary;
    double seconds = 0.0;
    double limit_seconds = 0.0;
};

struct AcceptanceOptions {
    unsigned workers = 1;
    std::set<int> only;  ///< empty runs every check
};

namespace acceptance {

/// printf into a std::string.
template <class... Args>
std::string fmt(const char* f, Args... args) {
    const int n = std::snprintf(nullptr, 0, f, args...);
    std::string s(static_cast<std::size_t>(std::max(n, 0)) + 1, '\0');
    std::snprintf(s.data(), s.size(), f, args...);
    s.resize(static_cast<std::size_t>(std::max(n, 0)));
    return s;
}

struct Outcome {
    bool passed = false;
    std::string summary;
};

inline Outcome hermite_exactness(const AcceptanceOptions&) {
    // Integer path: every inner product exact.
    ExactInteger fact(1);
    std::size_t exact_bad = 0;
    for (std::size_t i = 0; i <= 12; ++i) {
        if (i > 0) fact *= static_cast<long long>(i);
        const auto hi = hermite_polynomial<ExactInteger>(i);
        for (std::size_t j = 0; j <= 12; ++j) {
            const ExactInteger inner = gaussian_expectation(hi * hermite_polynomial<ExactInteger>(j));
            if (inner != (i == j ? fact : ExactInteger(0))) ++exact_bad;
        }
    }
    // Quadrature path, normalized by sqrt(i! j!).
    const auto rule = gauss_hermite(64);
    double worst = 0.0, fi = 1.0;
    for (std::size_t i = 0; i <= 12; ++i) {
        if (i > 0) fi *= static_cast<double>(i);
        const auto hi = hermite_polynomial<double>(i);
        double fj = 1.0;
        for (std::size_t j = 0; j <= 12; ++j) {
            if (j > 0) fj *= static_cast<double>(j);
            const auto hj = hermite_polynomial<double>(j);
            double acc = 0.0;
            for (std::size_t k = 0; k < rule->size(); ++k)
                acc += rule->weights[k] * hi(rule->nodes[k]) * hj(rule->nodes[k]);
            const double target = i == j ? fi : 0.0;
            worst = std::max(worst, std::abs(acc - target) / std::sqrt(fi * fj));
        }
    }
    return {exact_bad == 0 && worst <= 1e-10,
            fmt("exact mismatches %zu/169, quadrature max normalized error %.2e", exact_bad, worst)};
}

inline Outcome teacher_signal_rates(const AcceptanceOptions&) {
    bool ok = true;
    std::ostringstream s;
    for (auto name : {"quad-down", "neg-he4", "double-well"}) {
        const auto link = link_preset(name);
        const auto ex = generative_exponent(link);
        double worst_low = 0.0;
        for (double b : {1.0, 10.0, 100.0})
            for (int i = 1; i < ex.ge; ++i)
                worst_low = std::max(worst_low, std::abs(teacher_signal(static_cast<std::size_t>(i), b, link, 0.0)));
        std::vector<double> xs, ys;
        for (double b : stats::log_space(10.0, 1000.0, 9)) {
            xs.push_back(b);
            ys.push_back(std::abs(teacher_signal(static_cast<std::size_t>(ex.ge), b, link, 0.0)));
        }
        const double slope = stats::log_log_slope(xs, ys);
        const double want = 1.0 - ex.i_star;
        const bool low_ok = worst_low < 1e-8, slope_ok = std::abs(slope - want) <= 0.05;
        ok = ok && low_ok && slope_ok;
        s << name << ": max|U_i<p| " << fmt("%.1e", worst_low) << ", slope " << fmt("%.3f", slope) << " vs "
          << fmt("%.0f", want) << (slope_ok ? "" : " (off)") << "; ";
    }
    const double limit = teacher_signal(2, 1000.0, link_preset("neg-he4"), 0.0) * 1000.0;
    const bool limit_ok = std::abs(limit - 192.0) <= 0.01 * 192.0;
    ok = ok && limit_ok;
    s << "neg-he4 U_2*beta at 1e3 = " << fmt("%.2f", limit) << " vs 192" << (limit_ok ? "" : " (off)");
    return {ok, s.str()};
}

inline RecoveryConfig scaling_base(unsigned workers) {
    RecoveryConfig c;
    c.neurons = 4;
    c.c_wk = 0.7;
    c.s_init = 0.2;
    c.init = InitMode::exact_overlap;
    c.compatible_readout = true;
    c.stop_after_weak = true;
    c.workers = workers;
    return c;
}

inline Outcome recovery_scaling_in_d(const AcceptanceOptions& o) {
    RecoveryConfig c = scaling_base(o.workers);
    c.beta1 = 10.0;
    c.t_max = 5'000'000;
    c.seed = 100;
    const auto link = link_preset("quad-down");
    const auto tab = scaling_study(link, link_preset(default_activation_name("quad-down")), {64, 128, 256, 512}, {10.0},
                                   20, c);
    std::ostringstream s;
    s << "median T_wk:";
    bool censored = false;
    for (const auto& cell : tab.cells) {
        s << " d=" << cell.d << ":" << fmt("%.0f", cell.median_t_weak);
        censored = censored || cell.censored;
    }
    if (tab.slope_in_d.empty()) return {false, s.str() + "; no slope (censored cells)"};
    const double slope = tab.slope_in_d.front().second;
    s << "; slope " << fmt("%.3f", slope) << " (want [0.7, 1.3])";
    return {!censored && slope >= 0.7 && slope <= 1.3, s.str()};
}

inline Outcome recovery_scaling_in_beta(const AcceptanceOptions& o) {
    RecoveryConfig c = scaling_base(o.workers);
    c.d = 128;
    c.t_max = 1'000'000;
    c.seed = 100;
    const auto tab = scaling_study(link_preset("neg-he4"), link_preset(default_activation_name("neg-he4")), {128},
                                   {8.0, 16.0, 32.0, 64.0}, 10, c);
    std::ostringstream s;
    s << "median T_wk:";
    for (const auto& cell : tab.cells) s << " b1=" << cell.beta1 << ":" << fmt("%.0f", cell.median_t_weak);
    if (tab.slope_in_beta.empty()) return {false, s.str() + "; no slope (censored cells)"};
    const double slope = tab.slope_in_beta.front().second;
    s << "; slope " << fmt("%.3f", slope) << " (want [1.6, 2.4])";
    return {slope >= 1.6 && slope <= 2.4, s.str()};
}

inline Outcome constant_fraction(const AcceptanceOptions& o) {
    std::ostringstream s;
    bool ok = true;
    for (auto name : kPresetNames) {
        const auto link = link_preset(name);
        const auto act = link_preset(default_activation_name(name));
        std::vector<double> fr(10);
        parallel_for(10, o.workers, [&](std::size_t k) {
            RecoveryConfig c;
            c.d = 128;
            c.neurons = 8;
            c.beta1 = 10.0;
            c.c_wk = 0.7;
            c.s_init = 0.2;
            c.init = InitMode::exact_overlap;
            c.stop_after_weak = true;
            c.t_max = 400'000;
            c.seed = 200 + k;
            fr[k] = run_recovery(link, act, c).recovered_fraction;
        });
        const double lo = *std::min_element(fr.begin(), fr.end());
        ok = ok && lo >= 0.25;
        s << name << " min " << fmt("%.3f", lo) << " mean " << fmt("%.3f", stats::mean(fr)) << "; ";
    }
    return {ok, s.str() + "want every seed >= 0.25"};
}

inline Outcome variance_law(const AcceptanceOptions&) {
    const double beta = 0.01;
    bool ok = true;
    std::ostringstream s;
    for (auto name : {"quad-down", "double-well"}) {
        const auto link = link_preset(name);
        const auto mx = analyze_maxima(link);
        const double r = tilted_1d_moments(link, beta, mx).variance * 2.0 * mx.p_max / (beta * beta);
        ok = ok && r >= 0.95 && r <= 1.05;
        s << name << " " << fmt("%.4f", r) << "; ";
    }
    return {ok, s.str() + "want [0.95, 1.05]"};
}

inline Outcome laplace_law(const AcceptanceOptions&) {
    const double beta = 0.005;
    bool ok = true;
    std::ostringstream s;
    for (auto name : kPresetNames) {
        const auto link = link_preset(name);
        const auto mx = analyze_maxima(link);
        const auto m = tilted_1d_moments(link, beta, mx);
        const double scaled = std::exp(m.log_z - mx.b_star / beta - mx.alpha() * std::log(beta));
        const double rel = scaled / mx.laplace_constant() - 1.0;
        ok = ok && std::abs(rel) <= 0.02;
        s << name << " " << fmt("%+.4f", rel) << "; ";
    }
    return {ok, s.str() + "relative error, want |.| <= 0.02"};
}

inline Outcome noise_closed_forms(const AcceptanceOptions&) {
    const auto integral = [](double tau, double s, auto f) {
        std::vector<double> br;
        for (int k = 0; k <= 64; ++k) br.push_back(-tau + 2.0 * tau * k / 64.0);
        return integrate_panels([&](double z) { return f(z) * std::exp(z / s); }, br, 30) / (2.0 * tau);
    };
    double worst = 0.0;
    for (double tau : {0.1, 1.0, 3.0})
        for (double s : {0.1, 1.0, 3.0}) {
            const auto n = noise_tilt_moments(tau, s);
            const double z = integral(tau, s, [](double) { return 1.0; });
            const double m = integral(tau, s, [](double x) { return x; }) / z;
            const double v = integral(tau, s, [m](double x) { return (x - m) * (x - m); }) / z;
            worst = std::max({worst, std::abs(n.z - z) / z, std::abs(n.mean - m) / tau,
                              std::abs(n.variance - v) / (tau * tau)});
        }
    return {worst <= 1e-10, fmt("max scaled error %.2e over 9 (tau, s) pairs, want <= 1e-10", worst)};
}

inline Outcome telescoping_identity(const AcceptanceOptions& o) {
    const auto link = link_preset("quad-down");
    McConfig mc;
    mc.samples = 100'000;
    mc.workers = o.workers;
    bool ok = true;
    double worst = 0.0;
    std::size_t cases = 0;
    for (auto [bs, b2] : {std::pair{0.1, 0.3}, {0.3, 0.1}, {0.2, 1.0}, {0.05, 0.5}}) {
        auto rewards = oracle_rewards(Eigen::VectorXd::Unit(2, 0), link);
        rewards.r_hat = [](const Eigen::VectorXd& z) { return -z(0) * z(0) + 0.1 * z(1); };
        const auto r = value_gap_report(link, bs, b2, rewards, 4.0, mc);
        ok = ok && r.total == r.t_temp + r.t_cut + r.t_learn;
        worst = std::max(worst, r.identity_discrepancy);
        ++cases;
    }
    ok = ok && worst <= 1e-6;
    return {ok, fmt("%zu temperature pairs: terms sum exactly, max |T_temp - variance integral| %.2e", cases, worst)};
}

/// Stage settings shared by the end-to-end checks.
inline PipelineSettings small_pipeline(unsigned workers) {
    PipelineSettings s;
    s.link = link_preset("quad-down");
    s.activation = link_preset("quad-down");
    s.recovery.d = 32;
    s.recovery.neurons = 8;
    s.recovery.beta1 = 10.0;
    s.recovery.s_init = 0.1;
    s.recovery.c_wk = 0.7;
    s.recovery.epsilon = 0.01;
    s.recovery.t_max = 2'000'000;
    s.recovery.init = InitMode::exact_overlap;
    s.recovery.compatible_readout = true;
    s.c_lambda = 0.1;
    s.mc.samples = 200'000;
    s.mc.workers = workers;
    return s;
}

inline Outcome bridge_inequality(const AcceptanceOptions& o) {
    auto s = small_pipeline(o.workers);
    // With heavier shrinkage the label-weighted fit at beta2 = 0.2 is flat enough
    // that dπ_t/dν peaks on the boundary of B_R and reference sampling collapses.
    s.c_lambda = 0.01;
    s.radius = 3.0;
    std::size_t instances = 0, violations = 0;
    double worst_ratio = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto first = first_stage(s, seed);
        for (auto rule : {WeightRule::label, WeightRule::surrogate})
            for (double b2 : {0.2, 0.5}) {
                const auto st = second_stage(s, first, rule, b2, 10'000, seed);
                const auto vg = pipeline_value_gap(s, st, b2, seed);
                const auto cov = pipeline_coverage(s, st, seed);
                const double m_r = sup_abs_link(s.link, st.trunc.radius);
                const double bound = bridge_bound(b2, m_r, cov);
                const double rel = std::hypot(cov.se / cov.d_value,
                                              cov.shifted_norm > 0.0 ? cov.shifted_norm_se / cov.shifted_norm : 0.0);
                const double se = std::hypot(vg.t_learn_se, bound * rel);
                if (std::abs(vg.t_learn) > bound + 3.0 * se) ++violations;
                worst_ratio = std::max(worst_ratio, std::abs(vg.t_learn) / bound);
                ++instances;
            }
    }
    return {violations == 0 && instances == 20,
            fmt("%zu instances, %zu violations, max |T_learn|/bound %.3g", instances, violations, worst_ratio)};
}

inline Outcome label_shift(const AcceptanceOptions& o) {
    bool ok = true;
    std::ostringstream s;
    for (double b2 : {0.5, 1.0}) {
        const auto est = fit_label_shift(link_preset("quad-down"), 1.0, b2, 20'000, 20, 11, o.workers);
        const double m = noise_tilt_moments(1.0, b2).mean;
        const double z = std::abs(est.offset - m) / est.offset_se;
        ok = ok && z <= 3.0;
        s << "beta2=" << b2 << ": offset " << fmt("%.4f", est.offset) << " vs " << fmt("%.4f", m) << " ("
          << fmt("%.2f", z) << " SE); ";
    }
    return {ok, s.str() + "want <= 3 SE"};
}

inline Outcome surrogate_slope(const AcceptanceOptions& o) {
    bool ok = true;
    std::ostringstream s;
    double worst = -1e300;
    std::size_t instances = 0;
    for (Eigen::Index ds : {2, 3}) {
        RandomStream rng(31 + static_cast<std::uint64_t>(ds), streams::init_directions);
        for (int inst = 0; inst < 3; ++inst) {
            SubspaceNetwork a0;
            a0.activation = link_preset("quad-down");
            const Eigen::Index n = 6;
            a0.w.resize(n, ds);
            a0.bias.resize(n);
            a0.coef.resize(n);
            for (Eigen::Index j = 0; j < n; ++j) {
                Eigen::VectorXd v(ds);
                for (Eigen::Index k = 0; k < ds; ++k) v(k) = rng.normal();
                a0.w.row(j) = (v / v.norm()).transpose();
                a0.bias(j) = rng.uniform(-1.0, 1.0);
                // the third instance has one negative readout
                a0.coef(j) = (inst == 2 && j == 0 ? -0.5 : 1.0) / static_cast<double>(n);
            }
            const double radius = 2.0 * std::sqrt(static_cast<double>(ds));
            std::vector<double> xs, ys;
            for (double b : {0.02, 0.05, 0.1, 0.2, 0.5}) {
                McConfig mc;
                mc.samples = 200'000;
                mc.seed = static_cast<std::uint64_t>(inst);
                mc.workers = o.workers;
                const auto c = surrogate_constant(a0, b, radius, mc);
                xs.push_back(std::log(1.0 / b));
                ys.push_back(c.log_constant);
            }
            const double slope = stats::least_squares_line(xs, ys).slope;
            worst = std::max(worst, slope - static_cast<double>(ds));
            ok = ok && slope <= static_cast<double>(ds) + 0.2;
            s << "dS=" << ds << " slope " << fmt("%.2f", slope) << "; ";
            ++instances;
        }
    }
    return {ok, s.str() + fmt("want slope <= d_S + 0.2 (max excess %.2f)", worst)};
}

inline Outcome admissible_monotone(const AcceptanceOptions&) {
    std::size_t grids = 0, failures = 0;
    const std::vector<std::vector<double>> grids_beta{{0.05, 0.1, 0.2, 0.3, 0.5}, {0.02, 0.04, 0.08, 0.16},
                                                      {0.1, 0.15, 0.2, 0.25, 0.3, 0.35}};
    const auto superset = [](const AdmissibleSet& small, const AdmissibleSet& big) {
        for (std::size_t k = 0; k < small.admissible.size(); ++k)
            if (small.admissible[k] && !big.admissible[k]) return false;
        return true;
    };
    for (const auto& grid : grids_beta)
        for (auto scheme : {WeightRule::label, WeightRule::surrogate})
            for (double eta : {0.1, 1.0, 10.0, 100.0})
                for (double rho : {0.01, 0.1, 0.5})
                    for (double t2 : {1e3, 1e4, 1e5}) {
                        std::vector<double> env;
                        for (std::size_t k = 0; k < grid.size(); ++k) env.push_back(1.0 + 0.5 * k);
                        AdmissibleRates r;
                        r.rho_n = rho;
                        r.t2 = t2;
                        r.alpha = scheme == WeightRule::label ? 0.5 : 2.0;
                        GammaParams g;
                        g.beta_star = grid.front();
                        g.beta_bar = grid[grid.size() * 2 / 3];
                        const auto base = admissible_set(scheme, eta, env, r, g, grid);
                        AdmissibleRates more = r;
                        more.t2 = 4.0 * t2;
                        AdmissibleRates sharper = r;
                        sharper.rho_n = 0.5 * rho;
                        if (!superset(base, admissible_set(scheme, eta, env, more, g, grid))) ++failures;
                        if (!superset(base, admissible_set(scheme, eta, env, sharper, g, grid))) ++failures;
                        grids += 2;
                    }
    return {failures == 0, fmt("%zu comparisons, %zu non-superset masks", grids, failures)};
}

inline Outcome end_to_end_trend(const AcceptanceOptions& o) {
    const auto s = small_pipeline(o.workers);
    const std::vector<std::uint64_t> t2s{1'000, 10'000, 100'000};
    std::vector<std::vector<double>> gaps(t2s.size());
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto first = first_stage(s, seed);
        for (std::size_t k = 0; k < t2s.size(); ++k) {
            const auto st = second_stage(s, first, WeightRule::label, 0.3, t2s[k], seed);
            gaps[k].push_back(std::abs(pipeline_value_gap(s, st, 0.3, seed).total));
        }
    }
    std::vector<double> med;
    std::vector<stats::Interval> ci;
    std::ostringstream out;
    out << "median |R|:";
    for (std::size_t k = 0; k < t2s.size(); ++k) {
        med.push_back(stats::median(gaps[k]));
        ci.push_back(stats::bootstrap_median_ci(gaps[k], 5));
        out << " T2=" << t2s[k] << ":" << fmt("%.4f", med.back()) << " [" << fmt("%.4f", ci.back().lo) << ","
            << fmt("%.4f", ci.back().hi) << "]";
    }
    std::size_t overlapping = 0, hard = 0;
    for (std::size_t k = 0; k + 1 < med.size(); ++k) {
        if (med[k + 1] <= med[k]) continue;
        if (ci[k + 1].lo <= ci[k].hi) ++overlapping;
        else ++hard;
    }
    out << fmt("; inversions %zu (CI-overlapping %zu)", overlapping + hard, overlapping);
    return {hard == 0 && overlapping <= 1, out.str()};
}

struct Criterion {
    int id;
    const char* name;
    double limit_seconds;
    Outcome (*run)(const AcceptanceOptions&);
};

inline const std::vector<Criterion>& criteria() {
    static const std::vector<Criterion> list{
        {1, "hermite-exactness", 1.0, hermite_exactness},
        {2, "teacher-signal-vanishing-and-rate", 60.0, teacher_signal_rates},
        {3, "recovery-scaling-in-d", 1800.0, recovery_scaling_in_d},
        {4, "recovery-scaling-in-beta1", 1800.0, recovery_scaling_in_beta},
        {5, "constant-fraction-recovery", 600.0, constant_fraction},
        {6, "low-temperature-variance-law", 1.0, variance_law},
        {7, "laplace-normalizer-law", 1.0, laplace_law},
        {8, "noise-closed-forms", 1.0, noise_closed_forms},
        {9, "telescoping-and-variance-identity", 10.0, telescoping_identity},
        {10, "bridge-inequality", 1200.0, bridge_inequality},
        {11, "label-shift-offset", 300.0, label_shift},
        {12, "surrogate-constant-slope", 300.0, surrogate_slope},
        {13, "admissible-set-monotonicity", 1.0, admissible_monotone},
        {14, "end-to-end-value-gap-trend", 1800.0, end_to_end_trend},
    };
    return list;
}

}  // namespace acceptance

/// Runs the selected checks in order. A check that throws or exceeds its
/// runtime budget fails. `on_result` sees each result as soon as it is ready.
inline std::vector<CheckResult> run_acceptance(const AcceptanceOptions& opt,
                                               const std::function<void(const CheckResult&)>& on_result = {}) {
    std::vector<CheckResult> out;
    for (const auto& c : acceptance::criteria()) {
        if (!opt.only.empty() && !opt.only.count(c.id)) continue;
        CheckResult r;
        r.id = c.id;
        r.name = c.name;
        r.limit_seconds = c.limit_seconds;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            const auto o = c.run(opt);
            r.passed = o.passed;
            r.summary = o.summary;
        } catch (const std::exception& e) {
            r.passed = false;
            r.summary = std::string("error: ") + e.what();
        }
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (r.seconds > r.limit_seconds) {
            r.passed = false;
            r.summary += acceptance::fmt("; runtime %.1f s exceeds %.0f s", r.seconds, r.limit_seconds);
        }
        if (on_result) on_result(r);
        out.push_back(std::move(r));
    }
    return out;
}

inline void print_check(std::ostream& os, const CheckResult& r) {
    os << (r.passed ? "PASS" : "FAIL") << "  " << std::setw(2) << r.id << "  " << std::left << std::setw(36) << r.name
       << std::right << std::setw(9) << std::fixed << std::setprecision(2) << r.seconds << " s  " << r.summary
       << std::defaultfloat << '\n'
       << std::flush;
}

}  // namespace tilted_sim
