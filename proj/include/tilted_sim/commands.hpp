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
#include <array>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "tilted_sim/acceptance.hpp"
#include "tilted_sim/config.hpp"
#include "tilted_sim/coverage.hpp"
#include "tilted_sim/feature_recovery.hpp"
#include "tilted_sim/hermite.hpp"
#include "tilted_sim/parallel.hpp"
#include "tilted_sim/pipeline.hpp"
#include "tilted_sim/records.hpp"
#include "tilted_sim/stats.hpp"

namespace tilted_sim {

inline constexpr std::array<std::string_view, 8> kCommands{"exponents", "recover",   "scaling",    "ridge",
                                                          "value-gap", "coverage", "admissible", "verify-all"};

struct RunOptions {
    std::filesystem::path out_dir = "results";
    unsigned workers = 1;
    std::uint64_t seed_offset = 0;
};

struct RunSummary {
    std::filesystem::path records;
    std::size_t records_written = 0;
    std::size_t failed_cells = 0;
    std::vector<std::filesystem::path> plots;
    int exit_code = 0;
};

/// Records produced by one grid cell, held until the cell's turn to write.
class CellOutput {
public:
    explicit CellOutput(Json base = Json::object()) : base_(std::move(base)) {}

    void add(std::string metric, double value, std::optional<double> se = std::nullopt, Json extra = Json::object()) {
        Json meta = base_;
        for (auto& [k, v] : extra.items()) meta[k] = v;
        rows_.push_back({std::move(metric), value, se, std::move(meta)});
    }

    void fail(const std::string& what) {
        Json meta = base_;
        meta["error"] = what;
        rows_.push_back({"error", std::numeric_limits<double>::quiet_NaN(), std::nullopt, std::move(meta)});
        failed_ = true;
    }

    bool failed() const { return failed_; }
    const Json& base() const { return base_; }

    void flush(RecordWriter& w) const {
        for (const auto& r : rows_) w.write(r.metric, r.value, r.se, r.meta);
    }

private:
    struct Row {
        std::string metric;
        double value;
        std::optional<double> se;
        Json meta;
    };
    Json base_;
    std::vector<Row> rows_;
    bool failed_ = false;
};

namespace commands {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Runs body(cell) for each cell on the pool; a throwing cell becomes an
/// error record and its siblings carry on. Output keeps cell order.
template <class Body>
std::size_t run_cells(std::vector<CellOutput>& cells, unsigned workers, RecordWriter& w, Body&& body) {
    parallel_for(cells.size(), workers, [&](std::size_t i) {
        try {
            body(i, cells[i]);
        } catch (const std::exception& e) {
            cells[i].fail(e.what());
        }
    });
    std::size_t failed = 0;
    for (const auto& c : cells) {
        c.flush(w);
        failed += c.failed();
    }
    return failed;
}

inline double opt_time(const std::optional<std::uint64_t>& t) { return t ? static_cast<double>(*t) : kNaN; }

inline std::size_t exponents(const ExperimentConfig& c, RecordWriter& w, unsigned workers) {
    std::vector<CellOutput> cells;
    cells.emplace_back(Json{{"link", c.link.name}, {"part", "exponents"}});
    for (double b : c.exponents.beta1s)
        cells.emplace_back(Json{{"link", c.link.name}, {"activation", c.activation.name}, {"beta1", b}, {"tau", c.tau}});
    return run_cells(cells, workers, w, [&](std::size_t i, CellOutput& out) {
        const int i_max = static_cast<int>(c.exponents.i_max);
        if (i == 0) {
            const auto ex = generative_exponent(c.link.poly, i_max);
            const auto inf = [](int v) { return v == kInfiniteExponent ? kNaN : static_cast<double>(v); };
            out.add("ie", inf(ex.ie));
            out.add("ge", inf(ex.ge));
            out.add("i_star", inf(ex.i_star));
            out.add("search_bound", ex.search_bound);
            for (std::size_t k = 0; k <= c.link.poly.degree(); ++k)
                out.add("hermite_coefficient", hermite_coefficient(c.link.poly, k), std::nullopt, {{"i", k}});
            return;
        }
        const double b = c.exponents.beta1s[i - 1];
        for (int k = 0; k <= i_max; ++k) {
            out.add("teacher_signal", teacher_signal(static_cast<std::size_t>(k), b, c.link.poly, c.tau), std::nullopt,
                    {{"i", k}});
            if (k >= 1)
                out.add("student_signal", student_signal(static_cast<std::size_t>(k), c.activation.poly), std::nullopt,
                        {{"i", k}});
        }
    });
}

inline std::size_t recover(const ExperimentConfig& c, RecordWriter& w, unsigned workers) {
    const auto s = pipeline_settings(c, 1);
    std::vector<CellOutput> cells;
    for (auto seed : c.seeds)
        cells.emplace_back(Json{{"link", c.link.name}, {"d", c.recovery.d}, {"neurons", c.recovery.neurons},
                                {"beta1", c.recovery.beta1}, {"seed", seed}});
    return run_cells(cells, workers, w, [&](std::size_t i, CellOutput& out) {
        RecoveryConfig rc = s.recovery;
        rc.seed = c.seeds[i];
        const auto tr = run_recovery(s.link, s.activation, rc);
        out.add("recovered_fraction", tr.recovered_fraction);
        out.add("eta1", tr.eta1);
        out.add("steps_run", static_cast<double>(tr.steps_run));
        out.add("degenerate_steps", static_cast<double>(tr.degenerate_steps));
        std::vector<double> tw, ts;
        for (std::size_t j = 0; j < tr.t_weak.size(); ++j) {
            out.add("t_weak", opt_time(tr.t_weak[j]), std::nullopt, {{"neuron", j}, {"censored", !tr.t_weak[j]}});
            out.add("t_strong", opt_time(tr.t_strong[j]), std::nullopt,
                    {{"neuron", j}, {"censored", !tr.t_strong[j]}});
            if (tr.t_weak[j]) tw.push_back(static_cast<double>(*tr.t_weak[j]));
            if (tr.t_strong[j]) ts.push_back(static_cast<double>(*tr.t_strong[j]));
        }
        out.add("median_t_weak", tw.empty() ? kNaN : stats::median(tw));
        out.add("median_t_strong", ts.empty() ? kNaN : stats::median(ts));
        for (std::size_t k = 0; k < tr.times.size(); ++k) {
            std::vector<double> m;
            for (std::size_t j = 0; j < tr.overlaps.size(); ++j) {
                m.push_back(tr.overlaps[j][k]);
                out.add("overlap", tr.overlaps[j][k], std::nullopt, {{"t", tr.times[k]}, {"neuron", j}});
            }
            out.add("mean_overlap", stats::mean(m), m.size() > 1 ? std::optional(stats::standard_error(m)) : std::nullopt,
                    {{"t", tr.times[k]}});
        }
    });
}

inline std::size_t scaling(const ExperimentConfig& c, RecordWriter& w, unsigned workers) {
    const auto s = pipeline_settings(c, 1);
    const auto& dims = c.recovery.dims;
    const auto& betas = c.recovery.beta1s;
    std::vector<CellOutput> cells;
    for (auto d : dims)
        for (double b : betas)
            cells.emplace_back(Json{{"link", c.link.name}, {"d", d}, {"beta1", b}, {"repeats", c.recovery.repeats}});
    std::vector<std::optional<double>> medians(cells.size());
    RecoveryConfig base = s.recovery;
    base.seed = c.seeds.front();
    std::size_t failed = run_cells(cells, workers, w, [&](std::size_t i, CellOutput& out) {
        const auto tab = scaling_study(s.link, s.activation, {dims[i / betas.size()]}, {betas[i % betas.size()]},
                                       c.recovery.repeats, base);
        const auto& cell = tab.cells.front();
        out.add("median_t_weak", cell.censored ? kNaN : cell.median_t_weak, std::nullopt,
                {{"ci_lo", cell.ci_weak.lo}, {"ci_hi", cell.ci_weak.hi}, {"runs", cell.runs}, {"censored", cell.censored}});
        out.add("median_t_strong", cell.strong_censored ? kNaN : cell.median_t_strong, std::nullopt,
                {{"ci_lo", cell.ci_strong.lo}, {"ci_hi", cell.ci_strong.hi}, {"censored", cell.strong_censored}});
        out.add("mean_recovered_fraction", cell.mean_recovered_fraction);
        if (!cell.censored) medians[i] = cell.median_t_weak;
    });
    // Slopes over the uncensored cells.
    const auto slope_record = [&](const char* metric, Json meta, const std::vector<double>& x,
                                  const std::vector<double>& y) {
        meta["points"] = x.size();
        if (x.size() < 2) {
            meta["error"] = "fewer than two uncensored cells";
            w.write(metric, kNaN, std::nullopt, meta);
            return;
        }
        std::vector<double> lx, ly;
        for (std::size_t k = 0; k < x.size(); ++k) {
            lx.push_back(std::log(x[k]));
            ly.push_back(std::log(y[k]));
        }
        const auto line = stats::least_squares_line(lx, ly);
        meta["intercept"] = line.intercept;
        w.write(metric, line.slope, std::nullopt, meta);
    };
    if (dims.size() >= 2)
        for (std::size_t b = 0; b < betas.size(); ++b) {
            std::vector<double> x, y;
            for (std::size_t d = 0; d < dims.size(); ++d)
                if (const auto& m = medians[d * betas.size() + b]) {
                    x.push_back(static_cast<double>(dims[d]));
                    y.push_back(*m);
                }
            slope_record("slope_in_d", {{"link", c.link.name}, {"beta1", betas[b]}}, x, y);
        }
    if (betas.size() >= 2)
        for (std::size_t d = 0; d < dims.size(); ++d) {
            std::vector<double> x, y;
            for (std::size_t b = 0; b < betas.size(); ++b)
                if (const auto& m = medians[d * betas.size() + b]) {
                    x.push_back(betas[b]);
                    y.push_back(*m);
                }
            slope_record("slope_in_beta1", {{"link", c.link.name}, {"d", dims[d]}}, x, y);
        }
    return failed;
}

/// One second-stage cell per (seed, scheme, β₂, T₂); stage 1 runs once per seed.
struct StageGrid {
    struct Cell {
        std::size_t seed_index;
        WeightRule scheme;
        double beta2;
        std::uint64_t t2;
    };
    std::vector<Cell> cells;
    std::vector<std::optional<FirstStage>> first;
    std::vector<std::string> first_error;
};

inline StageGrid stage_grid(const ExperimentConfig& c, const PipelineSettings& s, unsigned workers,
                            const std::vector<double>& beta2s, const std::vector<std::uint64_t>& t2s) {
    StageGrid g;
    g.first.resize(c.seeds.size());
    g.first_error.resize(c.seeds.size());
    parallel_for(c.seeds.size(), workers, [&](std::size_t i) {
        try {
            g.first[i] = first_stage(s, c.seeds[i]);
        } catch (const std::exception& e) {
            g.first_error[i] = std::string("first stage: ") + e.what();
        }
    });
    for (std::size_t i = 0; i < c.seeds.size(); ++i)
        for (auto scheme : c.ridge.schemes)
            for (double b2 : beta2s)
                for (auto t2 : t2s) g.cells.push_back({i, scheme, b2, t2});
    return g;
}

template <class Body>
std::size_t run_stage_cells(const ExperimentConfig& c, const PipelineSettings& s, RecordWriter& w, unsigned workers,
                            const std::vector<double>& beta2s, const std::vector<std::uint64_t>& t2s, Body&& body) {
    const auto g = stage_grid(c, s, workers, beta2s, t2s);
    std::vector<CellOutput> cells;
    for (const auto& cell : g.cells)
        cells.emplace_back(Json{{"link", c.link.name},
                                {"seed", c.seeds[cell.seed_index]},
                                {"scheme", std::string(to_string(cell.scheme))},
                                {"beta2", cell.beta2},
                                {"t2", cell.t2}});
    for (std::size_t i = 0; i < c.seeds.size(); ++i) {
        Json meta{{"link", c.link.name}, {"seed", c.seeds[i]}};
        if (!g.first[i]) {
            meta["error"] = g.first_error[i];
            w.write("error", kNaN, std::nullopt, meta);
            continue;
        }
        w.write("stage1_mean_overlap", g.first[i]->mean_overlap(), std::nullopt, meta);
        w.write("stage1_steps", static_cast<double>(g.first[i]->trajectory.steps_run), std::nullopt, meta);
    }
    return run_cells(cells, workers, w, [&](std::size_t k, CellOutput& out) {
        const auto& cell = g.cells[k];
        const auto& first = g.first[cell.seed_index];
        if (!first) throw std::runtime_error(g.first_error[cell.seed_index]);
        const std::uint64_t seed = c.seeds[cell.seed_index];
        const auto st = second_stage(s, *first, cell.scheme, cell.beta2, cell.t2, seed);
        out.add("lambda", st.fit.lambda);
        if (st.surrogate) {
            out.add("log_surrogate_constant", st.surrogate->log_constant, st.surrogate->log_se);
            out.add("surrogate_max", st.surrogate->m_0r);
        }
        body(seed, st, out);
    });
}

inline std::size_t ridge(const ExperimentConfig& c, RecordWriter& w, unsigned workers) {
    const auto s = pipeline_settings(c, 1);
    std::size_t failed = run_stage_cells(
        c, s, w, workers, c.ridge.beta2, c.ridge.t2, [&](std::uint64_t seed, const SecondStage& st, CellOutput& out) {
            out.add("gram_condition", st.fit.gram_condition);
            out.add("weighted_residual", st.fit.residual);
            out.add("samples_in_ball", static_cast<double>(st.fit.n_used));
            out.add("readout_norm", st.fit.a_hat.norm());
            out.add("d_s", static_cast<double>(st.trunc.d_s()), std::nullopt, {{"radius", st.trunc.radius}});
            const auto h = holdout_error(st.rewards, st.trunc.radius, cell_mc(s, seed));
            out.add("holdout_mse", h.mse, h.se);
        });
    if (c.tau > 0.0) {
        std::vector<CellOutput> cells;
        for (double b2 : c.ridge.beta2) cells.emplace_back(Json{{"link", c.link.name}, {"tau", c.tau}, {"beta2", b2}});
        failed += run_cells(cells, 1, w, [&](std::size_t i, CellOutput& out) {
            const double b2 = c.ridge.beta2[i];
            const auto est = fit_label_shift(c.link.poly, c.tau, b2, static_cast<Eigen::Index>(c.ridge.shift_samples),
                                             c.ridge.shift_replicates, c.seeds.front(), workers);
            const double closed = noise_tilt_moments(c.tau, b2).mean;
            out.add("label_shift_offset", est.offset, est.offset_se, {{"closed_form", closed}});
            out.add("label_shift_slope", est.slope, est.slope_se);
        });
    }
    return failed;
}

inline std::size_t value_gap(const ExperimentConfig& c, RecordWriter& w, unsigned workers) {
    const auto s = pipeline_settings(c, 1);
    const double beta_star = c.policy.beta_star;
    return run_stage_cells(
        c, s, w, workers, c.ridge.beta2, c.ridge.t2, [&](std::uint64_t seed, const SecondStage& st, CellOutput& out) {
            const auto r = pipeline_value_gap(s, st, beta_star, seed);
            const Json meta{{"beta_star", beta_star}, {"radius", r.radius}, {"d_s", r.d_s}};
            out.add("t_temp", r.t_temp, r.t_temp_se, meta);
            out.add("t_cut", r.t_cut, r.t_cut_se, meta);
            out.add("t_learn", r.t_learn, r.t_learn_se, meta);
            out.add("total", r.total, r.total_se, meta);
            out.add("abs_total", std::abs(r.total), r.total_se, meta);
            out.add("variance_integral", r.variance_integral, std::nullopt, meta);
            out.add("identity_discrepancy", r.identity_discrepancy, std::nullopt, meta);
            out.add("tail_prob", r.tail_prob, std::nullopt, meta);
            out.add("learned_ess", r.learned.ess, std::nullopt,
                    {{"low_ess", r.learned.low_ess}, {"heavy_weight", r.learned.heavy_weight},
                     {"max_weight_share", r.learned.max_weight_share}});
        });
}

inline std::size_t coverage(const ExperimentConfig& c, RecordWriter& w, unsigned workers) {
    const auto s = pipeline_settings(c, 1);
    return run_stage_cells(
        c, s, w, workers, c.ridge.beta2, c.ridge.t2, [&](std::uint64_t seed, const SecondStage& st, CellOutput& out) {
            const auto cov = pipeline_coverage(s, st, seed);
            out.add("coverage_d", cov.d_value, cov.se, {{"doubled_t_nodes", cov.doubled_d_value}, {"min_ess", cov.min_ess}});
            out.add("shifted_norm", cov.shifted_norm, cov.shifted_norm_se, {{"shift", cov.shift}});
            for (std::size_t k = 0; k < cov.t_grid.size(); ++k)
                out.add("path_norm", cov.per_t_norms[k], cov.per_t_se[k], {{"t", cov.t_grid[k]}});
            const double m_r = sup_abs_link(s.link, st.trunc.radius);
            const double bound = bridge_bound(st.beta2, m_r, cov);
            const auto vg = pipeline_value_gap(s, st, st.beta2, seed);
            out.add("bridge_bound", bound, std::nullopt, {{"m_r", m_r}});
            out.add("abs_t_learn", std::abs(vg.t_learn), vg.t_learn_se);
        });
}

inline std::size_t admissible(const ExperimentConfig& c, RecordWriter& w, unsigned workers) {
    const auto s = pipeline_settings(c, 1);
    const auto& a = c.admissible;
    const auto& grid = a.beta_grid;
    const auto mx = analyze_maxima(c.link.poly);
    std::size_t failed = 0;
    for (auto scheme : c.ridge.schemes) {
        const std::string name(to_string(scheme));
        if (scheme == WeightRule::uniform) {
            w.write("error", kNaN, std::nullopt,
                    {{"scheme", name}, {"error", "uniform weighting has no learning-cost rate"}});
            ++failed;
            continue;
        }
        // Envelope over calibration seeds, unless given.
        std::vector<double> envelope(grid.size(), std::numeric_limits<double>::infinity());
        std::optional<ProjectedTruncation> trunc;
        if (a.envelope) {
            envelope = *a.envelope;
            trunc = pipeline_truncation(s, first_stage(s, a.calibration_seeds.front()));
        } else {
            const std::uint64_t t2 = *std::max_element(c.ridge.t2.begin(), c.ridge.t2.end());
            std::vector<std::optional<FirstStage>> first(a.calibration_seeds.size());
            parallel_for(first.size(), workers, [&](std::size_t i) {
                try {
                    first[i] = first_stage(s, a.calibration_seeds[i]);
                } catch (const std::exception&) {
                }
            });
            std::vector<CellOutput> cells;
            for (double b : grid)
                for (auto seed : a.calibration_seeds)
                    cells.emplace_back(Json{{"scheme", name}, {"beta2", b}, {"seed", seed}, {"t2", t2}, {"part", "envelope"}});
            std::vector<double> d(cells.size(), kNaN);
            failed += run_cells(cells, workers, w, [&](std::size_t k, CellOutput& out) {
                const auto& f = first[k % a.calibration_seeds.size()];
                if (!f) throw std::runtime_error("first stage failed for this calibration seed");
                const auto st = second_stage(s, *f, scheme, grid[k / a.calibration_seeds.size()], t2,
                                             a.calibration_seeds[k % a.calibration_seeds.size()]);
                const auto cov = pipeline_coverage(s, st, a.calibration_seeds[k % a.calibration_seeds.size()]);
                d[k] = cov.d_value;
                out.add("calibration_coverage_d", cov.d_value, cov.se);
            });
            for (std::size_t b = 0; b < grid.size(); ++b) {
                double top = 0.0;
                bool complete = true;
                for (std::size_t k = 0; k < a.calibration_seeds.size(); ++k) {
                    const double v = d[b * a.calibration_seeds.size() + k];
                    if (!std::isfinite(v)) complete = false;
                    else top = std::max(top, v);
                }
                if (complete) envelope[b] = a.envelope_factor * top;
            }
            for (const auto& f : first)
                if (f) {
                    trunc = pipeline_truncation(s, *f);
                    break;
                }
        }
        if (!trunc) {
            w.write("error", kNaN, std::nullopt, {{"scheme", name}, {"error", "no calibration seed finished stage 1"}});
            ++failed;
            continue;
        }
        const auto gamma = calibrate_gamma(c.link.poly, trunc->radius, trunc->d_s(), grid, c.policy.beta_star);
        AdmissibleRates rates;
        rates.rho_n = a.rho_n.value_or(1.0 / static_cast<double>(c.recovery.neurons) + c.recovery.epsilon);
        rates.delta0 = c.ridge.delta0;
        rates.alpha = scheme == WeightRule::label ? mx.alpha() : a.alpha0.value_or(static_cast<double>(trunc->d_s()));
        rates.m_r = sup_abs_link(c.link.poly, trunc->radius);
        w.write("gamma_constants", gamma.c_temp, std::nullopt,
                {{"scheme", name}, {"c_temp", gamma.c_temp}, {"c_r", gamma.c_r}, {"beta_bar", gamma.beta_bar},
                 {"p_max", gamma.p_max}, {"kappa", gamma.kappa}});
        for (std::size_t b = 0; b < grid.size(); ++b)
            w.write("envelope", envelope[b], std::nullopt, {{"scheme", name}, {"beta", grid[b]}});
        for (auto t2 : c.ridge.t2) {
            rates.t2 = static_cast<double>(t2);
            const auto set = admissible_set(scheme, a.eta, envelope, rates, gamma, grid);
            for (std::size_t b = 0; b < grid.size(); ++b) {
                const Json meta{{"scheme", name}, {"t2", t2}, {"beta", grid[b]}, {"eta", a.eta}};
                w.write("admissible", set.admissible[b] ? 1.0 : 0.0, std::nullopt, meta);
                w.write("learning_cost", set.learning_cost[b], std::nullopt, meta);
                w.write("gamma", set.gamma_values[b], std::nullopt, meta);
            }
            w.write("chosen_beta", set.chosen_beta.value_or(kNaN), std::nullopt,
                    {{"scheme", name}, {"t2", t2}, {"eta", a.eta}, {"empty", !set.chosen_beta}});
        }
    }
    return failed;
}

/// Default plot tables written next to the records of each study.
inline std::vector<std::pair<std::string, PlotSpec>> default_plots(std::string_view command) {
    using P = PlotSpec;
    if (command == "recover") return {{"mean_overlap", P{"t", "mean_overlap", {"seed"}, PlotTransform::none}}};
    if (command == "scaling")
        return {{"t_weak_vs_d", P{"d", "median_t_weak", {"beta1"}, PlotTransform::none}},
                {"t_weak_vs_beta1", P{"beta1", "median_t_weak", {"d"}, PlotTransform::none}}};
    if (command == "value-gap")
        return {{"abs_total_vs_t2", P{"t2", "abs_total", {"scheme", "beta2"}, PlotTransform::none}}};
    if (command == "coverage")
        return {{"coverage_vs_beta2", P{"beta2", "coverage_d", {"scheme", "t2"}, PlotTransform::none}}};
    if (command == "admissible")
        return {{"learning_cost", P{"beta", "learning_cost", {"scheme", "t2"}, PlotTransform::log}}};
    if (command == "ridge")
        return {{"holdout_mse_vs_t2", P{"t2", "holdout_mse", {"scheme", "beta2"}, PlotTransform::none}}};
    return {};
}

}  // namespace commands

inline bool is_command(std::string_view name) {
    return std::find(kCommands.begin(), kCommands.end(), name) != kCommands.end();
}

/// Runs one command on a validated config; writes `<out>/<command>.jsonl`.
/// Failing grid cells become error records and do not stop the run.
inline RunSummary run_experiment(const ExperimentConfig& config, std::string_view command, const RunOptions& opt,
                                 std::ostream& log) {
    if (!is_command(command)) throw std::invalid_argument("unknown command '" + std::string(command) + "'");
    ExperimentConfig c = config;
    apply_seed_offset(c, opt.seed_offset);
    RunSummary summary;
    summary.records = opt.out_dir / (std::string(command) + ".jsonl");
    RecordWriter w(summary.records, c.experiment, config_hash(c));
    const unsigned workers = std::max(1u, opt.workers);

    if (command == "exponents") summary.failed_cells = commands::exponents(c, w, workers);
    else if (command == "recover") summary.failed_cells = commands::recover(c, w, workers);
    else if (command == "scaling") summary.failed_cells = commands::scaling(c, w, workers);
    else if (command == "ridge") summary.failed_cells = commands::ridge(c, w, workers);
    else if (command == "value-gap") summary.failed_cells = commands::value_gap(c, w, workers);
    else if (command == "coverage") summary.failed_cells = commands::coverage(c, w, workers);
    else if (command == "admissible") summary.failed_cells = commands::admissible(c, w, workers);
    else {
        AcceptanceOptions ao;
        ao.workers = workers;
        std::size_t failed = 0;
        run_acceptance(ao, [&](const CheckResult& r) {
            print_check(log, r);
            failed += !r.passed;
            w.write("acceptance", r.passed ? 1.0 : 0.0, std::nullopt,
                    {{"id", r.id}, {"name", r.name}, {"summary", r.summary}, {"seconds", r.seconds},
                     {"limit_seconds", r.limit_seconds}});
        });
        log << acceptance::criteria().size() - failed << "/" << acceptance::criteria().size() << " criteria passed\n";
        summary.exit_code = failed ? 1 : 0;
    }
    summary.records_written = w.count();

    for (const auto& [name, spec] : commands::default_plots(command)) {
        const auto csv = opt.out_dir / (std::string(command) + "." + name + ".csv");
        try {
            emit_plot_data(summary.records, spec, csv);
            summary.plots.push_back(csv);
        } catch (const std::exception& e) {
            log << "warning: plot " << name << " skipped: " << e.what() << '\n';
        }
    }
    if (summary.failed_cells)
        log << "warning: " << summary.failed_cells << " cell(s) failed; see metric \"error\" in " << summary.records.string()
            << '\n';
    return summary;
}

}  // namespace tilted_sim
