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

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tilted_sim/errors.hpp"
#include "tilted_sim/hermite.hpp"
#include "tilted_sim/parallel.hpp"
#include "tilted_sim/polynomial.hpp"
#include "tilted_sim/quadrature.hpp"
#include "tilted_sim/reward_model.hpp"
#include "tilted_sim/rng.hpp"
#include "tilted_sim/stats.hpp"

namespace tilted_sim {

/// Two-layer student r_a(x) = (1/N) Σ a_j σ(⟨w_j, x⟩ + b_j).
struct NetworkState {
    Eigen::MatrixXd w;        ///< N × d, unit rows
    Eigen::VectorXd biases;   ///< N
    Eigen::VectorXd readout;  ///< N
    double s_init = 0.0;

    Eigen::Index neurons() const noexcept { return w.rows(); }
    Eigen::Index dim() const noexcept { return w.cols(); }
};

enum class InitMode {
    uniform,        ///< w_j ~ Unif(S^{d-1})
    exact_overlap,  ///< ⟨w_j, θ*⟩ = d^{-1/2} exactly, rest uniform on the orthogonal sphere
};

/// Random first layer, zero biases, readout ~ Unif{±s_init}.
inline NetworkState init_network(Eigen::Index d, Eigen::Index n, double s_init, const Eigen::VectorXd& theta,
                                 std::uint64_t seed, InitMode mode = InitMode::uniform) {
    if (d < 1 || n < 1) throw std::invalid_argument("init_network: d and N must be positive");
    if (!(s_init > 0.0)) throw std::invalid_argument("init_network: s_init must be positive");
    if (theta.size() != d) throw std::invalid_argument("init_network: theta has wrong dimension");
    NetworkState net;
    net.s_init = s_init;
    net.w.resize(n, d);
    net.biases = Eigen::VectorXd::Zero(n);
    net.readout.resize(n);
    RandomStream dirs(seed, streams::init_directions);
    RandomStream signs(seed, streams::init_readout);
    const double m0 = 1.0 / std::sqrt(static_cast<double>(d));
    for (Eigen::Index j = 0; j < n; ++j) {
        Eigen::VectorXd v = random_unit_vector(d, dirs);
        if (mode == InitMode::exact_overlap && d > 1) {
            Eigen::VectorXd perp = v - v.dot(theta) * theta;
            // A draw parallel to θ* has no orthogonal part; redraw.
            while (perp.norm() < 1e-12) {
                v = random_unit_vector(d, dirs);
                perp = v - v.dot(theta) * theta;
            }
            v = m0 * theta + std::sqrt(1.0 - m0 * m0) * perp.normalized();
        }
        net.w.row(j) = v.transpose();
        net.readout(j) = signs.coin() ? s_init : -s_init;
    }
    return net;
}

/// Direction y e^{y/β₁} σ'(⟨w, x⟩) P_w^⊥ x of one update, per unit η₁ a₀ⱼ.
inline Eigen::VectorXd sgd_increment(const Eigen::VectorXd& w, const Eigen::VectorXd& x, double y, double beta1,
                                     const PolynomialLink& activation) {
    const double h = w.dot(x);
    const double scale = y * std::exp(y / beta1) * activation.derivative()(h);
    return scale * (x - h * w);
}

struct StepResult {
    Eigen::VectorXd w;
    bool degenerate = false;  ///< normalization failed; w kept
};

/// One spherical SGD step w ← normalize(w + η₁ a₀ⱼ y e^{y/β₁} σ'(⟨w,x⟩) P_w^⊥ x).
inline StepResult sgd_step(const Eigen::VectorXd& w, const Eigen::VectorXd& x, double y, double eta1, double a0j,
                           double beta1, const PolynomialLink& activation) {
    if (!(beta1 > 0.0)) throw std::invalid_argument("sgd_step: beta1 must be positive");
    if (std::abs(w.norm() - 1.0) > 1e-10) throw std::invalid_argument("sgd_step: w must be unit norm");
    if (eta1 == 0.0) return {w, false};
    Eigen::VectorXd next = w + eta1 * a0j * sgd_increment(w, x, y, beta1, activation);
    const double norm = next.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) return {w, true};
    return {next / norm, false};
}

/// Expected ⟨θ*, increment⟩ per unit η₁a₀ⱼ at overlap m.
///
/// With h = m g + s v (s² = 1 - m²) and ⟨θ*, P_w^⊥ x⟩ = s(s g - m v), the v
/// integral is polynomial and done exactly; the g integral carries the
/// exponential weight and uses node doubling.
inline double population_drift(double overlap, double beta1, const PolynomialLink& link,
                               const PolynomialLink& activation, double tau, const SignalQuadrature& q = {}) {
    if (!(std::abs(overlap) < 1.0)) throw std::invalid_argument("population_drift: |overlap| must be < 1");
    if (!(beta1 > 0.0)) throw std::invalid_argument("population_drift: beta1 must be positive");
    const double m = overlap;
    const double s = std::sqrt(1.0 - m * m);
    const auto dsigma = activation.derivative();
    const auto inner_rule = gauss_hermite(dsigma.degree() / 2 + 2);
    auto inner = [&](double g) {
        double acc = 0.0;
        for (std::size_t k = 0; k < inner_rule->size(); ++k) {
            const double v = inner_rule->nodes[k];
            acc += inner_rule->weights[k] * dsigma(m * g + s * v) * (s * g - m * v);
        }
        return s * acc;
    };
    auto at = [&](std::size_t nh, std::size_t nl) {
        const auto rule = gauss_hermite(nh);
        double acc = 0.0;
        for (std::size_t k = 0; k < rule->size(); ++k) {
            if (rule->weights[k] == 0.0) continue;
            const double g = rule->nodes[k];
            acc += rule->weights[k] * weighted_label_transform(link(g), beta1, tau, nl) * inner(g);
        }
        return acc;
    };
    std::size_t nh = q.hermite_nodes, nl = q.legendre_nodes;
    double prev = at(nh, nl);
    while (2 * nh <= q.max_hermite_nodes) {
        nh *= 2;
        nl *= 2;
        const double cur = at(nh, nl);
        if (std::abs(cur - prev) <= q.tolerance * std::max(1.0, std::abs(cur))) return cur;
        prev = cur;
    }
    throw ConvergenceError("population_drift: Gauss-Hermite node cap reached", prev, at(nh, nl));
}

/// Default η₁ = c_η δ |μ_p| d^{-(p/2 ∨ 1)} with μ_p = p s_init U_p V_{p-1}.
inline double default_step_size(const PolynomialLink& link, const PolynomialLink& activation, double beta1,
                                double tau, double s_init, Eigen::Index d, double c_eta = 0.5, double delta = 0.05) {
    const int p = generative_exponent(link).ge;
    if (p == kInfiniteExponent) throw std::invalid_argument("default_step_size: link has no finite exponent");
    const double mu = drift_signal(static_cast<std::size_t>(p), beta1, s_init, link, activation, tau);
    if (mu == 0.0) throw std::invalid_argument("default_step_size: student coefficient V_{p-1} vanishes");
    const double exponent = std::max(p / 2.0, 1.0);
    return c_eta * delta * std::abs(mu) * std::pow(static_cast<double>(d), -exponent);
}

struct RecoveryConfig {
    Eigen::Index d = 128;
    Eigen::Index neurons = 16;
    double tau = 0.0;
    double beta1 = 10.0;
    std::optional<double> eta1;  ///< unset selects default_step_size
    double s_init = 0.1;
    double c_wk = 0.1;
    double epsilon = 0.1;
    std::uint64_t t_max = 1'000'000;
    std::uint64_t seed = 0;
    InitMode init = InitMode::uniform;
    bool shared_stream = true;  ///< false: every neuron draws its own samples
    bool stop_after_weak = false;
    bool flip_readout = false;  ///< negate every initial readout sign
    /// Give every neuron the readout sign with a₀ U_p V_{p-1} > 0, so each
    /// one satisfies the positive-drift condition.
    bool compatible_readout = false;
    std::size_t grid_points = 48;
    std::size_t block = 256;  ///< samples generated per block
    unsigned workers = 1;
    std::optional<Eigen::VectorXd> theta;  ///< defaults to e_1
};

struct RecoveryTrajectory {
    std::vector<std::uint64_t> times;             ///< log-spaced record times, starting at 0
    std::vector<std::vector<double>> overlaps;    ///< [neuron][time]
    std::vector<std::optional<std::uint64_t>> t_weak;
    std::vector<std::optional<std::uint64_t>> t_strong;
    double recovered_fraction = 0.0;              ///< fraction reaching weak recovery
    std::uint64_t steps_run = 0;
    double eta1 = 0.0;
    std::size_t degenerate_steps = 0;
    NetworkState network;  ///< first layer at the end of the run; neurons freeze once done
};

namespace detail {

inline std::vector<std::uint64_t> log_time_grid(std::uint64_t t_max, std::size_t points) {
    std::vector<std::uint64_t> g{0};
    if (t_max == 0) return g;
    for (double t : stats::log_space(1.0, static_cast<double>(t_max), std::max<std::size_t>(points, 2))) {
        const auto v = static_cast<std::uint64_t>(std::llround(t));
        if (v > g.back()) g.push_back(v);
    }
    if (g.back() != t_max) g.push_back(t_max);
    return g;
}

}  // namespace detail

/// Online spherical SGD for every neuron; crossing times are checked after
/// each step, overlaps are recorded on a logarithmic grid.
inline RecoveryTrajectory run_recovery(const PolynomialLink& link, const PolynomialLink& activation,
                                       const RecoveryConfig& cfg) {
    if (auto v = validate_link(link); !v) throw std::invalid_argument("run_recovery: " + v.reason);
    if (auto v = validate_link(activation, LinkRole::activation); !v)
        throw std::invalid_argument("run_recovery: activation: " + v.reason);
    if (!(cfg.beta1 > 0.0)) throw std::invalid_argument("run_recovery: beta1 must be positive");
    if (!(cfg.c_wk > 0.0 && cfg.c_wk < 1.0)) throw std::invalid_argument("run_recovery: c_wk must lie in (0,1)");
    if (!(cfg.epsilon > 0.0 && cfg.epsilon < 1.0)) throw std::invalid_argument("run_recovery: epsilon must lie in (0,1)");
    const Eigen::Index d = cfg.d, n = cfg.neurons;
    const Eigen::VectorXd theta = cfg.theta ? *cfg.theta : default_theta(d);
    if (theta.size() != d || std::abs(theta.norm() - 1.0) > 1e-12)
        throw std::invalid_argument("run_recovery: theta must be a unit d-vector");

    RecoveryTrajectory tr;
    tr.eta1 = cfg.eta1 ? *cfg.eta1 : default_step_size(link, activation, cfg.beta1, cfg.tau, cfg.s_init, d);
    if (tr.eta1 < 0.0) throw std::invalid_argument("run_recovery: eta1 must be nonnegative");
    tr.times = detail::log_time_grid(cfg.t_max, cfg.grid_points);
    tr.overlaps.assign(static_cast<std::size_t>(n), {});
    tr.t_weak.assign(static_cast<std::size_t>(n), std::nullopt);
    tr.t_strong.assign(static_cast<std::size_t>(n), std::nullopt);

    NetworkState net = init_network(d, n, cfg.s_init, theta, cfg.seed, cfg.init);
    if (cfg.compatible_readout) {
        const auto p = static_cast<std::size_t>(generative_exponent(link).ge);
        const double sign = drift_signal(p, cfg.beta1, 1.0, link, activation, cfg.tau) > 0.0 ? 1.0 : -1.0;
        net.readout.setConstant(sign * cfg.s_init);
    }
    if (cfg.flip_readout) net.readout = -net.readout;
    const auto dsigma = activation.derivative();
    const double strong = 1.0 - cfg.epsilon;
    std::vector<std::size_t> degenerate(static_cast<std::size_t>(n), 0);
    std::vector<std::uint8_t> done(static_cast<std::size_t>(n), 0);

    auto record = [&](std::size_t j, std::uint64_t t, double m) {
        if (!tr.t_weak[j] && m >= cfg.c_wk) tr.t_weak[j] = t;
        if (!tr.t_strong[j] && m >= strong) tr.t_strong[j] = t;
        done[j] = cfg.stop_after_weak ? tr.t_weak[j].has_value() : tr.t_strong[j].has_value();
    };
    for (Eigen::Index j = 0; j < n; ++j) {
        const double m = net.w.row(j).dot(theta);
        tr.overlaps[static_cast<std::size_t>(j)].push_back(m);
        record(static_cast<std::size_t>(j), 0, m);
    }

    // One stream per neuron when not shared; the shared stream is stream 0.
    const std::size_t n_streams = cfg.shared_stream ? 1 : static_cast<std::size_t>(n);
    std::vector<RandomStream> rngs;
    for (std::size_t s = 0; s < n_streams; ++s) rngs.emplace_back(cfg.seed, streams::samples + 16 * s);
    std::vector<Eigen::MatrixXd> xs(n_streams);
    std::vector<Eigen::VectorXd> ys(n_streams), sq(n_streams);

    std::size_t next_record = 1;
    std::uint64_t t = 0;
    while (t < cfg.t_max && !std::all_of(done.begin(), done.end(), [](auto v) { return v != 0; })) {
        // Run to the next record time in blocks.
        const std::uint64_t stop = std::min<std::uint64_t>(
            tr.times[next_record], t + static_cast<std::uint64_t>(std::max<std::size_t>(cfg.block, 1)));
        const auto len = static_cast<Eigen::Index>(stop - t);
        for (std::size_t s = 0; s < n_streams; ++s) {
            xs[s].resize(d, len);
            ys[s].resize(len);
            sq[s].resize(len);
            for (Eigen::Index i = 0; i < len; ++i) {
                for (Eigen::Index k = 0; k < d; ++k) xs[s](k, i) = rngs[s].normal();
                const double zeta = cfg.tau > 0.0 ? rngs[s].uniform(-cfg.tau, cfg.tau) : 0.0;
                ys[s](i) = link(xs[s].col(i).dot(theta)) + zeta;
                sq[s](i) = xs[s].col(i).squaredNorm();
            }
        }
        parallel_for(static_cast<std::size_t>(n), cfg.workers, [&](std::size_t j) {
            if (done[j]) return;
            const std::size_t s = cfg.shared_stream ? 0 : j;
            Eigen::VectorXd w = net.w.row(static_cast<Eigen::Index>(j)).transpose();
            const double a = net.readout(static_cast<Eigen::Index>(j));
            for (Eigen::Index i = 0; i < len; ++i) {
                const auto x = xs[s].col(i);
                const double y = ys[s](i);
                const double h = w.dot(x);
                const double c = tr.eta1 * a * y * std::exp(y / cfg.beta1) * dsigma(h);
                if (c != 0.0) {
                    // The increment is orthogonal to w, so its squared norm is c²(‖x‖² - h²).
                    const double grow = c * c * (sq[s](i) - h * h);
                    if (std::isfinite(grow)) {
                        w += c * (x - h * w);
                        w /= w.norm();
                    } else {
                        ++degenerate[j];
                    }
                }
                const double m = w.dot(theta);
                const std::uint64_t now = t + static_cast<std::uint64_t>(i) + 1;
                if (!tr.t_weak[j] && m >= cfg.c_wk) tr.t_weak[j] = now;
                if (!tr.t_strong[j] && m >= strong) tr.t_strong[j] = now;
                if (cfg.stop_after_weak ? tr.t_weak[j].has_value() : tr.t_strong[j].has_value()) {
                    done[j] = 1;
                    break;
                }
            }
            net.w.row(static_cast<Eigen::Index>(j)) = w.transpose();
        });
        t = stop;
        if (t == tr.times[next_record]) {
            for (Eigen::Index j = 0; j < n; ++j)
                tr.overlaps[static_cast<std::size_t>(j)].push_back(net.w.row(j).dot(theta));
            ++next_record;
        }
    }
    tr.steps_run = t;
    tr.times.resize(next_record);
    std::size_t recovered = 0;
    for (std::size_t j = 0; j < static_cast<std::size_t>(n); ++j) {
        recovered += tr.t_weak[j].has_value();
        tr.degenerate_steps += degenerate[j];
    }
    tr.recovered_fraction = static_cast<double>(recovered) / static_cast<double>(n);
    tr.network = std::move(net);
    return tr;
}

struct ScalingCell {
    Eigen::Index d = 0;
    double beta1 = 0.0;
    double median_t_weak = 0.0;
    stats::Interval ci_weak;
    double median_t_strong = 0.0;
    stats::Interval ci_strong;
    std::size_t runs = 0;        ///< repeats with at least one recovered neuron
    bool censored = false;       ///< no repeat recovered
    bool strong_censored = false;
    double mean_recovered_fraction = 0.0;
};

struct ScalingTable {
    std::vector<ScalingCell> cells;
    std::vector<std::pair<double, double>> slope_in_d;     ///< (β₁, slope of log median T_wk vs log d)
    std::vector<std::pair<Eigen::Index, double>> slope_in_beta;  ///< (d, slope vs log β₁)
};

/// Median crossing times per (d, β₁) over repeats. Each repeat contributes
/// the median over its recovered neurons; seeds are base seed + repeat.
inline ScalingTable scaling_study(const PolynomialLink& link, const PolynomialLink& activation,
                                  const std::vector<Eigen::Index>& dims, const std::vector<double>& beta1s,
                                  std::size_t repeats, const RecoveryConfig& base) {
    if (dims.empty() || beta1s.empty() || repeats == 0)
        throw std::invalid_argument("scaling_study: grids and repeats must be nonempty");
    const std::size_t n_cells = dims.size() * beta1s.size();
    std::vector<std::optional<double>> weak(n_cells * repeats), str(n_cells * repeats);
    std::vector<double> frac(n_cells * repeats, 0.0);
    parallel_for(n_cells * repeats, base.workers, [&](std::size_t k) {
        const std::size_t cell = k / repeats, r = k % repeats;
        RecoveryConfig cfg = base;
        cfg.d = dims[cell / beta1s.size()];
        cfg.beta1 = beta1s[cell % beta1s.size()];
        cfg.seed = base.seed + r;
        cfg.workers = 1;
        cfg.theta.reset();
        const auto tr = run_recovery(link, activation, cfg);
        std::vector<double> tw, ts;
        for (std::size_t j = 0; j < tr.t_weak.size(); ++j) {
            if (tr.t_weak[j]) tw.push_back(static_cast<double>(*tr.t_weak[j]));
            if (tr.t_strong[j]) ts.push_back(static_cast<double>(*tr.t_strong[j]));
        }
        if (!tw.empty()) weak[k] = stats::median(tw);
        if (!ts.empty()) str[k] = stats::median(ts);
        frac[k] = tr.recovered_fraction;
    });

    ScalingTable table;
    for (std::size_t cell = 0; cell < n_cells; ++cell) {
        ScalingCell c;
        c.d = dims[cell / beta1s.size()];
        c.beta1 = beta1s[cell % beta1s.size()];
        std::vector<double> tw, ts, fr;
        for (std::size_t r = 0; r < repeats; ++r) {
            if (weak[cell * repeats + r]) tw.push_back(*weak[cell * repeats + r]);
            if (str[cell * repeats + r]) ts.push_back(*str[cell * repeats + r]);
            fr.push_back(frac[cell * repeats + r]);
        }
        c.runs = tw.size();
        c.censored = tw.empty();
        c.strong_censored = ts.empty();
        c.mean_recovered_fraction = stats::mean(fr);
        if (!tw.empty()) {
            c.median_t_weak = stats::median(tw);
            c.ci_weak = stats::bootstrap_median_ci(tw, base.seed);
        }
        if (!ts.empty()) {
            c.median_t_strong = stats::median(ts);
            c.ci_strong = stats::bootstrap_median_ci(ts, base.seed);
        }
        table.cells.push_back(c);
    }
    auto cell_at = [&](std::size_t i, std::size_t b) -> const ScalingCell& { return table.cells[i * beta1s.size() + b]; };
    if (dims.size() >= 2) {
        for (std::size_t b = 0; b < beta1s.size(); ++b) {
            std::vector<double> x, y;
            for (std::size_t i = 0; i < dims.size(); ++i) {
                if (cell_at(i, b).censored || cell_at(i, b).median_t_weak <= 0.0) continue;
                x.push_back(static_cast<double>(dims[i]));
                y.push_back(cell_at(i, b).median_t_weak);
            }
            if (x.size() >= 2) table.slope_in_d.emplace_back(beta1s[b], stats::log_log_slope(x, y));
        }
    }
    if (beta1s.size() >= 2) {
        for (std::size_t i = 0; i < dims.size(); ++i) {
            std::vector<double> x, y;
            for (std::size_t b = 0; b < beta1s.size(); ++b) {
                if (cell_at(i, b).censored || cell_at(i, b).median_t_weak <= 0.0) continue;
                x.push_back(beta1s[b]);
                y.push_back(cell_at(i, b).median_t_weak);
            }
            if (x.size() >= 2) table.slope_in_beta.emplace_back(dims[i], stats::log_log_slope(x, y));
        }
    }
    return table;
}

}  // namespace tilted_sim
