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
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tilted_sim/errors.hpp"
#include "tilted_sim/monte_carlo.hpp"
#include "tilted_sim/polynomial.hpp"
#include "tilted_sim/quadrature.hpp"
#include "tilted_sim/reward_model.hpp"
#include "tilted_sim/rng.hpp"
#include "tilted_sim/special.hpp"
#include "tilted_sim/tilted_policy.hpp"
#include "tilted_sim/weighted_ridge.hpp"

namespace tilted_sim {

struct CoverageEstimate {
    double d_value = 0.0;  ///< 𝒟_{w,R}
    double se = 0.0;
    std::vector<double> t_grid;
    std::vector<double> t_weights;
    std::vector<double> per_t_norms;  ///< ‖dπ_t/dν‖_{L²(ν)}
    std::vector<double> per_t_se;
    double doubled_d_value = 0.0;  ///< same sample, twice the t-nodes
    double min_ess = 0.0;
    /// inf_c ‖r̂ - r* - c‖_{L²(ν)}, attained at c = E_ν[r̂ - r*].
    double shifted_norm = 0.0;
    double shifted_norm_se = 0.0;
    double shift = 0.0;
    std::size_t samples = 0;
    std::size_t accepted = 0;
};

namespace detail {

inline double log_sum_exp(const std::vector<double>& v) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : v) m = std::max(m, x);
    if (std::isinf(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

struct CoverageDraws {
    std::vector<double> a, delta, nu;  // r*/β₂, (r̂ - r*)/β₂, r_ν/β₂ for draws in B_R
};

struct PathPoint {
    double log_y = 0.0;  // log Σ e^{a + tδ}
    double log_w = 0.0;  // log Σ e^{2(a + tδ) - ν}
    double norm = 0.0;
    double ess = 0.0;
};

inline PathPoint path_point(const CoverageDraws& d, double log_x, double t) {
    const std::size_t n = d.a.size();
    std::vector<double> y(n), w(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = d.a[i] + t * d.delta[i];
        w[i] = 2.0 * y[i] - d.nu[i];
    }
    PathPoint p;
    p.log_y = log_sum_exp(y);
    p.log_w = log_sum_exp(w);
    p.norm = std::exp(0.5 * (log_x + p.log_w - 2.0 * p.log_y));
    double sy = 0.0, sw = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double ey = std::exp(y[i] - p.log_y), ew = std::exp(w[i] - p.log_w);
        sy += ey * ey;
        sw += ew * ew;
    }
    p.ess = std::min(1.0 / sy, 1.0 / sw);
    return p;
}

}  // namespace detail

/// 𝒟_{w,R} = ∫₀¹ ‖dπ_t/dν‖_{L²(ν)} dt along π_t ∝ 1_B e^{(r* + t(r̂ - r*))/β₂} π_ref.
/// `r_nu` is the weighting reward of ν (r* for label weighting, r_{a₀} for
/// surrogate weighting, 0 for uniform). One reference sample serves every t.
inline CoverageEstimate coverage_D(const SubspaceRewards& rewards,
                                   const std::function<double(const Eigen::VectorXd&, double)>& r_nu, double beta2,
                                   double radius, const McConfig& mc, std::size_t t_points = 17,
                                   double ess_floor = 20.0) {
    if (!(beta2 > 0.0)) throw std::invalid_argument("coverage_D: beta2 must be positive");
    if (!(radius > 0.0)) throw std::invalid_argument("coverage_D: radius must be positive");
    if (t_points < 2) throw std::invalid_argument("coverage_D: need at least two t-nodes");
    const double r2 = radius * radius;
    const auto shards = sample_subspace(rewards.d_s, mc, detail::CoverageDraws{},
                                        [&](const Eigen::VectorXd& z, double g, detail::CoverageDraws& acc) {
                                            if (z.squaredNorm() > r2) return;
                                            const double rs = rewards.r_star(z, g);
                                            acc.a.push_back(rs / beta2);
                                            acc.delta.push_back((rewards.r_hat(z) - rs) / beta2);
                                            acc.nu.push_back(r_nu(z, g) / beta2);
                                        });
    detail::CoverageDraws d;
    for (const auto& s : shards) {
        d.a.insert(d.a.end(), s.a.begin(), s.a.end());
        d.delta.insert(d.delta.end(), s.delta.begin(), s.delta.end());
        d.nu.insert(d.nu.end(), s.nu.begin(), s.nu.end());
    }
    const std::size_t n = d.a.size();
    if (n == 0) throw NumericalError("coverage_D: no reference draw falls inside B_R; increase n_mc or R");

    CoverageEstimate out;
    out.samples = mc.samples;
    out.accepted = n;
    const double log_x = detail::log_sum_exp(d.nu);
    std::vector<double> x_tilde(n);
    double ess_nu = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        x_tilde[i] = std::exp(d.nu[i] - log_x);
        ess_nu += x_tilde[i] * x_tilde[i];
    }
    ess_nu = 1.0 / ess_nu;

    const auto integrate = [&](std::size_t points, std::vector<detail::PathPoint>& pts, std::vector<double>& ts,
                               std::vector<double>& ws) {
        const auto rule = gauss_legendre(points);
        ts.resize(points);
        ws.resize(points);
        pts.resize(points);
        parallel_for(points, mc.workers, [&](std::size_t k) {
            ts[k] = 0.5 * (rule->nodes[k] + 1.0);
            ws[k] = 0.5 * rule->weights[k];
            pts[k] = detail::path_point(d, log_x, ts[k]);
        });
        double v = 0.0;
        for (std::size_t k = 0; k < points; ++k) v += ws[k] * pts[k].norm;
        return v;
    };

    std::vector<detail::PathPoint> pts, pts2;
    std::vector<double> ts2, ws2;
    out.d_value = integrate(t_points, pts, out.t_grid, out.t_weights);
    out.doubled_d_value = integrate(2 * t_points - 1, pts2, ts2, ws2);
    out.min_ess = ess_nu;
    for (const auto& p : pts) out.min_ess = std::min(out.min_ess, p.ess);
    if (out.min_ess < ess_floor)
        throw NumericalError("coverage_D: effective sample size collapsed to " + std::to_string(out.min_ess) +
                             "; increase n_mc or beta2");

    // Delta method on log ‖·‖² = log ΣX + log ΣW - 2 log ΣY, summed per draw.
    std::vector<double> per_t_var(t_points, 0.0);
    double d_var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double infl = 0.0;
        for (std::size_t k = 0; k < t_points; ++k) {
            const double y = d.a[i] + out.t_grid[k] * d.delta[i];
            const double psi = x_tilde[i] + std::exp(2.0 * y - d.nu[i] - pts[k].log_w) - 2.0 * std::exp(y - pts[k].log_y);
            per_t_var[k] += psi * psi;
            infl += out.t_weights[k] * pts[k].norm * 0.5 * psi;
        }
        d_var += infl * infl;
    }
    out.se = std::sqrt(d_var);
    for (std::size_t k = 0; k < t_points; ++k) {
        out.per_t_norms.push_back(pts[k].norm);
        out.per_t_se.push_back(0.5 * pts[k].norm * std::sqrt(per_t_var[k]));
    }

    double c = 0.0;
    for (std::size_t i = 0; i < n; ++i) c += x_tilde[i] * d.delta[i];
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) v += x_tilde[i] * (d.delta[i] - c) * (d.delta[i] - c);
    double v_var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = (d.delta[i] - c) * (d.delta[i] - c) - v;
        v_var += x_tilde[i] * x_tilde[i] * e * e;
    }
    // δ is in units of 1/β₂.
    out.shift = c * beta2;
    out.shifted_norm = std::sqrt(v) * beta2;
    out.shifted_norm_se = v > 0.0 ? 0.5 * std::sqrt(v_var) / std::sqrt(v) * beta2 : 0.0;
    return out;
}

/// r_ν for each weighting rule. The surrogate rule needs the frozen a₀ model.
inline std::function<double(const Eigen::VectorXd&, double)> weighting_reward(
    WeightRule rule, const SubspaceRewards& rewards, const std::optional<SubspaceNetwork>& a0 = std::nullopt) {
    switch (rule) {
        case WeightRule::label: return rewards.r_star;
        case WeightRule::surrogate:
            if (!a0) throw std::invalid_argument("coverage: surrogate weighting needs the frozen a0 model");
            return [m = *a0](const Eigen::VectorXd& z, double) { return m.value(z); };
        case WeightRule::uniform: return [](const Eigen::VectorXd&, double) { return 0.0; };
    }
    return {};
}

/// M_R = sup_{|u| ≤ R} |σ*(u)|, the sup of |r*| over B_R when θ* ∈ S.
inline double sup_abs_link(const PolynomialLink& link, double radius) {
    double m = std::max(std::abs(link(radius)), std::abs(link(-radius)));
    for (const auto& root : detail::real_roots(link.derivative()))
        if (std::abs(root.location) <= radius) m = std::max(m, std::abs(link(root.location)));
    return m;
}

/// Right side of the bridge inequality, 2 β₂^{-1} M_R 𝒟 inf_c ‖r̂ - r* - c‖.
inline double bridge_bound(double beta2, double m_r, const CoverageEstimate& cov) {
    return 2.0 / beta2 * m_r * cov.d_value * cov.shifted_norm;
}

struct SurrogateConstant {
    double constant = 0.0;  ///< 𝒞_{0,R}(β₂) = e^{M/β₂} / Z
    double log_constant = 0.0;
    double log_se = 0.0;
    double m_0r = 0.0;      ///< M_{0,R}
    Eigen::VectorXd argmax;
    double log_z = 0.0;     ///< log Z^{a₀}_{β₂,R}
    std::size_t converged_starts = 0;
    bool max_raised_by_sample = false;
};

struct BallMaximum {
    double value = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd argmax;
    std::size_t converged = 0;
};

/// sup over ‖z‖ ≤ R of model.value by projected gradient ascent from the
/// origin and `starts - 1` uniform points in the ball.
inline BallMaximum maximize_on_ball(const SubspaceNetwork& model, double radius, std::size_t starts,
                                    std::uint64_t seed, double tol = 1e-8, int max_iter = 20000) {
    const Eigen::Index ds = model.w.cols();
    const auto project = [radius](Eigen::VectorXd z) {
        const double n = z.norm();
        if (n > radius) z *= radius / n;
        return z;
    };
    RandomStream rng(seed, streams::optimizer_starts);
    BallMaximum best;
    for (std::size_t s = 0; s < starts; ++s) {
        Eigen::VectorXd z = Eigen::VectorXd::Zero(ds);
        if (s > 0) {
            for (Eigen::Index k = 0; k < ds; ++k) z(k) = rng.normal();
            z *= radius * std::pow(rng.uniform01(), 1.0 / static_cast<double>(ds)) / z.norm();
        }
        double f = model.value(z), step = 1.0;
        bool converged = false;
        for (int it = 0; it < max_iter; ++it) {
            const Eigen::VectorXd g = model.gradient(z);
            if ((project(z + g) - z).norm() <= tol) {
                converged = true;
                break;
            }
            bool moved = false;
            for (int ls = 0; ls < 60; ++ls) {
                const Eigen::VectorXd cand = project(z + step * g);
                const double fc = model.value(cand);
                if (fc >= f + 1e-4 * g.dot(cand - z)) {
                    moved = (cand - z).norm() > 0.0;
                    z = cand;
                    f = fc;
                    step *= 2.0;
                    break;
                }
                step *= 0.5;
            }
            if (!moved) {
                converged = (project(z + g) - z).norm() <= std::sqrt(tol);
                break;
            }
        }
        if (converged) ++best.converged;
        if (f > best.value) {
            best.value = f;
            best.argmax = z;
        }
    }
    if (best.converged == 0) throw ConvergenceError("maximize_on_ball: no start converged", best.value, best.value);
    return best;
}

/// 𝒞_{0,R}(β₂) = (Z^{a₀}_{β₂,R})^{-1} e^{M_{0,R}/β₂} with Z by Monte Carlo.
/// If a sampled value exceeds the optimizer's maximum, M is raised to it.
inline SurrogateConstant surrogate_constant(const SubspaceNetwork& a0, double beta2, double radius,
                                            const McConfig& mc, std::size_t starts = 64) {
    if (!(beta2 > 0.0)) throw std::invalid_argument("surrogate_constant: beta2 must be positive");
    if (!(radius > 0.0)) throw std::invalid_argument("surrogate_constant: radius must be positive");
    const auto top = maximize_on_ball(a0, radius, starts, mc.seed);
    SurrogateConstant out;
    out.m_0r = top.value;
    out.argmax = top.argmax;
    out.converged_starts = top.converged;
    const double r2 = radius * radius;
    struct Acc {
        std::vector<double> v;
    };
    const auto shards = sample_subspace(a0.w.cols(), mc, Acc{}, [&](const Eigen::VectorXd& z, double, Acc& acc) {
        if (z.squaredNorm() <= r2) acc.v.push_back(a0.value(z));
    });
    std::vector<double> vals;
    for (const auto& s : shards) vals.insert(vals.end(), s.v.begin(), s.v.end());
    if (vals.empty()) throw NumericalError("surrogate_constant: no reference draw falls inside B_R");
    const double vmax = *std::max_element(vals.begin(), vals.end());
    if (vmax > out.m_0r) {
        out.m_0r = vmax;
        out.max_raised_by_sample = true;
    }
    // mean of 1_B e^{(r - M)/β₂} over all draws, including those outside B_R.
    const double n_all = static_cast<double>(mc.samples);
    double s1 = 0.0, s2 = 0.0;
    for (double v : vals) {
        const double e = std::exp((v - out.m_0r) / beta2);
        s1 += e;
        s2 += e * e;
    }
    const double mean = s1 / n_all;
    const double var = std::max(s2 / n_all - mean * mean, 0.0);
    out.log_constant = -std::log(mean);
    out.log_se = std::sqrt(var / n_all) / mean;
    out.constant = std::exp(out.log_constant);
    out.log_z = out.m_0r / beta2 + std::log(mean);
    return out;
}

/// Learning-cost rates entering ℒ_w.
struct AdmissibleRates {
    double rho_n = 0.0;   ///< N^{-1} + ε
    double t2 = 1.0;
    double delta0 = 0.05;
    double alpha = 0.5;   ///< α = 1/(2p_max) for label weighting, α₀ for surrogate weighting
    double m_r = 1.0;     ///< M_R
};

/// Γ_{R,β̄}(β, β*) = (1/(2p_max) + C_temp β̄^κ)|β* - β| + C_R β.
struct GammaParams {
    double beta_star = 0.1;
    double beta_bar = 0.2;
    int p_max = 1;
    double kappa = 0.5;
    double c_temp = 0.0;
    double c_r = 0.0;

    double operator()(double beta) const {
        return (1.0 / (2.0 * p_max) + c_temp * std::pow(beta_bar, kappa)) * std::abs(beta_star - beta) + c_r * beta;
    }
};

struct AdmissibleSet {
    double eta = 0.0;
    std::vector<double> grid;
    std::vector<bool> admissible;
    std::vector<double> learning_cost;  ///< M_R D̄(β) ℒ_w(β)
    std::vector<double> gamma_values;
    std::optional<double> chosen_beta;
    std::optional<std::size_t> chosen_index;
};

/// ℒ_lbl(β) = β^{-(α+3)/2} ρ + β^{-(α+5)/4} (T₂δ₀)^{-1/4};
/// ℒ_surr(β) = β^{-1-α₀/2} ρ + β^{-1-α₀/4} (T₂δ₀)^{-1/4}.
inline double learning_rate_factor(WeightRule scheme, double beta, const AdmissibleRates& r) {
    const double res = std::pow(r.t2 * r.delta0, -0.25);
    switch (scheme) {
        case WeightRule::label:
            return std::pow(beta, -(r.alpha + 3.0) / 2.0) * r.rho_n + std::pow(beta, -(r.alpha + 5.0) / 4.0) * res;
        case WeightRule::surrogate:
            return std::pow(beta, -1.0 - r.alpha / 2.0) * r.rho_n + std::pow(beta, -1.0 - r.alpha / 4.0) * res;
        case WeightRule::uniform: break;
    }
    throw std::invalid_argument("learning_rate_factor: only label and surrogate weighting have a rate");
}

/// {β ≤ β̄ : M_R D̄(β) ℒ_w(β) ≤ η} on the grid, and the Γ-minimizing member
/// (first index on ties). `envelope[k]` is D̄ at grid[k]; +inf excludes it.
inline AdmissibleSet admissible_set(WeightRule scheme, double eta, const std::vector<double>& envelope,
                                    const AdmissibleRates& rates, const GammaParams& gamma,
                                    const std::vector<double>& grid) {
    if (envelope.size() != grid.size()) throw std::invalid_argument("admissible_set: envelope and grid sizes differ");
    AdmissibleSet out;
    out.eta = eta;
    out.grid = grid;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double b = grid[k];
        if (!(b > 0.0)) throw std::invalid_argument("admissible_set: grid temperatures must be positive");
        const double cost = rates.m_r * envelope[k] * learning_rate_factor(scheme, b, rates);
        const double g = gamma(b);
        const bool ok = b <= gamma.beta_bar && std::isfinite(cost) && cost <= eta;
        out.learning_cost.push_back(cost);
        out.gamma_values.push_back(g);
        out.admissible.push_back(ok);
        if (ok && g < best) {
            best = g;
            out.chosen_beta = b;
            out.chosen_index = k;
        }
    }
    return out;
}

/// Frozen Γ constants: C_temp = max (|T_temp|/|β* - β₂| - 1/(2p_max))₊ / β̄^κ
/// over grid pairs, C_R = max |T_cut(β₂)|/β₂.
inline GammaParams calibrate_gamma(const PolynomialLink& link, double radius, Eigen::Index d_s,
                                   const std::vector<double>& grid, double beta_star) {
    if (grid.empty()) throw std::invalid_argument("calibrate_gamma: empty grid");
    const auto mx = analyze_maxima(link);
    GammaParams g;
    g.beta_star = beta_star;
    g.beta_bar = *std::max_element(grid.begin(), grid.end());
    g.p_max = mx.p_max;
    g.kappa = mx.kappa;
    std::vector<double> means;
    for (double b : grid) {
        means.push_back(tilted_1d_moments(link, b, mx).mean);
        const double cut = means.back() - target_truncated_expectation(link, b, d_s, radius, mx).expectation;
        g.c_r = std::max(g.c_r, std::abs(cut) / b);
    }
    const double lead = 1.0 / (2.0 * mx.p_max);
    for (std::size_t i = 0; i < grid.size(); ++i)
        for (std::size_t j = 0; j < grid.size(); ++j) {
            if (grid[i] == grid[j]) continue;
            const double ratio = std::abs(means[i] - means[j]) / std::abs(grid[i] - grid[j]);
            g.c_temp = std::max(g.c_temp, (ratio - lead) / std::pow(g.beta_bar, g.kappa));
        }
    return g;
}

}  // namespace tilted_sim
