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
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "tilted_sim/errors.hpp"
#include "tilted_sim/feature_recovery.hpp"
#include "tilted_sim/monte_carlo.hpp"
#include "tilted_sim/polynomial.hpp"
#include "tilted_sim/quadrature.hpp"
#include "tilted_sim/reward_model.hpp"
#include "tilted_sim/special.hpp"
#include "tilted_sim/weighted_ridge.hpp"

namespace tilted_sim {

/// μ_β(du) ∝ e^{σ*(u)/β} φ(u) du.
struct TiltedMoments1D {
    double beta = 0.0;
    double z = 0.0;      ///< Z_β, may overflow to inf for large B*/β; log_z stays finite
    double log_z = 0.0;
    double mean = 0.0;
    double variance = 0.0;
};

namespace detail {

// Integrals are taken against e^{-D/β} φ with D = B* - σ* ≥ 0, so nothing
// overflows; the e^{B*/β} factor is restored in log space.
struct TiltedSums {
    double z = 0.0;       // ∫ e^{-D/β} φ · mask
    double mean_d = 0.0;  // E[D]
    double var_d = 0.0;   // Var[D]
};

template <class Mask>
TiltedSums tilted_sums(const PolynomialLink& link, double b_star, double beta, const std::vector<double>& breaks,
                       Mask&& mask, std::size_t n = 20) {
    const auto rule = gauss_legendre(n);
    std::vector<double> ds, ws;
    ds.reserve(breaks.size() * n);
    ws.reserve(breaks.size() * n);
    for (std::size_t p = 0; p + 1 < breaks.size(); ++p) {
        const double a = breaks[p], b = breaks[p + 1];
        if (!(b > a)) continue;
        const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
        for (std::size_t i = 0; i < rule->size(); ++i) {
            const double u = mid + half * rule->nodes[i];
            const double m = mask(u);
            if (m == 0.0) continue;
            const double d = std::max(0.0, b_star - link(u));
            const double w = half * rule->weights[i] * m * std::exp(-d / beta + log_normal_pdf(u));
            if (w == 0.0) continue;
            ds.push_back(d);
            ws.push_back(w);
        }
    }
    TiltedSums s;
    double acc = 0.0;
    for (std::size_t i = 0; i < ws.size(); ++i) {
        s.z += ws[i];
        acc += ws[i] * ds[i];
    }
    if (!(s.z > 0.0)) return s;
    s.mean_d = acc / s.z;
    acc = 0.0;
    for (std::size_t i = 0; i < ws.size(); ++i) acc += ws[i] * (ds[i] - s.mean_d) * (ds[i] - s.mean_d);
    s.var_d = acc / s.z;
    return s;
}

// Panel breaks on [lo, hi]: a 0.5 grid, geometric rings of width
// h 2^k around each maximizer with h = (β/c)^{1/(2p)}, and extra points.
inline std::vector<double> tilted_breaks(const MaximaReport& mx, double beta, double lo, double hi,
                                         const std::vector<double>& extra = {}) {
    std::vector<double> b{lo, hi};
    for (double u = std::ceil(lo / 0.5) * 0.5; u < hi; u += 0.5) b.push_back(u);
    for (const auto& m : mx.maximizers) {
        b.push_back(m.location);
        const double h = std::pow(beta / m.curvature, 1.0 / (2.0 * m.order));
        for (double r = h / 4.0; r < hi - lo; r *= 2.0) {
            b.push_back(m.location - r);
            b.push_back(m.location + r);
        }
    }
    b.insert(b.end(), extra.begin(), extra.end());
    for (auto& v : b) v = std::clamp(v, lo, hi);
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end()), b.end());
    return b;
}

inline bool sums_close(const TiltedSums& a, const TiltedSums& b, double tol) {
    const auto close = [tol](double x, double y) {
        return std::abs(x - y) <= tol * std::max(std::abs(x), std::abs(y)) + 1e-300;
    };
    return close(a.z, b.z) && close(a.mean_d, b.mean_d) && close(a.var_d, b.var_d);
}

// Halves every panel until two levels agree.
template <class Eval>
TiltedSums refine_until(std::vector<double> breaks, Eval&& eval, const char* what, double tol = 1e-9,
                        int max_levels = 8) {
    TiltedSums prev = eval(breaks);
    for (int level = 0; level < max_levels; ++level) {
        breaks = refine_panels(breaks);
        const TiltedSums cur = eval(breaks);
        if (sums_close(prev, cur, tol)) return cur;
        if (level + 1 == max_levels) throw ConvergenceError(what, prev.mean_d, cur.mean_d);
        prev = cur;
    }
    return prev;
}

inline double window_half_width(const MaximaReport& mx) { return mx.max_abs_location(false) + 12.0; }

// Breaks accumulating geometrically at the truncation endpoints ±r.
inline std::vector<double> edge_breaks(double r) {
    std::vector<double> out;
    for (int k = 1; k <= 40; ++k) {
        const double off = r * std::ldexp(1.0, -k);
        out.push_back(r - off);
        out.push_back(-r + off);
    }
    out.push_back(r);
    out.push_back(-r);
    return out;
}

}  // namespace detail

/// Z_β, m_β and Var_{μ_β}[σ*] by adaptive composite Gauss-Legendre.
inline TiltedMoments1D tilted_1d_moments(const PolynomialLink& link, double beta, const MaximaReport& maxima) {
    if (!(beta > 0.0) || !std::isfinite(beta)) throw std::invalid_argument("tilted_1d_moments: beta must be positive");
    const double half = detail::window_half_width(maxima);
    const auto eval = [&](const std::vector<double>& br) {
        return detail::tilted_sums(link, maxima.b_star, beta, br, [](double) { return 1.0; });
    };
    const auto s = detail::refine_until(detail::tilted_breaks(maxima, beta, -half, half), eval,
                                        "tilted_1d_moments: panel refinement did not settle");
    TiltedMoments1D m;
    m.beta = beta;
    m.log_z = maxima.b_star / beta + std::log(s.z);
    m.z = std::exp(m.log_z);
    m.mean = maxima.b_star - s.mean_d;
    m.variance = s.var_d;
    return m;
}

inline TiltedMoments1D tilted_1d_moments(const PolynomialLink& link, double beta) {
    const auto v = validate_link(link);
    if (!v) throw std::invalid_argument("tilted_1d_moments: " + v.reason);
    return tilted_1d_moments(link, beta, analyze_maxima(link));
}

/// Tilt of ζ ~ Unif[-τ, τ] at temperature s.
struct NoiseTilt {
    double z = 1.0;
    double log_z = 0.0;
    double mean = 0.0;
    double variance = 0.0;
};

/// Z = (s/τ) sinh(τ/s), m = τ coth(τ/s) - s, Var = s² - τ² csch²(τ/s).
/// τ = 0 is the degenerate noiseless case.
inline NoiseTilt noise_tilt_moments(double tau, double s) {
    if (!(s > 0.0)) throw std::invalid_argument("noise_tilt_moments: s must be positive");
    if (!(tau >= 0.0)) throw std::invalid_argument("noise_tilt_moments: tau must be nonnegative");
    NoiseTilt out;
    if (tau == 0.0) return out;
    const double x = tau / s;
    if (x > 30.0) {
        out.log_z = std::log(s / tau) + x + std::log1p(-std::exp(-2.0 * x)) - std::log(2.0);
        out.z = std::exp(out.log_z);
        out.mean = tau - s;
        out.variance = s * s;
        return out;
    }
    if (x < 1e-2) {
        const double x2 = x * x;
        out.z = 1.0 + x2 / 6.0 * (1.0 + x2 / 20.0 * (1.0 + x2 / 42.0));
        out.mean = tau * x * (1.0 / 3.0 - x2 / 45.0 + 2.0 * x2 * x2 / 945.0 - x2 * x2 * x2 / 4725.0);
        out.variance = tau * tau * (1.0 / 3.0 - x2 / 15.0 + 2.0 * x2 * x2 / 189.0 - x2 * x2 * x2 / 675.0);
    } else {
        const double sh = std::sinh(x);
        out.z = sh / x;
        out.mean = tau / std::tanh(x) - s;
        out.variance = s * s - tau * tau / (sh * sh);
    }
    out.log_z = std::log(out.z);
    return out;
}

/// E_{π_{β,R}}[r*] and π_β(B_R^c) for S ∋ θ*.
struct TruncatedExpectation {
    double expectation = 0.0;
    double z_trunc = 0.0;  ///< Z_{β,R}
    double log_z_trunc = 0.0;
    double tail_prob = 0.0;
};

/// With P_S x = uθ* + z and z ⟂ θ*, the indicator integrates out to the
/// χ²_{d_S-1} CDF at R² - u².
inline TruncatedExpectation target_truncated_expectation(const PolynomialLink& link, double beta, Eigen::Index d_s,
                                                         double radius, const MaximaReport& maxima) {
    if (!(beta > 0.0)) throw std::invalid_argument("target_truncated_expectation: beta must be positive");
    if (d_s < 1) throw std::invalid_argument("target_truncated_expectation: d_S must be >= 1");
    const double inner = maxima.max_abs_location(true);
    if (!(radius > inner))
        throw std::invalid_argument("target_truncated_expectation: R = " + std::to_string(radius) +
                                    " does not exceed the dominant maximizer radius " + std::to_string(inner));
    const int dof = static_cast<int>(d_s) - 1;
    const double half = detail::window_half_width(maxima);
    const double r2 = radius * radius;
    const auto edges = detail::edge_breaks(radius);
    const double lim = std::min(radius, half);

    const auto inside = [&](double u) { return chi_square_cdf(r2 - u * u, dof); };
    const auto outside = [&](double u) { return chi_square_sf(r2 - u * u, dof); };
    const auto eval_in = [&](const std::vector<double>& br) {
        return detail::tilted_sums(link, maxima.b_star, beta, br, inside);
    };
    const auto eval_out = [&](const std::vector<double>& br) {
        return detail::tilted_sums(link, maxima.b_star, beta, br, outside);
    };
    const auto full = [&](const std::vector<double>& br) {
        return detail::tilted_sums(link, maxima.b_star, beta, br, [](double) { return 1.0; });
    };

    const auto in = detail::refine_until(detail::tilted_breaks(maxima, beta, -lim, lim, edges), eval_in,
                                         "target_truncated_expectation: panel refinement did not settle");
    const auto win = detail::tilted_breaks(maxima, beta, -half, half, edges);
    const auto all = detail::refine_until(win, full, "target_truncated_expectation: normalizer did not settle");
    // The tail mass can be far below 1e-9 of Z; only its own relative
    // accuracy matters.
    const auto out = detail::refine_until(win, eval_out, "target_truncated_expectation: tail did not settle");

    TruncatedExpectation t;
    t.expectation = maxima.b_star - in.mean_d;
    t.log_z_trunc = maxima.b_star / beta + std::log(in.z);
    t.z_trunc = std::exp(t.log_z_trunc);
    t.tail_prob = std::clamp(out.z / all.z, 0.0, 1.0);
    return t;
}

inline TruncatedExpectation target_truncated_expectation(const PolynomialLink& link, double beta,
                                                         const ProjectedTruncation& trunc) {
    const auto v = validate_link(link);
    if (!v) throw std::invalid_argument("target_truncated_expectation: " + v.reason);
    return target_truncated_expectation(link, beta, trunc.d_s(), trunc.radius, analyze_maxima(link));
}

/// r_a(x) = (1/N) Σ a_j σ(⟨w_j, x⟩ + b_j) written in S-coordinates.
struct SubspaceNetwork {
    Eigen::MatrixXd w;     ///< N × d_S
    Eigen::VectorXd bias;  ///< N
    Eigen::VectorXd coef;  ///< a / N
    PolynomialLink activation;

    double value(const Eigen::VectorXd& z) const {
        const Eigen::VectorXd pre = w * z + bias;
        double acc = 0.0;
        for (Eigen::Index j = 0; j < pre.size(); ++j) acc += coef(j) * activation(pre(j));
        return acc;
    }

    Eigen::VectorXd gradient(const Eigen::VectorXd& z) const {
        const PolynomialLink slope = activation.derivative();
        const Eigen::VectorXd pre = w * z + bias;
        Eigen::VectorXd s(pre.size());
        for (Eigen::Index j = 0; j < pre.size(); ++j) s(j) = coef(j) * slope(pre(j));
        return w.transpose() * s;
    }
};

/// Restricts the network to S. Every first-layer direction must lie in S.
inline SubspaceNetwork project_network(const NetworkState& net, const PolynomialLink& activation,
                                       const Eigen::VectorXd& a, const ProjectedTruncation& trunc) {
    if (a.size() != net.neurons()) throw std::invalid_argument("project_network: readout size mismatch");
    if (trunc.basis.rows() != net.dim()) throw std::invalid_argument("project_network: basis dimension mismatch");
    SubspaceNetwork s;
    s.w = net.w * trunc.basis;
    const double off = (net.w - s.w * trunc.basis.transpose()).rowwise().norm().maxCoeff();
    if (off > 1e-8)
        throw std::invalid_argument("project_network: first-layer directions leave S (distance " +
                                    std::to_string(off) + ")");
    s.bias = net.biases.size() ? net.biases : Eigen::VectorXd::Zero(net.neurons());
    s.coef = a / static_cast<double>(net.neurons());
    s.activation = activation;
    return s;
}

/// r* and the fitted r̂ = r_{â} in S-coordinates. θ* may have a component
/// outside S.
inline SubspaceRewards network_rewards(const Eigen::VectorXd& theta, const NetworkState& net,
                                       const PolynomialLink& activation, const Eigen::VectorXd& a_hat,
                                       const PolynomialLink& link, const ProjectedTruncation& trunc) {
    const SubspaceNetwork model = project_network(net, activation, a_hat, trunc);
    const Eigen::VectorXd ts = trunc.basis.transpose() * theta;
    double tp = (theta - trunc.basis * ts).norm();
    if (tp < 1e-12) tp = 0.0;
    SubspaceRewards r = oracle_rewards(ts, link, tp);
    r.r_hat = [model](const Eigen::VectorXd& z) { return model.value(z); };
    return r;
}

/// r̂ ≡ c: the learned policy is the truncated reference.
inline SubspaceRewards constant_rewards(const Eigen::VectorXd& theta_s, const PolynomialLink& link, double c) {
    SubspaceRewards r = oracle_rewards(theta_s, link);
    r.r_hat = [c](const Eigen::VectorXd&) { return c; };
    return r;
}

struct PolicyEstimate {
    double expectation = 0.0;
    double se = 0.0;
    double ess = 0.0;
    double max_weight_share = 0.0;
    std::size_t samples = 0;
    std::size_t accepted = 0;  ///< draws inside B_R
    bool low_ess = false;      ///< ESS < 30
    bool heavy_weight = false; ///< max weight share > 0.1
};

/// E_{π̂_{β₂,R}}[r*] by self-normalized importance sampling from the
/// d_S-dimensional reference, weights 1{‖z‖ ≤ R} e^{r̂/β₂}.
inline PolicyEstimate learned_policy_expectation(const SubspaceRewards& rewards, double beta2, double radius,
                                                 const McConfig& mc) {
    if (!(beta2 > 0.0)) throw std::invalid_argument("learned_policy_expectation: beta2 must be positive");
    if (!(radius > 0.0)) throw std::invalid_argument("learned_policy_expectation: radius must be positive");
    const double r2 = radius * radius;
    const auto shards = sample_subspace(rewards.d_s, mc, WeightedSums(1),
                                        [&](const Eigen::VectorXd& z, double g, WeightedSums& acc) {
                                            if (z.squaredNorm() > r2) return;
                                            const double f = rewards.r_star(z, g);
                                            acc.add(rewards.r_hat(z) / beta2, &f);
                                        });
    WeightedSums total(1);
    for (const auto& s : shards) total.merge(s);
    if (total.count == 0 || !(total.sum_w > 0.0))
        throw NumericalError("learned_policy_expectation: every importance weight is zero");
    PolicyEstimate e;
    e.expectation = total.mean();
    e.se = total.standard_error();
    e.ess = total.effective_sample_size();
    e.max_weight_share = total.max_weight_share();
    e.samples = mc.samples;
    e.accepted = total.count;
    e.low_ess = e.ess < 30.0;
    e.heavy_weight = e.max_weight_share > 0.1;
    return e;
}

/// ∫_{1/β₂}^{1/β*} Var_{μ_{1/λ}}[σ*] dλ by Gauss-Legendre on geometric panels.
inline double variance_integral(const PolynomialLink& link, double beta_star, double beta2,
                                const MaximaReport& maxima, int panels = 8) {
    const double lo = 1.0 / std::max(beta_star, beta2), hi = 1.0 / std::min(beta_star, beta2);
    if (lo == hi) return 0.0;
    std::vector<double> breaks(static_cast<std::size_t>(panels) + 1);
    for (int k = 0; k <= panels; ++k) breaks[static_cast<std::size_t>(k)] = lo * std::pow(hi / lo, double(k) / panels);
    breaks.back() = hi;
    const double v = integrate_panels([&](double l) { return tilted_1d_moments(link, 1.0 / l, maxima).variance; },
                                      breaks);
    return beta_star < beta2 ? v : -v;
}

/// ℛ_R = T_temp + T_cut + T_learn.
struct ValueGapReport {
    double t_temp = 0.0, t_temp_se = 0.0;
    double t_cut = 0.0, t_cut_se = 0.0;
    double t_learn = 0.0, t_learn_se = 0.0;
    double total = 0.0, total_se = 0.0;
    double beta_star = 0.0, beta2 = 0.0, radius = 0.0;
    Eigen::Index d_s = 0;
    double m_beta_star = 0.0;     ///< E_{π_{β*}}[r*]
    double m_beta2 = 0.0;         ///< E_{π_{β₂}}[r*]
    double target_truncated = 0.0;
    double tail_prob = 0.0;
    double variance_integral = 0.0;
    double identity_discrepancy = 0.0;  ///< |T_temp - variance integral|
    PolicyEstimate learned;
    std::uint64_t seed = 0;
};

/// Target terms by quadrature, learned term by importance sampling. θ* must
/// lie in S.
inline ValueGapReport value_gap_report(const PolynomialLink& link, double beta_star, double beta2,
                                       const SubspaceRewards& rewards, double radius, const McConfig& mc) {
    const auto v = validate_link(link);
    if (!v) throw std::invalid_argument("value_gap_report: " + v.reason);
    if (rewards.theta_perp > 1e-10) throw std::invalid_argument("value_gap_report: θ* must lie in S");
    const auto maxima = analyze_maxima(link);
    ValueGapReport r;
    r.beta_star = beta_star;
    r.beta2 = beta2;
    r.radius = radius;
    r.d_s = rewards.d_s;
    r.seed = mc.seed;
    r.m_beta_star = tilted_1d_moments(link, beta_star, maxima).mean;
    r.m_beta2 = beta_star == beta2 ? r.m_beta_star : tilted_1d_moments(link, beta2, maxima).mean;
    const auto trunc = target_truncated_expectation(link, beta2, rewards.d_s, radius, maxima);
    r.target_truncated = trunc.expectation;
    r.tail_prob = trunc.tail_prob;
    r.learned = learned_policy_expectation(rewards, beta2, radius, mc);

    r.t_temp = r.m_beta_star - r.m_beta2;
    r.t_cut = r.m_beta2 - r.target_truncated;
    r.t_learn = r.target_truncated - r.learned.expectation;
    r.total = r.t_temp + r.t_cut + r.t_learn;
    r.t_learn_se = r.learned.se;
    r.total_se = std::sqrt(r.t_temp_se * r.t_temp_se + r.t_cut_se * r.t_cut_se + r.t_learn_se * r.t_learn_se);
    r.variance_integral = variance_integral(link, beta_star, beta2, maxima);
    r.identity_discrepancy = std::abs(r.t_temp - r.variance_integral);
    return r;
}

}  // namespace tilted_sim
