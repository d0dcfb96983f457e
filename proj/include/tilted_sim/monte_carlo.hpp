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
#include <stdexcept>
#include <vector>

#include "tilted_sim/parallel.hpp"
#include "tilted_sim/polynomial.hpp"
#include "tilted_sim/rng.hpp"

namespace tilted_sim {

/// Monte Carlo budget. Samples are split into fixed-size shards, each with
/// its own stream, so results depend on (seed, shard size) but not on the
/// worker count.
struct McConfig {
    std::size_t samples = 1'000'000;
    std::size_t shard = 1 << 16;
    std::uint64_t seed = 0;
    unsigned workers = 1;
    std::uint64_t stream = streams::monte_carlo;

    std::size_t shards() const { return (samples + shard - 1) / shard; }
};

/// Rewards expressed in coordinates of S. A reference draw is x = Σ z_k e_k
/// + x_⊥ with z ~ N(0, I_{d_S}); r* needs the extra coordinate
/// g_⊥ = ⟨θ*_⊥/‖θ*_⊥‖, x⟩ when θ* is not inside S.
struct SubspaceRewards {
    Eigen::Index d_s = 1;
    std::function<double(const Eigen::VectorXd& z, double g_perp)> r_star;
    std::function<double(const Eigen::VectorXd& z)> r_hat;
    Eigen::VectorXd theta_s;  ///< coordinates of P_S θ*
    double theta_perp = 0.0;  ///< ‖(I - P_S)θ*‖
};

/// r* = σ*(⟨θ_S, z⟩ + θ_⊥ g_⊥) and r̂ = r*.
inline SubspaceRewards oracle_rewards(const Eigen::VectorXd& theta_s, const PolynomialLink& link,
                                      double theta_perp = 0.0) {
    SubspaceRewards r;
    r.d_s = theta_s.size();
    r.theta_s = theta_s;
    r.theta_perp = theta_perp;
    r.r_star = [theta_s, link, theta_perp](const Eigen::VectorXd& z, double g) {
        return link(theta_s.dot(z) + theta_perp * g);
    };
    r.r_hat = [theta_s, link](const Eigen::VectorXd& z) { return link(theta_s.dot(z)); };
    return r;
}

/// Runs fn(z, g_perp, acc) over every reference draw; returns one
/// accumulator per shard in shard order.
template <class Acc, class Fn>
std::vector<Acc> sample_subspace(Eigen::Index d_s, const McConfig& mc, const Acc& init, Fn&& fn) {
    if (d_s < 1) throw std::invalid_argument("sample_subspace: d_S must be >= 1");
    if (mc.samples == 0 || mc.shard == 0) throw std::invalid_argument("sample_subspace: empty Monte Carlo budget");
    const std::size_t shards = mc.shards();
    std::vector<Acc> out(shards, init);
    parallel_for(shards, mc.workers, [&](std::size_t s) {
        RandomStream rng(mc.seed, mc.stream + s);
        const std::size_t begin = s * mc.shard, end = std::min(mc.samples, begin + mc.shard);
        Eigen::VectorXd z(d_s);
        for (std::size_t i = begin; i < end; ++i) {
            for (Eigen::Index k = 0; k < d_s; ++k) z(k) = rng.normal();
            const double g = rng.normal();
            fn(z, g, out[s]);
        }
    });
    return out;
}

/// Σ w f and Σ w, Σ w² with weights e^{(ℓ - shift)/β}; shards combine by
/// rescaling to a common shift.
struct WeightedSums {
    double shift = -std::numeric_limits<double>::infinity();
    double sum_w = 0.0;
    double sum_w2 = 0.0;
    double max_w = 0.0;
    std::vector<double> sum_wf;   ///< one per tracked function
    std::vector<double> sum_w2f;  ///< Σ w² f
    std::vector<double> sum_w2ff; ///< Σ w² f²
    std::size_t count = 0;        ///< samples with nonzero indicator

    explicit WeightedSums(std::size_t functions = 1)
        : sum_wf(functions, 0.0), sum_w2f(functions, 0.0), sum_w2ff(functions, 0.0) {}

    /// Rescale to a larger shift (log-weights are in units of ℓ/β).
    void rebase(double new_shift) {
        if (new_shift <= shift) return;
        if (std::isinf(shift)) {
            shift = new_shift;
            return;
        }
        const double f = std::exp(shift - new_shift);
        sum_w *= f;
        sum_w2 *= f * f;
        max_w *= f;
        for (auto& v : sum_wf) v *= f;
        for (auto& v : sum_w2f) v *= f * f;
        for (auto& v : sum_w2ff) v *= f * f;
        shift = new_shift;
    }

    /// Adds a draw with log-weight `log_w` and tracked values f.
    void add(double log_w, const double* f) {
        if (log_w > shift) rebase(log_w);
        const double w = std::exp(log_w - shift);
        sum_w += w;
        sum_w2 += w * w;
        max_w = std::max(max_w, w);
        for (std::size_t k = 0; k < sum_wf.size(); ++k) {
            sum_wf[k] += w * f[k];
            sum_w2f[k] += w * w * f[k];
            sum_w2ff[k] += w * w * f[k] * f[k];
        }
        ++count;
    }

    void merge(const WeightedSums& o) {
        if (o.count == 0) return;
        WeightedSums other = o;
        const double s = std::max(shift, other.shift);
        rebase(s);
        other.rebase(s);
        sum_w += other.sum_w;
        sum_w2 += other.sum_w2;
        max_w = std::max(max_w, other.max_w);
        for (std::size_t k = 0; k < sum_wf.size(); ++k) {
            sum_wf[k] += other.sum_wf[k];
            sum_w2f[k] += other.sum_w2f[k];
            sum_w2ff[k] += other.sum_w2ff[k];
        }
        count += other.count;
    }

    /// Self-normalized mean of function k.
    double mean(std::size_t k = 0) const { return sum_wf[k] / sum_w; }

    /// Delta-method standard error of mean(k).
    double standard_error(std::size_t k = 0) const {
        const double m = mean(k);
        const double num = sum_w2ff[k] - 2.0 * m * sum_w2f[k] + m * m * sum_w2;
        return std::sqrt(std::max(num, 0.0)) / sum_w;
    }

    double effective_sample_size() const { return sum_w2 > 0.0 ? sum_w * sum_w / sum_w2 : 0.0; }
    double max_weight_share() const { return sum_w > 0.0 ? max_w / sum_w : 0.0; }
};

}  // namespace tilted_sim
