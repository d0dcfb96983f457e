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

#include <cstdint>
#include <optional>

#include "tilted_sim/config.hpp"
#include "tilted_sim/coverage.hpp"
#include "tilted_sim/feature_recovery.hpp"
#include "tilted_sim/monte_carlo.hpp"
#include "tilted_sim/tilted_policy.hpp"
#include "tilted_sim/weighted_ridge.hpp"

namespace tilted_sim {

/// Everything the two-stage pipeline needs, independent of the config file.
struct PipelineSettings {
    PolynomialLink link{0.0, 0.0, -1.0};
    PolynomialLink activation{0.0, 0.0, -1.0};
    double tau = 0.0;
    RecoveryConfig recovery;
    double c_b = 1.0;
    double radius_slack = 2.0;
    std::optional<double> radius;
    double c_lambda = 0.1;
    double delta0 = 0.05;
    McConfig mc;
    std::size_t optimizer_starts = 64;
    std::size_t t_points = 17;
};

inline PipelineSettings pipeline_settings(const ExperimentConfig& c, unsigned workers) {
    PipelineSettings s;
    s.link = c.link.poly;
    s.activation = c.activation.poly;
    s.tau = c.tau;
    const auto& r = c.recovery;
    auto& rc = s.recovery;
    rc.d = r.d;
    rc.neurons = r.neurons;
    rc.tau = c.tau;
    rc.beta1 = r.beta1;
    rc.eta1 = r.eta1;
    rc.s_init = r.s_init;
    rc.c_wk = r.c_wk;
    rc.epsilon = r.epsilon;
    rc.t_max = r.t_max;
    rc.init = r.init;
    rc.compatible_readout = r.compatible_readout;
    rc.stop_after_weak = r.stop_after_weak;
    rc.workers = 1;
    s.c_b = c.ridge.c_b;
    s.radius_slack = c.ridge.radius_slack;
    s.radius = c.ridge.radius;
    s.c_lambda = c.ridge.c_lambda;
    s.delta0 = c.ridge.delta0;
    s.mc.samples = c.policy.mc_samples;
    s.mc.shard = c.policy.mc_shard;
    s.mc.workers = workers;
    s.t_points = c.policy.t_points;
    return s;
}

/// Trained first layer with fresh biases; the readout is the initial a₀.
struct FirstStage {
    NetworkState net;
    RecoveryTrajectory trajectory;
    Eigen::VectorXd theta;
    std::uint64_t seed = 0;

    /// Mean overlap ⟨w_j, θ*⟩ over neurons.
    double mean_overlap() const { return (net.w * theta).mean(); }
};

inline FirstStage first_stage(const PipelineSettings& s, std::uint64_t seed) {
    RecoveryConfig cfg = s.recovery;
    cfg.seed = seed;
    cfg.tau = s.tau;
    cfg.theta.reset();
    FirstStage out;
    out.seed = seed;
    out.theta = default_theta(cfg.d);
    out.trajectory = run_recovery(s.link, s.activation, cfg);
    out.net = out.trajectory.network;
    out.net.biases = sample_biases(cfg.neurons, s.c_b, seed);
    return out;
}

struct SecondStage {
    WeightRule rule = WeightRule::label;
    double beta2 = 0.0;
    std::uint64_t t2 = 0;
    ProjectedTruncation trunc;
    RidgeFit fit;
    SubspaceRewards rewards;
    SubspaceNetwork a0;  ///< frozen initial readout on S
    std::optional<SurrogateConstant> surrogate;
};

inline ProjectedTruncation pipeline_truncation(const PipelineSettings& s, const FirstStage& first) {
    auto trunc = make_truncation(first.theta, first.net, s.radius_slack);
    if (s.radius) trunc.radius = *s.radius;
    return trunc;
}

/// Weighted ridge fit of the readout on T₂ fresh samples, with λ from the
/// schedule of the chosen rule.
inline SecondStage second_stage(const PipelineSettings& s, const FirstStage& first, WeightRule rule, double beta2,
                                std::uint64_t t2, std::uint64_t seed) {
    SecondStage out;
    out.rule = rule;
    out.beta2 = beta2;
    out.t2 = t2;
    out.trunc = pipeline_truncation(s, first);
    out.a0 = project_network(first.net, s.activation, first.net.readout, out.trunc);
    const auto maxima = analyze_maxima(s.link);
    std::optional<SurrogateExtras> extras;
    if (rule == WeightRule::surrogate) {
        McConfig mc = s.mc;
        mc.seed = seed;
        mc.stream = streams::surrogate_monte_carlo;
        out.surrogate = surrogate_constant(out.a0, beta2, out.trunc.radius, mc, s.optimizer_starts);
        extras = SurrogateExtras{out.surrogate->m_0r, out.surrogate->constant};
    }
    const double lambda = lambda_schedule(rule, beta2, t2, s.delta0, maxima, s.c_lambda, s.tau, extras);
    const auto batch = sample_batch(first.net.dim(), first.theta, s.link, s.tau, static_cast<Eigen::Index>(t2), seed,
                                    streams::ridge_samples);
    out.fit = fit_weighted_ridge(batch, first.net, s.activation, out.trunc, rule, beta2, lambda);
    out.rewards = network_rewards(first.theta, first.net, s.activation, out.fit.a_hat, s.link, out.trunc);
    return out;
}

inline McConfig cell_mc(const PipelineSettings& s, std::uint64_t seed) {
    McConfig mc = s.mc;
    mc.seed = seed;
    return mc;
}

inline ValueGapReport pipeline_value_gap(const PipelineSettings& s, const SecondStage& st, double beta_star,
                                         std::uint64_t seed) {
    return value_gap_report(s.link, beta_star, st.beta2, st.rewards, st.trunc.radius, cell_mc(s, seed));
}

inline CoverageEstimate pipeline_coverage(const PipelineSettings& s, const SecondStage& st, std::uint64_t seed) {
    return coverage_D(st.rewards, weighting_reward(st.rule, st.rewards, st.a0), st.beta2, st.trunc.radius,
                      cell_mc(s, seed), s.t_points);
}

/// E[(r̂ - r*)²] under the reference restricted to B_R, with its SE.
struct HoldoutError {
    double mse = 0.0;
    double se = 0.0;
    std::size_t accepted = 0;
};

inline HoldoutError holdout_error(const SubspaceRewards& rewards, double radius, McConfig mc) {
    mc.stream = streams::holdout;
    const double r2 = radius * radius;
    const auto shards = sample_subspace(rewards.d_s, mc, std::vector<double>{},
                                        [&](const Eigen::VectorXd& z, double g, std::vector<double>& acc) {
                                            if (z.squaredNorm() > r2) return;
                                            const double e = rewards.r_hat(z) - rewards.r_star(z, g);
                                            acc.push_back(e * e);
                                        });
    std::vector<double> all;
    for (const auto& s : shards) all.insert(all.end(), s.begin(), s.end());
    if (all.size() < 2) throw NumericalError("holdout_error: fewer than two draws inside B_R");
    return {stats::mean(all), stats::standard_error(all), all.size()};
}

}  // namespace tilted_sim
