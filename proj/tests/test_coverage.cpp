#include <gtest/gtest.h>

#include <cmath>

#include "tilted_sim/coverage.hpp"
#include "tilted_sim/presets.hpp"
#include "tilted_sim/stats.hpp"

using namespace tilted_sim;

namespace {

SubspaceRewards perturbed(const PolynomialLink& link, Eigen::Index d_s, double eps) {
    auto r = oracle_rewards(Eigen::VectorXd::Unit(d_s, 0), link);
    r.r_hat = [link, eps](const Eigen::VectorXd& z) { return link(z(0)) + eps * (z(1) - 0.5 * z(0) * z(0)); };
    return r;
}

// r(z) = Σ_k c_k σ(z_k) with unit directions along the first coordinates.
SubspaceNetwork coordinate_network(Eigen::Index d_s, const PolynomialLink& act, double c) {
    SubspaceNetwork m;
    m.w = Eigen::MatrixXd::Identity(d_s, d_s);
    m.bias = Eigen::VectorXd::Zero(d_s);
    m.coef = Eigen::VectorXd::Constant(d_s, c);
    m.activation = act;
    return m;
}

McConfig budget(std::size_t n, std::uint64_t seed = 0) {
    McConfig mc;
    mc.samples = n;
    mc.seed = seed;
    return mc;
}

}  // namespace

TEST(Coverage, OracleRewardIsFullyCovered) {
    const auto link = link_preset("double-well");
    const auto rewards = oracle_rewards(Eigen::VectorXd::Unit(3, 0), link);
    const auto cov = coverage_D(rewards, weighting_reward(WeightRule::label, rewards), 0.3, 3.0, budget(20000));
    EXPECT_NEAR(cov.d_value, 1.0, 1e-12);
    for (double v : cov.per_t_norms) EXPECT_NEAR(v, 1.0, 1e-12);
    EXPECT_NEAR(cov.shifted_norm, 0.0, 1e-12);
    EXPECT_EQ(cov.t_grid.size(), 17u);
}

TEST(Coverage, NormsRespectJensenFloor) {
    const auto link = link_preset("quad-down");
    for (auto rule : {WeightRule::label, WeightRule::surrogate, WeightRule::uniform}) {
        const auto rewards = perturbed(link, 2, 0.8);
        const auto a0 = coordinate_network(2, PolynomialLink{0.0, 1.0}, 0.3);
        const auto cov = coverage_D(rewards, weighting_reward(rule, rewards, a0), 0.5, 2.5, budget(50000, 3));
        for (std::size_t k = 0; k < cov.per_t_norms.size(); ++k)
            EXPECT_GE(cov.per_t_norms[k], 1.0 - 1e-12) << to_string(rule);
        EXPECT_GE(cov.d_value, 1.0 - 1e-12);
        EXPECT_NEAR(cov.d_value, cov.doubled_d_value, 1e-3 * cov.d_value);
        EXPECT_GT(cov.se, 0.0);
    }
}

TEST(Coverage, HighTemperatureFlattens) {
    const auto rewards = perturbed(link_preset("neg-he4"), 3, 1.0);
    const auto cov = coverage_D(rewards, weighting_reward(WeightRule::label, rewards), 1e3, 3.0, budget(50000));
    EXPECT_NEAR(cov.d_value, 1.0, 1e-3);
}

TEST(Coverage, DeterministicAcrossWorkers) {
    const auto rewards = perturbed(link_preset("quad-down"), 2, 0.4);
    auto mc = budget(30000, 5);
    mc.shard = 4096;
    const auto one = coverage_D(rewards, weighting_reward(WeightRule::label, rewards), 0.4, 2.0, mc);
    mc.workers = 4;
    const auto four = coverage_D(rewards, weighting_reward(WeightRule::label, rewards), 0.4, 2.0, mc);
    EXPECT_EQ(one.d_value, four.d_value);
    EXPECT_EQ(one.se, four.se);
}

TEST(Coverage, SurrogateNeedsModel) {
    const auto rewards = perturbed(link_preset("quad-down"), 2, 0.4);
    EXPECT_THROW(weighting_reward(WeightRule::surrogate, rewards), std::invalid_argument);
}

TEST(Coverage, CollapsedSampleIsAnError) {
    const auto rewards = perturbed(link_preset("quad-down"), 2, 30.0);
    EXPECT_THROW(coverage_D(rewards, weighting_reward(WeightRule::label, rewards), 0.01, 4.0, budget(2000)),
                 NumericalError);
}

TEST(Coverage, ShiftedNormIgnoresConstantOffset) {
    const auto link = link_preset("quad-down");
    auto rewards = oracle_rewards(Eigen::VectorXd::Unit(2, 0), link);
    rewards.r_hat = [link](const Eigen::VectorXd& z) { return link(z(0)) + 0.7; };
    const auto cov = coverage_D(rewards, weighting_reward(WeightRule::label, rewards), 0.5, 2.0, budget(10000));
    EXPECT_NEAR(cov.shift, 0.7, 1e-12);
    EXPECT_NEAR(cov.shifted_norm, 0.0, 1e-7);
    EXPECT_NEAR(cov.d_value, 1.0, 1e-12);
}

TEST(Bridge, InequalityHoldsOnPerturbedRewards) {
    const double radius = 3.0;
    for (auto name : {"quad-down", "double-well"}) {
        const auto link = link_preset(name);
        const auto mx = analyze_maxima(link);
        for (double beta2 : {0.2, 0.5}) {
            for (double eps : {0.1, 0.5}) {
                const auto rewards = perturbed(link, 2, eps);
                const auto mc = budget(100000, 11);
                const auto cov = coverage_D(rewards, weighting_reward(WeightRule::label, rewards), beta2, radius, mc);
                const auto learned = learned_policy_expectation(rewards, beta2, radius, mc);
                const double t_learn =
                    target_truncated_expectation(link, beta2, 2, radius, mx).expectation - learned.expectation;
                const double m_r = sup_abs_link(link, radius);
                const double bound = bridge_bound(beta2, m_r, cov);
                const double slack = 3.0 * std::hypot(learned.se, 2.0 / beta2 * m_r *
                                                                      std::hypot(cov.se * cov.shifted_norm,
                                                                                 cov.d_value * cov.shifted_norm_se));
                EXPECT_LE(std::abs(t_learn), bound + slack) << name << " " << beta2 << " " << eps;
            }
        }
    }
}

TEST(Bridge, SupAbsLink) {
    EXPECT_DOUBLE_EQ(sup_abs_link(link_preset("double-well"), 2.0), 9.0);
    EXPECT_DOUBLE_EQ(sup_abs_link(link_preset("double-well"), 1.2), 1.0);
    EXPECT_DOUBLE_EQ(sup_abs_link(link_preset("shifted-quad"), 0.5), 1.25);
    EXPECT_DOUBLE_EQ(sup_abs_link(link_preset("shifted-quad"), 3.0), 15.0);
}

TEST(SurrogateConstant, ZeroReadoutIsInverseBallMass) {
    const auto a0 = coordinate_network(3, PolynomialLink{0.0, 1.0}, 0.0);
    const double r = 1.5;
    const auto c = surrogate_constant(a0, 0.1, r, budget(200000));
    EXPECT_EQ(c.m_0r, 0.0);
    const double p = chi_square_cdf(r * r, 3);
    const double se = std::sqrt(p * (1.0 - p) / 200000.0) / (p * p);
    EXPECT_NEAR(c.constant, 1.0 / p, 3.0 * se);
}

TEST(SurrogateConstant, QuadraticPeakScalesAsHalfDimension) {
    for (Eigen::Index ds : {2, 3}) {
        const auto a0 = coordinate_network(ds, PolynomialLink{0.0, 0.0, -1.0}, static_cast<double>(ds));
        std::vector<double> xs, ys;
        for (double b : {0.02, 0.05, 0.1, 0.2, 0.5}) {
            const auto c = surrogate_constant(a0, b, 2.0, budget(200000, 1));
            EXPECT_NEAR(c.m_0r, 0.0, 1e-12);
            EXPECT_GE(c.constant, 1.0 / chi_square_cdf(4.0, static_cast<int>(ds)) * (1.0 - 1e-12));
            xs.push_back(std::log(1.0 / b));
            ys.push_back(c.log_constant);
        }
        const double slope = stats::least_squares_line(xs, ys).slope;
        EXPECT_LE(slope, static_cast<double>(ds) + 0.2);
        EXPECT_NEAR(slope, 0.5 * static_cast<double>(ds), 0.3) << ds;
    }
}

TEST(SurrogateConstant, BoundaryMaximumOfLinearSurrogate) {
    const auto a0 = coordinate_network(2, PolynomialLink{0.0, 1.0}, 0.5);
    const auto top = maximize_on_ball(a0, 1.7, 64, 0);
    // r = (z₀ + z₁)/2 peaks at R(1, 1)/√2.
    EXPECT_NEAR(top.value, 1.7 / std::sqrt(2.0), 1e-8);
    EXPECT_GT(top.converged, 0u);
}

TEST(Admissible, EmptyWhenToleranceTooSmall) {
    const std::vector<double> grid{0.05, 0.1, 0.2};
    AdmissibleRates rates;
    rates.rho_n = 0.1;
    rates.t2 = 1e4;
    GammaParams g;
    g.beta_star = 0.1;
    const auto s = admissible_set(WeightRule::label, 1e-9, {1.0, 1.0, 1.0}, rates, g, grid);
    for (bool b : s.admissible) EXPECT_FALSE(b);
    EXPECT_FALSE(s.chosen_beta.has_value());
}

TEST(Admissible, ResourcesOnlyEnlargeTheSet) {
    std::vector<double> grid;
    for (int k = 0; k < 40; ++k) grid.push_back(0.01 * std::pow(1.12, k));
    std::vector<double> env;
    for (double b : grid) env.push_back(1.0 + 0.3 / b);
    for (auto scheme : {WeightRule::label, WeightRule::surrogate}) {
        for (double eta : {10.0, 100.0, 1000.0}) {
            AdmissibleRates base;
            base.rho_n = 0.05;
            base.t2 = 1e3;
            base.alpha = scheme == WeightRule::label ? 0.5 : 2.0;
            GammaParams g;
            g.beta_star = 0.05;
            g.beta_bar = 0.3;
            const auto s0 = admissible_set(scheme, eta, env, base, g, grid);
            auto more = base;
            more.t2 *= 4.0;
            auto better = base;
            better.rho_n *= 0.5;
            for (const auto& r : {more, better}) {
                const auto s1 = admissible_set(scheme, eta, env, r, g, grid);
                for (std::size_t k = 0; k < grid.size(); ++k)
                    if (s0.admissible[k]) {
                        EXPECT_TRUE(s1.admissible[k]);
                    }
            }
            const auto again = admissible_set(scheme, eta, env, base, g, grid);
            EXPECT_EQ(again.admissible, s0.admissible);
            EXPECT_EQ(again.chosen_index, s0.chosen_index);
        }
    }
}

TEST(Admissible, TargetTemperatureChosenWhenAdmissible) {
    const std::vector<double> grid{0.05, 0.1, 0.15, 0.2};
    AdmissibleRates rates;
    rates.t2 = 1e8;
    GammaParams g;
    g.beta_star = 0.15;
    g.beta_bar = 0.2;
    g.c_r = 0.4;
    g.c_temp = 1.0;
    const auto s = admissible_set(WeightRule::label, 1e6, {1.0, 1.0, 1.0, 1.0}, rates, g, grid);
    ASSERT_TRUE(s.chosen_beta.has_value());
    // With C_R < 1/(2p) + C_temp β̄^κ the mismatch term dominates, so β* wins.
    EXPECT_EQ(*s.chosen_beta, 0.15);
    EXPECT_DOUBLE_EQ(s.gamma_values[*s.chosen_index], 0.4 * 0.15);
}

TEST(Admissible, InfiniteEnvelopeAndAboveCutoffExcluded) {
    const std::vector<double> grid{0.1, 0.2, 0.4};
    AdmissibleRates rates;
    rates.t2 = 1e8;
    GammaParams g;
    g.beta_bar = 0.3;
    const double inf = std::numeric_limits<double>::infinity();
    const auto s = admissible_set(WeightRule::label, 1e9, {inf, 1.0, 1.0}, rates, g, grid);
    EXPECT_FALSE(s.admissible[0]);
    EXPECT_TRUE(s.admissible[1]);
    EXPECT_FALSE(s.admissible[2]);
}

TEST(GammaCalibration, QuadDownNeedsNoTemperatureCorrection) {
    // m_β = -β/(β+2) has slope at most 1/2 = 1/(2p_max).
    const auto g = calibrate_gamma(link_preset("quad-down"), 4.0, 2, {0.01, 0.05, 0.1, 0.2}, 0.05);
    EXPECT_LE(g.c_temp, 1e-12);
    EXPECT_GE(g.c_r, 0.0);
    EXPECT_EQ(g.p_max, 1);
    const auto dw = calibrate_gamma(link_preset("double-well"), 3.0, 2, {0.01, 0.05, 0.1, 0.2}, 0.05);
    for (double a : {0.01, 0.03, 0.2})
        for (double b : {0.02, 0.1}) {
            const auto mx = analyze_maxima(link_preset("double-well"));
            const double tt = tilted_1d_moments(link_preset("double-well"), a, mx).mean -
                              tilted_1d_moments(link_preset("double-well"), b, mx).mean;
            EXPECT_LE(std::abs(tt), 1.05 * (0.5 + dw.c_temp * std::pow(dw.beta_bar, dw.kappa)) * std::abs(a - b));
        }
}
