#include <gtest/gtest.h>

#include <cmath>

#include "tilted_sim/feature_recovery.hpp"
#include "tilted_sim/presets.hpp"

using namespace tilted_sim;

namespace {

Eigen::VectorXd unit_with_overlap(Eigen::Index d, double m) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
    w(0) = m;
    w(1) = std::sqrt(1.0 - m * m);
    return w;
}

const PolynomialLink kDoubleWell = link_preset("double-well");

}  // namespace

TEST(SgdStep, ZeroStepLeavesDirection) {
    const auto w = unit_with_overlap(6, 0.3);
    Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(6, -1.0, 2.0);
    const auto r = sgd_step(w, x, -0.7, 0.0, 1.0, 2.0, kDoubleWell);
    EXPECT_FALSE(r.degenerate);
    EXPECT_EQ(r.w, w);
}

TEST(SgdStep, IncrementIsOrthogonalAndResultIsUnit) {
    RandomStream rng(3, 0);
    for (int trial = 0; trial < 200; ++trial) {
        const Eigen::VectorXd w = random_unit_vector(16, rng);
        Eigen::VectorXd x(16);
        for (auto& v : x) v = rng.normal();
        const double y = rng.uniform(-3.0, 1.0);
        const auto inc = sgd_increment(w, x, y, 1.5, kDoubleWell);
        EXPECT_LE(std::abs(w.dot(inc)), 1e-12 * (1.0 + inc.norm()));
        const auto r = sgd_step(w, x, y, 0.05, -0.3, 1.5, kDoubleWell);
        EXPECT_NEAR(r.w.norm(), 1.0, 1e-12);
    }
}

TEST(SgdStep, RejectsNonUnitInput) {
    Eigen::VectorXd w = Eigen::VectorXd::Ones(3);
    EXPECT_THROW(sgd_step(w, w, 1.0, 0.1, 1.0, 1.0, kDoubleWell), std::invalid_argument);
}

TEST(PopulationDrift, VanishesAtZeroOverlapForEvenExponent) {
    for (auto name : {"quad-down", "neg-he4", "double-well"})
        EXPECT_LT(std::abs(population_drift(0.0, 4.0, link_preset(name), kDoubleWell, 0.5)), 1e-8) << name;
}

TEST(PopulationDrift, MatchesHermiteSeries) {
    // drift(m) = (1 - m²) Σ_k m^k U_{k+1} V_k / k!; at m = 0 only U_1 V_0 survives.
    const auto link = link_preset("shifted-quad");
    const auto act = link_preset("shifted-quad");
    EXPECT_NEAR(population_drift(0.0, 3.0, link, act, 0.0),
                teacher_signal(1, 3.0, link, 0.0) * student_signal(1, act), 1e-10);
    // The series terminates at k = deg σ' for polynomial activations.
    const auto quad = link_preset("quad-down");
    for (double m : {-0.6, 0.1, 0.45, 0.9}) {
        double series = 0.0, fact = 1.0;
        for (std::size_t k = 0; k <= 3; ++k) {
            if (k > 0) fact *= static_cast<double>(k);
            series += std::pow(m, static_cast<double>(k)) * teacher_signal(k + 1, 2.0, quad, 0.3) *
                      student_signal(k + 1, kDoubleWell) / fact;
        }
        EXPECT_NEAR(population_drift(m, 2.0, quad, kDoubleWell, 0.3), (1.0 - m * m) * series, 1e-9) << m;
    }
}

TEST(PopulationDrift, SmallOverlapRate) {
    // drift(m)/m^{p-1} → U_p V_{p-1}/(p-1)! as m → 0.
    for (auto name : {"quad-down", "neg-he4"}) {
        const auto link = link_preset(name);
        const double m = 0.02, beta = 8.0;
        const double limit = teacher_signal(2, beta, link, 0.0) * student_signal(2, kDoubleWell);
        EXPECT_NEAR(population_drift(m, beta, link, kDoubleWell, 0.0) / m, limit, 0.05 * std::abs(limit)) << name;
    }
}

TEST(PopulationDrift, AgreesWithEmpiricalMeanStep) {
    const auto link = link_preset("quad-down");
    const double beta = 2.0, tau = 0.5;
    const Eigen::Index d = 4, n = 100000;
    const auto batch = sample_batch(d, default_theta(d), link, tau, n, 11);
    for (double m : {0.1, 0.3, 0.5}) {
        const auto w = unit_with_overlap(d, m);
        std::vector<double> proj(static_cast<std::size_t>(n)), flipped(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) {
            const Eigen::VectorXd x = batch.xs.row(i).transpose();
            proj[static_cast<std::size_t>(i)] = sgd_increment(w, x, batch.ys(i), beta, kDoubleWell)(0);
        }
        const double mean = stats::mean(proj), se = stats::standard_error(proj);
        EXPECT_NEAR(mean, population_drift(m, beta, link, kDoubleWell, tau), 3.0 * se) << m;
    }
}

TEST(PopulationDrift, NegatingReadoutNegatesStep) {
    const auto w = unit_with_overlap(5, 0.3);
    Eigen::VectorXd x(5);
    x << 0.4, -1.2, 0.3, 2.0, -0.1;
    const Eigen::VectorXd plus = sgd_step(w, x, -0.8, 0.01, 0.5, 1.0, kDoubleWell).w - w;
    const Eigen::VectorXd minus = sgd_step(w, x, -0.8, 0.01, -0.5, 1.0, kDoubleWell).w - w;
    // Equal and opposite up to the O(η²) normalization.
    EXPECT_LT((plus + minus).norm(), 1e-3 * plus.norm());
}

TEST(InitNetwork, ReadoutAndOverlaps) {
    const auto net = init_network(64, 200, 0.3, default_theta(64), 5, InitMode::exact_overlap);
    for (Eigen::Index j = 0; j < 200; ++j) {
        EXPECT_NEAR(net.w.row(j).norm(), 1.0, 1e-12);
        EXPECT_NEAR(net.w(j, 0), 0.125, 1e-12);
        EXPECT_EQ(std::abs(net.readout(j)), 0.3);
        EXPECT_EQ(net.biases(j), 0.0);
    }
}

TEST(RunRecovery, ZeroStepKeepsOverlapsConstant) {
    RecoveryConfig cfg;
    cfg.d = 16;
    cfg.neurons = 4;
    cfg.eta1 = 0.0;
    cfg.t_max = 5000;
    const auto tr = run_recovery(link_preset("quad-down"), kDoubleWell, cfg);
    for (const auto& series : tr.overlaps)
        for (double m : series) EXPECT_EQ(m, series.front());
    EXPECT_EQ(tr.steps_run, 5000u);
}

TEST(RunRecovery, TimesAreOrderedAndOverlapsBounded) {
    RecoveryConfig cfg;
    cfg.d = 32;
    cfg.neurons = 8;
    cfg.beta1 = 4.0;
    cfg.s_init = 0.05;
    cfg.c_wk = 0.5;
    cfg.t_max = 400000;
    cfg.seed = 2;
    const auto tr = run_recovery(link_preset("shifted-quad"), link_preset("shifted-quad"), cfg);
    for (std::size_t j = 0; j < tr.t_weak.size(); ++j) {
        if (tr.t_weak[j] && tr.t_strong[j]) {
            EXPECT_GE(*tr.t_strong[j], *tr.t_weak[j]);
        }
        for (double m : tr.overlaps[j]) {
            EXPECT_LE(std::abs(m), 1.0 + 1e-12);
        }
    }
    EXPECT_EQ(tr.times.size(), tr.overlaps[0].size());
}

TEST(RunRecovery, FirstExponentLinkRecoversConstantFraction) {
    RecoveryConfig cfg;
    cfg.d = 128;
    cfg.neurons = 16;
    cfg.beta1 = 4.0;
    cfg.t_max = 200'000;
    cfg.stop_after_weak = true;
    const auto link = link_preset("shifted-quad");
    const auto tr = run_recovery(link, link, cfg);
    EXPECT_GE(tr.recovered_fraction, 0.25);
}

TEST(RunRecovery, ReadoutFlipMirrorsOddPart) {
    // (a, σ*(u)) and (-a, σ*(-u)) recover the same fraction in distribution.
    const auto link = link_preset("shifted-quad");
    const PolynomialLink mirrored{0.0, -2.0, -1.0};
    const auto act = link_preset("shifted-quad");
    double plain = 0.0, flipped = 0.0;
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        RecoveryConfig cfg;
        cfg.d = 32;
        cfg.neurons = 16;
        cfg.beta1 = 4.0;
        cfg.t_max = 100000;
        cfg.stop_after_weak = true;
        cfg.seed = seed;
        plain += run_recovery(link, act, cfg).recovered_fraction;
        cfg.flip_readout = true;
        flipped += run_recovery(mirrored, act, cfg).recovered_fraction;
    }
    EXPECT_NEAR(plain / 6.0, flipped / 6.0, 0.2);
}

TEST(ScalingStudy, SingleRepeatGivesPointIntervals) {
    RecoveryConfig cfg;
    cfg.neurons = 4;
    cfg.beta1 = 4.0;
    cfg.s_init = 0.05;
    cfg.c_wk = 0.5;
    cfg.t_max = 400000;
    cfg.stop_after_weak = true;
    cfg.init = InitMode::exact_overlap;
    const auto link = link_preset("shifted-quad");
    const auto table = scaling_study(link, link, {16, 32}, {4.0}, 1, cfg);
    ASSERT_EQ(table.cells.size(), 2u);
    for (const auto& c : table.cells) {
        ASSERT_FALSE(c.censored);
        EXPECT_EQ(c.ci_weak.lo, c.median_t_weak);
        EXPECT_EQ(c.ci_weak.hi, c.median_t_weak);
    }
    ASSERT_EQ(table.slope_in_d.size(), 1u);
}
