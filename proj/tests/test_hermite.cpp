#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "tilted_sim/hermite.hpp"
#include "tilted_sim/presets.hpp"

using namespace tilted_sim;

namespace {

double factorial(int n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

// Closed form of U_2(β) for σ* = -u² with uniform noise: the tilt e^{-g²/β}φ(g)
// is Gaussian with variance s² = β/(β+2) and mass s.
double quad_down_u2(double beta, double tau) {
    const double s2 = beta / (beta + 2.0);
    double z_noise = 1.0, m_noise = 0.0;
    if (tau > 0.0) {
        z_noise = beta / tau * std::sinh(tau / beta);
        m_noise = tau / std::tanh(tau / beta) - beta;
    }
    // E[e^{-g²/β}(-g² + m)(g² - 1)]
    const double z = std::sqrt(s2);
    return z_noise * z * (-(3.0 * s2 * s2 - s2) + m_noise * (s2 - 1.0));
}

}  // namespace

TEST(HermitePolynomial, RecurrenceBaseCases) {
    EXPECT_EQ(hermite_polynomial(0), (PolynomialLink{1.0}));
    EXPECT_EQ(hermite_polynomial(2), (PolynomialLink{-1.0, 0.0, 1.0}));
    EXPECT_EQ(hermite_polynomial(4), (PolynomialLink{3.0, 0.0, -6.0, 0.0, 1.0}));
}

TEST(HermitePolynomial, CapIsEnforced) {
    EXPECT_NO_THROW(hermite_polynomial(32));
    EXPECT_THROW(hermite_polynomial(kHermiteDegreeCap + 1), std::out_of_range);
}

TEST(HermiteCoefficient, ExactMomentExamples) {
    EXPECT_DOUBLE_EQ(hermite_coefficient(PolynomialLink{0.0, 2.0, -1.0}, 1), 2.0);
    EXPECT_DOUBLE_EQ(hermite_coefficient(PolynomialLink{0.0, 0.0, 2.0, 0.0, -1.0}, 2), -8.0);
    const PolynomialLink even{1.0, 0.0, -3.0, 0.0, 0.5, 0.0, -2.0};
    for (std::size_t i = 1; i <= 9; i += 2) EXPECT_EQ(hermite_coefficient(even, i), 0.0);
}

TEST(HermiteCoefficient, OrthogonalityIsExactInIntegerArithmetic) {
    for (std::size_t i = 0; i <= 12; ++i) {
        const auto hi = hermite_polynomial<ExactInteger>(i);
        for (std::size_t j = 0; j <= 12; ++j) {
            const ExactInteger inner = gaussian_expectation(hi * hermite_polynomial<ExactInteger>(j));
            const ExactInteger expected = i == j ? ExactInteger(static_cast<long long>(factorial(static_cast<int>(i)))) : ExactInteger(0);
            EXPECT_EQ(inner, expected) << i << "," << j;
        }
    }
}

TEST(HermiteCoefficient, QuadratureAgreesWithExactPath) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> coef(-2.0, 2.0);
    for (int trial = 0; trial < 40; ++trial) {
        std::vector<double> c(static_cast<std::size_t>(1 + trial % 11));
        for (auto& v : c) v = coef(rng);
        const PolynomialLink f(c);
        // Relative to the Cauchy-Schwarz bound ||f|| sqrt(i!) on the coefficient.
        const double norm = std::sqrt(gaussian_expectation(f * f));
        for (std::size_t i = 0; i <= 10; ++i)
            EXPECT_NEAR(hermite_coefficient_quadrature(f, i, 64), hermite_coefficient(f, i),
                        1e-10 * norm * std::sqrt(factorial(static_cast<int>(i))))
                << trial << " " << i;
    }
}

TEST(HermiteCoefficient, SpectrumLengthAndReconstruction) {
    const auto f = link_preset("neg-he4");
    const auto s = hermite_spectrum(f);
    ASSERT_EQ(s.coeffs.size(), f.degree() + 1);
    EXPECT_DOUBLE_EQ(s.coeffs[4], -24.0);  // -He_4 has 𝖧_4 = -4!
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(s.coeffs[i], 0.0);
}

TEST(Exponents, InformationExponentExamples) {
    EXPECT_EQ(information_exponent(PolynomialLink{0.0, 2.0, -1.0}), 1);
    EXPECT_EQ(information_exponent(-hermite_polynomial(4)), 4);
    EXPECT_EQ(information_exponent(PolynomialLink{0.0, 0.0, -1.0}), 2);
    EXPECT_THROW(information_exponent(PolynomialLink{3.0}), std::invalid_argument);
}

TEST(Exponents, GenerativeExponentExamples) {
    auto r = generative_exponent(PolynomialLink{0.0, 0.0, -1.0}, 4);
    EXPECT_EQ(r.ge, 2);
    EXPECT_EQ(r.i_star, 1);
    EXPECT_EQ(r.search_bound, 4);

    r = generative_exponent(-hermite_polynomial(4), 4);
    EXPECT_EQ(r.ie, 4);
    EXPECT_EQ(r.ge, 2);
    EXPECT_EQ(r.i_star, 2);
    // Linearization He_4² = He_8 + 16He_6 + 72He_4 + 96He_2 + 24.
    EXPECT_DOUBLE_EQ(hermite_coefficient(hermite_polynomial(4).pow(2), 2), 192.0);

    r = generative_exponent(PolynomialLink{0.0, 2.0, -1.0}, 2);
    EXPECT_EQ(r.ge, 1);
    EXPECT_EQ(r.i_star, 1);

    r = generative_exponent(link_preset("double-well"));
    EXPECT_EQ(r.ge, 2);
    EXPECT_EQ(r.i_star, 1);
    EXPECT_THROW(generative_exponent(PolynomialLink{0.0, 0.0, 0.0, 1.0}), std::invalid_argument);
    EXPECT_THROW(generative_exponent(PolynomialLink{0.0, 0.0, -1.0}, 0), std::invalid_argument);
}

TEST(Exponents, GenerativeNeverExceedsInformation) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> coef(-1.0, 1.0);
    for (int trial = 0; trial < 25; ++trial) {
        std::vector<double> c(5);
        for (auto& v : c) v = coef(rng);
        if (trial % 3 == 0) c[1] = c[3] = 0.0;  // even links exercise ge = 2
        c[4] = -std::abs(c[4]) - 0.1;
        const auto r = generative_exponent(PolynomialLink(c), 4);
        EXPECT_LE(r.ge, r.ie);
        if (r.i_star == 1) {
            EXPECT_EQ(r.ge, r.ie);
        }
    }
}

TEST(TeacherSignal, MatchesGaussianClosedForm) {
    const PolynomialLink quad{0.0, 0.0, -1.0};
    for (double beta : {0.5, 1.0, 10.0, 1000.0})
        for (double tau : {0.0, 0.5, 2.0})
            EXPECT_NEAR(teacher_signal(2, beta, quad, tau), quad_down_u2(beta, tau),
                        1e-10 * std::max(1.0, std::abs(quad_down_u2(beta, tau))))
                << beta << " " << tau;
}

TEST(TeacherSignal, LowerDegreesVanish) {
    for (auto name : {"quad-down", "neg-he4", "double-well"}) {
        const auto link = link_preset(name);
        for (double beta : {1.0, 10.0, 100.0})
            for (double tau : {0.0, 0.5}) EXPECT_LT(std::abs(teacher_signal(1, beta, link, tau)), 1e-8) << name;
    }
    // Odd degrees vanish for even links without noise.
    EXPECT_LT(std::abs(teacher_signal(3, 2.0, link_preset("double-well"), 0.0)), 1e-12);
}

TEST(TeacherSignal, NegHe4LeadingCoefficient) {
    // U_2(β)·β → 𝖧_2[(σ*)²]/1! = 192; the next order is O(1/β).
    const auto link = link_preset("neg-he4");
    const double beta = 1e5;
    EXPECT_NEAR(teacher_signal(2, beta, link, 0.0) * beta / 192.0, 1.0, 1e-2);
}

TEST(TeacherSignal, RejectsBadTemperature) {
    EXPECT_THROW(teacher_signal(2, 0.0, link_preset("quad-down"), 0.0), std::invalid_argument);
}

TEST(StudentSignal, ExactExamples) {
    EXPECT_DOUBLE_EQ(student_signal(2, PolynomialLink{0.0, 0.0, -1.0}), -2.0);
    EXPECT_DOUBLE_EQ(student_signal(1, PolynomialLink{0.0, 1.0, 0.0, 0.0, -1.0}), 1.0);
    // σ even => σ' odd => V_{i-1} = 0 for odd i.
    EXPECT_EQ(student_signal(3, link_preset("double-well")), 0.0);
    EXPECT_DOUBLE_EQ(student_signal(2, link_preset("double-well")), -8.0);
    EXPECT_THROW(student_signal(0, PolynomialLink{0.0, 1.0}), std::invalid_argument);
}
