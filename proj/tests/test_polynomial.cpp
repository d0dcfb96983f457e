#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "tilted_sim/polynomial.hpp"
#include "tilted_sim/quadrature.hpp"
#include "tilted_sim/special.hpp"

using namespace tilted_sim;

TEST(Polynomial, TrimsTrailingZerosAndReportsDegree) {
    PolynomialLink p{1.0, 2.0, 0.0, 0.0};
    EXPECT_EQ(p.degree(), 1u);
    EXPECT_TRUE(PolynomialLink{0.0}.is_zero());
}

TEST(Polynomial, ArithmeticAndEvaluation) {
    PolynomialLink a{1.0, 1.0};  // 1 + u
    const auto sq = a * a;
    EXPECT_EQ(sq, (PolynomialLink{1.0, 2.0, 1.0}));
    EXPECT_DOUBLE_EQ(sq(2.0), 9.0);
    EXPECT_EQ(a.pow(3), (PolynomialLink{1.0, 3.0, 3.0, 1.0}));
    EXPECT_EQ((sq - a * a).degree(), 0u);
    EXPECT_EQ(sq.derivative(), (PolynomialLink{2.0, 2.0}));
    EXPECT_EQ(sq.derivative(2), (PolynomialLink{2.0}));
    EXPECT_TRUE(sq.derivative(3).is_zero());
}

TEST(Polynomial, TaylorShiftMatchesExpansion) {
    // -(u^2 - 1)^2 at u = 1 + t is -4t^2 - 4t^3 - t^4.
    PolynomialLink dw{-1.0, 0.0, 2.0, 0.0, -1.0};
    const auto t = dw.taylor_shift(1.0);
    EXPECT_NEAR(t[0], 0.0, 1e-15);
    EXPECT_NEAR(t[1], 0.0, 1e-15);
    EXPECT_NEAR(t[2], -4.0, 1e-15);
    EXPECT_NEAR(t[3], -4.0, 1e-15);
    EXPECT_NEAR(t[4], -1.0, 1e-15);
}

TEST(Polynomial, GaussianMomentsAreDoubleFactorials) {
    EXPECT_EQ(gaussian_moment<long long>(0), 1);
    EXPECT_EQ(gaussian_moment<long long>(1), 0);
    EXPECT_EQ(gaussian_moment<long long>(2), 1);
    EXPECT_EQ(gaussian_moment<long long>(4), 3);
    EXPECT_EQ(gaussian_moment<long long>(6), 15);
    EXPECT_EQ(gaussian_moment<long long>(8), 105);
    // E[-g^2 + 3 g^4] = -1 + 9
    EXPECT_DOUBLE_EQ(gaussian_expectation(PolynomialLink{0.0, 5.0, -1.0, 7.0, 3.0}), 8.0);
}

TEST(Quadrature, GaussLegendreIntegratesPolynomialsExactly) {
    for (std::size_t n : {1u, 2u, 5u, 20u, 64u}) {
        const auto rule = gauss_legendre(n);
        double sum = 0.0, m2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            sum += rule->weights[i];
            m2 += rule->weights[i] * std::pow(rule->nodes[i], 2 * (n > 1 ? 1 : 0));
        }
        EXPECT_NEAR(sum, 2.0, 1e-13);
        if (n > 1) {
            EXPECT_NEAR(m2, 2.0 / 3.0, 1e-13);
        }
    }
    EXPECT_NEAR(integrate_legendre([](double x) { return std::exp(x); }, 0.0, 1.0), std::exp(1.0) - 1.0, 1e-14);
}

TEST(Quadrature, GaussHermiteReproducesGaussianMoments) {
    for (std::size_t n : {10u, 64u, 200u, 800u}) {
        const auto rule = gauss_hermite(n);
        for (std::size_t k = 0; k <= 12; k += 2) {
            double m = 0.0;
            for (std::size_t i = 0; i < n; ++i) m += rule->weights[i] * std::pow(rule->nodes[i], static_cast<int>(k));
            if (2 * n - 1 >= k) {
                EXPECT_NEAR(m, gaussian_moment<double>(k), 1e-11 * gaussian_moment<double>(k)) << n << " " << k;
            }
        }
    }
}

TEST(Special, ChiSquareCdfMatchesClosedForms) {
    // dof 2: 1 - exp(-x/2); dof 1: erf(sqrt(x/2)).
    for (double x : {0.1, 1.0, 3.0, 10.0}) {
        EXPECT_NEAR(chi_square_cdf(x, 2), 1.0 - std::exp(-0.5 * x), 1e-14);
        EXPECT_NEAR(chi_square_cdf(x, 1), std::erf(std::sqrt(0.5 * x)), 1e-14);
        EXPECT_NEAR(chi_square_cdf(x, 3) + chi_square_sf(x, 3), 1.0, 1e-14);
    }
    EXPECT_EQ(chi_square_cdf(0.0, 0), 1.0);
    EXPECT_EQ(chi_square_cdf(-1.0, 0), 0.0);
    EXPECT_EQ(chi_square_cdf(0.5, 0), 1.0);
}
