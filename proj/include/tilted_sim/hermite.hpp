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

#include <boost/multiprecision/cpp_int.hpp>

#include <climits>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "errors.hpp"
#include "polynomial.hpp"
#include "quadrature.hpp"

namespace tilted_sim {

using ExactRational = boost::multiprecision::cpp_rational;
using ExactInteger = boost::multiprecision::cpp_int;

/// Marker for an infinite information/generative exponent.
inline constexpr int kInfiniteExponent = INT_MAX;

/// Largest Hermite degree `hermite_polynomial` will build.
inline constexpr std::size_t kHermiteDegreeCap = 64;

/// Probabilists' Hermite polynomial He_i in the monomial basis,
/// He_{i+1}(u) = u He_i(u) - i He_{i-1}(u).
template <class T = double>
Polynomial<T> hermite_polynomial(std::size_t i) {
    if (i > kHermiteDegreeCap)
        throw std::out_of_range("hermite_polynomial: degree " + std::to_string(i) + " exceeds cap " +
                                std::to_string(kHermiteDegreeCap));
    Polynomial<T> prev{T(1)};
    if (i == 0) return prev;
    Polynomial<T> cur{T(0), T(1)};
    const Polynomial<T> u{T(0), T(1)};
    for (std::size_t k = 1; k < i; ++k) {
        Polynomial<T> next = u * cur - prev * T(static_cast<long long>(k));
        prev = std::move(cur);
        cur = std::move(next);
    }
    return cur;
}

/// 𝖧_i[f] = E[f(G) He_i(G)] in the scalar type of f, from exact moments.
template <class T>
T hermite_coefficient_exact(const Polynomial<T>& f, std::size_t i) {
    return gaussian_expectation(f * hermite_polynomial<T>(i));
}

/// Doubles are dyadic rationals, so this conversion loses nothing.
inline Polynomial<ExactRational> to_exact(const PolynomialLink& f) {
    std::vector<ExactRational> c;
    c.reserve(f.coeffs().size());
    for (double v : f.coeffs()) c.emplace_back(v);
    return Polynomial<ExactRational>(std::move(c));
}

/// 𝖧_i[f] evaluated in exact rational arithmetic, then rounded to double.
inline double hermite_coefficient(const PolynomialLink& f, std::size_t i) {
    return static_cast<double>(hermite_coefficient_exact(to_exact(f), i));
}

/// 𝖧_i[f] by n-node Gauss-Hermite quadrature (exact once 2n-1 >= deg f + i).
inline double hermite_coefficient_quadrature(const PolynomialLink& f, std::size_t i, std::size_t nodes = 64) {
    const auto rule = gauss_hermite(nodes);
    const auto he = hermite_polynomial<double>(i);
    double acc = 0.0;
    for (std::size_t k = 0; k < rule->size(); ++k) acc += rule->weights[k] * f(rule->nodes[k]) * he(rule->nodes[k]);
    return acc;
}

/// Hermite coefficients 𝖧_0..𝖧_deg of a polynomial; higher ones vanish.
struct HermiteSpectrum {
    std::vector<double> coeffs;
};

inline HermiteSpectrum hermite_spectrum(const PolynomialLink& f) {
    HermiteSpectrum s;
    const auto exact = to_exact(f);
    for (std::size_t i = 0; i <= f.degree(); ++i)
        s.coeffs.push_back(static_cast<double>(hermite_coefficient_exact(exact, i)));
    return s;
}

namespace detail {

// Structural-zero test for 𝖧_i[f]: the exact value is compared with the
// magnitude of the moment terms of f·He_i, which bounds the effect of
// rounding already present in f's coefficients.
inline bool hermite_coefficient_vanishes(const Polynomial<ExactRational>& exact_f, const PolynomialLink& f,
                                         std::size_t i) {
    const double value = static_cast<double>(hermite_coefficient_exact(exact_f, i));
    const double scale = gaussian_term_scale(f * hermite_polynomial<double>(i));
    return std::abs(value) <= 1e-12 * (1.0 + scale);
}

inline int information_exponent_exact(const Polynomial<ExactRational>& exact_f, const PolynomialLink& f) {
    for (std::size_t i = 1; i <= f.degree(); ++i)
        if (!hermite_coefficient_vanishes(exact_f, f, i)) return static_cast<int>(i);
    return kInfiniteExponent;
}

}  // namespace detail

/// IE(f): smallest i >= 1 with 𝖧_i[f] != 0, or kInfiniteExponent.
inline int information_exponent(const PolynomialLink& f) {
    if (f.degree() < 1) throw std::invalid_argument("information_exponent: constant polynomial");
    return detail::information_exponent_exact(to_exact(f), f);
}

/// Result of the generative-exponent search over power transforms f^I.
struct ExponentReport {
    int ie = kInfiniteExponent;  ///< IE(f)
    int ge = kInfiniteExponent;  ///< min_I IE(f^I) over the searched powers
    int i_star = 1;              ///< smallest power attaining ge
    int search_bound = 0;        ///< largest power searched
};

/// GE(f) restricted to power transforms I = 1..i_max. For polynomial links
/// the minimum is attained by some power, but no bound on that power is
/// known, so the report only certifies minimality within `search_bound`.
inline ExponentReport generative_exponent(const PolynomialLink& f, int i_max = 8) {
    if (i_max < 1) throw std::invalid_argument("generative_exponent: i_max must be >= 1");
    if (f.degree() < 1) throw std::invalid_argument("generative_exponent: constant polynomial");
    if (f.degree() % 2 || !(f.leading() < 0.0))
        throw std::invalid_argument("generative_exponent: link must be bounded above (even degree, negative leading)");
    ExponentReport r;
    r.search_bound = i_max;
    const auto exact_f = to_exact(f);
    auto exact_pow = exact_f;
    auto pow = f;
    for (int power = 1; power <= i_max; ++power) {
        if (power > 1) {
            exact_pow = exact_pow * exact_f;
            pow = pow * f;
        }
        const int ie = detail::information_exponent_exact(exact_pow, pow);
        if (power == 1) r.ie = ie;
        if (ie < r.ge) {
            r.ge = ie;
            r.i_star = power;
        }
        if (r.ge == 1) break;
    }
    return r;
}

/// Options for the teacher-signal quadrature.
struct SignalQuadrature {
    std::size_t hermite_nodes = 200;   ///< initial Gauss-Hermite nodes in g
    std::size_t legendre_nodes = 64;   ///< initial Gauss-Legendre nodes in ζ
    std::size_t max_hermite_nodes = 4096;
    double tolerance = 1e-10;          ///< on |Δ| / max(1, |value|) between doublings
};

/// G_β(u) = E_ζ[(u + ζ) e^{(u+ζ)/β}], ζ ~ Unif[-τ, τ], by Gauss-Legendre in ζ.
inline double weighted_label_transform(double u, double beta, double tau, std::size_t legendre_nodes = 64) {
    if (tau == 0.0) return u * std::exp(u / beta);
    const auto rule = gauss_legendre(legendre_nodes);
    double acc = 0.0;
    for (std::size_t k = 0; k < rule->size(); ++k) {
        const double s = u + tau * rule->nodes[k];
        acc += rule->weights[k] * s * std::exp(s / beta);
    }
    return 0.5 * acc;
}

namespace detail {

inline double teacher_signal_fixed(std::size_t i, double beta1, const PolynomialLink& link, double tau,
                                   std::size_t nh, std::size_t nl) {
    const auto rule = gauss_hermite(nh);
    const auto he = hermite_polynomial<double>(i);
    double acc = 0.0;
    for (std::size_t k = 0; k < rule->size(); ++k) {
        if (rule->weights[k] == 0.0) continue;
        const double g = rule->nodes[k];
        acc += rule->weights[k] * weighted_label_transform(link(g), beta1, tau, nl) * he(g);
    }
    return acc;
}

}  // namespace detail

/// Teacher-side signal U_i(β₁) = E_g[G_{β₁}(σ*(g)) He_i(g)]. Node counts are
/// doubled until two successive values agree; throws ConvergenceError when
/// the Gauss-Hermite cap is reached first.
inline double teacher_signal(std::size_t i, double beta1, const PolynomialLink& link, double tau,
                             const SignalQuadrature& q = {}) {
    if (!(beta1 > 0.0)) throw std::invalid_argument("teacher_signal: beta1 must be positive");
    if (tau < 0.0) throw std::invalid_argument("teacher_signal: tau must be nonnegative");
    std::size_t nh = q.hermite_nodes, nl = q.legendre_nodes;
    double prev = detail::teacher_signal_fixed(i, beta1, link, tau, nh, nl);
    while (2 * nh <= q.max_hermite_nodes) {
        nh *= 2;
        nl *= 2;
        const double cur = detail::teacher_signal_fixed(i, beta1, link, tau, nh, nl);
        if (std::abs(cur - prev) <= q.tolerance * std::max(1.0, std::abs(cur))) return cur;
        prev = cur;
    }
    throw ConvergenceError("teacher_signal: Gauss-Hermite node cap reached", prev,
                           detail::teacher_signal_fixed(i, beta1, link, tau, nh, nl));
}

/// Student-side coefficient V_{i-1} = E[σ'(h) He_{i-1}(h)], exact.
inline double student_signal(std::size_t i, const PolynomialLink& activation) {
    if (i < 1) throw std::invalid_argument("student_signal: i must be >= 1");
    return hermite_coefficient(activation.derivative(), i - 1);
}

/// μ_i(β₁, a) = i·a·U_i(β₁)·V_{i-1}, the drift scale used for step sizes.
inline double drift_signal(std::size_t i, double beta1, double readout, const PolynomialLink& link,
                           const PolynomialLink& activation, double tau) {
    return static_cast<double>(i) * readout * teacher_signal(i, beta1, link, tau) * student_signal(i, activation);
}

}  // namespace tilted_sim
