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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tilted_sim {

/// Univariate polynomial in the monomial basis, coefficient index = power.
///
/// Works for any field-like scalar (double, long double, Boost.Multiprecision
/// integers and rationals). Trailing zero coefficients are trimmed so that
/// `degree()` is always the index of the last nonzero coefficient; the zero
/// polynomial is stored as a single zero coefficient.
template <class T>
class Polynomial {
public:
    using value_type = T;

    Polynomial() : coeffs_{T(0)} {}
    Polynomial(std::initializer_list<T> c) : coeffs_(c) { trim(); }
    explicit Polynomial(std::vector<T> c) : coeffs_(std::move(c)) { trim(); }

    static Polynomial monomial(std::size_t power, T coeff = T(1)) {
        std::vector<T> c(power + 1, T(0));
        c[power] = coeff;
        return Polynomial(std::move(c));
    }

    const std::vector<T>& coeffs() const noexcept { return coeffs_; }
    std::size_t degree() const noexcept { return coeffs_.size() - 1; }
    bool is_zero() const { return coeffs_.size() == 1 && coeffs_[0] == T(0); }
    bool is_constant() const { return coeffs_.size() == 1; }
    const T& leading() const noexcept { return coeffs_.back(); }
    T operator[](std::size_t k) const { return k < coeffs_.size() ? coeffs_[k] : T(0); }

    /// Horner evaluation.
    template <class U>
    auto operator()(const U& x) const {
        using R = decltype(T() * x);
        R acc = R(coeffs_.back());
        for (std::size_t k = coeffs_.size() - 1; k-- > 0;) acc = acc * x + R(coeffs_[k]);
        return acc;
    }

    Polynomial derivative(std::size_t order = 1) const {
        if (order > degree()) return Polynomial();
        std::vector<T> c(coeffs_.size() - order);
        for (std::size_t k = order; k < coeffs_.size(); ++k) {
            T f(1);
            for (std::size_t j = 0; j < order; ++j) f *= T(static_cast<long long>(k - j));
            c[k - order] = coeffs_[k] * f;
        }
        return Polynomial(std::move(c));
    }

    /// Coefficients of p(x0 + t) as a polynomial in t.
    Polynomial taylor_shift(const T& x0) const {
        std::vector<T> c = coeffs_;
        const std::size_t n = c.size();
        for (std::size_t i = 0; i + 1 < n; ++i)
            for (std::size_t k = n - 1; k > i; --k) c[k - 1] += x0 * c[k];
        return Polynomial(std::move(c));
    }

    Polynomial pow(unsigned exponent) const {
        Polynomial result{T(1)};
        Polynomial base = *this;
        while (exponent) {
            if (exponent & 1u) result = result * base;
            exponent >>= 1u;
            if (exponent) base = base * base;
        }
        return result;
    }

    template <class U>
    Polynomial<U> cast() const {
        std::vector<U> c;
        c.reserve(coeffs_.size());
        for (const auto& v : coeffs_) c.push_back(static_cast<U>(v));
        return Polynomial<U>(std::move(c));
    }

    Polynomial& operator+=(const Polynomial& o) {
        if (o.coeffs_.size() > coeffs_.size()) coeffs_.resize(o.coeffs_.size(), T(0));
        for (std::size_t k = 0; k < o.coeffs_.size(); ++k) coeffs_[k] += o.coeffs_[k];
        trim();
        return *this;
    }
    Polynomial& operator-=(const Polynomial& o) {
        if (o.coeffs_.size() > coeffs_.size()) coeffs_.resize(o.coeffs_.size(), T(0));
        for (std::size_t k = 0; k < o.coeffs_.size(); ++k) coeffs_[k] -= o.coeffs_[k];
        trim();
        return *this;
    }
    Polynomial& operator*=(const T& s) {
        for (auto& v : coeffs_) v *= s;
        trim();
        return *this;
    }

    friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
    friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
    friend Polynomial operator*(Polynomial a, const T& s) { return a *= s; }
    friend Polynomial operator*(const T& s, Polynomial a) { return a *= s; }
    friend Polynomial operator-(Polynomial a) { return a *= T(-1); }
    friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
        std::vector<T> c(a.coeffs_.size() + b.coeffs_.size() - 1, T(0));
        for (std::size_t i = 0; i < a.coeffs_.size(); ++i)
            for (std::size_t j = 0; j < b.coeffs_.size(); ++j) c[i + j] += a.coeffs_[i] * b.coeffs_[j];
        return Polynomial(std::move(c));
    }
    friend bool operator==(const Polynomial& a, const Polynomial& b) { return a.coeffs_ == b.coeffs_; }

    friend std::ostream& operator<<(std::ostream& os, const Polynomial& p) {
        os << '[';
        for (std::size_t k = 0; k < p.coeffs_.size(); ++k) os << (k ? ", " : "") << p.coeffs_[k];
        return os << ']';
    }

private:
    void trim() {
        while (coeffs_.size() > 1 && coeffs_.back() == T(0)) coeffs_.pop_back();
        if (coeffs_.empty()) coeffs_.push_back(T(0));
    }

    std::vector<T> coeffs_;
};

/// Target links and activations are real polynomials.
using PolynomialLink = Polynomial<double>;

/// E[g^k] for g ~ N(0,1): (k-1)!! for even k, 0 for odd k.
template <class T>
T gaussian_moment(std::size_t k) {
    if (k % 2) return T(0);
    T m(1);
    for (std::size_t j = k; j > 1; j -= 2) m *= T(static_cast<long long>(j - 1));
    return m;
}

/// E[p(g)] for g ~ N(0,1) from the exact monomial moments.
template <class T>
T gaussian_expectation(const Polynomial<T>& p) {
    T acc(0);
    for (std::size_t k = 0; k < p.coeffs().size(); k += 2) acc += p.coeffs()[k] * gaussian_moment<T>(k);
    return acc;
}

/// Σ_k |c_k| E|g|^k restricted to even k, i.e. the magnitude of the terms
/// summed by `gaussian_expectation`. Used as the rounding-error scale for
/// deciding whether an exact moment is a structural zero.
inline double gaussian_term_scale(const PolynomialLink& p) {
    double s = 0.0;
    for (std::size_t k = 0; k < p.coeffs().size(); k += 2)
        s += std::abs(p.coeffs()[k]) * gaussian_moment<double>(k);
    return s;
}

}  // namespace tilted_sim
