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
#include <complex>
#include <limits>
#include <cstdint>
#include <string>
#include <vector>

#include "errors.hpp"
#include "polynomial.hpp"
#include "rng.hpp"
#include "special.hpp"

namespace tilted_sim {

enum class LinkRole {
    target,      ///< σ*: must be bounded above
    activation,  ///< σ: only required to be nonconstant
};

struct LinkValidation {
    bool ok = false;
    std::string reason;
    explicit operator bool() const noexcept { return ok; }
};

inline LinkValidation validate_link(const PolynomialLink& f, LinkRole role = LinkRole::target) {
    if (f.degree() < 1) return {false, "constant polynomial"};
    if (role == LinkRole::activation) return {true, ""};
    if (f.degree() % 2) return {false, "odd degree " + std::to_string(f.degree()) + " is unbounded above"};
    if (!(f.leading() < 0.0)) return {false, "leading coefficient must be negative"};
    return {true, ""};
}

/// One global maximizer: f(u + t) = B* - c t^{2p} + o(t^{2p}).
struct Maximizer {
    double location = 0.0;
    int order = 1;           ///< p
    double curvature = 0.0;  ///< c > 0
    double laplace_weight = 0.0;  ///< A = φ(u) ∫ exp(-c s^{2p}) ds
    double weight = 0.0;          ///< normalized over dominant maximizers, 0 otherwise
    bool dominant = false;        ///< p == p_max
};

struct MaximaReport {
    double b_star = 0.0;
    std::vector<Maximizer> maximizers;
    int p_max = 1;
    double kappa = 0.5;

    double alpha() const noexcept { return 1.0 / (2.0 * p_max); }
    /// Σ A_i over dominant maximizers.
    double laplace_constant() const noexcept {
        double s = 0.0;
        for (const auto& m : maximizers)
            if (m.dominant) s += m.laplace_weight;
        return s;
    }
    double max_abs_location(bool dominant_only = true) const noexcept {
        double r = 0.0;
        for (const auto& m : maximizers)
            if (m.dominant || !dominant_only) r = std::max(r, std::abs(m.location));
        return r;
    }
};

namespace detail {

struct RealRoot {
    double location;
    std::size_t multiplicity;
};

// Real roots with multiplicities. A root of multiplicity m splits into m
// eigenvalues on a circle of radius ~ eps^{1/m}; the cluster mean is accurate.
inline std::vector<RealRoot> real_roots(const PolynomialLink& p) {
    const std::size_t n = p.degree();
    if (n == 0) return {};
    if (n == 1) return {{-p[0] / p[1], 1}};
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k) companion(0, static_cast<Eigen::Index>(k)) = -p[n - 1 - k] / p[n];
    for (std::size_t k = 1; k < n; ++k) companion(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k - 1)) = 1.0;
    Eigen::EigenSolver<Eigen::MatrixXd> es(companion, false);
    if (es.info() != Eigen::Success) throw NumericalError("analyze_maxima: companion eigenvalue solve failed");
    std::vector<std::complex<double>> z(es.eigenvalues().data(), es.eigenvalues().data() + n);
    std::vector<int> cluster(n, -1);
    int clusters = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (cluster[i] >= 0) continue;
        cluster[i] = clusters;
        // Grow transitively so a ring of split eigenvalues stays together.
        for (bool grew = true; grew;) {
            grew = false;
            for (std::size_t j = 0; j < n; ++j) {
                if (cluster[j] >= 0) continue;
                for (std::size_t k = 0; k < n; ++k) {
                    if (cluster[k] != clusters) continue;
                    if (std::abs(z[j] - z[k]) <= 1e-3 * (1.0 + std::abs(z[k]))) {
                        cluster[j] = clusters;
                        grew = true;
                        break;
                    }
                }
            }
        }
        ++clusters;
    }
    std::vector<RealRoot> out;
    for (int c = 0; c < clusters; ++c) {
        std::complex<double> sum = 0.0;
        std::size_t m = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (cluster[i] == c) {
                sum += z[i];
                ++m;
            }
        const auto mean = sum / static_cast<double>(m);
        if (std::abs(mean.imag()) <= 1e-6 * (1.0 + std::abs(mean.real()))) out.push_back({mean.real(), m});
    }
    return out;
}

inline double newton_root(const PolynomialLink& g, double x) {
    const auto dg = g.derivative();
    for (int it = 0; it < 100; ++it) {
        const double d = dg(x);
        if (d == 0.0) break;
        const double step = g(x) / d;
        x -= step;
        if (std::abs(step) <= 1e-15 * (1.0 + std::abs(x))) break;
    }
    return x;
}

// First Taylor order j >= 1 at u whose coefficient is not negligible.
inline std::size_t leading_taylor_order(const PolynomialLink& f, double u, double* coeff) {
    const auto t = f.taylor_shift(u);
    double scale = 1.0;
    for (std::size_t k = 1; k < t.coeffs().size(); ++k) scale = std::max(scale, std::abs(t[k]));
    for (std::size_t k = 1; k < t.coeffs().size(); ++k) {
        if (std::abs(t[k]) > 1e-8 * scale) {
            *coeff = t[k];
            return k;
        }
    }
    *coeff = 0.0;
    return 0;
}

}  // namespace detail

/// Global maximizers of a polynomial bounded above, with local orders,
/// curvatures and Laplace weights.
inline MaximaReport analyze_maxima(const PolynomialLink& f) {
    if (auto v = validate_link(f, LinkRole::target); !v) throw std::invalid_argument("analyze_maxima: " + v.reason);
    const auto df = f.derivative();
    const auto roots = detail::real_roots(df);
    if (roots.empty()) throw NumericalError("analyze_maxima: no real critical point found");

    // Polish each root of multiplicity m with Newton on f^{(m)}, where it is simple.
    std::vector<double> candidates;
    for (const auto& root : roots) candidates.push_back(detail::newton_root(f.derivative(root.multiplicity), root.location));
    std::sort(candidates.begin(), candidates.end());
    std::vector<double> unique;
    for (double u : candidates)
        if (unique.empty() || std::abs(u - unique.back()) > 1e-6 * (1.0 + std::abs(u))) unique.push_back(u);

    MaximaReport r;
    r.b_star = -std::numeric_limits<double>::infinity();
    for (double u : unique) r.b_star = std::max(r.b_star, f(u));
    const double tol = 1e-9 * (1.0 + std::abs(r.b_star));

    r.p_max = 0;
    for (double u : unique) {
        if (f(u) < r.b_star - tol) continue;
        double coeff = 0.0;
        const std::size_t order = detail::leading_taylor_order(f, u, &coeff);
        if (order < 2 || order % 2 || !(coeff < 0.0))
            throw NumericalError("analyze_maxima: maximizer at " + std::to_string(u) +
                                 " has no even negative leading Taylor term");
        Maximizer m;
        m.location = u;
        m.order = static_cast<int>(order / 2);
        m.curvature = -coeff;
        const double inv = 1.0 / (2.0 * m.order);
        m.laplace_weight = normal_pdf(u) * std::tgamma(inv) * std::pow(m.curvature, -inv) / m.order;
        r.maximizers.push_back(m);
        r.p_max = std::max(r.p_max, m.order);
    }
    if (r.maximizers.empty()) throw NumericalError("analyze_maxima: global maximizer lost during filtering");

    double total = 0.0;
    double second = std::numeric_limits<double>::infinity();
    for (auto& m : r.maximizers) {
        m.dominant = m.order == r.p_max;
        if (m.dominant)
            total += m.laplace_weight;
        else
            second = std::min(second, 1.0 / (2.0 * m.order) - 1.0 / (2.0 * r.p_max));
    }
    for (auto& m : r.maximizers)
        if (m.dominant) m.weight = m.laplace_weight / total;
    r.kappa = std::min(1.0 / (2.0 * r.p_max), second);
    return r;
}

/// Reward samples y = σ*(⟨θ*, x⟩) + ζ with x ~ N(0, I_d), ζ ~ Unif[-τ, τ].
struct SampleBatch {
    Eigen::MatrixXd xs;  ///< n × d
    Eigen::VectorXd zetas;
    Eigen::VectorXd ys;
    Eigen::VectorXd theta_star;
    std::uint64_t seed = 0;
    double tau = 0.0;

    Eigen::Index size() const noexcept { return xs.rows(); }
    Eigen::Index dim() const noexcept { return xs.cols(); }
};

/// First standard basis vector.
inline Eigen::VectorXd default_theta(Eigen::Index d) {
    Eigen::VectorXd t = Eigen::VectorXd::Zero(d);
    t(0) = 1.0;
    return t;
}

/// Uniform direction on the sphere.
inline Eigen::VectorXd random_unit_vector(Eigen::Index d, RandomStream& rng) {
    Eigen::VectorXd v(d);
    double norm = 0.0;
    do {
        for (Eigen::Index i = 0; i < d; ++i) v(i) = rng.normal();
        norm = v.norm();
    } while (norm == 0.0);
    return v / norm;
}

inline SampleBatch sample_batch(Eigen::Index d, const Eigen::VectorXd& theta_star, const PolynomialLink& link,
                                double tau, Eigen::Index n, std::uint64_t seed,
                                std::uint64_t stream = streams::samples) {
    if (n < 1) throw std::invalid_argument("sample_batch: n must be >= 1");
    if (theta_star.size() != d) throw std::invalid_argument("sample_batch: theta_star has wrong dimension");
    if (std::abs(theta_star.norm() - 1.0) > 1e-12) throw std::invalid_argument("sample_batch: theta_star must be unit norm");
    if (tau < 0.0) throw std::invalid_argument("sample_batch: tau must be nonnegative");
    if (auto v = validate_link(link); !v) throw std::invalid_argument("sample_batch: " + v.reason);
    SampleBatch b;
    b.seed = seed;
    b.tau = tau;
    b.theta_star = theta_star;
    b.xs.resize(n, d);
    b.zetas.resize(n);
    b.ys.resize(n);
    RandomStream rng(seed, stream);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) b.xs(i, j) = rng.normal();
        b.zetas(i) = tau > 0.0 ? rng.uniform(-tau, tau) : 0.0;
    }
    const Eigen::VectorXd proj = b.xs * theta_star;
    for (Eigen::Index i = 0; i < n; ++i) b.ys(i) = link(proj(i)) + b.zetas(i);
    return b;
}

}  // namespace tilted_sim
