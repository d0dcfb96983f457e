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

#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <vector>

namespace tilted_sim {

/// Nodes and weights of a one-dimensional quadrature rule.
struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
    std::size_t size() const noexcept { return nodes.size(); }
};

namespace detail {

inline QuadratureRule compute_gauss_legendre(std::size_t n) {
    QuadratureRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const std::size_t half = (n + 1) / 2;
    for (std::size_t i = 0; i < half; ++i) {
        double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (std::size_t k = 2; k <= n; ++k) {
                const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
                p0 = p1;
                p1 = pk;
            }
            if (n == 1) { p1 = x; p0 = 1.0; }
            dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        if (n == 1) { x = 0.0; dp = 1.0; }
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    if (n == 1) rule.weights[0] = 2.0;
    return rule;
}

// Probabilists' Gauss-Hermite rule for the weight φ(x): nodes from the
// symmetric Jacobi matrix, weights from orthonormal Hermite functions so
// that large nodes do not overflow.
inline QuadratureRule compute_gauss_hermite(std::size_t n) {
    QuadratureRule rule;
    if (n == 1) {
        rule.nodes = {0.0};
        rule.weights = {1.0};
        return rule;
    }
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    Eigen::VectorXd sub(static_cast<Eigen::Index>(n - 1));
    for (std::size_t k = 1; k < n; ++k) sub(static_cast<Eigen::Index>(k - 1)) = std::sqrt(static_cast<double>(k));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw std::runtime_error("Gauss-Hermite eigenvalue solve failed");
    rule.nodes.assign(es.eigenvalues().data(), es.eigenvalues().data() + n);
    rule.weights.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double x = rule.nodes[i];
        // Orthonormal recurrence q_k = He_k/sqrt(k!), rescaled to stay finite far in the tails.
        // Returns log of sum_{k<n} q_k^2 and leaves q_{n-1}, q_n (common scale) in q0, q1.
        double q0 = 0.0, q1 = 1.0;
        auto run = [&](double at) {
            q0 = 0.0;
            q1 = 1.0;
            double sum = 1.0, log_scale = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                const double q2 = (at * q1 - std::sqrt(static_cast<double>(k)) * q0) / std::sqrt(k + 1.0);
                q0 = q1;
                q1 = q2;
                if (k + 1 < n) sum += q1 * q1;
                if (std::abs(q1) > 1e150) {
                    q0 *= 1e-150;
                    q1 *= 1e-150;
                    sum *= 1e-300;
                    log_scale += 150.0 * std::numbers::ln10;
                }
            }
            return std::log(sum) + 2.0 * log_scale;
        };
        for (int it = 0; it < 3; ++it) {
            run(x);
            // He_n' = n He_{n-1}, so q_n' = sqrt(n) q_{n-1}.
            const double deriv = std::sqrt(static_cast<double>(n)) * q0;
            if (deriv == 0.0 || !std::isfinite(q1 / deriv)) break;
            const double dx = q1 / deriv;
            x -= dx;
            if (std::abs(dx) < 1e-15 * (1.0 + std::abs(x))) break;
        }
        rule.nodes[i] = x;
        rule.weights[i] = std::exp(-run(x));
    }
    // Symmetrize against round-off.
    for (std::size_t i = 0; i < n / 2; ++i) {
        const double x = 0.5 * (rule.nodes[n - 1 - i] - rule.nodes[i]);
        const double w = 0.5 * (rule.weights[n - 1 - i] + rule.weights[i]);
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        rule.weights[i] = rule.weights[n - 1 - i] = w;
    }
    if (n % 2) rule.nodes[n / 2] = 0.0;
    return rule;
}

template <class Make>
std::shared_ptr<const QuadratureRule> cached_rule(std::map<std::size_t, std::shared_ptr<const QuadratureRule>>& cache,
                                                  std::mutex& mutex, std::size_t n, Make make) {
    if (n == 0) throw std::invalid_argument("quadrature rule needs at least one node");
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    auto rule = std::make_shared<const QuadratureRule>(make(n));
    cache.emplace(n, rule);
    return rule;
}

}  // namespace detail

/// Gauss-Legendre rule on [-1, 1]; rules are cached per node count.
inline std::shared_ptr<const QuadratureRule> gauss_legendre(std::size_t n) {
    static std::map<std::size_t, std::shared_ptr<const QuadratureRule>> cache;
    static std::mutex mutex;
    return detail::cached_rule(cache, mutex, n, detail::compute_gauss_legendre);
}

/// Gauss-Hermite rule for E[f(G)], G ~ N(0,1): Σ w_i f(x_i) with Σ w_i = 1.
inline std::shared_ptr<const QuadratureRule> gauss_hermite(std::size_t n) {
    static std::map<std::size_t, std::shared_ptr<const QuadratureRule>> cache;
    static std::mutex mutex;
    return detail::cached_rule(cache, mutex, n, detail::compute_gauss_hermite);
}

/// ∫_a^b f with an n-point Gauss-Legendre rule.
template <class F>
double integrate_legendre(F&& f, double a, double b, std::size_t n = 20) {
    const auto rule = gauss_legendre(n);
    const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
    double acc = 0.0;
    for (std::size_t i = 0; i < rule->size(); ++i) acc += rule->weights[i] * f(mid + half * rule->nodes[i]);
    return acc * half;
}

/// Composite Gauss-Legendre over consecutive breakpoints (must be sorted).
template <class F>
double integrate_panels(F&& f, const std::vector<double>& breaks, std::size_t n = 20) {
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i)
        if (breaks[i + 1] > breaks[i]) acc += integrate_legendre(f, breaks[i], breaks[i + 1], n);
    return acc;
}

/// Splits every panel in two.
inline std::vector<double> refine_panels(const std::vector<double>& breaks) {
    std::vector<double> out;
    out.reserve(2 * breaks.size());
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        out.push_back(breaks[i]);
        out.push_back(0.5 * (breaks[i] + breaks[i + 1]));
    }
    if (!breaks.empty()) out.push_back(breaks.back());
    return out;
}

}  // namespace tilted_sim
