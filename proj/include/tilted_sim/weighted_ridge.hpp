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
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tilted_sim/errors.hpp"
#include "tilted_sim/feature_recovery.hpp"
#include "tilted_sim/polynomial.hpp"
#include "tilted_sim/reward_model.hpp"
#include "tilted_sim/rng.hpp"
#include "tilted_sim/stats.hpp"

namespace tilted_sim {

/// ψ_N(x) = (1/N)(σ(⟨w_j, x⟩ + b_j))_j.
inline Eigen::VectorXd feature_map(const Eigen::VectorXd& x, const NetworkState& net, const PolynomialLink& activation) {
    if (x.size() != net.dim()) throw std::invalid_argument("feature_map: dimension mismatch");
    const Eigen::VectorXd pre = net.w * x + net.biases;
    Eigen::VectorXd psi(pre.size());
    const double inv_n = 1.0 / static_cast<double>(net.neurons());
    for (Eigen::Index j = 0; j < pre.size(); ++j) psi(j) = activation(pre(j)) * inv_n;
    return psi;
}

/// Rows ψ_N(x_i) for every row x_i of xs.
inline Eigen::MatrixXd feature_matrix(const Eigen::MatrixXd& xs, const NetworkState& net,
                                      const PolynomialLink& activation) {
    if (xs.cols() != net.dim()) throw std::invalid_argument("feature_matrix: dimension mismatch");
    Eigen::MatrixXd pre = xs * net.w.transpose();
    pre.rowwise() += net.biases.transpose();
    const double inv_n = 1.0 / static_cast<double>(net.neurons());
    return pre.unaryExpr([&](double u) { return activation(u) * inv_n; });
}

/// r_a(x) = ⟨a, ψ_N(x)⟩.
inline double network_output(const Eigen::VectorXd& x, const NetworkState& net, const PolynomialLink& activation,
                             const Eigen::VectorXd& a) {
    return a.dot(feature_map(x, net, activation));
}

/// b_j ~ Unif[-c_b, c_b].
inline Eigen::VectorXd sample_biases(Eigen::Index n, double c_b, std::uint64_t seed) {
    if (!(c_b > 0.0)) throw std::invalid_argument("sample_biases: c_b must be positive");
    if (n < 0) throw std::invalid_argument("sample_biases: N must be nonnegative");
    RandomStream rng(seed, streams::biases);
    Eigen::VectorXd b(n);
    for (Eigen::Index j = 0; j < n; ++j) b(j) = rng.uniform(-c_b, c_b);
    return b;
}

/// B_R = {x : ‖P_S x‖ ≤ R} with S spanned by the columns of `basis`.
struct ProjectedTruncation {
    Eigen::MatrixXd basis;  ///< d × d_S, orthonormal columns
    double radius = 0.0;

    Eigen::Index d_s() const noexcept { return basis.cols(); }
    Eigen::VectorXd project(const Eigen::VectorXd& x) const { return basis.transpose() * x; }
    bool contains(const Eigen::VectorXd& x) const { return project(x).norm() <= radius; }
};

/// Orthonormal basis of the column span of `spanning` (d × k), numerical rank
/// at relative tolerance `rank_tol`.
inline Eigen::MatrixXd orthonormal_span(const Eigen::MatrixXd& spanning, double rank_tol = 1e-10) {
    if (spanning.cols() == 0) throw std::invalid_argument("orthonormal_span: no spanning vectors");
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(spanning);
    qr.setThreshold(rank_tol);
    const Eigen::Index rank = qr.rank();
    if (rank == 0) throw NumericalError("orthonormal_span: spanning set has rank 0");
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(spanning.rows(), rank);
    return q;
}

/// S = span{θ*, w_1..w_N} (or the learned directions only) and R = slack·√d_S.
inline ProjectedTruncation make_truncation(const Eigen::VectorXd& theta, const NetworkState& net, double slack,
                                           bool include_theta = true, double rank_tol = 1e-10) {
    if (!(slack > 0.0)) throw std::invalid_argument("make_truncation: slack must be positive");
    Eigen::MatrixXd span(net.dim(), net.neurons() + (include_theta ? 1 : 0));
    Eigen::Index col = 0;
    if (include_theta) span.col(col++) = theta;
    for (Eigen::Index j = 0; j < net.neurons(); ++j) span.col(col++) = net.w.row(j).transpose();
    ProjectedTruncation t;
    t.basis = orthonormal_span(span, rank_tol);
    t.radius = slack * std::sqrt(static_cast<double>(t.d_s()));
    return t;
}

/// Truncation with an explicit basis and radius.
inline ProjectedTruncation make_truncation(const Eigen::MatrixXd& spanning, double radius, double rank_tol = 1e-10) {
    if (!(radius > 0.0)) throw std::invalid_argument("make_truncation: radius must be positive");
    return {orthonormal_span(spanning, rank_tol), radius};
}

enum class WeightRule { label, surrogate, uniform };

inline std::string_view to_string(WeightRule r) {
    switch (r) {
        case WeightRule::label: return "label";
        case WeightRule::surrogate: return "surrogate";
        case WeightRule::uniform: return "uniform";
    }
    return "?";
}

inline WeightRule parse_weight_rule(std::string_view s) {
    if (s == "label") return WeightRule::label;
    if (s == "surrogate") return WeightRule::surrogate;
    if (s == "uniform") return WeightRule::uniform;
    throw std::invalid_argument("unknown weight rule '" + std::string(s) + "'");
}

/// Solution of (Φᵀ D Φ / T + λI) c = Φᵀ D t / T.
struct WeightedSolve {
    Eigen::VectorXd coef;
    double condition = 0.0;  ///< eigenvalue ratio of the system matrix
    double residual = 0.0;   ///< ‖A c - b‖ / max(‖b‖, tiny)
    bool jittered = false;
};

/// Weighted ridge normal equations with an SPD solve and jitter fallback.
/// `normalizer` is the T in the 1/T factor.
inline WeightedSolve solve_weighted_ridge(const Eigen::MatrixXd& phi, const Eigen::VectorXd& target,
                                          const Eigen::VectorXd& weights, double lambda, double normalizer) {
    if (phi.rows() != target.size() || phi.rows() != weights.size())
        throw std::invalid_argument("solve_weighted_ridge: size mismatch");
    if (lambda < 0.0) throw std::invalid_argument("solve_weighted_ridge: lambda must be nonnegative");
    if (!(normalizer > 0.0)) throw std::invalid_argument("solve_weighted_ridge: normalizer must be positive");
    const Eigen::Index k = phi.cols();
    const Eigen::MatrixXd scaled = (phi.array().colwise() * weights.array().sqrt()).matrix();
    Eigen::MatrixXd a = scaled.transpose() * scaled / normalizer;
    a.diagonal().array() += lambda;
    const Eigen::VectorXd b = phi.transpose() * (weights.array() * target.array()).matrix() / normalizer;
    if (!a.allFinite() || !b.allFinite()) throw NumericalError("solve_weighted_ridge: non-finite normal equations");

    WeightedSolve out;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff(), hi = eig.eigenvalues().maxCoeff();
    out.condition = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    if (lambda == 0.0 && !(lo > 1e-13 * std::max(hi, 1e-300))) {
        Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
        lu.setThreshold(1e-12);
        throw NumericalError("solve_weighted_ridge: singular system at lambda = 0 (rank " + std::to_string(lu.rank()) +
                             " of " + std::to_string(k) + ")");
    }
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) {
        Eigen::MatrixXd jittered = a;
        jittered.diagonal().array() += 1e-12 * a.trace() / static_cast<double>(k);
        llt.compute(jittered);
        out.jittered = true;
        if (llt.info() != Eigen::Success) throw NumericalError("solve_weighted_ridge: factorization failed after jitter");
    }
    out.coef = llt.solve(b);
    // One step of iterative refinement against the unjittered system.
    out.coef += llt.solve(b - a * out.coef);
    const double bn = b.norm();
    out.residual = (a * out.coef - b).norm() / (bn > 0.0 ? bn : 1.0);
    return out;
}

struct RidgeFit {
    Eigen::VectorXd a_hat;
    double lambda = 0.0;
    WeightRule rule = WeightRule::uniform;
    double beta2 = 0.0;
    Eigen::Index n_used = 0;
    double gram_condition = 0.0;
    double residual = 0.0;
    bool jittered = false;
};

/// Per-sample regression weights W(x_i, y_i), zeroed outside B_R.
inline Eigen::VectorXd ridge_weights(const SampleBatch& batch, const NetworkState& net,
                                     const PolynomialLink& activation, const ProjectedTruncation& trunc,
                                     WeightRule rule, double beta2, const Eigen::MatrixXd* features = nullptr) {
    if (!(beta2 > 0.0)) throw std::invalid_argument("ridge weights: beta2 must be positive");
    const Eigen::Index n = batch.size();
    Eigen::VectorXd w(n);
    const Eigen::MatrixXd proj = batch.xs * trunc.basis;
    Eigen::VectorXd surrogate;
    if (rule == WeightRule::surrogate) {
        if (net.readout.size() != net.neurons()) throw std::invalid_argument("surrogate rule needs a frozen readout a0");
        surrogate = features ? Eigen::VectorXd(*features * net.readout)
                             : Eigen::VectorXd(feature_matrix(batch.xs, net, activation) * net.readout);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (proj.row(i).norm() > trunc.radius) {
            w(i) = 0.0;
            continue;
        }
        switch (rule) {
            case WeightRule::label: w(i) = std::exp(batch.ys(i) / beta2); break;
            case WeightRule::surrogate: w(i) = std::exp(surrogate(i) / beta2); break;
            case WeightRule::uniform: w(i) = 1.0; break;
        }
        if (!std::isfinite(w(i))) throw NumericalError("ridge weights: exponential weight overflow");
    }
    return w;
}

/// â ∈ argmin (1/T₂) Σ 1_{B_R}(x_i) W(x_i, y_i)(y_i - r_a(x_i))² + λ‖a‖².
/// Under the surrogate rule, net.readout is the frozen a₀.
inline RidgeFit fit_weighted_ridge(const SampleBatch& batch, const NetworkState& net, const PolynomialLink& activation,
                                   const ProjectedTruncation& trunc, WeightRule rule, double beta2, double lambda) {
    if (trunc.basis.rows() != batch.dim()) throw std::invalid_argument("fit_weighted_ridge: truncation basis dimension");
    const Eigen::MatrixXd phi = feature_matrix(batch.xs, net, activation);
    const Eigen::VectorXd w = ridge_weights(batch, net, activation, trunc, rule, beta2, &phi);
    RidgeFit fit;
    fit.n_used = (w.array() > 0.0).count();
    if (fit.n_used == 0) throw NumericalError("fit_weighted_ridge: every sample lies outside B_R");
    const auto solve = solve_weighted_ridge(phi, batch.ys, w, lambda, static_cast<double>(batch.size()));
    fit.a_hat = solve.coef;
    fit.lambda = lambda;
    fit.rule = rule;
    fit.beta2 = beta2;
    fit.gram_condition = solve.condition;
    fit.residual = solve.residual;
    fit.jittered = solve.jittered;
    return fit;
}

/// Regularized objective of fit_weighted_ridge at readout a.
inline double ridge_objective(const SampleBatch& batch, const NetworkState& net, const PolynomialLink& activation,
                              const ProjectedTruncation& trunc, WeightRule rule, double beta2, double lambda,
                              const Eigen::VectorXd& a) {
    const Eigen::MatrixXd phi = feature_matrix(batch.xs, net, activation);
    const Eigen::VectorXd w = ridge_weights(batch, net, activation, trunc, rule, beta2, &phi);
    const Eigen::VectorXd r = batch.ys - phi * a;
    return (w.array() * r.array().square()).sum() / static_cast<double>(batch.size()) + lambda * a.squaredNorm();
}

/// Inputs of the surrogate λ schedule, from the coverage module.
struct SurrogateExtras {
    double m_0r = 0.0;       ///< M_{0,R} = sup_{B_R} r_{a₀}
    double constant = 0.0;   ///< 𝒞_{0,R}(β₂)
};

/// λ schedules. Label: C β^{(α+1)/2} e^{(B*+τ)/β} (T₂δ₀)^{-1/2}, α = 1/(2p_max).
/// Surrogate: C e^{M/β} (𝒞 T₂δ₀)^{-1/2}. Uniform: C (T₂δ₀)^{-1/2}.
inline double lambda_schedule(WeightRule rule, double beta2, std::uint64_t t2, double delta0,
                              const MaximaReport& maxima, double c_lambda, double tau = 0.0,
                              const std::optional<SurrogateExtras>& extras = std::nullopt) {
    if (!(beta2 > 0.0 && beta2 <= 1.0)) throw std::invalid_argument("lambda_schedule: beta2 must lie in (0, 1]");
    if (!(delta0 > 0.0 && delta0 <= 1.0)) throw std::invalid_argument("lambda_schedule: delta0 must lie in (0, 1]");
    if (t2 < 1) throw std::invalid_argument("lambda_schedule: T2 must be >= 1");
    const double resource = static_cast<double>(t2) * delta0;
    switch (rule) {
        case WeightRule::label: {
            const double alpha = maxima.alpha();
            return c_lambda * std::pow(beta2, 0.5 * (alpha + 1.0)) * std::exp((maxima.b_star + tau) / beta2) /
                   std::sqrt(resource);
        }
        case WeightRule::surrogate:
            if (!extras) throw std::invalid_argument("lambda_schedule: surrogate rule needs M_{0,R} and the surrogate constant");
            if (!(extras->constant > 0.0)) throw std::invalid_argument("lambda_schedule: surrogate constant must be positive");
            return c_lambda * std::exp(extras->m_0r / beta2) / std::sqrt(extras->constant * resource);
        case WeightRule::uniform:
            return c_lambda / std::sqrt(resource);
    }
    return 0.0;
}

/// Offset of the label-weighted least-squares fit of y on [1, r*(x)].
struct LabelShiftEstimate {
    double offset = 0.0;
    double offset_se = 0.0;
    double slope = 0.0;
    double slope_se = 0.0;
    std::size_t replicates = 0;
};

/// The population minimizer of E[e^{y/β₂}(y - f(x))²] is r* + m_{ζ,β₂}; fitting
/// the well-specified model [1, r*] recovers the offset. Replicates use
/// independent sample streams; the SE is across replicates.
inline LabelShiftEstimate fit_label_shift(const PolynomialLink& link, double tau, double beta2, Eigen::Index n,
                                          std::size_t replicates, std::uint64_t seed, unsigned workers = 1) {
    if (replicates < 2) throw std::invalid_argument("fit_label_shift: need at least two replicates");
    if (!(beta2 > 0.0)) throw std::invalid_argument("fit_label_shift: beta2 must be positive");
    std::vector<double> offsets(replicates), slopes(replicates);
    parallel_for(replicates, workers, [&](std::size_t r) {
        RandomStream rng(seed, streams::ridge_samples + 100 * (r + 1));
        Eigen::MatrixXd phi(n, 2);
        Eigen::VectorXd y(n), w(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double g = rng.normal();
            const double zeta = tau > 0.0 ? rng.uniform(-tau, tau) : 0.0;
            phi(i, 0) = 1.0;
            phi(i, 1) = link(g);
            y(i) = phi(i, 1) + zeta;
            w(i) = std::exp(y(i) / beta2);
        }
        const auto s = solve_weighted_ridge(phi, y, w, 0.0, static_cast<double>(n));
        offsets[r] = s.coef(0);
        slopes[r] = s.coef(1);
    });
    LabelShiftEstimate e;
    e.replicates = replicates;
    e.offset = stats::mean(offsets);
    e.offset_se = stats::standard_error(offsets);
    e.slope = stats::mean(slopes);
    e.slope_se = stats::standard_error(slopes);
    return e;
}

}  // namespace tilted_sim
