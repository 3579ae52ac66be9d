/*
 Copyright 2026 The cpcmdp Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

// Vaidya's volumetric-barrier cutting-plane method with inexact subgradients.
//
// A polytope is stored as {lambda : A lambda >= b}. For an interior point with
// slacks s_i = a_i^T lambda - b_i,
//     H      = sum_i a_i a_i^T / s_i^2            (log-barrier Hessian)
//     sigma_i = a_i^T H^{-1} a_i / s_i^2           (leverage scores, sum = m)
//     V      = 1/2 log det H                       (volumetric barrier)
// The volumetric center minimizes V. Each iteration either drops the plane
// with the smallest leverage score or adds a cut through the oracle direction.

#pragma once

#include "cpcmdp/core.hpp"
#include "cpcmdp/simplex.hpp"

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace cpcmdp {

/// Raised when a barrier quantity is requested at a non-interior point.
class InteriorityError : public ModelError {
public:
    using ModelError::ModelError;
};

class Polytope {
public:
    Polytope() = default;

    /// Validates finiteness, k >= m+1, boundedness and a nonempty interior.
    Polytope(Matrix a, Vector b) : a_(std::move(a)), b_(std::move(b)) {
        detail::require(a_.rows() == b_.size(), "Polytope: A and b disagree on k");
        detail::require(a_.cols() >= 1, "Polytope: dimension must be positive");
        detail::require(a_.allFinite() && b_.allFinite(), "Polytope: rows must be finite");
        detail::require(a_.rows() >= a_.cols() + 1, "Polytope: need at least m+1 planes");
        detail::require(is_bounded(), "Polytope: region is unbounded");
        detail::require(chebyshev_center().second > 0.0, "Polytope: empty interior");
    }

    Eigen::Index dim() const { return a_.cols(); }
    Eigen::Index n_planes() const { return a_.rows(); }
    const Matrix& a() const { return a_; }
    const Vector& b() const { return b_; }

    Vector slacks(const Vector& lambda) const { return a_ * lambda - b_; }

    bool is_interior(const Vector& lambda) const {
        return lambda.size() == dim() && lambda.allFinite() && (slacks(lambda).array() > 0.0).all();
    }

    void add_plane(const Vector& normal, double offset) {
        a_.conservativeResize(a_.rows() + 1, Eigen::NoChange);
        b_.conservativeResize(b_.size() + 1);
        a_.row(a_.rows() - 1) = normal.transpose();
        b_[b_.size() - 1] = offset;
    }

    /// Removes row i and returns it so that the removal can be undone.
    std::pair<Vector, double> remove_plane(Eigen::Index i) {
        std::pair<Vector, double> removed{a_.row(i).transpose(), b_[i]};
        const Eigen::Index k = a_.rows();
        for (Eigen::Index r = i; r + 1 < k; ++r) {
            a_.row(r) = a_.row(r + 1);
            b_[r] = b_[r + 1];
        }
        a_.conservativeResize(k - 1, Eigen::NoChange);
        b_.conservativeResize(k - 1);
        return removed;
    }

    void insert_plane(Eigen::Index i, const Vector& normal, double offset) {
        add_plane(normal, offset);
        for (Eigen::Index r = a_.rows() - 1; r > i; --r) {
            a_.row(r).swap(a_.row(r - 1));
            std::swap(b_[r], b_[r - 1]);
        }
    }

    /// Bounded iff rank A = m and some y > 0 has A^T y = 0 (the recession
    /// cone {d : A d >= 0} is then trivial).
    bool is_bounded() const {
        const Eigen::Index k = a_.rows();
        const Eigen::Index m = a_.cols();
        if (Eigen::FullPivLU<Matrix>(a_).rank() < m)
            return false;
        lp::Problem prob;
        prob.objective = Vector::Zero(k);
        prob.a = Matrix::Zero(m + k, k);
        prob.b = Vector::Zero(m + k);
        prob.a.topRows(m) = a_.transpose();
        prob.a.bottomRows(k) = Matrix::Identity(k, k);
        prob.b.tail(k).setOnes();
        prob.sense.assign(std::size_t(m), lp::Sense::Equal);
        prob.sense.resize(std::size_t(m + k), lp::Sense::GreaterEqual);
        return lp::solve(prob).status == lp::Status::Optimal;
    }

    /// Center and radius of the largest inscribed Euclidean ball (radius
    /// capped at 1e6 so that the LP stays bounded).
    std::pair<Vector, double> chebyshev_center() const {
        const Eigen::Index k = a_.rows();
        const Eigen::Index m = a_.cols();
        // Variables: lambda+ (m), lambda- (m), r.
        lp::Problem prob;
        prob.objective = Vector::Zero(2 * m + 1);
        prob.objective[2 * m] = 1.0;
        prob.a = Matrix::Zero(k + 1, 2 * m + 1);
        prob.b = Vector::Zero(k + 1);
        for (Eigen::Index i = 0; i < k; ++i) {
            prob.a.block(i, 0, 1, m) = a_.row(i);
            prob.a.block(i, m, 1, m) = -a_.row(i);
            prob.a(i, 2 * m) = -a_.row(i).norm();
            prob.b[i] = b_[i];
        }
        prob.a(k, 2 * m) = 1.0;
        prob.b[k] = 1e6;
        prob.sense.assign(std::size_t(k), lp::Sense::GreaterEqual);
        prob.sense.push_back(lp::Sense::LessEqual);
        const lp::Solution sol = lp::solve(prob);
        if (sol.status != lp::Status::Optimal)
            return {Vector::Zero(m), -1.0};
        return {Vector(sol.x.head(m) - sol.x.segment(m, m)), sol.x[2 * m]};
    }

private:
    Matrix a_;
    Vector b_;
};

namespace detail {

inline Vector interior_slacks(const Vector& lambda, const Polytope& poly) {
    if (lambda.size() != poly.dim())
        throw ModelError("barrier: point dimension does not match the polytope");
    Vector s = poly.slacks(lambda);
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (!(s[i] > 0.0))
            throw InteriorityError("barrier: point is not strictly interior (plane " +
                                   std::to_string(i) + " has slack " + std::to_string(s[i]) +
                                   ")");
    return s;
}

/// Rows a_i / s_i.
inline Matrix scaled_rows(const Vector& lambda, const Polytope& poly) {
    const Vector s = interior_slacks(lambda, poly);
    return s.cwiseInverse().asDiagonal() * poly.a();
}

inline Eigen::LLT<Matrix> factor_spd(const Matrix& h) {
    Eigen::LLT<Matrix> llt(h);
    if (llt.info() != Eigen::Success)
        throw NumericalError("barrier: Hessian is not positive definite");
    return llt;
}

} // namespace detail

/// H(lambda) = sum_i a_i a_i^T / s_i^2.
inline Matrix barrier_hessian(const Vector& lambda, const Polytope& poly) {
    const Matrix as = detail::scaled_rows(lambda, poly);
    Matrix h = as.transpose() * as;
    detail::factor_spd(h);
    return h;
}

/// sigma_i = a_i^T H^{-1} a_i / s_i^2.
inline Vector leverage_scores(const Vector& lambda, const Polytope& poly) {
    const Matrix as = detail::scaled_rows(lambda, poly);
    const auto llt = detail::factor_spd(as.transpose() * as);
    const Matrix solved = llt.solve(as.transpose());
    return (as.transpose().array() * solved.array()).colwise().sum().transpose();
}

/// V(lambda) = 1/2 log det H(lambda).
inline double volumetric_barrier(const Vector& lambda, const Polytope& poly) {
    const Matrix as = detail::scaled_rows(lambda, poly);
    const auto llt = detail::factor_spd(as.transpose() * as);
    return Eigen::Matrix<double, Eigen::Dynamic, 1>(llt.matrixLLT().diagonal())
        .array()
        .log()
        .sum();
}

/// Gradient, Newton metric and exact Hessian of V at an interior point.
struct BarrierDerivatives {
    double value = 0.0;
    Vector gradient;
    /// Q = sum_i sigma_i a_i a_i^T / s_i^2.
    Matrix metric;
    /// A_s^T (3 Sigma - 2 P.*P) A_s with A_s = S^{-1} A, P = A_s H^{-1} A_s^T.
    Matrix hessian;
    Vector sigma;
};

inline BarrierDerivatives barrier_derivatives(const Vector& lambda, const Polytope& poly) {
    const Matrix as = detail::scaled_rows(lambda, poly);
    const auto llt = detail::factor_spd(as.transpose() * as);
    const Matrix proj = as * llt.solve(as.transpose());
    BarrierDerivatives out;
    out.sigma = proj.diagonal();
    out.value = Vector(llt.matrixLLT().diagonal()).array().log().sum();
    out.gradient = -(as.transpose() * out.sigma);
    out.metric = as.transpose() * out.sigma.asDiagonal() * as;
    const Matrix inner = Matrix(3.0 * out.sigma.asDiagonal()) - 2.0 * proj.cwiseProduct(proj);
    out.hessian = as.transpose() * inner * as;
    return out;
}

struct CenterResult {
    Vector point;
    int newton_steps = 0;
    /// ||grad V||_{Q^{-1}} at the returned point.
    double decrement = 0.0;
};

/// Damped Newton minimization of V from an interior start. Without a usable
/// warm start the Chebyshev center is used.
inline CenterResult volumetric_center(const Polytope& poly,
                                      const std::optional<Vector>& warm_start = std::nullopt,
                                      double newton_tol = 1e-9, int max_steps = 500) {
    Vector x;
    if (warm_start && poly.is_interior(*warm_start)) {
        x = *warm_start;
    } else {
        auto [center, radius] = poly.chebyshev_center();
        if (!(radius > 0.0) || !poly.is_interior(center))
            throw NumericalError("volumetric_center: no interior start found");
        x = center;
    }

    CenterResult out;
    for (int step = 0; step <= max_steps; ++step) {
        const BarrierDerivatives d = barrier_derivatives(x, poly);
        const auto q_llt = detail::factor_spd(d.metric);
        out.decrement = std::sqrt(std::max(0.0, d.gradient.dot(q_llt.solve(d.gradient))));
        out.point = x;
        out.newton_steps = step;
        if (out.decrement <= newton_tol)
            return out;
        if (step == max_steps)
            break;

        Eigen::LLT<Matrix> h_llt(d.hessian);
        const Vector dir = h_llt.info() == Eigen::Success ? Vector(-h_llt.solve(d.gradient))
                                                          : Vector(-q_llt.solve(d.gradient));
        const double slope = d.gradient.dot(dir);

        // Largest step keeping every slack positive, then Armijo backtracking.
        const Vector s = poly.slacks(x);
        const Vector ds = poly.a() * dir;
        double t_max = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < s.size(); ++i)
            if (ds[i] < 0.0)
                t_max = std::min(t_max, -s[i] / ds[i]);
        double t = std::min(1.0, 0.99 * t_max);

        // Near the center V no longer resolves the decrease; judge the full
        // step by the decrement, which is computed from gradients.
        if (out.decrement < 0.25 && t == 1.0) {
            const Vector trial = x + dir;
            if (poly.is_interior(trial)) {
                const BarrierDerivatives dt = barrier_derivatives(trial, poly);
                const auto qt = detail::factor_spd(dt.metric);
                const double dec = std::sqrt(std::max(0.0, dt.gradient.dot(qt.solve(dt.gradient))));
                if (dec < out.decrement) {
                    x = trial;
                    continue;
                }
            }
        }

        // Rounding error of V from the slack evaluations. Once the attainable
        // decrease (about decrement^2 / 2) drops below it, x is as good as it gets.
        const double eps = std::numeric_limits<double>::epsilon();
        const Vector row_scale = poly.a().rowwise().lpNorm<1>() * x.lpNorm<Eigen::Infinity>() +
                                 poly.b().cwiseAbs();
        const double v_noise =
            eps * (std::abs(d.value) + d.sigma.dot(row_scale.cwiseQuotient(s)));
        const double noise_floor = 4.0 * std::sqrt(v_noise);

        bool accepted = false;
        bool decreased = false;
        for (int ls = 0; ls < 80; ++ls) {
            const Vector trial = x + t * dir;
            if (poly.is_interior(trial)) {
                const double v = volumetric_barrier(trial, poly);
                if (v <= d.value + 1e-4 * t * slope + 2.0 * v_noise) {
                    x = trial;
                    accepted = true;
                    decreased = v < d.value;
                    break;
                }
            }
            t *= 0.5;
        }
        if (!decreased) {
            if (out.decrement <= std::max(1e-6, noise_floor))
                return out;
            if (!accepted)
                throw NumericalError("volumetric_center: line search failed (decrement " +
                                     std::to_string(out.decrement) + ")");
        }
        if (!(x.norm() < 1e15))
            throw NumericalError("volumetric_center: iterates diverge (unbounded polytope?)");
    }
    throw NumericalError("volumetric_center: Newton step limit exceeded");
}

enum class CutKind { Subgradient, Separation };

inline const char* to_string(CutKind k) {
    return k == CutKind::Subgradient ? "subgradient-cut" : "separation-cut";
}

struct CutResponse {
    CutKind kind = CutKind::Subgradient;
    /// Cut normal: the new plane is vector^T lambda >= beta.
    Vector vector;
    std::optional<double> value_estimate;
};

struct VaidyaParams {
    double eta = 1e-4;
    double zeta = 1e-7;
    int t_max = 100;
    double newton_tol = 1e-9;
    /// Permits eta > 1e-4 or zeta > 1e-3 eta (the practical regime).
    bool allow_unsafe = false;

    void validate() const {
        detail::require(eta > 0.0 && zeta > 0.0, "VaidyaParams: eta and zeta must be positive");
        detail::require(zeta <= eta, "VaidyaParams: zeta must not exceed eta");
        detail::require(t_max >= 0, "VaidyaParams: t_max must be nonnegative");
        detail::require(newton_tol > 0.0, "VaidyaParams: newton_tol must be positive");
        if (!allow_unsafe && (eta > 1e-4 || zeta > 1e-3 * eta))
            throw ModelError("VaidyaParams: eta <= 1e-4 and zeta <= 1e-3*eta required "
                             "(set allow_unsafe to override)");
    }
};

/// beta = g^T lambda - sqrt(2 g^T H^{-1} g / sqrt(eta zeta)), the root of
/// g^T H^{-1} g / (g^T lambda - beta)^2 = sqrt(eta zeta)/2 below g^T lambda.
inline double cut_offset(const Vector& grad, const Vector& lambda, const Matrix& h_inverse,
                         double eta, double zeta) {
    detail::require(grad.size() == lambda.size() && h_inverse.rows() == grad.size() &&
                        h_inverse.cols() == grad.size(),
                    "cut_offset: dimension mismatch");
    if (!(grad.allFinite()) || grad.squaredNorm() == 0.0)
        throw ModelError("cut_offset: degenerate cut direction");
    detail::require(eta > 0.0 && zeta > 0.0, "cut_offset: eta and zeta must be positive");
    const double g = grad.dot(h_inverse * grad);
    return grad.dot(lambda) - std::sqrt(2.0 * g / std::sqrt(eta * zeta));
}

enum class VaidyaAction { Drop, SubgradientCut, SeparationCut };

inline const char* to_string(VaidyaAction a) {
    switch (a) {
    case VaidyaAction::Drop: return "drop";
    case VaidyaAction::SubgradientCut: return "subgradient-cut";
    case VaidyaAction::SeparationCut: return "separation-cut";
    }
    return "unknown";
}

struct VaidyaStep {
    int t = 0;
    Vector lambda;
    /// Plane count when the center was computed.
    Eigen::Index k = 0;
    double sigma_min = 0.0;
    VaidyaAction action = VaidyaAction::Drop;
    std::optional<double> value_estimate;
    /// A drop was attempted and undone because the polytope became unbounded.
    bool drop_rolled_back = false;
};

struct VaidyaResult {
    std::vector<VaidyaStep> steps;
    std::optional<Vector> best_point;
    std::optional<double> best_value;
    Polytope final_polytope;
    /// The oracle returned a zero direction: the query point is optimal.
    bool stationary = false;
};

using VaidyaObserver = std::function<void(const VaidyaStep&)>;

/// Runs t_max iterations. Oracle: CutResponse(const Vector& lambda).
template <class Oracle>
VaidyaResult vaidya_run(Oracle&& oracle, Polytope initial, const VaidyaParams& params,
                        const VaidyaObserver& observer = {}) {
    params.validate();
    const Eigen::Index m = initial.dim();
    VaidyaResult out;
    Polytope poly = std::move(initial);
    std::optional<Vector> center;

    for (int t = 0; t < params.t_max; ++t) {
        center = volumetric_center(poly, center, params.newton_tol).point;
        const Vector& x = *center;
        const Matrix as = detail::scaled_rows(x, poly);
        const auto llt = detail::factor_spd(as.transpose() * as);
        const Matrix h_inv = llt.solve(Matrix::Identity(m, m));
        const Vector sigma = (as.transpose().array() * (h_inv * as.transpose()).array())
                                 .colwise()
                                 .sum()
                                 .transpose();
        Eigen::Index i_min = 0;
        const double sigma_min = sigma.minCoeff(&i_min);

        VaidyaStep step;
        step.t = t;
        step.lambda = x;
        step.k = poly.n_planes();
        step.sigma_min = sigma_min;

        bool dropped = false;
        if (sigma_min < params.zeta && poly.n_planes() > m + 1) {
            auto [normal, offset] = poly.remove_plane(i_min);
            if (poly.is_bounded()) {
                dropped = true;
            } else {
                poly.insert_plane(i_min, normal, offset);
                step.drop_rolled_back = true;
            }
        }

        if (dropped) {
            step.action = VaidyaAction::Drop;
        } else {
            CutResponse cut = oracle(x);
            detail::require(cut.vector.size() == m, "vaidya_run: oracle returned wrong dimension");
            if (!cut.vector.allFinite())
                throw NumericalError("vaidya_run: oracle returned a non-finite direction");
            step.action = cut.kind == CutKind::Subgradient ? VaidyaAction::SubgradientCut
                                                           : VaidyaAction::SeparationCut;
            step.value_estimate = cut.value_estimate;
            if (cut.value_estimate &&
                (!out.best_value || *cut.value_estimate < *out.best_value)) {
                out.best_value = cut.value_estimate;
                out.best_point = x;
            }
            if (cut.vector.squaredNorm() == 0.0) {
                out.stationary = true;
                out.steps.push_back(step);
                if (observer)
                    observer(out.steps.back());
                break;
            }
            const double beta = cut_offset(cut.vector, x, h_inv, params.eta, params.zeta);
            poly.add_plane(cut.vector, beta);
        }
        out.steps.push_back(step);
        if (observer)
            observer(out.steps.back());
    }
    out.final_polytope = std::move(poly);
    return out;
}

} // namespace cpcmdp
