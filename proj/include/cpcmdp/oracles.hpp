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

// Ground-truth oracles, independent of the dual solver:
//  - the occupancy-measure LP for the exact constrained optimum,
//  - the LP for the Slater margin,
//  - soft value iteration for exact entropy-regularized optima,
//  - brute-force grid minimization of the regularized dual for m <= 2.

#pragma once

#include "cpcmdp/core.hpp"
#include "cpcmdp/simplex.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace cpcmdp {

struct LpSolution {
    lp::Status status = lp::Status::Infeasible;
    double optimal_value = 0.0;
    /// nu*(s,a); sums to 1.
    Matrix occupancy;
    Policy policy;
};

namespace detail {

/// Flow rows sum_a nu(s,a) - gamma sum_{s',a'} P(s|s',a') nu(s',a') = (1-gamma) rho(s)
/// written into the first |S| rows of `prob` over the first |S||A| columns.
inline void occupancy_flow(const TabularCmdp& cmdp, lp::Problem& prob) {
    const auto ns = cmdp.n_states();
    const auto na = cmdp.n_actions();
    for (Eigen::Index s = 0; s < ns; ++s) {
        for (Eigen::Index sp = 0; sp < ns; ++sp)
            for (Eigen::Index a = 0; a < na; ++a)
                prob.a(s, sp * na + a) -= cmdp.gamma() * cmdp.kernel()(sp * na + a, s);
        for (Eigen::Index a = 0; a < na; ++a)
            prob.a(s, s * na + a) += 1.0;
        prob.b[s] = (1.0 - cmdp.gamma()) * cmdp.rho()[s];
        prob.sense[std::size_t(s)] = lp::Sense::Equal;
    }
}

inline Matrix unflatten(const Vector& x, Eigen::Index ns, Eigen::Index na) {
    Matrix nu(ns, na);
    for (Eigen::Index s = 0; s < ns; ++s)
        for (Eigen::Index a = 0; a < na; ++a)
            nu(s, a) = x[s * na + a];
    return nu;
}

} // namespace detail

/// pi(a|s) = nu(s,a) / sum_a' nu(s,a'), uniform where the state mass is <= mass_tol.
inline Policy policy_from_occupancy(const Matrix& nu, double mass_tol = 1e-14) {
    Matrix p(nu.rows(), nu.cols());
    for (Eigen::Index s = 0; s < nu.rows(); ++s) {
        const Vector row = nu.row(s).transpose().cwiseMax(0.0);
        const double mass = row.sum();
        if (mass > mass_tol)
            p.row(s) = (row / mass).transpose();
        else
            p.row(s).setConstant(1.0 / double(nu.cols()));
    }
    return Policy(std::move(p));
}

/// Exact CMDP optimum: max <nu, r_0>/(1-gamma) over occupancy measures meeting
/// <nu, r_i>/(1-gamma) >= c_i.
inline LpSolution lp_solve_cmdp(const TabularCmdp& cmdp) {
    const auto ns = cmdp.n_states();
    const auto na = cmdp.n_actions();
    const auto m = cmdp.n_constraints();
    const double scale = 1.0 / (1.0 - cmdp.gamma());
    const Eigen::Index n = ns * na;

    lp::Problem prob;
    prob.objective = Eigen::Map<const Vector>(Matrix(cmdp.reward(0).transpose()).data(), n) * scale;
    prob.a = Matrix::Zero(ns + m, n);
    prob.b = Vector::Zero(ns + m);
    prob.sense.assign(std::size_t(ns + m), lp::Sense::GreaterEqual);
    detail::occupancy_flow(cmdp, prob);
    for (Eigen::Index i = 0; i < m; ++i) {
        const Matrix rt = cmdp.reward(std::size_t(i) + 1).transpose();
        prob.a.row(ns + i) = Eigen::Map<const Vector>(rt.data(), n).transpose() * scale;
        prob.b[ns + i] = cmdp.thresholds()[i];
    }

    const lp::Solution sol = lp::solve(prob);
    LpSolution out;
    out.status = sol.status;
    if (sol.status != lp::Status::Optimal)
        return out;
    out.optimal_value = sol.value;
    out.occupancy = detail::unflatten(sol.x, ns, na);
    out.policy = policy_from_occupancy(out.occupancy);
    return out;
}

struct SlaterResult {
    /// max_pi min_i (V_i^pi - c_i); +inf when m = 0.
    double margin = std::numeric_limits<double>::infinity();
    bool unconstrained = true;
    Matrix occupancy;
    Policy policy;
};

/// max t subject to the flow constraints and <nu, r_i>/(1-gamma) >= c_i + t.
inline SlaterResult slater_solve(const TabularCmdp& cmdp) {
    SlaterResult out;
    const auto m = cmdp.n_constraints();
    if (m == 0)
        return out;
    out.unconstrained = false;
    const auto ns = cmdp.n_states();
    const auto na = cmdp.n_actions();
    const double scale = 1.0 / (1.0 - cmdp.gamma());
    const Eigen::Index n = ns * na;

    // Variables: nu (n), t+ , t-.
    lp::Problem prob;
    prob.objective = Vector::Zero(n + 2);
    prob.objective[n] = 1.0;
    prob.objective[n + 1] = -1.0;
    prob.a = Matrix::Zero(ns + m, n + 2);
    prob.b = Vector::Zero(ns + m);
    prob.sense.assign(std::size_t(ns + m), lp::Sense::GreaterEqual);
    detail::occupancy_flow(cmdp, prob);
    for (Eigen::Index i = 0; i < m; ++i) {
        const Matrix rt = cmdp.reward(std::size_t(i) + 1).transpose();
        prob.a.block(ns + i, 0, 1, n) = Eigen::Map<const Vector>(rt.data(), n).transpose() * scale;
        prob.a(ns + i, n) = -1.0;
        prob.a(ns + i, n + 1) = 1.0;
        prob.b[ns + i] = cmdp.thresholds()[i];
    }
    const lp::Solution sol = lp::solve(prob);
    if (sol.status != lp::Status::Optimal)
        throw NumericalError(std::string("slater_margin: LP returned ") + lp::to_string(sol.status));
    out.margin = sol.x[n] - sol.x[n + 1];
    out.occupancy = detail::unflatten(sol.x.head(n), ns, na);
    out.policy = policy_from_occupancy(out.occupancy);
    return out;
}

inline double slater_margin(const TabularCmdp& cmdp) { return slater_solve(cmdp).margin; }

struct SoftOptimum {
    Vector values;
    Policy policy;
    Matrix soft_q;
    int iterations = 0;
    /// Successive sup-norm differences ||V_{k+1} - V_k||.
    std::vector<double> residuals;
};

/// Iterates V <- tau log sum_a exp((r + gamma P V)/tau) until
/// ||V - V'||_inf <= tol (1-gamma)/gamma.
inline SoftOptimum soft_value_iteration(const TabularCmdp& cmdp, const RewardTable& reward,
                                        double tau, double tol, int max_iterations = 1000000,
                                        bool keep_residuals = false) {
    detail::check_reward(cmdp, reward);
    detail::require(tau > 0.0 && tol > 0.0, "soft_value_iteration: tau and tol must be positive");
    const auto ns = cmdp.n_states();
    const double gamma = cmdp.gamma();
    const double stop = tol * (1.0 - gamma) / gamma;

    auto soft_max = [&](const Matrix& q) {
        Vector v(ns);
        for (Eigen::Index s = 0; s < ns; ++s) {
            const double mx = q.row(s).maxCoeff();
            v[s] = mx + tau * std::log(((q.row(s).array() - mx) / tau).exp().sum());
        }
        return v;
    };

    SoftOptimum out;
    Vector v = Vector::Zero(ns);
    for (int it = 1; it <= max_iterations; ++it) {
        const Vector next = soft_max(detail::backup(cmdp, reward, v));
        const double diff = (next - v).lpNorm<Eigen::Infinity>();
        if (keep_residuals)
            out.residuals.push_back(diff);
        v = next;
        if (diff <= stop) {
            out.iterations = it;
            out.values = v;
            out.soft_q = detail::backup(cmdp, reward, v);
            out.policy = Policy::softmax(out.soft_q / tau);
            return out;
        }
    }
    throw NumericalError("soft_value_iteration: iteration cap reached");
}

struct HardOptimum {
    Vector values;
    /// Greedy deterministic policy (lowest action index on ties).
    Policy policy;
    int iterations = 0;
};

/// Unregularized value iteration, same stopping rule as the soft version.
inline HardOptimum value_iteration(const TabularCmdp& cmdp, const RewardTable& reward, double tol,
                                   int max_iterations = 1000000) {
    detail::check_reward(cmdp, reward);
    detail::require(tol > 0.0, "value_iteration: tol must be positive");
    const double stop = tol * (1.0 - cmdp.gamma()) / cmdp.gamma();
    Vector v = Vector::Zero(cmdp.n_states());
    for (int it = 1; it <= max_iterations; ++it) {
        const Matrix q = detail::backup(cmdp, reward, v);
        const Vector next = q.rowwise().maxCoeff();
        const double diff = (next - v).lpNorm<Eigen::Infinity>();
        v = next;
        if (diff <= stop) {
            const Matrix qf = detail::backup(cmdp, reward, v);
            Matrix p = Matrix::Zero(cmdp.n_states(), cmdp.n_actions());
            for (Eigen::Index s = 0; s < p.rows(); ++s) {
                Eigen::Index a = 0;
                qf.row(s).maxCoeff(&a);
                p(s, a) = 1.0;
            }
            HardOptimum out;
            out.values = v;
            out.policy = Policy(std::move(p));
            out.iterations = it;
            return out;
        }
    }
    throw NumericalError("value_iteration: iteration cap reached");
}

/// Exact regularized dual d_tau(lambda) = max_pi L_tau(pi, lambda) and its
/// gradient V^{pi*}(rho) - c.
struct DualPoint {
    double value = 0.0;
    Vector gradient;
    Policy policy;
};

inline DualPoint exact_dual(const TabularCmdp& cmdp, const Vector& lambda, double tau,
                            double tol = 1e-12) {
    const SoftOptimum opt = soft_value_iteration(cmdp, combined_reward(cmdp, lambda), tau, tol);
    DualPoint out;
    out.value = cmdp.rho().dot(opt.values) - lambda.dot(cmdp.thresholds());
    out.gradient = constraint_values(cmdp, opt.policy) - cmdp.thresholds();
    out.policy = opt.policy;
    return out;
}

struct DualMinimum {
    Vector lambda;
    double value = 0.0;
    int evaluations = 0;
};

/// Grid argmin of d_tau over [0, b_lambda]^m (m <= 2). Each refinement level
/// re-grids a window of +-2 steps around the incumbent at one tenth of the step.
inline DualMinimum grid_dual_min(const TabularCmdp& cmdp, double tau, double b_lambda,
                                 double resolution, int refine_levels = 0, double tol = 1e-11) {
    const auto m = cmdp.n_constraints();
    if (m > 2)
        throw ModelError("grid_dual_min: only m <= 2 is supported");
    detail::require(resolution > 0.0 && b_lambda > 0.0 && tau > 0.0,
                    "grid_dual_min: tau, b_lambda and resolution must be positive");

    DualMinimum best;
    best.lambda = Vector::Zero(m);
    best.value = std::numeric_limits<double>::infinity();
    auto try_point = [&](const Vector& lam) {
        const double d = exact_dual(cmdp, lam, tau, tol).value;
        ++best.evaluations;
        if (d < best.value) {
            best.value = d;
            best.lambda = lam;
        }
    };

    Vector lo = Vector::Zero(m);
    Vector hi = Vector::Constant(m, b_lambda);
    double step = resolution;
    for (int level = 0; level <= refine_levels; ++level) {
        const long count = long(std::floor((hi - lo).maxCoeff() / step + 1e-9)) + 1;
        if (m == 0) {
            try_point(Vector::Zero(0));
            break;
        }
        for (long i = 0; i < count; ++i) {
            if (m == 1) {
                Vector lam(1);
                lam[0] = std::min(lo[0] + double(i) * step, hi[0]);
                try_point(lam);
                continue;
            }
            for (long j = 0; j < count; ++j) {
                Vector lam(2);
                lam[0] = std::min(lo[0] + double(i) * step, hi[0]);
                lam[1] = std::min(lo[1] + double(j) * step, hi[1]);
                try_point(lam);
            }
        }
        lo = (best.lambda.array() - 2.0 * step).cwiseMax(0.0);
        hi = (best.lambda.array() + 2.0 * step).cwiseMin(b_lambda);
        step /= 10.0;
    }
    return best;
}

} // namespace cpcmdp
