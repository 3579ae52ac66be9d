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

// Cutting-plane dual solver for constrained MDPs.
//
// The entropy-regularized dual d_tau(lambda) = max_pi L_tau(pi, lambda) is
// minimized over lambda >= 0 by Vaidya's method. At a nonnegative query point
// the inner maximization is solved by NPG and c - V^pi(rho) is a
// (6 tau gamma delta)-subgradient of -d_tau; at a point with negative entries a
// separation cut is returned instead. The final policy is NPG at the best
// multiplier found. The closed-form convergence bounds are evaluated alongside.

#pragma once

#include "cpcmdp/core.hpp"
#include "cpcmdp/npg.hpp"
#include "cpcmdp/oracles.hpp"
#include "cpcmdp/vaidya.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace cpcmdp {

/// Uniform-ergodicity constants (C_M, beta).
struct MixingConstants {
    double c_m = 1.0;
    double beta = 0.5;
};

struct DualConfig {
    /// Entropy coefficient; default min(1, cbrt(epsilon)) at the configured T.
    std::optional<double> tau;
    double delta = 1e-6;
    double mu = 0.0;
    std::optional<double> b_lambda;
    std::optional<double> slater_xi;
    /// t_max is ignored; t_outer is the iteration budget.
    VaidyaParams vaidya;
    int t_outer = 150;
    /// Compare every subgradient iterate and the output against the LP optimum.
    bool oracle_check = false;
    std::optional<MixingConstants> mixing;
    /// Target accuracy for the iteration-count corollary.
    std::optional<double> target_accuracy;
};

/// Every parameter fixed to a number.
struct DualSettings {
    double tau = 1.0;
    double delta = 1e-6;
    double mu = 0.0;
    double xi = 0.0;
    double b_lambda = 0.0;
    VaidyaParams vaidya;
    int t_outer = 0;
    bool tau_from_epsilon = false;
    /// epsilon with the 2 m^2 B_lambda / zeta coefficient.
    double epsilon = 0.0;
    /// epsilon with the m^2 (1 + sqrt m) B_lambda / zeta coefficient.
    double epsilon_alt = 0.0;
};

/// B_lambda = (r_{0,max} + log|A|) / ((1-gamma) xi).
inline double compute_b_lambda(const TabularCmdp& cmdp, double xi) {
    if (!(xi > 0.0))
        throw ModelError("compute_b_lambda: Slater margin must be positive");
    return (cmdp.reward_max(0) + std::log(double(cmdp.n_actions()))) / ((1.0 - cmdp.gamma()) * xi);
}

namespace detail {

inline double epsilon_tail(double m, double zeta, double t) {
    return std::exp((std::log(std::numbers::pi) - zeta * t) / (2.0 * m));
}

inline double dual_scale(const TabularCmdp& cmdp, double xi) {
    const double m = double(cmdp.n_constraints());
    return xi + std::sqrt(m) * cmdp.r_max() / (1.0 - cmdp.gamma());
}

} // namespace detail

/// epsilon(T) = (2 m^2 B / zeta)(xi + sqrt(m) R_max/(1-gamma)) exp((log pi - zeta T)/(2m)).
/// T is a double: analysed-regime iteration counts exceed the int range.
inline double theorem_epsilon(const TabularCmdp& cmdp, double xi, double b_lambda, double zeta,
                              double t) {
    const double m = double(cmdp.n_constraints());
    return 2.0 * m * m * b_lambda / zeta * detail::dual_scale(cmdp, xi) *
           detail::epsilon_tail(m, zeta, t);
}

/// Same with the coefficient m^2 (1 + sqrt m) B / zeta.
inline double theorem_epsilon_alt(const TabularCmdp& cmdp, double xi, double b_lambda,
                                  double zeta, double t) {
    const double m = double(cmdp.n_constraints());
    return m * m * (1.0 + std::sqrt(m)) * b_lambda / zeta * detail::dual_scale(cmdp, xi) *
           detail::epsilon_tail(m, zeta, t);
}

/// Fills in xi (LP), B_lambda and tau where the config leaves them open.
inline DualSettings resolve(const TabularCmdp& cmdp, const DualConfig& cfg) {
    DualSettings out;
    detail::require(cfg.delta > 0.0 && cfg.delta < 1.0, "DualConfig: delta must lie in (0,1)");
    detail::require(cfg.mu >= 0.0, "DualConfig: mu must be nonnegative");
    detail::require(cfg.t_outer >= 1, "DualConfig: t_outer must be positive");
    out.delta = cfg.delta;
    out.mu = cfg.mu;
    out.t_outer = cfg.t_outer;
    out.vaidya = cfg.vaidya;
    out.vaidya.t_max = cfg.t_outer;
    out.vaidya.validate();

    if (cmdp.n_constraints() == 0) {
        out.xi = std::numeric_limits<double>::infinity();
        out.b_lambda = cfg.b_lambda.value_or(1.0);
        out.tau = cfg.tau.value_or(1.0);
        detail::require(out.tau > 0.0, "DualConfig: tau must be positive");
        return out;
    }

    out.xi = cfg.slater_xi ? *cfg.slater_xi : slater_margin(cmdp);
    if (!(out.xi > 0.0))
        throw ModelError("solve: Slater condition fails (margin " + std::to_string(out.xi) + ")");
    out.b_lambda = cfg.b_lambda ? *cfg.b_lambda : compute_b_lambda(cmdp, out.xi);
    detail::require(out.b_lambda > 0.0, "DualConfig: b_lambda must be positive");
    out.epsilon = theorem_epsilon(cmdp, out.xi, out.b_lambda, out.vaidya.zeta, out.t_outer);
    out.epsilon_alt = theorem_epsilon_alt(cmdp, out.xi, out.b_lambda, out.vaidya.zeta, out.t_outer);
    if (cfg.tau) {
        out.tau = *cfg.tau;
    } else {
        out.tau = std::min(1.0, std::cbrt(out.epsilon));
        out.tau_from_epsilon = true;
    }
    detail::require(out.tau > 0.0, "DualConfig: tau must be positive");
    return out;
}

/// {lambda : lambda_j >= -B, sum_j lambda_j <= m B}, written as A lambda >= b
/// with A = [I; -1^T], b = [-B 1; -m B].
inline Polytope initial_simplex(double b_lambda, Eigen::Index m) {
    detail::require(b_lambda > 0.0 && m >= 1, "initial_simplex: need b_lambda > 0 and m >= 1");
    Matrix a(m + 1, m);
    a.topRows(m) = Matrix::Identity(m, m);
    a.row(m).setConstant(-1.0);
    Vector b(m + 1);
    b.head(m).setConstant(-b_lambda);
    b[m] = -double(m) * b_lambda;
    return Polytope(std::move(a), std::move(b));
}

/// Oracle answer together with the inner policy that produced it.
struct DualQuery {
    CutResponse cut;
    std::optional<Policy> policy;
    /// V_i^pi(rho), i = 1..m, for the inner policy.
    std::optional<Vector> constraint_values;
};

inline DualQuery dual_query(const TabularCmdp& cmdp, const Vector& lambda,
                            const DualSettings& settings) {
    detail::require(lambda.size() == cmdp.n_constraints(), "dual_oracle: lambda must have m entries");
    DualQuery out;
    if ((lambda.array() < 0.0).any()) {
        out.cut.kind = CutKind::Separation;
        out.cut.vector = (lambda.array() < 0.0).cast<double>().matrix();
        return out;
    }
    const NpgResult npg = run_npg(cmdp, combined_reward(cmdp, lambda), settings.tau, settings.delta);
    const Vector v = constraint_values(cmdp, npg.policy);
    out.cut.kind = CutKind::Subgradient;
    out.cut.vector = cmdp.thresholds() - v - settings.mu * lambda;
    out.cut.value_estimate = lagrangian(cmdp, npg.policy, lambda, settings.tau) +
                             0.5 * settings.mu * lambda.squaredNorm();
    out.policy = npg.policy;
    out.constraint_values = v;
    return out;
}

inline CutResponse dual_oracle(const TabularCmdp& cmdp, const Vector& lambda,
                               const DualSettings& settings) {
    return dual_query(cmdp, lambda, settings).cut;
}

/// L_tau(pi~, lambda) for the NPG policy at lambda >= 0.
inline double dual_value_estimate(const TabularCmdp& cmdp, const Vector& lambda,
                                  const DualSettings& settings) {
    detail::require(lambda.size() == cmdp.n_constraints(),
                    "dual_value_estimate: lambda must have m entries");
    detail::require((lambda.array() >= 0.0).all(), "dual_value_estimate: lambda must be >= 0");
    const NpgResult npg = run_npg(cmdp, combined_reward(cmdp, lambda), settings.tau, settings.delta);
    return lagrangian(cmdp, npg.policy, lambda, settings.tau);
}

struct CorollaryReport {
    double target = 0.0;
    double c_epsilon = 0.0;
    double c_delta = 0.0;
    /// Smallest integer T with epsilon(T) < c_epsilon.
    double t_required = 0.0;
};

struct DiagnosticsReport {
    double epsilon_theorem1 = 0.0;
    double epsilon_alt = 0.0;
    double tau = 0.0;
    double delta = 0.0;
    double xi = 0.0;
    double b_lambda = 0.0;
    /// (r_{0,max} + sqrt(m) B R_max + tau log|A|)/(1-gamma).
    double b_d = 0.0;
    /// (xi + sqrt(m) R_max/(1-gamma)) B_lambda.
    double b_d_upper = 0.0;
    double radius_outer = 0.0;
    double radius_inner = 0.0;
    /// epsilon + 6 tau gamma delta.
    double dual_gap_bound = 0.0;
    std::optional<double> l_beta;
    std::optional<double> l_d;
    std::optional<double> gap_bound;
    std::optional<double> violation_bound;
    std::optional<CorollaryReport> corollary;
    std::optional<double> lp_optimum;
    std::optional<double> measured_gap;
    std::optional<double> measured_violation;
};

/// ceil(log_beta(1/C_M)) + 1/(1-beta) + 1.
inline double compute_l_beta(const MixingConstants& mix) {
    detail::require(mix.c_m > 0.0 && mix.beta > 0.0 && mix.beta < 1.0,
                    "mixing constants: need C_M > 0 and beta in (0,1)");
    return std::ceil(std::log(1.0 / mix.c_m) / std::log(mix.beta)) + 1.0 / (1.0 - mix.beta) + 1.0;
}

/// Closed-form bounds at the resolved settings.
inline DiagnosticsReport theorem1_bounds(const TabularCmdp& cmdp, const DualSettings& s,
                                         const std::optional<MixingConstants>& mixing = std::nullopt,
                                         std::optional<double> target = std::nullopt) {
    DiagnosticsReport d;
    const double m = double(cmdp.n_constraints());
    const double g = cmdp.gamma();
    const double log_a = std::log(double(cmdp.n_actions()));
    const double rmax = cmdp.r_max();
    const double na = double(cmdp.n_actions());
    d.epsilon_theorem1 = s.epsilon;
    d.epsilon_alt = s.epsilon_alt;
    d.tau = s.tau;
    d.delta = s.delta;
    d.xi = s.xi;
    d.b_lambda = s.b_lambda;
    d.b_d = (cmdp.reward_max(0) + std::sqrt(m) * s.b_lambda * rmax + s.tau * log_a) / (1.0 - g);
    d.b_d_upper = (s.xi + std::sqrt(m) * rmax / (1.0 - g)) * s.b_lambda;
    d.radius_outer = s.b_lambda;
    d.radius_inner = m > 0 ? s.b_lambda / (m + std::sqrt(m)) : 0.0;
    d.dual_gap_bound = s.epsilon + 6.0 * s.tau * g * s.delta;
    if (!mixing)
        return d;

    const double eps = s.epsilon;
    const double delta = s.delta;
    const double lb = compute_l_beta(*mixing);
    d.l_beta = lb;
    d.l_d = rmax * rmax * lb / ((1.0 - g) * (1.0 - g) * s.tau);
    const double e23 = std::pow(eps, 2.0 / 3.0);
    const double e13 = std::cbrt(eps);
    d.gap_bound = s.b_lambda * rmax * std::sqrt(2.0 * m * lb) / (1.0 - g) *
                      std::sqrt(e23 + 6.0 * g * delta) +
                  2.0 * eps + 18.0 * g * delta * e13 + log_a / (1.0 - g) * e13 +
                  std::sqrt(m) * s.b_lambda * lb * na * rmax / (1.0 - g) * delta;
    d.violation_bound = 2.0 * rmax * rmax * lb / (1.0 - g) * (e23 + 6.0 * g * delta) +
                        lb * na * rmax / (1.0 - g) * delta;

    if (target) {
        const double k = *target;
        detail::require(k > 0.0, "theorem1_bounds: target accuracy must be positive");
        const double b = s.b_lambda;
        CorollaryReport c;
        c.target = k;
        const double q = 1.0 - g;
        c.c_epsilon = std::min({std::pow(k * q, 3) / (1000.0 * std::pow(b * rmax, 3) *
                                                      std::pow(m, 1.5) * std::pow(lb, 1.5)),
                                k / 10.0, k / (90.0 * g),
                                std::pow(k * q, 3) / (125.0 * std::pow(log_a, 3)),
                                std::pow(k * q, 1.5) /
                                    (16.0 * std::sqrt(2.0) * std::pow(rmax, 3) * std::pow(lb, 1.5))});
        c.c_delta = std::min({k * k * q * q / (600.0 * g * b * b * rmax * rmax * m * lb),
                              std::pow(k, 2.0 / 3.0) / std::pow(90.0 * g, 2.0 / 3.0),
                              k * q / (5.0 * std::sqrt(m) * b * lb * na * rmax),
                              k * q / (48.0 * g * rmax * rmax * lb),
                              q * k / (2.0 * lb * na * rmax)});
        const double z = s.vaidya.zeta;
        const double t_star =
            std::log(std::numbers::pi) / z +
            2.0 * m / z * std::log(2.0 * m * m * b * detail::dual_scale(cmdp, s.xi) / (z * c.c_epsilon));
        c.t_required = std::floor(t_star) + 1.0;
        d.corollary = c;
    }
    return d;
}

struct TraceRow {
    int t = 0;
    VaidyaAction action = VaidyaAction::Drop;
    Eigen::Index k = 0;
    double sigma_min = 0.0;
    Vector lambda;
    std::optional<double> value_estimate;
    std::optional<double> best_so_far;
    std::optional<double> gap_vs_lp;
    std::optional<double> violation_l2;
};

using ConvergenceTrace = std::vector<TraceRow>;

struct Solution {
    Policy policy;
    Vector lambda;
    ConvergenceTrace trace;
    DiagnosticsReport diagnostics;
    DualSettings settings;
    /// Rows where a drop was attempted and undone.
    int drop_rollbacks = 0;
};

/// ||[c - V]_+||_2.
inline double violation_l2(const Vector& thresholds, const Vector& values) {
    return (thresholds - values).cwiseMax(0.0).norm();
}

inline Solution solve(const TabularCmdp& cmdp, const DualConfig& cfg) {
    Solution out;
    out.settings = resolve(cmdp, cfg);
    const DualSettings& s = out.settings;
    const Eigen::Index m = cmdp.n_constraints();

    std::optional<LpSolution> lp_ref;
    if (cfg.oracle_check) {
        lp_ref = lp_solve_cmdp(cmdp);
        if (lp_ref->status != lp::Status::Optimal)
            lp_ref.reset();
    }

    if (m == 0) {
        out.lambda = Vector::Zero(0);
    } else {
        std::vector<std::optional<Policy>> policies;
        auto oracle = [&](const Vector& lambda) {
            DualQuery q = dual_query(cmdp, lambda, s);
            policies.push_back(std::move(q.policy));
            return q.cut;
        };
        const VaidyaResult run = vaidya_run(oracle, initial_simplex(s.b_lambda, m), s.vaidya);

        std::size_t query = 0;
        std::optional<double> best;
        for (const VaidyaStep& st : run.steps) {
            TraceRow row;
            row.t = st.t;
            row.action = st.action;
            row.k = st.k;
            row.sigma_min = st.sigma_min;
            row.lambda = st.lambda;
            row.value_estimate = st.value_estimate;
            if (st.drop_rolled_back)
                ++out.drop_rollbacks;
            if (st.action != VaidyaAction::Drop) {
                const auto& pol = policies.at(query++);
                if (pol && lp_ref) {
                    row.gap_vs_lp = lp_ref->optimal_value - value(cmdp, *pol, cmdp.reward(0));
                    row.violation_l2 = violation_l2(cmdp.thresholds(), constraint_values(cmdp, *pol));
                }
            }
            if (st.value_estimate && (!best || *st.value_estimate < *best))
                best = st.value_estimate;
            row.best_so_far = best;
            out.trace.push_back(std::move(row));
        }
        if (!run.best_point)
            throw NumericalError("solve: no nonnegative iterate was visited in " +
                                 std::to_string(s.t_outer) + " iterations");
        out.lambda = *run.best_point;
    }

    out.policy = run_npg(cmdp, combined_reward(cmdp, out.lambda), s.tau, s.delta).policy;
    out.diagnostics = theorem1_bounds(cmdp, s, cfg.mixing, cfg.target_accuracy);
    if (lp_ref) {
        out.diagnostics.lp_optimum = lp_ref->optimal_value;
        out.diagnostics.measured_gap = lp_ref->optimal_value - value(cmdp, out.policy, cmdp.reward(0));
        out.diagnostics.measured_violation =
            violation_l2(cmdp.thresholds(), constraint_values(cmdp, out.policy));
    }
    return out;
}

namespace detail {

inline std::string fmt_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::string fmt_optional(const std::optional<double>& x) {
    return x ? fmt_double(*x) : std::string();
}

} // namespace detail

/// CSV with columns t, action, k, sigma_min, lambda (';'-joined),
/// value_estimate, gap_vs_lp, violation_l2, best_so_far.
inline void write_trace_csv(std::ostream& os, const ConvergenceTrace& trace) {
    os << "t,action,k,sigma_min,lambda,value_estimate,gap_vs_lp,violation_l2,best_so_far\n";
    for (const TraceRow& r : trace) {
        os << r.t << ',' << to_string(r.action) << ',' << r.k << ','
           << detail::fmt_double(r.sigma_min) << ',';
        for (Eigen::Index i = 0; i < r.lambda.size(); ++i)
            os << (i ? ";" : "") << detail::fmt_double(r.lambda[i]);
        os << ',' << detail::fmt_optional(r.value_estimate) << ','
           << detail::fmt_optional(r.gap_vs_lp) << ',' << detail::fmt_optional(r.violation_l2)
           << ',' << detail::fmt_optional(r.best_so_far) << '\n';
    }
}

} // namespace cpcmdp
