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

// Exact entropy-regularized natural policy gradient for tabular MDPs.
//
// With softmax policies the NPG step has the closed form
//     pi'(a|s) ~ pi(a|s)^(1 - eta tau/(1-gamma)) exp(eta Q_tau(s,a)/(1-gamma)),
// and at the largest admissible step eta = (1-gamma)/tau it reduces to
// pi'(a|s) ~ exp(Q_tau(s,a)/tau). The iterates converge linearly (rate gamma)
// to the unique regularized optimum.

#pragma once

#include "cpcmdp/core.hpp"

#include <cmath>
#include <functional>

namespace cpcmdp {

struct NpgResult {
    Policy policy;
    int iterations_used = 0;
    /// Guaranteed ||pi*_tau - pi||_inf bound (delta).
    double policy_gap_bound = 0.0;
    /// Guaranteed ||V*_tau - V_tau^pi||_inf bound (6 tau gamma delta).
    double value_gap_bound = 0.0;
    /// Rescaling constant R = max(max r, 1).
    double reward_scale = 1.0;
    /// Upper bound on C_1 used for the iteration count (rescaled units).
    double c1_bound = 0.0;
};

/// Called after every iteration with (t, pi^(t+1)), t starting at 0.
using NpgObserver = std::function<void(int, const Policy&)>;

/// One closed-form NPG update.
inline Policy npg_step(const Policy& policy, const Matrix& soft_q, double eta, double tau,
                       double gamma) {
    detail::require(tau > 0.0, "npg_step: tau must be positive");
    detail::require(gamma > 0.0 && gamma < 1.0, "npg_step: gamma must lie in (0,1)");
    const double eta_max = (1.0 - gamma) / tau;
    // eta_max is itself a rounded quantity; accept values within a few ulps.
    if (!(eta > 0.0 && eta <= eta_max * (1.0 + 1e-12)))
        throw ModelError("npg_step: eta must lie in (0, (1-gamma)/tau]");
    detail::require(soft_q.rows() == policy.n_states() && soft_q.cols() == policy.n_actions(),
                    "npg_step: soft_q dimensions do not match the policy");

    const double keep = std::max(0.0, 1.0 - eta * tau / (1.0 - gamma));
    Matrix logits = (eta / (1.0 - gamma)) * soft_q;
    if (keep > 1e-15) {
        const Matrix log_pi = policy.logits();
        for (Eigen::Index s = 0; s < logits.rows(); ++s)
            for (Eigen::Index a = 0; a < logits.cols(); ++a)
                logits(s, a) = std::isinf(log_pi(s, a))
                                   ? -std::numeric_limits<double>::infinity()
                                   : logits(s, a) + keep * log_pi(s, a);
    }
    return Policy::softmax(logits);
}

/// Iterations sufficient for delta accuracy:
/// ceil((log(2 c1 R) + log(1/delta) + log(1/tau)) / log(1/gamma)) + 1, at least 1.
inline int npg_iteration_bound(double c1, double r_scale, double delta, double tau,
                               double gamma) {
    detail::require(c1 > 0.0 && r_scale > 0.0 && delta > 0.0 && tau > 0.0,
                    "npg_iteration_bound: inputs must be positive");
    detail::require(gamma > 0.0 && gamma < 1.0, "npg_iteration_bound: gamma must lie in (0,1)");
    const double numer = std::log(2.0 * c1 * r_scale) - std::log(delta) - std::log(tau);
    const double t = std::ceil(numer / -std::log(gamma)) + 1.0;
    return t < 1.0 ? 1 : int(t);
}

/// NPG(r, tau, delta): rescales r and tau by R = max(max r, 1), runs the exact
/// NPG loop at eta = (1-gamma)/tau' from the uniform policy for the number of
/// iterations that guarantees ||pi*_tau - pi||_inf < delta.
inline NpgResult run_npg(const TabularCmdp& cmdp, const RewardTable& reward, double tau,
                         double delta, const NpgObserver& observer = {}) {
    detail::check_reward(cmdp, reward);
    detail::require(tau > 0.0, "run_npg: tau must be positive");
    detail::require(delta > 0.0, "run_npg: delta must be positive");
    if (delta >= 1.0)
        throw ModelError("run_npg: delta >= 1 is meaningless for a policy distance");
    if (!reward.allFinite())
        throw ModelError("run_npg: reward table is not finite");
    if ((reward.array() < 0.0).any())
        throw ModelError("run_npg: reward entries must be nonnegative");

    const double gamma = cmdp.gamma();
    const double r_scale = std::max(reward.maxCoeff(), 1.0);
    const RewardTable scaled = reward / r_scale;
    const double tau_scaled = tau / r_scale;
    const double eta = (1.0 - gamma) / tau_scaled;
    const double c1 =
        (1.0 + tau_scaled * std::log(double(cmdp.n_actions()))) / (1.0 - gamma);
    const int iterations = npg_iteration_bound(c1, r_scale, delta, tau, gamma);

    Policy pi = Policy::uniform(cmdp.n_states(), cmdp.n_actions());
    for (int t = 0; t < iterations; ++t) {
        const SoftValues sv = soft_evaluate(cmdp, pi, scaled, tau_scaled);
        pi = npg_step(pi, sv.soft_q, eta, tau_scaled, gamma);
        if (observer)
            observer(t, pi);
    }

    NpgResult out;
    out.policy = std::move(pi);
    out.iterations_used = iterations;
    out.policy_gap_bound = delta;
    out.value_gap_bound = 6.0 * tau * gamma * delta;
    out.reward_scale = r_scale;
    out.c1_bound = c1;
    return out;
}

} // namespace cpcmdp
