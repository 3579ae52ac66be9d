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

// Exact tabular MDP machinery: policy evaluation (plain and entropy
// regularized), soft Q-values, discounted visitation and entropy, and the
// entropy-regularized Lagrangian of a constrained MDP. Everything is computed
// with dense LU solves; nothing is sampled.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cpcmdp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// |S|x|A| table indexed (s, a).
using RewardTable = Eigen::MatrixXd;

/// Raised when an instance, policy or argument violates its contract.
class ModelError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Numerical failure inside an otherwise valid computation.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline constexpr double kStochasticTol = 1e-12;

/// x log x with the continuous extension 0 log 0 = 0.
inline double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

inline void require(bool condition, const std::string& message) {
    if (!condition)
        throw ModelError(message);
}

inline void check_distribution(const Eigen::Ref<const Vector>& p, const std::string& what) {
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        if (!std::isfinite(p[i]) || p[i] < 0.0)
            throw ModelError(what + ": entry " + std::to_string(i) +
                             " is negative or not finite");
    }
    if (std::abs(p.sum() - 1.0) > kStochasticTol)
        throw ModelError(what + ": entries sum to " + std::to_string(p.sum()) +
                         ", expected 1");
}

} // namespace detail

/// Row-stochastic |S|x|A| table of action probabilities.
///
/// Stored as probabilities. The softmax parametrization theta(s,a) = log pi(a|s)
/// is available through logits().
class Policy {
public:
    Policy() = default;

    explicit Policy(Matrix probs) : probs_(std::move(probs)) {
        detail::require(probs_.rows() > 0 && probs_.cols() > 0, "Policy: empty table");
        for (Eigen::Index s = 0; s < probs_.rows(); ++s)
            detail::check_distribution(probs_.row(s).transpose(),
                                       "Policy row " + std::to_string(s));
    }

    static Policy uniform(Eigen::Index n_states, Eigen::Index n_actions) {
        return Policy(Matrix::Constant(n_states, n_actions, 1.0 / double(n_actions)));
    }

    /// Row-wise softmax of arbitrary logits, computed with max subtraction.
    static Policy softmax(const Matrix& logits) {
        Matrix p(logits.rows(), logits.cols());
        for (Eigen::Index s = 0; s < logits.rows(); ++s) {
            const double mx = logits.row(s).maxCoeff();
            detail::require(std::isfinite(mx), "Policy::softmax: row without finite logit");
            p.row(s) = (logits.row(s).array() - mx).exp();
            p.row(s) /= p.row(s).sum();
        }
        return Policy(std::move(p));
    }

    Eigen::Index n_states() const { return probs_.rows(); }
    Eigen::Index n_actions() const { return probs_.cols(); }

    double operator()(Eigen::Index s, Eigen::Index a) const { return probs_(s, a); }
    const Matrix& probs() const { return probs_; }

    /// theta(s,a) = log pi(a|s); -inf where the probability is zero.
    Matrix logits() const {
        return probs_.unaryExpr([](double p) {
            return p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
        });
    }

    /// Per-state entropy -sum_a pi log pi.
    Vector state_entropy() const {
        Vector h(n_states());
        for (Eigen::Index s = 0; s < n_states(); ++s) {
            double acc = 0.0;
            for (Eigen::Index a = 0; a < n_actions(); ++a)
                acc -= detail::xlogx(probs_(s, a));
            h[s] = acc;
        }
        return h;
    }

    bool is_deterministic() const {
        return (probs_.array() == 1.0).count() == probs_.rows();
    }

private:
    Matrix probs_;
};

/// Finite constrained MDP: kernel, rewards r_0..r_m, thresholds c_1..c_m,
/// discount and initial distribution. Immutable after construction.
class TabularCmdp {
public:
    TabularCmdp() = default;

    /// kernel has |S|*|A| rows (row index s*|A| + a) and |S| columns.
    TabularCmdp(Eigen::Index n_states, Eigen::Index n_actions, Matrix kernel,
                std::vector<RewardTable> rewards, Vector thresholds, double gamma, Vector rho)
        : n_states_(n_states),
          n_actions_(n_actions),
          kernel_(std::move(kernel)),
          rewards_(std::move(rewards)),
          thresholds_(std::move(thresholds)),
          gamma_(gamma),
          rho_(std::move(rho)) {
        validate();
        reward_max_.resize(Eigen::Index(rewards_.size()));
        for (std::size_t i = 0; i < rewards_.size(); ++i)
            reward_max_[Eigen::Index(i)] = rewards_[i].maxCoeff();
        r_max_ = reward_max_.size() > 1 ? reward_max_.tail(reward_max_.size() - 1).norm() : 0.0;
    }

    Eigen::Index n_states() const { return n_states_; }
    Eigen::Index n_actions() const { return n_actions_; }
    /// Number of constraints m.
    Eigen::Index n_constraints() const { return thresholds_.size(); }
    double gamma() const { return gamma_; }
    const Vector& rho() const { return rho_; }
    const Matrix& kernel() const { return kernel_; }
    const std::vector<RewardTable>& rewards() const { return rewards_; }
    const RewardTable& reward(std::size_t i) const { return rewards_.at(i); }
    const Vector& thresholds() const { return thresholds_; }

    /// P(.|s,a) as a row vector.
    auto transition(Eigen::Index s, Eigen::Index a) const {
        return kernel_.row(s * n_actions_ + a);
    }

    /// r_{i,max} = max_{s,a} r_i(s,a).
    double reward_max(std::size_t i) const { return reward_max_[Eigen::Index(i)]; }
    /// R_max = sqrt(sum_{i>=1} r_{i,max}^2).
    double r_max() const { return r_max_; }

    /// Copy with different thresholds (everything else unchanged).
    TabularCmdp with_thresholds(Vector c) const {
        return TabularCmdp(n_states_, n_actions_, kernel_, rewards_, std::move(c), gamma_, rho_);
    }

private:
    void validate() const {
        using detail::require;
        require(n_states_ >= 1 && n_actions_ >= 1, "TabularCmdp: sizes must be positive");
        require(gamma_ > 0.0 && gamma_ < 1.0, "TabularCmdp: gamma must lie in (0,1)");
        require(kernel_.rows() == n_states_ * n_actions_ && kernel_.cols() == n_states_,
                "TabularCmdp: kernel must be |S||A| x |S|");
        for (Eigen::Index row = 0; row < kernel_.rows(); ++row)
            detail::check_distribution(kernel_.row(row).transpose(),
                                       "TabularCmdp kernel (s=" +
                                           std::to_string(row / n_actions_) +
                                           ", a=" + std::to_string(row % n_actions_) + ")");
        require(rho_.size() == n_states_, "TabularCmdp: rho must have |S| entries");
        detail::check_distribution(rho_, "TabularCmdp rho");
        require(rewards_.size() == std::size_t(thresholds_.size()) + 1,
                "TabularCmdp: need m+1 reward tables for m thresholds");
        for (std::size_t i = 0; i < rewards_.size(); ++i) {
            const auto& r = rewards_[i];
            require(r.rows() == n_states_ && r.cols() == n_actions_,
                    "TabularCmdp: reward " + std::to_string(i) + " must be |S| x |A|");
            for (Eigen::Index s = 0; s < r.rows(); ++s)
                for (Eigen::Index a = 0; a < r.cols(); ++a)
                    require(std::isfinite(r(s, a)) && r(s, a) >= 0.0,
                            "TabularCmdp: reward " + std::to_string(i) + " at (s=" +
                                std::to_string(s) + ", a=" + std::to_string(a) +
                                ") must be finite and nonnegative");
        }
        for (Eigen::Index i = 0; i < thresholds_.size(); ++i)
            require(std::isfinite(thresholds_[i]), "TabularCmdp: threshold not finite");
    }

    Eigen::Index n_states_ = 0;
    Eigen::Index n_actions_ = 0;
    Matrix kernel_;
    std::vector<RewardTable> rewards_;
    Vector thresholds_;
    double gamma_ = 0.5;
    Vector rho_;
    Vector reward_max_;
    double r_max_ = 0.0;
};

/// Result of an exact policy evaluation.
struct ValueReport {
    Vector per_state_values;
    double scalar_value = 0.0;
    /// Q_tau(s,a) = r(s,a) + gamma sum_s' P(s'|s,a) V(s').
    Matrix soft_q;
    /// Discounted entropy H(pi).
    double entropy = 0.0;
    /// nu_rho^pi(s,a).
    Matrix visitation;
};

namespace detail {

inline void check_policy(const TabularCmdp& cmdp, const Policy& policy) {
    require(policy.n_states() == cmdp.n_states() && policy.n_actions() == cmdp.n_actions(),
            "policy dimensions do not match the instance");
}

inline void check_reward(const TabularCmdp& cmdp, const RewardTable& reward) {
    require(reward.rows() == cmdp.n_states() && reward.cols() == cmdp.n_actions(),
            "reward table dimensions do not match the instance");
}

/// P_pi(s, s') = sum_a pi(a|s) P(s'|s,a).
inline Matrix policy_kernel(const TabularCmdp& cmdp, const Policy& policy) {
    const auto ns = cmdp.n_states();
    const auto na = cmdp.n_actions();
    Matrix p_pi = Matrix::Zero(ns, ns);
    for (Eigen::Index s = 0; s < ns; ++s)
        for (Eigen::Index a = 0; a < na; ++a)
            if (policy(s, a) != 0.0)
                p_pi.row(s) += policy(s, a) * cmdp.transition(s, a);
    return p_pi;
}

/// Q(s,a) = r(s,a) + gamma sum_s' P(s'|s,a) V(s').
inline Matrix backup(const TabularCmdp& cmdp, const RewardTable& reward, const Vector& v) {
    const Vector pv = cmdp.kernel() * v;
    Matrix q = reward;
    for (Eigen::Index s = 0; s < cmdp.n_states(); ++s)
        for (Eigen::Index a = 0; a < cmdp.n_actions(); ++a)
            q(s, a) += cmdp.gamma() * pv[s * cmdp.n_actions() + a];
    return q;
}

/// Solves (I - gamma P_pi) V = r_pi - tau sum_a pi log pi.
inline Vector solve_values(const TabularCmdp& cmdp, const Policy& policy, const Matrix& p_pi,
                           const RewardTable& reward, double tau) {
    const auto ns = cmdp.n_states();
    Vector rhs(ns);
    for (Eigen::Index s = 0; s < ns; ++s) {
        double acc = 0.0;
        for (Eigen::Index a = 0; a < cmdp.n_actions(); ++a) {
            const double p = policy(s, a);
            if (p > 0.0)
                acc += p * reward(s, a) - tau * p * std::log(p);
        }
        rhs[s] = acc;
    }
    const Matrix system = Matrix::Identity(ns, ns) - cmdp.gamma() * p_pi;
    Eigen::PartialPivLU<Matrix> lu(system);
    Vector v = lu.solve(rhs);
    if (!v.allFinite())
        throw NumericalError("policy evaluation: singular Bellman system");
    return v;
}

/// Discounted state distribution d = (1-gamma) rho + gamma P_pi^T d.
inline Vector state_visitation(const TabularCmdp& cmdp, const Matrix& p_pi) {
    const auto ns = cmdp.n_states();
    const Matrix system = Matrix::Identity(ns, ns) - cmdp.gamma() * p_pi.transpose();
    Vector d = Eigen::PartialPivLU<Matrix>(system).solve((1.0 - cmdp.gamma()) * cmdp.rho());
    if (!d.allFinite())
        throw NumericalError("visitation: singular flow system");
    return d;
}

} // namespace detail

/// Soft state values and Q-values only; the hot path of the policy optimizer.
struct SoftValues {
    Vector values;
    Matrix soft_q;
};

inline SoftValues soft_evaluate(const TabularCmdp& cmdp, const Policy& policy,
                                const RewardTable& reward, double tau) {
    detail::check_policy(cmdp, policy);
    detail::check_reward(cmdp, reward);
    detail::require(tau >= 0.0, "evaluate: tau must be nonnegative");
    const Matrix p_pi = detail::policy_kernel(cmdp, policy);
    Vector v = detail::solve_values(cmdp, policy, p_pi, reward, tau);
    Matrix q = detail::backup(cmdp, reward, v);
    return {std::move(v), std::move(q)};
}

/// Visitation table nu(s,a) = d(s) pi(a|s).
inline Matrix visitation(const TabularCmdp& cmdp, const Policy& policy) {
    detail::check_policy(cmdp, policy);
    const Vector d = detail::state_visitation(cmdp, detail::policy_kernel(cmdp, policy));
    return d.asDiagonal() * policy.probs();
}

/// Full evaluation of a policy under `reward`, optionally entropy regularized.
inline ValueReport evaluate(const TabularCmdp& cmdp, const Policy& policy,
                            const RewardTable& reward, double tau) {
    detail::check_policy(cmdp, policy);
    detail::check_reward(cmdp, reward);
    detail::require(tau >= 0.0, "evaluate: tau must be nonnegative");

    const Matrix p_pi = detail::policy_kernel(cmdp, policy);
    ValueReport report;
    report.per_state_values = detail::solve_values(cmdp, policy, p_pi, reward, tau);
    report.scalar_value = cmdp.rho().dot(report.per_state_values);
    report.soft_q = detail::backup(cmdp, reward, report.per_state_values);

    const Vector d = detail::state_visitation(cmdp, p_pi);
    report.visitation = d.asDiagonal() * policy.probs();
    report.entropy = d.dot(policy.state_entropy()) / (1.0 - cmdp.gamma());
    return report;
}

/// V_r^pi(rho) with tau = 0.
inline double value(const TabularCmdp& cmdp, const Policy& policy, const RewardTable& reward) {
    const Matrix p_pi = detail::policy_kernel(cmdp, policy);
    return cmdp.rho().dot(detail::solve_values(cmdp, policy, p_pi, reward, 0.0));
}

/// Constraint values [V_1, ..., V_m] at rho.
inline Vector constraint_values(const TabularCmdp& cmdp, const Policy& policy) {
    detail::check_policy(cmdp, policy);
    const Matrix p_pi = detail::policy_kernel(cmdp, policy);
    Vector out(cmdp.n_constraints());
    for (Eigen::Index i = 0; i < out.size(); ++i)
        out[i] = cmdp.rho().dot(
            detail::solve_values(cmdp, policy, p_pi, cmdp.reward(std::size_t(i) + 1), 0.0));
    return out;
}

/// H(pi): the value of reward -log pi with tau = 0, i.e. <d, h_pi>/(1-gamma).
inline double discounted_entropy(const TabularCmdp& cmdp, const Policy& policy) {
    detail::check_policy(cmdp, policy);
    RewardTable neg_log = policy.probs().unaryExpr(
        [](double p) { return p > 0.0 ? -std::log(p) : 0.0; });
    const Matrix p_pi = detail::policy_kernel(cmdp, policy);
    return cmdp.rho().dot(detail::solve_values(cmdp, policy, p_pi, neg_log, 0.0));
}

/// r_0 + sum_i lambda_i r_i.
inline RewardTable combined_reward(const TabularCmdp& cmdp, const Eigen::Ref<const Vector>& lambda) {
    detail::require(lambda.size() == cmdp.n_constraints(),
                    "combined_reward: lambda must have m entries");
    RewardTable r = cmdp.reward(0);
    for (Eigen::Index i = 0; i < lambda.size(); ++i)
        r += lambda[i] * cmdp.reward(std::size_t(i) + 1);
    return r;
}

/// Entropy-regularized Lagrangian V_0 + <lambda, V - c> + tau H, assembled from
/// per-reward evaluations.
inline double lagrangian(const TabularCmdp& cmdp, const Policy& policy,
                         const Eigen::Ref<const Vector>& lambda, double tau) {
    detail::require(lambda.size() == cmdp.n_constraints(),
                    "lagrangian: lambda must have m entries");
    detail::require(tau >= 0.0, "lagrangian: tau must be nonnegative");
    detail::check_policy(cmdp, policy);
    const double v0 = value(cmdp, policy, cmdp.reward(0));
    const Vector slack = constraint_values(cmdp, policy) - cmdp.thresholds();
    const double h = tau > 0.0 ? discounted_entropy(cmdp, policy) : 0.0;
    return v0 + lambda.dot(slack) + tau * h;
}

/// Same quantity through a single evaluation of the combined reward.
inline double lagrangian_combined(const TabularCmdp& cmdp, const Policy& policy,
                                  const Eigen::Ref<const Vector>& lambda, double tau) {
    const RewardTable r = combined_reward(cmdp, lambda);
    return evaluate(cmdp, policy, r, tau).scalar_value - lambda.dot(cmdp.thresholds());
}

} // namespace cpcmdp
