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

#include "cpcmdp/npg.hpp"
#include "cpcmdp/oracles.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace cpcmdp;
using cpcmdp::testutil::coin_cmdp;
using cpcmdp::testutil::random_cmdp;
using cpcmdp::testutil::random_policy;

namespace {

TabularCmdp with_all_thresholds(const TabularCmdp& c, double v) {
    return c.with_thresholds(Vector::Constant(c.n_constraints(), v));
}

} // namespace

TEST(LpSolve, CoinInstance) {
    const auto sol = lp_solve_cmdp(coin_cmdp());
    ASSERT_EQ(sol.status, lp::Status::Optimal);
    EXPECT_NEAR(sol.optimal_value, 0.5, 1e-9);
    EXPECT_NEAR(sol.policy.probs()(0, 0), 0.5, 1e-9);
    EXPECT_NEAR(sol.policy.probs()(0, 1), 0.5, 1e-9);
}

TEST(LpSolve, SlackConstraintsMatchValueIteration) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto cmdp = with_all_thresholds(random_cmdp(seed, 6, 3, 2), -1e6);
        const auto sol = lp_solve_cmdp(cmdp);
        ASSERT_EQ(sol.status, lp::Status::Optimal);
        const auto vi = value_iteration(cmdp, cmdp.reward(0), 1e-12);
        EXPECT_NEAR(sol.optimal_value, cmdp.rho().dot(vi.values), 1e-8);
        EXPECT_NEAR(value(cmdp, vi.policy, cmdp.reward(0)), sol.optimal_value, 1e-8);
    }
}

TEST(LpSolve, UnreachableThresholdIsInfeasible) {
    const auto sol = lp_solve_cmdp(coin_cmdp(1e-12, 1.5));
    EXPECT_EQ(sol.status, lp::Status::Infeasible);
    const auto cmdp = random_cmdp(3, 5, 2, 1);
    const double vmax = cmdp.rho().dot(value_iteration(cmdp, cmdp.reward(1), 1e-12).values);
    EXPECT_EQ(lp_solve_cmdp(with_all_thresholds(cmdp, vmax + 0.1)).status, lp::Status::Infeasible);
}

TEST(LpSolve, OccupancyInvariants) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto base = random_cmdp(seed, 7, 3, 2);
        const auto ref = lp_solve_cmdp(with_all_thresholds(base, -1e6));
        // Thresholds halfway to the best achievable value of each constraint.
        Vector c(2);
        for (int i = 0; i < 2; ++i)
            c[i] = 0.5 * base.rho().dot(value_iteration(base, base.reward(i + 1), 1e-12).values);
        const auto cmdp = base.with_thresholds(c);
        const auto sol = lp_solve_cmdp(cmdp);
        ASSERT_EQ(sol.status, lp::Status::Optimal);
        EXPECT_GE(sol.occupancy.minCoeff(), 0.0);
        EXPECT_NEAR(sol.occupancy.sum(), 1.0, 1e-8);
        const double g = cmdp.gamma();
        for (Eigen::Index s = 0; s < cmdp.n_states(); ++s) {
            double inflow = (1 - g) * cmdp.rho()[s];
            for (Eigen::Index sp = 0; sp < cmdp.n_states(); ++sp)
                for (Eigen::Index a = 0; a < cmdp.n_actions(); ++a)
                    inflow += g * cmdp.kernel()(sp * cmdp.n_actions() + a, s) * sol.occupancy(sp, a);
            EXPECT_NEAR(sol.occupancy.row(s).sum(), inflow, 1e-8);
        }
        for (int i = 0; i < 2; ++i) {
            const double v = (sol.occupancy.array() * cmdp.reward(i + 1).array()).sum() / (1 - g);
            EXPECT_GE(v, c[i] - 1e-8);
        }
        EXPECT_LE(sol.optimal_value, ref.optimal_value + 1e-9);
    }
}

TEST(LpSolve, DominatesFeasiblePoliciesAndIsAttained) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto base = random_cmdp(seed + 100, 5, 3, 1);
        const Policy probe = random_policy(seed, 5, 3);
        const auto cmdp = with_all_thresholds(base, value(base, probe, base.reward(1)));
        const auto sol = lp_solve_cmdp(cmdp);
        ASSERT_EQ(sol.status, lp::Status::Optimal);
        for (std::uint64_t k = 0; k < 20; ++k) {
            const Policy p = random_policy(seed * 97 + k, 5, 3);
            if ((constraint_values(cmdp, p) - cmdp.thresholds()).minCoeff() >= 0.0)
                EXPECT_GE(sol.optimal_value, value(cmdp, p, cmdp.reward(0)) - 1e-9);
        }
        EXPECT_GE(sol.optimal_value, value(cmdp, probe, cmdp.reward(0)) - 1e-9);
        EXPECT_NEAR(value(cmdp, sol.policy, cmdp.reward(0)), sol.optimal_value, 1e-7);
    }
}

TEST(LpSolve, OccupancyRoundTrip) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto cmdp = with_all_thresholds(random_cmdp(seed + 200, 8, 3, 1), 0.0);
        const auto sol = lp_solve_cmdp(cmdp);
        ASSERT_EQ(sol.status, lp::Status::Optimal);
        const Matrix nu = visitation(cmdp, sol.policy);
        for (Eigen::Index s = 0; s < cmdp.n_states(); ++s)
            if (sol.occupancy.row(s).sum() > 1e-9)
                EXPECT_LT((nu.row(s) - sol.occupancy.row(s)).cwiseAbs().maxCoeff(), 1e-7);
    }
}

TEST(PolicyFromOccupancy, ZeroMassIsUniform) {
    Matrix nu(2, 3);
    nu << 0.2, 0.6, 0.2, 0, 0, 0;
    const Policy p = policy_from_occupancy(nu);
    EXPECT_NEAR(p.probs()(0, 1), 0.6, 1e-15);
    EXPECT_NEAR(p.probs()(1, 2), 1.0 / 3.0, 1e-15);
}

TEST(SlaterMargin, UnconstrainedIsInfinite) {
    const auto cmdp = random_cmdp(1, 4, 2, 0);
    const auto res = slater_solve(cmdp);
    EXPECT_TRUE(res.unconstrained);
    EXPECT_TRUE(std::isinf(res.margin));
}

TEST(SlaterMargin, CoinInstanceMatchesGrid) {
    const auto cmdp = coin_cmdp();
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 10000; ++i) {
        const double p1 = i * 1e-4;
        Matrix pm(1, 2);
        pm << 1 - p1, p1;
        best = std::max(best, (constraint_values(cmdp, Policy(pm)) - cmdp.thresholds()).minCoeff());
    }
    EXPECT_NEAR(best, 0.5, 1e-9);
    EXPECT_NEAR(slater_margin(cmdp), 0.5, 1e-9);
}

TEST(SlaterMargin, TightThresholdGivesZero) {
    const auto base = random_cmdp(9, 5, 3, 1);
    const double vmax = base.rho().dot(value_iteration(base, base.reward(1), 1e-13).values);
    EXPECT_NEAR(slater_margin(with_all_thresholds(base, vmax)), 0.0, 1e-8);
    EXPECT_NEAR(slater_margin(coin_cmdp(1e-12, 1.0)), 0.0, 1e-8);
}

TEST(SlaterMargin, RecoveredPolicyAchievesMargin) {
    for (std::uint64_t seed = 0; seed < 15; ++seed) {
        auto cmdp = with_all_thresholds(random_cmdp(seed + 300, 6, 3, 2), 1.0);
        const auto res = slater_solve(cmdp);
        const Vector v = constraint_values(cmdp, res.policy);
        EXPECT_GE((v - cmdp.thresholds()).minCoeff(), res.margin - 1e-7);
    }
}

TEST(SoftValueIteration, SingleStateClosedForm) {
    const auto cmdp = coin_cmdp(0.8);
    RewardTable r(1, 2);
    r << 0.3, 1.1;
    for (double tau : {0.05, 0.5, 3.0}) {
        const auto opt = soft_value_iteration(cmdp, r, tau, 1e-13);
        const double expect = tau * std::log(std::exp(0.3 / tau) + std::exp(1.1 / tau)) / 0.2;
        EXPECT_NEAR(opt.values[0], expect, 1e-10);
    }
}

TEST(SoftValueIteration, LargeTemperatureFlattens) {
    const auto cmdp = random_cmdp(5, 4, 3, 0, 0.7);
    const double tau = 1e6;
    const auto opt = soft_value_iteration(cmdp, cmdp.reward(0), tau, 1e-6);
    EXPECT_LT((opt.policy.probs().array() - 1.0 / 3.0).abs().maxCoeff(), 1e-6);
    const Policy u = Policy::uniform(4, 3);
    const Vector expect = evaluate(cmdp, u, cmdp.reward(0), tau).per_state_values;
    EXPECT_LT((opt.values - expect).cwiseAbs().maxCoeff() / expect.cwiseAbs().maxCoeff(), 1e-9);
}

TEST(SoftValueIteration, Contraction) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto cmdp = random_cmdp(seed, 6, 3, 0, 0.9);
        const auto opt = soft_value_iteration(cmdp, cmdp.reward(0), 0.2, 1e-11, 1000000, true);
        // Differences become nearly constant vectors, where the ratio is exactly gamma;
        // allow a few ulps of |V| for rounding.
        const double ulp = 16 * std::numeric_limits<double>::epsilon() * opt.values.cwiseAbs().maxCoeff();
        for (std::size_t i = 1; i < opt.residuals.size(); ++i)
            if (opt.residuals[i - 1] > 1e-13)
                EXPECT_LE(opt.residuals[i], 0.9 * opt.residuals[i - 1] + ulp);
    }
}

TEST(SoftValueIteration, FixedPointIsSelfConsistent) {
    const auto cmdp = random_cmdp(8, 5, 3, 0, 0.85);
    const auto opt = soft_value_iteration(cmdp, cmdp.reward(0), 0.3, 1e-12);
    const auto rep = evaluate(cmdp, opt.policy, cmdp.reward(0), 0.3);
    EXPECT_LT((rep.per_state_values - opt.values).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(SoftValueIteration, AgreesWithNpg) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto cmdp = random_cmdp(seed + 40, 5, 3, 0);
        const auto opt = soft_value_iteration(cmdp, cmdp.reward(0), 0.1, 1e-12);
        const auto npg = run_npg(cmdp, cmdp.reward(0), 0.1, 1e-10);
        EXPECT_LT((opt.policy.probs() - npg.policy.probs()).cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(ExactDual, CoinClosedForm) {
    // d(lambda) = tau log(e^{1/tau} + e^{lambda/tau}) - lambda/2 at gamma ~ 0.
    const auto cmdp = coin_cmdp();
    const double tau = 0.2;
    for (double lam : {0.0, 0.5, 1.0, 2.5}) {
        const auto d = exact_dual(cmdp, Vector::Constant(1, lam), tau);
        const double expect = tau * std::log(std::exp(1 / tau) + std::exp(lam / tau)) - lam / 2;
        EXPECT_NEAR(d.value, expect, 1e-9);
        const double p1 = 1 / (1 + std::exp((1 - lam) / tau));
        EXPECT_NEAR(d.gradient[0], p1 - 0.5, 1e-9);
    }
    const auto g = grid_dual_min(cmdp, tau, 4.0, 1e-2, 2);
    EXPECT_NEAR(g.lambda[0], 1.0, 1e-4);
    EXPECT_NEAR(g.value, 0.5 + tau * std::log(2.0), 1e-9);
}

TEST(GridDual, ConstraintFreeMinimumAtZero) {
    const auto cmdp = with_all_thresholds(random_cmdp(12, 4, 2, 2), -1e6);
    const auto g = grid_dual_min(cmdp, 0.1, 2.0, 0.25);
    EXPECT_EQ(g.lambda[0], 0.0);
    EXPECT_EQ(g.lambda[1], 0.0);
}

TEST(GridDual, ConvexAlongLines) {
    const auto base = random_cmdp(13, 5, 3, 2);
    const auto cmdp = with_all_thresholds(base, 0.5 * value(base, Policy::uniform(5, 3), base.reward(1)));
    const double h = 0.1;
    for (int axis = 0; axis < 2; ++axis) {
        std::vector<double> d;
        for (int i = 0; i <= 30; ++i) {
            Vector lam = Vector::Constant(2, 0.3);
            lam[axis] = i * h;
            d.push_back(exact_dual(cmdp, lam, 0.1).value);
        }
        for (std::size_t i = 1; i + 1 < d.size(); ++i)
            EXPECT_GE(d[i - 1] - 2 * d[i] + d[i + 1], -1e-8);
    }
}

TEST(GridDual, RejectsLargeDimension) {
    EXPECT_THROW(grid_dual_min(random_cmdp(1, 3, 2, 3), 0.1, 1.0, 0.5), ModelError);
}
