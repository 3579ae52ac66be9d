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

#include "cpcmdp/simplex.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace cpcmdp;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

lp::Problem make(VectorXd c, MatrixXd a, VectorXd b, std::vector<lp::Sense> s) {
    return lp::Problem{std::move(c), std::move(a), std::move(b), std::move(s)};
}

/// max c^T x over {A x <= b, x >= 0} in two variables by vertex enumeration.
double brute_force_2d(const VectorXd& c, const MatrixXd& a, const VectorXd& b) {
    MatrixXd rows(a.rows() + 2, 2);
    VectorXd rhs(a.rows() + 2);
    rows.topRows(a.rows()) = a;
    rhs.head(a.rows()) = b;
    rows.row(a.rows()) << -1, 0;
    rows.row(a.rows() + 1) << 0, -1;
    rhs.tail(2).setZero();
    double best = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < rows.rows(); ++i)
        for (Eigen::Index j = i + 1; j < rows.rows(); ++j) {
            Eigen::Matrix2d m;
            m.row(0) = rows.row(i);
            m.row(1) = rows.row(j);
            if (std::abs(m.determinant()) < 1e-12)
                continue;
            const Eigen::Vector2d x = m.partialPivLu().solve(Eigen::Vector2d(rhs[i], rhs[j]));
            if (((rows * x - rhs).array() <= 1e-9).all())
                best = std::max(best, c.dot(x));
        }
    return best;
}

} // namespace

TEST(Simplex, TextbookMaximum) {
    // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> 36 at (2, 6).
    MatrixXd a(3, 2);
    a << 1, 0, 0, 2, 3, 2;
    const auto sol = lp::solve(make(VectorXd{{3, 5}}, a, VectorXd{{4, 12, 18}},
                                    {3, lp::Sense::LessEqual}));
    ASSERT_EQ(sol.status, lp::Status::Optimal);
    EXPECT_NEAR(sol.value, 36.0, 1e-12);
    EXPECT_NEAR(sol.x[0], 2.0, 1e-12);
    EXPECT_NEAR(sol.x[1], 6.0, 1e-12);
}

TEST(Simplex, EqualityAndGreaterRows) {
    // max -x - y s.t. x + y = 1, x >= 0.3 -> -1.
    MatrixXd a(2, 2);
    a << 1, 1, 1, 0;
    const auto sol = lp::solve(make(VectorXd{{-1, -1}}, a, VectorXd{{1, 0.3}},
                                    {lp::Sense::Equal, lp::Sense::GreaterEqual}));
    ASSERT_EQ(sol.status, lp::Status::Optimal);
    EXPECT_NEAR(sol.value, -1.0, 1e-12);
    EXPECT_GE(sol.x[0], 0.3 - 1e-12);
}

TEST(Simplex, NegativeRightHandSide) {
    // -x <= -2 means x >= 2; min x -> 2.
    MatrixXd a(1, 1);
    a << -1;
    const auto sol = lp::solve(make(VectorXd{{-1}}, a, VectorXd{{-2}}, {lp::Sense::LessEqual}));
    ASSERT_EQ(sol.status, lp::Status::Optimal);
    EXPECT_NEAR(sol.x[0], 2.0, 1e-12);
}

TEST(Simplex, Infeasible) {
    MatrixXd a(2, 1);
    a << 1, 1;
    const auto sol = lp::solve(make(VectorXd{{1}}, a, VectorXd{{1, 2}},
                                    {lp::Sense::LessEqual, lp::Sense::GreaterEqual}));
    EXPECT_EQ(sol.status, lp::Status::Infeasible);
}

TEST(Simplex, Unbounded) {
    MatrixXd a(1, 2);
    a << 1, -1;
    const auto sol = lp::solve(make(VectorXd{{1, 0}}, a, VectorXd{{1}}, {lp::Sense::LessEqual}));
    EXPECT_EQ(sol.status, lp::Status::Unbounded);
}

TEST(Simplex, RedundantEqualities) {
    MatrixXd a(3, 3);
    a << 1, 1, 1, 2, 2, 2, 1, 0, 0;
    const auto sol = lp::solve(make(VectorXd{{0, 1, 2}}, a, VectorXd{{1, 2, 0.25}},
                                    {lp::Sense::Equal, lp::Sense::Equal, lp::Sense::Equal}));
    ASSERT_EQ(sol.status, lp::Status::Optimal);
    EXPECT_NEAR(sol.value, 1.5, 1e-12);
}

TEST(Simplex, BealeCyclingExample) {
    // Cycles under the largest-coefficient rule; Bland terminates. Optimum 5/4 at
    // x = (1, 0, 1, 0), cross-checked with an independent LP solver.
    MatrixXd a(3, 4);
    a << 0.25, -8, -1, 9, 0.5, -12, -0.5, 3, 0, 0, 1, 0;
    const auto sol = lp::solve(make(VectorXd{{0.75, -20, 0.5, -6}}, a, VectorXd{{0, 0, 1}},
                                    {3, lp::Sense::LessEqual}));
    ASSERT_EQ(sol.status, lp::Status::Optimal);
    EXPECT_NEAR(sol.value, 1.25, 1e-12);
}

TEST(Simplex, RandomTwoVariableAgainstVertices) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.1, 2.0);
    for (int trial = 0; trial < 200; ++trial) {
        MatrixXd a(4, 2);
        VectorXd b(4);
        for (int i = 0; i < 4; ++i) {
            a(i, 0) = u(rng);
            a(i, 1) = u(rng);
            b[i] = u(rng);
        }
        VectorXd c{{u(rng) - 1.0, u(rng) - 1.0}};
        const auto sol = lp::solve(make(c, a, b, {4, lp::Sense::LessEqual}));
        ASSERT_EQ(sol.status, lp::Status::Optimal);
        EXPECT_NEAR(sol.value, brute_force_2d(c, a, b), 1e-10);
    }
}

TEST(Simplex, StrongDualityOnRandomProblems) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        const int m = 6, n = 8;
        MatrixXd a(m, n);
        VectorXd b(m), c(n);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j)
                a(i, j) = u(rng) + 0.05;
        for (int i = 0; i < m; ++i)
            b[i] = 1.0 + u(rng);
        for (int j = 0; j < n; ++j)
            c[j] = u(rng);
        // Primal: max c^T x, A x <= b. Dual: min b^T y, A^T y >= c, y >= 0.
        const auto primal = lp::solve(make(c, a, b, {std::size_t(m), lp::Sense::LessEqual}));
        const auto dual = lp::solve(
            make(-b, a.transpose(), c, {std::size_t(n), lp::Sense::GreaterEqual}));
        ASSERT_EQ(primal.status, lp::Status::Optimal);
        ASSERT_EQ(dual.status, lp::Status::Optimal);
        EXPECT_NEAR(primal.value, -dual.value, 1e-9);
    }
}
