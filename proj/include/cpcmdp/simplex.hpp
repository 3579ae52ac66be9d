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

// Dense two-phase primal simplex with Bland's anticycling rule.
//
//     maximize  c^T x   subject to  rows(A x  {<=,=,>=}  b),  x >= 0.
//
// Intended for desk-scale problems (a few thousand columns at most).

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace cpcmdp::lp {

enum class Sense { LessEqual, Equal, GreaterEqual };

enum class Status { Optimal, Infeasible, Unbounded };

inline const char* to_string(Status s) {
    switch (s) {
    case Status::Optimal: return "optimal";
    case Status::Infeasible: return "infeasible";
    case Status::Unbounded: return "unbounded";
    }
    return "unknown";
}

struct Problem {
    Eigen::VectorXd objective;
    Eigen::MatrixXd a;
    Eigen::VectorXd b;
    std::vector<Sense> sense;
};

struct Solution {
    Status status = Status::Infeasible;
    double value = 0.0;
    Eigen::VectorXd x;
};

namespace detail {

class Tableau {
public:
    // Rows 0..m-1 constraints, last column is the right-hand side.
    Eigen::MatrixXd t;
    std::vector<Eigen::Index> basis;
    double eps = 1e-11;

    Eigen::Index rows() const { return t.rows(); }
    Eigen::Index cols() const { return t.cols() - 1; }

    void pivot(Eigen::Index r, Eigen::Index c) {
        t.row(r) /= t(r, c);
        for (Eigen::Index i = 0; i < t.rows(); ++i)
            if (i != r && t(i, c) != 0.0)
                t.row(i) -= t(i, c) * t.row(r);
        basis[std::size_t(r)] = c;
    }

    /// Maximizes cost^T x over the current basis, restricted to columns where
    /// allowed[j] is true. Returns false if unbounded.
    bool optimize(const Eigen::VectorXd& cost, const std::vector<bool>& allowed) {
        const Eigen::Index m = rows();
        const Eigen::Index n = cols();
        const std::size_t max_pivots = 50000 + 50 * std::size_t(n + m);
        for (std::size_t iter = 0; iter < max_pivots; ++iter) {
            // Reduced costs c_j - c_B^T B^{-1} a_j; Bland: first improving column.
            Eigen::Index enter = -1;
            for (Eigen::Index j = 0; j < n && enter < 0; ++j) {
                if (!allowed[std::size_t(j)])
                    continue;
                double rc = cost[j];
                for (Eigen::Index i = 0; i < m; ++i)
                    rc -= cost[basis[std::size_t(i)]] * t(i, j);
                if (rc > eps)
                    enter = j;
            }
            if (enter < 0)
                return true;

            Eigen::Index leave = -1;
            double best_ratio = std::numeric_limits<double>::infinity();
            for (Eigen::Index i = 0; i < m; ++i) {
                if (t(i, enter) > eps) {
                    const double ratio = t(i, n) / t(i, enter);
                    if (ratio < best_ratio - 1e-12 ||
                        (std::abs(ratio - best_ratio) <= 1e-12 &&
                         basis[std::size_t(i)] < basis[std::size_t(leave)])) {
                        best_ratio = ratio;
                        leave = i;
                    }
                }
            }
            if (leave < 0)
                return false;
            pivot(leave, enter);
        }
        throw std::runtime_error("simplex: pivot limit exceeded");
    }
};

} // namespace detail

/// Solves the problem; infeasible and unbounded outcomes are reported in the
/// status, never thrown.
inline Solution solve(const Problem& prob) {
    const Eigen::Index n = prob.objective.size();
    const Eigen::Index m = prob.a.rows();
    if (prob.a.cols() != n || prob.b.size() != m || Eigen::Index(prob.sense.size()) != m)
        throw std::invalid_argument("simplex: inconsistent problem dimensions");

    // Normalize to b >= 0.
    Eigen::MatrixXd a = prob.a;
    Eigen::VectorXd b = prob.b;
    std::vector<Sense> sense = prob.sense;
    for (Eigen::Index i = 0; i < m; ++i) {
        if (b[i] < 0.0) {
            a.row(i) *= -1.0;
            b[i] = -b[i];
            if (sense[std::size_t(i)] == Sense::LessEqual)
                sense[std::size_t(i)] = Sense::GreaterEqual;
            else if (sense[std::size_t(i)] == Sense::GreaterEqual)
                sense[std::size_t(i)] = Sense::LessEqual;
        }
    }

    Eigen::Index n_slack = 0;
    Eigen::Index n_art = 0;
    for (auto s : sense) {
        if (s != Sense::Equal)
            ++n_slack;
        if (s != Sense::LessEqual)
            ++n_art;
    }
    const Eigen::Index total = n + n_slack + n_art;
    const Eigen::Index art_begin = n + n_slack;

    detail::Tableau tab;
    tab.t = Eigen::MatrixXd::Zero(m, total + 1);
    tab.basis.assign(std::size_t(m), 0);
    tab.t.leftCols(n) = a;
    tab.t.col(total) = b;
    Eigen::Index slack_col = n;
    Eigen::Index art_col = art_begin;
    for (Eigen::Index i = 0; i < m; ++i) {
        switch (sense[std::size_t(i)]) {
        case Sense::LessEqual:
            tab.t(i, slack_col) = 1.0;
            tab.basis[std::size_t(i)] = slack_col++;
            break;
        case Sense::GreaterEqual:
            tab.t(i, slack_col++) = -1.0;
            tab.t(i, art_col) = 1.0;
            tab.basis[std::size_t(i)] = art_col++;
            break;
        case Sense::Equal:
            tab.t(i, art_col) = 1.0;
            tab.basis[std::size_t(i)] = art_col++;
            break;
        }
    }

    std::vector<bool> all(std::size_t(total), true);
    if (n_art > 0) {
        Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(total);
        phase1.tail(n_art).setConstant(-1.0);
        tab.optimize(phase1, all);
        double infeas = 0.0;
        for (Eigen::Index i = 0; i < m; ++i)
            if (tab.basis[std::size_t(i)] >= art_begin)
                infeas += tab.t(i, total);
        const double scale = 1.0 + b.lpNorm<Eigen::Infinity>();
        if (infeas > 1e-9 * scale)
            return {Status::Infeasible, 0.0, Eigen::VectorXd::Zero(n)};

        // Drive remaining artificials out of the basis; drop redundant rows.
        std::vector<Eigen::Index> keep_rows;
        for (Eigen::Index i = 0; i < m; ++i) {
            if (tab.basis[std::size_t(i)] < art_begin) {
                keep_rows.push_back(i);
                continue;
            }
            Eigen::Index col = -1;
            for (Eigen::Index j = 0; j < art_begin && col < 0; ++j)
                if (std::abs(tab.t(i, j)) > 1e-9)
                    col = j;
            if (col >= 0) {
                tab.pivot(i, col);
                keep_rows.push_back(i);
            }
        }
        if (Eigen::Index(keep_rows.size()) < m) {
            Eigen::MatrixXd reduced(Eigen::Index(keep_rows.size()), tab.t.cols());
            std::vector<Eigen::Index> reduced_basis;
            for (std::size_t r = 0; r < keep_rows.size(); ++r) {
                reduced.row(Eigen::Index(r)) = tab.t.row(keep_rows[r]);
                reduced_basis.push_back(tab.basis[std::size_t(keep_rows[r])]);
            }
            tab.t = std::move(reduced);
            tab.basis = std::move(reduced_basis);
        }
    }

    Eigen::VectorXd cost = Eigen::VectorXd::Zero(total);
    cost.head(n) = prob.objective;
    std::vector<bool> allowed(std::size_t(total), true);
    for (Eigen::Index j = art_begin; j < total; ++j)
        allowed[std::size_t(j)] = false;
    if (!tab.optimize(cost, allowed))
        return {Status::Unbounded, std::numeric_limits<double>::infinity(),
                Eigen::VectorXd::Zero(n)};

    Solution sol;
    sol.status = Status::Optimal;
    sol.x = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < tab.rows(); ++i) {
        const Eigen::Index j = tab.basis[std::size_t(i)];
        if (j < n)
            sol.x[j] = std::max(0.0, tab.t(i, total));
    }
    sol.value = prob.objective.dot(sol.x);
    return sol;
}

} // namespace cpcmdp::lp
