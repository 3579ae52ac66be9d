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

// Numerical verification suites behind `cpcmdp check` and the acceptance
// binary. Each suite compares the solver against an independent oracle or a
// closed-form bound and reports a single pass/fail verdict with detail lines.

#pragma once

#include "cpcmdp/bench.hpp"
#include "cpcmdp/core.hpp"
#include "cpcmdp/npg.hpp"
#include "cpcmdp/oracles.hpp"
#include "cpcmdp/solver.hpp"
#include "cpcmdp/vaidya.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace cpcmdp::verify {

struct CheckResult {
    int criterion = 0;
    std::string name;
    bool passed = false;
    std::string summary;
    std::vector<std::string> details;
};

namespace detail {

inline std::string fmt(const char* f, double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, x);
    return buf;
}

inline std::string sci(double x) { return fmt("%.3e", x); }

/// Spec used by the solver-level suites; defaults match the generator.
inline InstanceSpec spec_for(std::uint64_t seed, Eigen::Index m, Eigen::Index ns = 10,
                             Eigen::Index na = 3) {
    InstanceSpec s;
    s.seed = seed;
    s.m = m;
    s.n_states = ns;
    s.n_actions = na;
    return s;
}

/// Uniform sample from {lambda >= 0, |lambda|_1 <= b} scaled by `inner` in (0,1].
inline Vector sample_dual_set(std::mt19937_64& rng, Eigen::Index m, double b, double inner = 1.0) {
    std::exponential_distribution<double> e(1.0);
    Vector w(m + 1);
    for (Eigen::Index i = 0; i <= m; ++i)
        w[i] = e(rng);
    return inner * b * w.head(m) / w.sum();
}

/// Stationary distribution of a row-stochastic matrix.
inline Vector stationary(const Matrix& p) {
    const Eigen::Index n = p.rows();
    Matrix a = p.transpose() - Matrix::Identity(n, n);
    a.row(n - 1).setOnes();
    Vector rhs = Vector::Zero(n);
    rhs[n - 1] = 1.0;
    return a.partialPivLu().solve(rhs);
}

/// (C_M, beta) with C_M = 1 and beta = max_t TV_t^(1/t) over the given
/// policies, TV_t = max_s ||P_pi^t(s,.) - mu_pi||_TV, t = 1..horizon.
inline MixingConstants estimate_mixing(const TabularCmdp& cmdp, const std::vector<Policy>& policies,
                                       int horizon = 60) {
    double beta = 0.0;
    for (const Policy& pi : policies) {
        const Matrix p = cpcmdp::detail::policy_kernel(cmdp, pi);
        const Vector mu = stationary(p);
        Matrix pt = Matrix::Identity(p.rows(), p.cols());
        for (int t = 1; t <= horizon; ++t) {
            pt = pt * p;
            double tv = 0.0;
            for (Eigen::Index s = 0; s < p.rows(); ++s)
                tv = std::max(tv, 0.5 * (pt.row(s).transpose() - mu).lpNorm<1>());
            if (tv > 1e-15)
                beta = std::max(beta, std::pow(tv, 1.0 / t));
        }
    }
    return MixingConstants{1.0, std::clamp(beta, 1e-3, 1.0 - 1e-9)};
}

inline double l_d(const TabularCmdp& cmdp, double tau, const MixingConstants& mix) {
    const double g = cmdp.gamma();
    return cmdp.r_max() * cmdp.r_max() * compute_l_beta(mix) / ((1.0 - g) * (1.0 - g) * tau);
}

/// Minimizes a convex function of one variable over [lo, hi] by a uniform
/// grid followed by window refinement.
inline std::pair<double, double> grid_min_1d(const std::function<double(double)>& f, double lo,
                                             double hi, int points, int levels) {
    double best_x = lo;
    double best_f = std::numeric_limits<double>::infinity();
    double a = lo;
    double b = hi;
    for (int level = 0; level <= levels; ++level) {
        const double h = (b - a) / points;
        for (int i = 0; i <= points; ++i) {
            const double x = std::min(a + i * h, b);
            const double v = f(x);
            if (v < best_f) {
                best_f = v;
                best_x = x;
            }
        }
        a = std::max(lo, best_x - 2 * h);
        b = std::min(hi, best_x + 2 * h);
    }
    return {best_x, best_f};
}

inline Polytope unit_box(Eigen::Index m) {
    Matrix a(2 * m, m);
    a.topRows(m) = Matrix::Identity(m, m);
    a.bottomRows(m) = -Matrix::Identity(m, m);
    return Polytope(a, Vector::Constant(2 * m, -1.0));
}

inline DualConfig theory_config(double tau, double delta, int t) {
    DualConfig c;
    c.tau = tau;
    c.delta = delta;
    c.t_outer = t;
    c.oracle_check = true;
    return c;
}

inline DualConfig practical_config(double tau, double delta, int t) {
    DualConfig c = theory_config(tau, delta, t);
    c.vaidya.eta = 1000.0;
    c.vaidya.zeta = 0.1;
    c.vaidya.allow_unsafe = true;
    return c;
}

} // namespace detail

/// LP-oracle optimality of the final policy on 20 generated instances.
inline CheckResult check_lp_optimality(const DualConfig& cfg, const std::string& label,
                                       int seeds = 20, int required = 18) {
    CheckResult r;
    r.criterion = 1;
    r.name = "LP-oracle optimality (" + label + ")";
    int good = 0;
    for (int i = 0; i < seeds; ++i) {
        const auto cmdp = generate_instance(detail::spec_for(std::uint64_t(i + 1), 2));
        const double tol = 0.05 * cmdp.reward_max(0) / (1.0 - cmdp.gamma());
        const Solution sol = solve(cmdp, cfg);
        const double gap = *sol.diagnostics.measured_gap;
        const double viol = *sol.diagnostics.measured_violation;
        const bool ok = gap <= tol && viol <= tol;
        good += ok;
        r.details.push_back("seed " + std::to_string(i + 1) + ": gap " + detail::sci(gap) +
                            " violation " + detail::sci(viol) + " tol " + detail::sci(tol) +
                            " lambda_1 " + detail::sci(sol.lambda.lpNorm<1>()) +
                            (ok ? "" : "  <-- miss"));
    }
    r.passed = good >= required;
    r.summary = std::to_string(good) + "/" + std::to_string(seeds) + " seeds within tolerance (need " +
                std::to_string(required) + ")";
    return r;
}

/// Best-so-far dual gap against the decay envelope on m = 1 instances.
inline CheckResult check_dual_linear_rate(const DualConfig& cfg, const std::string& label,
                                          int instances = 5) {
    CheckResult r;
    r.criterion = 2;
    r.name = "linear dual convergence (" + label + ")";
    bool all = true;
    int found = 0;
    // Instances with lambda* = 0 start at the optimum (the first center of
    // [-B, B] is 0), so only binding ones exercise the rate.
    for (std::uint64_t seed = 100; found < instances && seed < 400; ++seed) {
        const auto cmdp = generate_instance(detail::spec_for(seed, 1));
        const DualSettings pre = resolve(cmdp, cfg);
        const auto d_star = detail::grid_min_1d(
            [&](double l) { return exact_dual(cmdp, Vector::Constant(1, l), pre.tau, 1e-12).value; },
            0.0, pre.b_lambda, 200, 4);
        if (d_star.first <= 1e-3 * pre.b_lambda)
            continue;
        ++found;
        const Solution sol = solve(cmdp, cfg);
        const DualSettings& s = sol.settings;
        const double floor = 6.0 * s.tau * cmdp.gamma() * s.delta;
        const double m = 1.0;
        const double zeta = s.vaidya.zeta;

        std::optional<double> log_gap0;
        int t0 = 0;
        int violations = 0;
        int checked = 0;
        std::vector<double> ts;
        std::vector<double> logs;
        for (const TraceRow& row : sol.trace) {
            if (!row.best_so_far)
                continue;
            const double gap = *row.best_so_far - d_star.second;
            if (!(gap > floor))
                break;
            if (!log_gap0) {
                log_gap0 = std::log(gap);
                t0 = row.t;
            }
            const double env = *log_gap0 - zeta / (2 * m) * (row.t - t0) + std::log(std::numbers::pi);
            ++checked;
            if (std::log(gap) > env && row.action != VaidyaAction::Drop)
                ++violations;
            ts.push_back(double(row.t));
            logs.push_back(std::log(gap));
        }
        const double slope = ts.size() >= 2 ? fit_slope(ts, logs) : 0.0;
        const bool slope_ok = ts.size() < 2 || slope <= -zeta / (4 * m);
        const bool ok = violations == 0 && slope_ok;
        all = all && ok;
        r.details.push_back("seed " + std::to_string(seed) + ": d* " +
                            detail::fmt("%.10f", d_star.second) + " lambda* " +
                            detail::fmt("%.6f", d_star.first) + " rows " + std::to_string(checked) +
                            " envelope misses " + std::to_string(violations) + " slope " +
                            detail::sci(slope) + " (need <= " + detail::sci(-zeta / (4 * m)) + ")" +
                            (ok ? "" : "  <-- miss"));
    }
    r.passed = all && found == instances;
    r.summary = std::to_string(found) + " binding instances; " +
                (all ? "envelope and slope hold on every one" : "envelope or slope violated");
    return r;
}

/// ||log pi* - log pi^(t+1)||_inf <= 2 C_1 gamma^t / tau along exact NPG.
inline CheckResult check_npg_linear_rate() {
    CheckResult r;
    r.criterion = 3;
    r.name = "NPG linear convergence";
    const double tau = 0.1;
    int bad = 0;
    int points = 0;
    for (int i = 0; i < 10; ++i) {
        InstanceSpec spec = detail::spec_for(std::uint64_t(200 + i), 1, 5, 3);
        const auto cmdp = cpcmdp::detail::draw_instance(spec, spec.seed);
        const auto opt = soft_value_iteration(cmdp, cmdp.reward(0), tau, 1e-12);
        const Matrix log_star = opt.policy.logits();
        const double c1 = (1.0 + tau * std::log(double(cmdp.n_actions()))) / (1.0 - cmdp.gamma());
        double worst = -std::numeric_limits<double>::infinity();
        run_npg(cmdp, cmdp.reward(0), tau, 1e-8, [&](int t, const Policy& pi) {
            const double err = (log_star - pi.logits()).cwiseAbs().maxCoeff();
            const double bound = 2.0 * c1 / tau * std::pow(cmdp.gamma(), t);
            ++points;
            if (err > bound)
                ++bad;
            worst = std::max(worst, err / bound);
        });
        r.details.push_back("instance " + std::to_string(200 + i) + ": max err/bound " +
                            detail::sci(worst));
    }
    r.passed = bad == 0;
    r.summary = std::to_string(points - bad) + "/" + std::to_string(points) +
                " iterates inside the bound";
    return r;
}

/// Oracle subgradient against central differences of the dual estimate.
inline CheckResult check_danskin() {
    CheckResult r;
    r.criterion = 4;
    r.name = "Danskin gradient check";
    const double tau = 0.1;
    const double h = 1e-4;
    double worst = 0.0;
    std::mt19937_64 rng(404);
    for (int i = 0; i < 5; ++i) {
        const Eigen::Index m = 1 + i % 2;
        const auto cmdp = generate_instance(detail::spec_for(std::uint64_t(300 + i), m, 6, 3));
        DualConfig cfg;
        cfg.tau = tau;
        cfg.delta = 1e-8;
        const DualSettings s = resolve(cmdp, cfg);
        for (int k = 0; k < 3; ++k) {
            const Vector lam = detail::sample_dual_set(rng, m, s.b_lambda, 0.9).array() + 2 * h;
            const Vector g = -dual_oracle(cmdp, lam, s).vector;
            for (Eigen::Index j = 0; j < m; ++j) {
                const Vector e = h * Vector::Unit(m, j);
                const double fd = (dual_value_estimate(cmdp, lam + e, s) -
                                   dual_value_estimate(cmdp, lam - e, s)) / (2 * h);
                worst = std::max(worst, std::abs(fd - g[j]));
            }
        }
        r.details.push_back("instance " + std::to_string(300 + i) + " (m=" + std::to_string(m) +
                            "): running max |fd - g| " + detail::sci(worst));
    }
    r.passed = worst <= 5e-3;
    r.summary = "max componentwise deviation " + detail::sci(worst) + " (tol 5e-3)";
    return r;
}

/// Analytic bounds and inequalities on sampled multipliers; slack 1e-7.
inline CheckResult check_lemmas() {
    CheckResult r;
    r.criterion = 5;
    r.name = "lemma suite";
    const double slack = 1e-7;
    const double tau = 0.1;
    std::mt19937_64 rng(505);
    struct Tally {
        int cases = 0;
        int bad = 0;
        double worst = -std::numeric_limits<double>::infinity();
        void add(double lhs, double rhs, double tol) {
            ++cases;
            worst = std::max(worst, lhs - rhs);
            if (lhs > rhs + tol)
                ++bad;
        }
    };
    Tally c1, c3, c4, c7, c5a, c5b, c6a, c6b, e1, e2;

    // Softmax with temperature: ||S(x) - S(x')||_1 <= ||x - x'||_inf / tau.
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif(0.01, 2.0);
    for (int n = 0; n < 1000; ++n) {
        const int dim = 2 + n % 5;
        const double t = unif(rng);
        Matrix x(1, dim), y(1, dim);
        for (int j = 0; j < dim; ++j) {
            x(0, j) = 3 * normal(rng);
            y(0, j) = x(0, j) + (n % 2 ? 0.01 : 1.0) * normal(rng);
        }
        const Matrix sx = Policy::softmax(x / t).probs();
        const Matrix sy = Policy::softmax(y / t).probs();
        c4.add((sx - sy).cwiseAbs().sum(), (x - y).cwiseAbs().maxCoeff() / t, slack);
    }

    for (int i = 0; i < 5; ++i) {
        const Eigen::Index m = i < 3 ? 1 : 2;
        const auto cmdp = generate_instance(detail::spec_for(std::uint64_t(500 + i), m, 6, 3));
        DualConfig cfg;
        cfg.tau = tau;
        const DualSettings s = resolve(cmdp, cfg);
        const double b = s.b_lambda;
        const double g = cmdp.gamma();
        const double rmax = cmdp.r_max();
        const double log_a = std::log(double(cmdp.n_actions()));

        // Dual optimum on [0, 3B]^m; the bound says it lies in the l1 ball of radius B.
        const DualMinimum dmin = grid_dual_min(cmdp, tau, 3 * b, 3 * b / 40, 3, 1e-12);
        c1.add(dmin.lambda.lpNorm<1>(), b, slack);
        const double d_star = dmin.value;

        const double b_d = (cmdp.reward_max(0) + std::sqrt(double(m)) * b * rmax + tau * log_a) / (1 - g);
        for (int k = 0; k < 100; ++k) {
            const Vector lam = detail::sample_dual_set(rng, m, b);
            const double d = exact_dual(cmdp, lam, tau).value;
            c3.add(0.0, d, slack);
            c3.add(d, b_d, slack);
        }

        // Regularized optimal policy is Lipschitz in lambda.
        for (int k = 0; k < 20; ++k) {
            const Vector l1 = detail::sample_dual_set(rng, m, b);
            const Vector l2 = k % 2 ? Vector(l1 + 0.01 * b * detail::sample_dual_set(rng, m, 1.0))
                                    : detail::sample_dual_set(rng, m, b);
            const Matrix p1 = exact_dual(cmdp, l1, tau).policy.probs();
            const Matrix p2 = exact_dual(cmdp, l2, tau).policy.probs();
            const double lhs = (p1 - p2).cwiseAbs().rowwise().sum().maxCoeff();
            c7.add(lhs, rmax / ((1 - g) * tau) * (l1 - l2).norm(), slack);
        }

        const LpSolution lp = lp_solve_cmdp(cmdp);
        std::vector<Vector> lams;
        std::vector<DualPoint> points;
        std::vector<Policy> policies;
        for (int k = 0; k < 50; ++k) {
            lams.push_back(detail::sample_dual_set(rng, m, b));
            points.push_back(exact_dual(cmdp, lams.back(), tau));
            policies.push_back(points.back().policy);
        }
        const MixingConstants mix = detail::estimate_mixing(cmdp, policies);
        const double ld = detail::l_d(cmdp, tau, mix);
        for (int k = 0; k < 50; ++k) {
            const Vector& lam = lams[std::size_t(k)];
            const DualPoint& p = points[std::size_t(k)];
            const double v0 = value(cmdp, p.policy, cmdp.reward(0));
            const double ent = discounted_entropy(cmdp, p.policy);
            c5a.add(lp.optimal_value - v0, lam.dot(p.gradient) + tau * ent, slack);
            const double lhs = violation_l2(cmdp.thresholds(), constraint_values(cmdp, p.policy));
            const double rhs = (-p.gradient).cwiseMax(0.0).norm();
            c5b.add(std::abs(lhs - rhs), 0.0, slack);
            const double excess = std::max(0.0, p.value - d_star);
            c6a.add((-p.gradient).cwiseMax(0.0).squaredNorm(), 2 * ld * excess, slack);
            c6b.add(lam.dot(p.gradient), b * std::sqrt(2 * double(m) * ld * excess) + 2 * excess, slack);
        }

        if (m == 1) {
            const double mu = 0.1;
            auto d_tau = [&](double l) { return exact_dual(cmdp, Vector::Constant(1, l), tau, 1e-12).value; };
            auto d_mu = [&](double l) { return d_tau(l) + 0.5 * mu * l * l; };
            const auto star_mu = detail::grid_min_1d(d_mu, 0.0, 3 * b, 200, 4);
            const auto star = detail::grid_min_1d(d_tau, 0.0, 3 * b, 200, 4);
            const double ld_mu = ld + mu;
            for (int k = 0; k < 50; ++k) {
                const Vector lam = detail::sample_dual_set(rng, 1, b);
                const DualPoint p = exact_dual(cmdp, lam, tau);
                const double excess = std::max(0.0, d_mu(lam[0]) - star_mu.second);
                e1.add(lam.dot(p.gradient), ld_mu / mu * excess, slack);
            }
            e2.add(star_mu.first * star_mu.first, 2.0 / mu * (d_tau(0.0) - star.second), slack);
        }
        r.details.push_back("instance " + std::to_string(500 + i) + " (m=" + std::to_string(m) +
                            "): B_lambda " + detail::sci(b) + " |lambda*|_1 " +
                            detail::sci(dmin.lambda.lpNorm<1>()) + " beta " +
                            detail::fmt("%.4f", mix.beta) + " L_d " + detail::sci(ld));
    }

    struct Named {
        const char* name;
        const Tally* t;
    };
    const Named all[] = {{"dual bound |lambda*|_1 <= B", &c1},
                         {"dual range 0 <= d <= B_d", &c3},
                         {"softmax Lipschitz", &c4},
                         {"policy Lipschitz", &c7},
                         {"gap <= <lambda,grad> + tau H", &c5a},
                         {"violation = |[-grad]_+|", &c5b},
                         {"|[-grad]_+|^2 <= 2 L_d (d - d*)", &c6a},
                         {"<lambda,grad> <= B sqrt(2 m L_d (d-d*)) + 2(d-d*)", &c6b},
                         {"<lambda,grad> <= L_mu/mu (d_mu - d_mu*)", &e1},
                         {"|lambda*_mu|^2 <= 2/mu (d(0) - d*)", &e2}};
    int bad = 0;
    int cases = 0;
    for (const Named& n : all) {
        bad += n.t->bad;
        cases += n.t->cases;
        r.details.push_back(std::string(n.name) + ": " + std::to_string(n.t->cases) + " cases, " +
                            std::to_string(n.t->bad) + " violations, max lhs-rhs " +
                            detail::sci(n.t->worst));
    }
    r.passed = bad == 0;
    r.summary = std::to_string(bad) + " violations in " + std::to_string(cases) + " cases";
    return r;
}

/// Vaidya on ||lambda - lambda0||^2 over the unit box, exact and perturbed.
inline CheckResult check_vaidya_isolation() {
    CheckResult r;
    r.criterion = 6;
    r.name = "Vaidya in isolation";
    const double delta = 1e-3;
    bool all = true;
    for (int regime = 0; regime < 2; ++regime) {
        VaidyaParams p;
        if (regime == 1) {
            p.eta = 1000.0;
            p.zeta = 0.1;
            p.allow_unsafe = true;
        }
        for (Eigen::Index m : {2, 3, 5}) {
            Vector c(m);
            for (Eigen::Index i = 0; i < m; ++i)
                c[i] = 0.3 * (i % 2 ? -1.0 : 1.0) * (1.0 - 0.1 * double(i));
            p.t_max = int(40 * m);
            auto f = [&](const Vector& x) { return (x - c).squaredNorm(); };
            auto run = [&](double tilt) {
                int calls = 0;
                auto oracle = [&](const Vector& x) {
                    const double sign = calls++ % 2 ? -1.0 : 1.0;
                    CutResponse out;
                    out.vector = -(2.0 * (x - c) + sign * tilt * Vector::Ones(m) / std::sqrt(double(m)));
                    out.value_estimate = f(x) + sign * tilt;
                    return out;
                };
                return vaidya_run(oracle, detail::unit_box(m), p);
            };
            const VaidyaResult exact = run(0.0);
            const VaidyaResult pert = run(delta);

            // B = sup - inf of f on the box, R = sqrt(m), R_in = 1.
            const double bvar = (c.cwiseAbs().array() + 1.0).matrix().squaredNorm();
            auto envelope = [&](int t) {
                return bvar * std::pow(double(m), 1.5) * std::sqrt(double(m)) / p.zeta *
                       std::exp((std::log(std::numbers::pi) - p.zeta * t) / (2.0 * double(m)));
            };
            int misses = 0;
            double best = std::numeric_limits<double>::infinity();
            for (const VaidyaStep& st : exact.steps) {
                if (st.value_estimate)
                    best = std::min(best, *st.value_estimate);
                if (best > envelope(st.t + 1))
                    ++misses;
            }
            double best_p = std::numeric_limits<double>::infinity();
            for (const VaidyaStep& st : pert.steps) {
                if (st.value_estimate)
                    best_p = std::min(best_p, f(st.lambda));
                if (best_p > envelope(st.t + 1) + 2 * std::sqrt(double(m)) * delta + delta)
                    ++misses;
            }
            const double err = f(*exact.best_point);
            const double err_p = f(*pert.best_point);
            // The envelope is only claimed in the analysed regime.
            const bool ok = (regime == 1 || misses == 0) && err_p <= 1.1 * err + delta;
            all = all && ok;
            r.details.push_back(std::string(regime ? "practical" : "theory") + " m=" +
                                std::to_string(m) + " T=" + std::to_string(p.t_max) +
                                ": exact err " + detail::sci(err) + " perturbed err " +
                                detail::sci(err_p) + " envelope misses " + std::to_string(misses) +
                                (ok ? "" : "  <-- miss"));
        }
    }
    r.passed = all;
    r.summary = all ? "envelope holds; perturbation adds at most delta + 10%"
                    : "envelope or perturbation check failed";
    return r;
}

/// Value/visitation identity, leverage-score trace and occupancy round trip.
inline CheckResult check_identities() {
    CheckResult r;
    r.criterion = 7;
    r.name = "exactness identities";
    std::mt19937_64 rng(707);
    int cases = 0;
    int bad = 0;
    double w_value = 0, w_sigma = 0, w_round = 0;

    const double gammas[] = {0.5, 0.9, 0.99};
    for (int n = 0; n < 400; ++n) {
        InstanceSpec spec = detail::spec_for(std::uint64_t(10000 + n), 1, 2 + n % 11, 2 + n % 3);
        spec.gamma = gammas[n % 3];
        spec.kernel_sparsity = 1 + n % 4;
        const auto cmdp = cpcmdp::detail::draw_instance(spec, spec.seed);
        Matrix probs(cmdp.n_states(), cmdp.n_actions());
        for (Eigen::Index s = 0; s < probs.rows(); ++s) {
            for (Eigen::Index a = 0; a < probs.cols(); ++a)
                probs(s, a) = (n % 4 == 0 && a == 0) ? 0.0 : cpcmdp::detail::uniform01(rng) + 1e-3;
            probs.row(s) /= probs.row(s).sum();
        }
        const Policy pi(probs);
        const Matrix nu = visitation(cmdp, pi);
        for (std::size_t i = 0; i < 2; ++i) {
            const double lhs = value(cmdp, pi, cmdp.reward(i)) * (1 - cmdp.gamma());
            const double rhs = (nu.array() * cmdp.reward(i).array()).sum();
            const double err = std::abs(lhs - rhs);
            w_value = std::max(w_value, err);
            ++cases;
            bad += err > 1e-9;
        }
    }

    std::normal_distribution<double> normal;
    for (int n = 0; n < 400; ++n) {
        const Eigen::Index m = 1 + n % 6;
        Polytope poly = detail::unit_box(m);
        for (int k = 0; k < 1 + n % 7; ++k) {
            Vector a(m);
            for (Eigen::Index j = 0; j < m; ++j)
                a[j] = normal(rng);
            a.normalize();
            poly.add_plane(a, -0.5 - 0.5 * std::abs(normal(rng)));
        }
        Vector x(m);
        for (Eigen::Index j = 0; j < m; ++j)
            x[j] = 0.25 * (2 * cpcmdp::detail::uniform01(rng) - 1);
        const double err = std::abs(leverage_scores(x, poly).sum() - double(m));
        w_sigma = std::max(w_sigma, err);
        ++cases;
        bad += err > 1e-9;
    }

    for (int n = 0; n < 400; ++n) {
        InstanceSpec spec = detail::spec_for(std::uint64_t(20000 + n), 1 + n % 2, 2 + n % 9, 2 + n % 3);
        spec.constraint_tightness = 0.3 + 0.1 * (n % 5);
        spec.kernel_sparsity = 1 + n % 3;
        const auto cmdp = cpcmdp::detail::draw_instance(spec, spec.seed);
        const LpSolution lp = lp_solve_cmdp(cmdp);
        if (lp.status != lp::Status::Optimal)
            continue;
        const Matrix nu = visitation(cmdp, lp.policy);
        double err = 0.0;
        for (Eigen::Index s = 0; s < nu.rows(); ++s)
            if (lp.occupancy.row(s).sum() > 1e-9)
                err = std::max(err, (nu.row(s) - lp.occupancy.row(s)).cwiseAbs().maxCoeff());
        w_round = std::max(w_round, err);
        ++cases;
        bad += err > 1e-7;
    }
    r.details.push_back("value identity max err " + detail::sci(w_value) + " (tol 1e-9)");
    r.details.push_back("leverage trace max err " + detail::sci(w_sigma) + " (tol 1e-9)");
    r.details.push_back("occupancy round trip max err " + detail::sci(w_round) + " (tol 1e-7)");
    r.passed = bad == 0 && cases >= 1000;
    r.summary = std::to_string(cases - bad) + "/" + std::to_string(cases) + " cases exact";
    return r;
}

/// Runs the same bench configuration twice and compares every output byte.
inline CheckResult check_bench_determinism(const std::filesystem::path& scratch) {
    namespace fs = std::filesystem;
    CheckResult r;
    r.criterion = 8;
    r.name = "bench determinism";
    const nlohmann::json cfg_json = {
        {"instance_batch", {{"seeds", {11, 12, 13}}, {"m", 2}}},
        {"solvers",
         {{{"name", "theory"}, {"tau", 1e-3}, {"t_outer", 30}},
          {{"name", "practical"}, {"tau", 1e-3}, {"eta", 1000.0}, {"zeta", 0.1},
           {"unsafe_params", true}, {"t_outer", 30}}}},
        {"slope_grid_refine", 2}};
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    std::vector<std::string> firsts;
    bool same = true;
    int files = 0;
    const fs::path dirs[] = {scratch / "run_a", scratch / "run_b"};
    for (int k = 0; k < 2; ++k) {
        fs::remove_all(dirs[k]);
        nlohmann::json j = cfg_json;
        j["output_dir"] = dirs[k].string();
        j["threads"] = k == 0 ? 1 : 2;
        run_benchmark(bench_config_from_json(j));
    }
    for (const auto& e : fs::directory_iterator(dirs[0])) {
        const auto name = e.path().filename();
        ++files;
        if (!fs::exists(dirs[1] / name) || slurp(dirs[0] / name) != slurp(dirs[1] / name)) {
            same = false;
            r.details.push_back("differs: " + name.string());
        }
    }
    std::size_t files_b = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(dirs[1]))
        ++files_b;
    same = same && files_b == std::size_t(files) && files > 1;
    r.details.push_back(std::to_string(files) + " files compared (1 vs 2 worker threads)");
    fs::remove_all(dirs[0]);
    fs::remove_all(dirs[1]);
    r.passed = same;
    r.summary = same ? "outputs byte-identical" : "outputs differ";
    return r;
}

/// The counted verdict for each criterion, in order, plus informational
/// runs in the other cutting-plane regime.
inline std::vector<CheckResult> run_all(const std::vector<int>& only = {},
                                        const std::function<void(const CheckResult&)>& sink = {},
                                        bool informational = true) {
    auto wanted = [&](int id) {
        return only.empty() || std::find(only.begin(), only.end(), id) != only.end();
    };
    std::vector<CheckResult> out;
    auto emit = [&](CheckResult r, bool counted) {
        if (!counted)
            r.criterion = -r.criterion;
        if (sink)
            sink(r);
        out.push_back(std::move(r));
    };
    if (wanted(1)) {
        emit(check_lp_optimality(detail::theory_config(1e-3, 1e-6, 150), "eta=1e-4 zeta=1e-7"), true);
        if (informational)
            emit(check_lp_optimality(detail::practical_config(1e-3, 1e-6, 150),
                                     "eta=1000 zeta=0.1"),
                 false);
    }
    if (wanted(2)) {
        emit(check_dual_linear_rate(detail::practical_config(1e-2, 1e-6, 80), "eta=1000 zeta=0.1"),
             true);
        if (informational)
            emit(check_dual_linear_rate(detail::theory_config(1e-2, 1e-6, 80), "eta=1e-4 zeta=1e-7"),
                 false);
    }
    if (wanted(3))
        emit(check_npg_linear_rate(), true);
    if (wanted(4))
        emit(check_danskin(), true);
    if (wanted(5))
        emit(check_lemmas(), true);
    if (wanted(6))
        emit(check_vaidya_isolation(), true);
    if (wanted(7))
        emit(check_identities(), true);
    if (wanted(8))
        emit(check_bench_determinism(std::filesystem::temp_directory_path() / "cpcmdp_check"), true);
    return out;
}

} // namespace cpcmdp::verify
