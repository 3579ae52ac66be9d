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

#include "cpcmdp/solver.hpp"
#include "cpcmdp/vaidya.hpp"

#include <gtest/gtest.h>

#include <numbers>
#include <random>

using namespace cpcmdp;

namespace {

Polytope box(const Vector& lo, const Vector& hi) {
    const auto m = lo.size();
    Matrix a(2 * m, m);
    a.topRows(m) = Matrix::Identity(m, m);
    a.bottomRows(m) = -Matrix::Identity(m, m);
    Vector b(2 * m);
    b.head(m) = lo;
    b.tail(m) = -hi;
    return Polytope(a, b);
}

Polytope unit_box(Eigen::Index m) {
    return box(Vector::Constant(m, -1.0), Vector::Constant(m, 1.0));
}

/// Random bounded polytope: the unit box plus extra random planes through
/// points at distance >= 0.5 from the origin.
Polytope random_polytope(std::uint64_t seed, Eigen::Index m, int extra) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    Polytope p = unit_box(m);
    for (int i = 0; i < extra; ++i) {
        Vector n(m);
        for (Eigen::Index j = 0; j < m; ++j)
            n[j] = g(rng);
        n.normalize();
        p.add_plane(n, -0.5 - 0.5 * std::abs(g(rng)));
    }
    return p;
}

double log_barrier(const Vector& x, const Polytope& p) {
    return -p.slacks(x).array().log().sum();
}

Vector random_interior(std::uint64_t seed, Eigen::Index m) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-0.3, 0.3);
    Vector x(m);
    for (Eigen::Index j = 0; j < m; ++j)
        x[j] = u(rng);
    return x;
}

VaidyaParams theory_params(int t) {
    VaidyaParams p;
    p.eta = 1e-4;
    p.zeta = 1e-7;
    p.t_max = t;
    return p;
}

VaidyaParams practical_params(int t) {
    VaidyaParams p;
    p.eta = 1000.0;
    p.zeta = 0.1;
    p.t_max = t;
    p.allow_unsafe = true;
    return p;
}

auto quadratic_oracle(const Vector& center) {
    return [center](const Vector& x) {
        CutResponse c;
        c.vector = -2.0 * (x - center);
        c.value_estimate = (x - center).squaredNorm();
        return c;
    };
}

} // namespace

TEST(BarrierHessian, BoxAtOrigin) {
    const Matrix h = barrier_hessian(Vector::Zero(2), unit_box(2));
    EXPECT_LT((h - 2.0 * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(BarrierHessian, ParallelPair) {
    // Planes x >= -u and -x >= -v seen from 0: slacks u and v.
    const double u = 0.3, v = 1.7;
    Matrix a(3, 1);
    a << 1, -1, -1;
    Vector b(3);
    b << -u, -v, -5.0;
    Polytope p(a, b);
    const Matrix h = barrier_hessian(Vector::Zero(1), p);
    EXPECT_NEAR(h(0, 0), 1 / (u * u) + 1 / (v * v) + 1.0 / 25.0, 1e-12);
}

TEST(BarrierHessian, MatchesFiniteDifferences) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Polytope p = random_polytope(seed, 3, 4);
        const Vector x = random_interior(seed + 50, 3);
        const Matrix h = barrier_hessian(x, p);
        const double step = 1e-4;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                Vector ei = Vector::Unit(3, i) * step, ej = Vector::Unit(3, j) * step;
                const double fd = (log_barrier(x + ei + ej, p) - log_barrier(x + ei - ej, p) -
                                   log_barrier(x - ei + ej, p) + log_barrier(x - ei - ej, p)) /
                                  (4 * step * step);
                EXPECT_NEAR(fd, h(i, j), 1e-5 * std::max(1.0, std::abs(h(i, j))));
            }
    }
}

TEST(BarrierHessian, RejectsExteriorPoint) {
    EXPECT_THROW(barrier_hessian(Vector::Constant(2, 1.0), unit_box(2)), InteriorityError);
    EXPECT_THROW(leverage_scores(Vector::Constant(2, 3.0), unit_box(2)), InteriorityError);
}

TEST(LeverageScores, BoxIsOneHalf) {
    const Vector s = leverage_scores(Vector::Zero(2), unit_box(2));
    EXPECT_LT((s.array() - 0.5).abs().maxCoeff(), 1e-15);
}

TEST(LeverageScores, SumToDimension) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const Eigen::Index m = 1 + Eigen::Index(seed % 5);
        const Polytope p = random_polytope(seed, m, 3 + int(seed % 4));
        const Vector s = leverage_scores(random_interior(seed, m), p);
        EXPECT_NEAR(s.sum(), double(m), 1e-9);
        EXPECT_GT(s.minCoeff(), 0.0);
        EXPECT_LE(s.maxCoeff(), 1.0 + 1e-12);
    }
}

TEST(LeverageScores, DeterminantDerivative) {
    // sigma_i = d/dt log det(H + t a_i a_i^T / s_i^2) at t = 0.
    const Polytope p = random_polytope(77, 3, 5);
    const Vector x = random_interior(78, 3);
    const Matrix h = barrier_hessian(x, p);
    const Vector s = p.slacks(x);
    const Vector sigma = leverage_scores(x, p);
    const double t = 1e-6;
    for (Eigen::Index i = 0; i < p.n_planes(); ++i) {
        const Vector ai = p.a().row(i).transpose() / s[i];
        const Matrix hp = h + t * ai * ai.transpose();
        const Matrix hm = h - t * ai * ai.transpose();
        const double d = (std::log(hp.determinant()) - std::log(hm.determinant())) / (2 * t);
        EXPECT_NEAR(d, sigma[i], 1e-7);
    }
}

TEST(VolumetricBarrier, DerivativesMatchFiniteDifferences) {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        const Polytope p = random_polytope(seed + 10, 3, 5);
        const Vector x = random_interior(seed + 90, 3);
        const auto d = barrier_derivatives(x, p);
        EXPECT_NEAR(d.value, volumetric_barrier(x, p), 1e-12);
        EXPECT_NEAR(d.value, 0.5 * std::log(barrier_hessian(x, p).determinant()), 1e-10);
        const double step = 1e-5;
        for (int i = 0; i < 3; ++i) {
            const Vector e = Vector::Unit(3, i) * step;
            const double fd = (volumetric_barrier(x + e, p) - volumetric_barrier(x - e, p)) / (2 * step);
            EXPECT_NEAR(fd, d.gradient[i], 1e-7 * std::max(1.0, std::abs(fd)));
            const Vector g_fd = (barrier_derivatives(x + e, p).gradient -
                                 barrier_derivatives(x - e, p).gradient) / (2 * step);
            for (int j = 0; j < 3; ++j)
                EXPECT_NEAR(g_fd[j], d.hessian(j, i), 1e-5 * std::max(1.0, std::abs(g_fd[j])));
        }
        // Q <= hessian <= 3 Q.
        const Eigen::SelfAdjointEigenSolver<Matrix> lo(d.hessian - d.metric);
        const Eigen::SelfAdjointEigenSolver<Matrix> hi(3.0 * d.metric - d.hessian);
        EXPECT_GE(lo.eigenvalues().minCoeff(), -1e-9);
        EXPECT_GE(hi.eigenvalues().minCoeff(), -1e-9);
    }
}

TEST(VolumetricCenter, SymmetricBoxes) {
    for (Eigen::Index m : {1, 2, 3, 5}) {
        const auto c = volumetric_center(unit_box(m));
        EXPECT_LT(c.point.cwiseAbs().maxCoeff(), 1e-9);
        EXPECT_LE(c.decrement, 1e-9);
    }
    const auto c = volumetric_center(box(Vector{{0.0, -3.0}}, Vector{{2.0, 1.0}}));
    EXPECT_NEAR(c.point[0], 1.0, 1e-9);
    EXPECT_NEAR(c.point[1], -1.0, 1e-9);
}

TEST(VolumetricCenter, InitialSimplexMatchesGrid) {
    const Polytope p = initial_simplex(1.0, 2);
    const auto c = volumetric_center(p);
    // Grid oracle: step 1e-2 over the bounding box, then 1e-4 around the incumbent.
    Vector best = Vector::Zero(2);
    double best_v = std::numeric_limits<double>::infinity();
    auto scan = [&](Vector lo, double h, int n) {
        const Vector start = lo;
        for (int i = 0; i <= n; ++i)
            for (int j = 0; j <= n; ++j) {
                const Vector x{{start[0] + i * h, start[1] + j * h}};
                if (!p.is_interior(x) || p.slacks(x).minCoeff() < 1e-9)
                    continue;
                const double v = volumetric_barrier(x, p);
                if (v < best_v) {
                    best_v = v;
                    best = x;
                }
            }
    };
    scan(Vector{{-1.0, -1.0}}, 1e-2, 400);
    scan(Vector(best.array() - 2e-2), 1e-4, 400);
    EXPECT_LT((c.point - best).cwiseAbs().maxCoeff(), 1e-4);
    EXPECT_NEAR(c.point[0], 1.0 / 3.0, 1e-9);
    EXPECT_NEAR(c.point[1], 1.0 / 3.0, 1e-9);
    EXPECT_NEAR(leverage_scores(c.point, p).sum(), 2.0, 1e-9);
}

TEST(VolumetricCenter, WarmStartAgrees) {
    const Polytope p = random_polytope(5, 3, 6);
    const auto cold = volumetric_center(p);
    const auto warm = volumetric_center(p, random_interior(6, 3));
    EXPECT_LT((cold.point - warm.point).norm(), 1e-7);
    EXPECT_TRUE(p.is_interior(cold.point));
}

TEST(PolytopeType, RejectsUnboundedAndEmpty) {
    Matrix a(2, 2);
    a << 1, 0, 0, 1;
    Matrix a3(3, 2);
    a3 << 1, 0, 0, 1, 1, 1;
    EXPECT_THROW(Polytope(a3, Vector::Zero(3)), ModelError);
    Matrix a4(4, 2);
    a4 << 1, 0, -1, 0, 0, 1, 0, -1;
    Vector b4(4);
    b4 << 1, -0.5, 0, -1;  // x >= 1 and x <= 0.5
    EXPECT_THROW(Polytope(a4, b4), ModelError);
    EXPECT_THROW(Polytope(a, Vector::Zero(2)), ModelError);
}

TEST(CutOffset, UnitDepth) {
    const double eta = 1e-4, zeta = 1e-7;
    const double target = 0.5 * std::sqrt(eta * zeta);
    const Vector g = Vector{{1.0, 0.0}};
    const Matrix hinv = target * Matrix::Identity(2, 2);
    EXPECT_NEAR(cut_offset(g, Vector::Zero(2), hinv, eta, zeta), -1.0, 1e-12);
}

TEST(CutOffset, HomogeneousInGradient) {
    const Vector g{{0.3, -1.2}};
    const Vector x{{0.5, 0.1}};
    const Matrix hinv = Matrix{{2.0, 0.3}, {0.3, 1.0}};
    const double base = g.dot(x) - cut_offset(g, x, hinv, 1e-4, 1e-7);
    for (double s : {0.1, 3.0, 250.0}) {
        const Vector gs = s * g;
        EXPECT_NEAR(gs.dot(x) - cut_offset(gs, x, hinv, 1e-4, 1e-7), s * base, 1e-9 * s * base);
    }
}

TEST(CutOffset, ResidualOfDefiningEquation) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n;
    for (int trial = 0; trial < 100; ++trial) {
        Vector g(3), x(3);
        Matrix r(3, 3);
        for (int i = 0; i < 3; ++i) {
            g[i] = n(rng);
            x[i] = n(rng);
            for (int j = 0; j < 3; ++j)
                r(i, j) = n(rng);
        }
        const Matrix hinv = r * r.transpose() + 0.1 * Matrix::Identity(3, 3);
        const double eta = 1e-4, zeta = 1e-7;
        const double beta = cut_offset(g, x, hinv, eta, zeta);
        const double lhs = g.dot(hinv * g) / std::pow(g.dot(x) - beta, 2);
        EXPECT_NEAR(lhs / (0.5 * std::sqrt(eta * zeta)), 1.0, 1e-10);
        EXPECT_GE(g.dot(x), beta);
    }
}

TEST(CutOffset, RejectsZeroGradient) {
    EXPECT_THROW(cut_offset(Vector::Zero(2), Vector::Zero(2), Matrix::Identity(2, 2), 1e-4, 1e-7),
                 ModelError);
}

TEST(Params, EnforceTheoryRegimeUnlessOverridden) {
    VaidyaParams p = practical_params(5);
    p.allow_unsafe = false;
    EXPECT_THROW(p.validate(), ModelError);
    p.allow_unsafe = true;
    EXPECT_NO_THROW(p.validate());
    VaidyaParams q = theory_params(5);
    q.zeta = 2 * q.eta;
    q.allow_unsafe = true;
    EXPECT_THROW(q.validate(), ModelError);
}

TEST(VaidyaRun, QuadraticOnBoxTheoryParams) {
    const auto res = vaidya_run(quadratic_oracle(Vector::Zero(2)), unit_box(2), theory_params(60));
    ASSERT_TRUE(res.best_value);
    EXPECT_LT(*res.best_value, 1e-2);
}

TEST(VaidyaRun, QuadraticPracticalParamsConverges) {
    const Vector c{{0.3, -0.2}};
    const auto res = vaidya_run(quadratic_oracle(c), unit_box(2), practical_params(60));
    ASSERT_TRUE(res.best_value);
    EXPECT_LT(*res.best_value, 1e-6);
}

TEST(VaidyaRun, LinearObjectiveMonotone) {
    const Vector w{{1.0, 0.3}};
    auto oracle = [&](const Vector& x) {
        CutResponse c;
        c.vector = -w;
        c.value_estimate = w.dot(x);
        return c;
    };
    for (const VaidyaParams& p : {theory_params(40), practical_params(40)}) {
        const auto res = vaidya_run(oracle, unit_box(2), p);
        std::optional<double> prev;
        for (const auto& st : res.steps) {
            if (st.action != VaidyaAction::SubgradientCut)
                continue;
            if (prev)
                EXPECT_LT(*st.value_estimate, *prev);
            prev = st.value_estimate;
        }
    }
}

TEST(VaidyaRun, PlaneCountInvariantAndInterior) {
    const Vector c{{0.7, 0.2, -0.4}};
    const Polytope start = unit_box(3);
    const auto k0 = start.n_planes();
    const auto res = vaidya_run(quadratic_oracle(c), start, practical_params(80));
    for (const auto& st : res.steps) {
        EXPECT_GE(st.k, 3 + 1);
        EXPECT_LE(st.k, k0 + st.t);
    }
    EXPECT_GT(std::count_if(res.steps.begin(), res.steps.end(),
                            [](const VaidyaStep& s) { return s.action == VaidyaAction::Drop; }),
              0);
}

TEST(VaidyaRun, Deterministic) {
    const Vector c{{0.1, 0.5}};
    const auto a = vaidya_run(quadratic_oracle(c), unit_box(2), practical_params(50));
    const auto b = vaidya_run(quadratic_oracle(c), unit_box(2), practical_params(50));
    ASSERT_EQ(a.steps.size(), b.steps.size());
    for (std::size_t i = 0; i < a.steps.size(); ++i) {
        EXPECT_EQ(a.steps[i].action, b.steps[i].action);
        for (Eigen::Index j = 0; j < 2; ++j)
            EXPECT_EQ(a.steps[i].lambda[j], b.steps[i].lambda[j]);
    }
}

TEST(VaidyaRun, SeparationCutsCarryNoValue) {
    auto oracle = [](const Vector& x) {
        CutResponse c;
        if ((x.array() < 0.0).any()) {
            c.kind = CutKind::Separation;
            c.vector = (x.array() < 0.0).cast<double>().matrix();
            return c;
        }
        c.vector = -2.0 * (x - Vector::Constant(2, 0.25));
        c.value_estimate = (x - Vector::Constant(2, 0.25)).squaredNorm();
        return c;
    };
    const auto res = vaidya_run(oracle, unit_box(2), practical_params(40));
    ASSERT_TRUE(res.best_point);
    EXPECT_GE(res.best_point->minCoeff(), 0.0);
    for (const auto& st : res.steps)
        if (st.action == VaidyaAction::SeparationCut)
            EXPECT_FALSE(st.value_estimate);
}

TEST(VaidyaRun, RateEnvelopeOnQuadratic) {
    for (Eigen::Index m : {2, 3}) {
        const Vector c = Vector::Constant(m, 0.2);
        const Polytope start = unit_box(m);
        const VaidyaParams p = theory_params(40);
        const auto res = vaidya_run(quadratic_oracle(c), start, p);
        // B bounds the variation of f over the box; the balls are radius 1 and sqrt(m).
        const double bvar = (Vector::Constant(m, 1.2)).squaredNorm();
        const double r_out = std::sqrt(double(m)), r_in = 1.0;
        std::optional<double> best;
        for (const auto& st : res.steps) {
            if (st.value_estimate && (!best || *st.value_estimate < *best))
                best = st.value_estimate;
            const double env = bvar * std::pow(double(m), 1.5) * r_out / (p.zeta * r_in) *
                               std::exp((std::log(std::numbers::pi) - p.zeta * (st.t + 1)) / (2.0 * m));
            if (best)
                EXPECT_LE(*best, env);
        }
    }
}
