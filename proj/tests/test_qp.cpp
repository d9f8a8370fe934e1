/*
 Copyright 2026 The apdg-dmpc Authors

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
#include "support.hpp"

#include <gtest/gtest.h>

using namespace apdg;
using apdg::testing::Gen;

namespace {

Matrix rows(int r, int c, std::initializer_list<double> vals) {
    Matrix m(r, c);
    auto it = vals.begin();
    for (int i = 0; i < r; ++i) {
        for (int j = 0; j < c; ++j) m(i, j) = *it++;
    }
    return m;
}

Vector vals(std::initializer_list<double> v) {
    Vector out(static_cast<int>(v.size()));
    int i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

// Stationarity and complementarity residuals of min u'Wu + q'u s.t. Gu <= h.
void expect_kkt(const Matrix& W, const Vector& q, const Polytope& P, const QpSolution& s, double tol) {
    EXPECT_TRUE(P.contains(s.u, 1e-9));
    ASSERT_EQ(s.multipliers.size(), P.rows());
    EXPECT_GE(s.multipliers.minCoeff(), -tol);
    const Vector stat = 2.0 * W * s.u + q + P.G.transpose() * s.multipliers;
    EXPECT_LE(stat.cwiseAbs().maxCoeff(), tol);
    const Vector slack = P.h - P.G * s.u;
    EXPECT_LE(slack.cwiseProduct(s.multipliers).cwiseAbs().maxCoeff(), tol);
}

} // namespace

TEST(SolveInner, InteriorOptimumAtOrigin) {
    const Vector u = solve_inner(Matrix::Identity(2, 2), Vector::Zero(2),
                                 Polytope::box(Vector::Constant(2, -1.0), Vector::Constant(2, 1.0)));
    EXPECT_LE(u.cwiseAbs().maxCoeff(), 1e-15);
}

TEST(SolveInner, ClippedScalar) {
    const Vector u = solve_inner(Matrix::Identity(1, 1), vals({-4.0}), Polytope::box(vals({-1.0}), vals({1.0})));
    EXPECT_NEAR(u(0), 1.0, 1e-12);
}

TEST(SolveInner, SimplexActiveSet) {
    // Active-set enumeration, tests/oracles/small_cases.py.
    const Polytope P(rows(3, 2, {-1, 0, 0, -1, 1, 1}), vals({0, 0, 1}));
    const auto s = solve_qp(Matrix::Identity(2, 2), vals({-2.0, -2.0}), P);
    EXPECT_NEAR(s.u(0), 0.5, 1e-12);
    EXPECT_NEAR(s.u(1), 0.5, 1e-12);
    EXPECT_NEAR(s.objective, -1.5, 1e-12);
    expect_kkt(Matrix::Identity(2, 2), vals({-2.0, -2.0}), P, s, 1e-8);
}

TEST(SolveInner, FrozenEnumerationInstances) {
    struct Case {
        Matrix W;
        Vector q;
        Matrix G;
        Vector h;
        Vector u;
        double value;
    };
    // Seeded instances and their optima from tests/oracles/small_cases.py.
    const Case cases[] = {
        {rows(3, 3, {1.7657442671306074, 0.6785824744195376, -0.6004596334770299, 0.6785824744195376, 0.9251181748506532,
                     -0.33068466721759826, -0.6004596334770299, -0.33068466721759826, 0.8356711302704902}),
         vals({0.024500634685649558, -1.3296033744119953, 0.38149205855985713}),
         rows(5, 3, {0.7302644824708806, 0.4216471233548811, -0.8793557023459502, 0.020236340386869722, 0.8772197424624042,
                     -0.7320380778429845, 0.6596230707462207, -0.3083949158633623, 0.2894949333243877,
                     -0.49419186422914163, 0.9455022093978858, -0.6211148796125936, -0.1947382229976633,
                     0.3979901817253393, -0.5184375964174397}),
         vals({0.15580391867896298, 0.24993137642034982, 0.23626203185489342, 0.42070922251847653, 0.7396369296608576}),
         vals({-0.11741126827045686, 0.49721870324423567, 0.25116550294602447}), -0.3887998374899938},
        {rows(3, 3, {0.7398299961186896, -0.15924868905978376, -0.10996689081020151, -0.15924868905978376,
                     0.6621585200203721, 0.4109581020255559, -0.10996689081020151, 0.4109581020255559, 2.576575237276033}),
         vals({2.3855895310919557, 2.6894689265371454, 2.1719428918542594}),
         rows(5, 3, {-0.4575815984834828, -0.7568127393980815, -0.47802478589723396, 0.26451365178422326,
                     0.13293919064776927, -0.600682780194747, 0.6579231881025174, 0.5101274961943967, 0.9169358404021661,
                     -0.15884743396487333, 0.3625789815687199, -0.6760924766541685, -0.9761529174365675,
                     -0.20294029264894164, 0.28725563457121916}),
         vals({0.9843854404013123, 0.6409368749593397, 0.37681526105141727, 0.8264474181751512, 0.4792773310320968}),
         vals({-0.3727581936591904, -0.9189994447327763, -0.2474927378573846}), -3.0210101321495753},
        {rows(3, 3, {0.9850475421105942, -0.2839226349609824, 0.2126465311285301, -0.2839226349609824, 0.78287725334162,
                     -0.2956235042759972, 0.2126465311285301, -0.2956235042759972, 0.8445523809066386}),
         vals({-2.073231789196753, -2.2204380617053228, 0.5713189322794778}),
         rows(5, 3, {-0.06800055508251623, 0.13880992142568305, 0.5900155258031208, -0.6660126883625972,
                     0.44028591840203934, 0.26365291701349114, -0.9588178291184066, 0.8031045692580068,
                     0.9475447346494799, 0.981123383042346, 0.6991260252535174, -0.17674470353154814, 0.6081969776389837,
                     -0.256771249959052, 0.87704162248544}),
         vals({0.6386191462243075, 0.1148758785807405, 0.4026215801061588, 0.706735005498922, 0.8956795033227808}),
         vals({0.2641849228582366, 0.6461941895817491, 0.023956446694784188}), -1.6761262745702976},
    };
    for (const auto& c : cases) {
        const Polytope P(c.G, c.h);
        const auto s = solve_qp(c.W, c.q, P);
        EXPECT_LE((s.u - c.u).cwiseAbs().maxCoeff(), 1e-9);
        EXPECT_NEAR(s.objective, c.value, 1e-10);
        expect_kkt(c.W, c.q, P, s, 1e-8);
    }
}

TEST(SolveInner, EmptyFeasibleSet) {
    const Polytope P(rows(2, 1, {1, -1}), vals({-1.0, -1.0}));
    try {
        solve_qp(Matrix::Identity(1, 1), vals({0.0}), P);
        FAIL() << "expected Infeasible";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Infeasible);
    }
}

TEST(SolveInnerProperty, KktAndOptimalityOnRandomInstances) {
    Gen gen(41);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = gen.integer(1, 6);
        const int r = gen.integer(1, 12);
        const Matrix W = gen.spd(n, 0.2);
        const Vector q = gen.vector(n, -3.0, 3.0);
        const Polytope P(gen.matrix(r, n, -1.0, 1.0), gen.vector(r, 0.05, 1.0));
        const auto s = solve_qp(W, q, P);
        expect_kkt(W, q, P, s, 1e-7);
        // No sampled feasible point does better.
        for (int k = 0; k < 100; ++k) {
            const Vector v = gen.vector(n, -2.0, 2.0);
            if (!P.contains(v, 0.0)) continue;
            EXPECT_LE(s.objective, v.dot(W * v) + q.dot(v) + 1e-9);
        }
    }
}

TEST(SolveInnerProperty, BestResponseLipschitzInLambda) {
    const auto cfg = apdg::testing::watertank_config();
    const auto rt = build_problem(cfg);
    const auto problems = rt.local_problems(cfg.x0);
    const auto& p = problems[0];
    const double modulus = std::sqrt(lambda_max(p.cp->ConsH * p.cp->ConsH.transpose())) / p.cp->mu;
    Gen gen(43);
    for (int trial = 0; trial < 50; ++trial) {
        const Vector l1 = gen.vector(16, 0.0, 3.0);
        const Vector l2 = gen.vector(16, 0.0, 3.0);
        const double du = (p.best_response(l1) - p.best_response(l2)).norm();
        EXPECT_LE(du, modulus * (l1 - l2).norm() + 1e-9);
    }
}

TEST(Centralized, OriginIsOptimalAtEquilibrium) {
    const auto cfg = apdg::testing::watertank_config();
    const auto rt = build_problem(cfg);
    const std::vector<Vector> zero(4, Vector::Zero(2));
    const auto res = centralized_solve(rt.local_problems(zero));
    EXPECT_LE(std::abs(res.J), 1e-12);
    for (const auto& u : res.u) EXPECT_LE(u.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Centralized, TerminalStatesGiveLqrRollout) {
    const auto cfg = apdg::testing::watertank_config();
    const auto rt = build_problem(cfg);
    const std::vector<Vector> x = {Vector{{0.1, -0.2}}, Vector{{-0.15, 0.1}}, Vector{{0.05, 0.05}}, Vector{{0.0, -0.1}}};
    for (int i = 0; i < 4; ++i) ASSERT_TRUE(rt.subs[static_cast<std::size_t>(i)].in_terminal(x[static_cast<std::size_t>(i)]));
    const auto res = centralized_solve(rt.local_problems(x));
    for (int i = 0; i < 4; ++i) {
        const Vector rollout = lqr_rollout(*rt.subs[static_cast<std::size_t>(i)].cp, x[static_cast<std::size_t>(i)]);
        EXPECT_LE((res.u[static_cast<std::size_t>(i)] - rollout).cwiseAbs().maxCoeff(), 1e-9);
    }
}

TEST(Centralized, WaterTankOptimumMatchesConicSolver) {
    const auto cfg = apdg::testing::watertank_config();
    const auto rt = build_problem(cfg);
    const auto res = centralized_solve(rt.local_problems(cfg.x0));
    // Uncondensed formulation solved by cvxpy/Clarabel, tests/oracles/watertank.py.
    EXPECT_NEAR(res.J, 137.34580992168705, 1e-6);
    const double expect_u0[] = {0.999999999999999, -0.9999999999999946, 0.8010785595734311, 0.6809167756362228};
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(res.u[static_cast<std::size_t>(i)](0), expect_u0[i], 1e-6);
    EXPECT_LE(res.lambda.maxCoeff(), 1e-9); // the shared budget is slack at t = 0
}

TEST(Centralized, ReducedHorizonMatchesConicSolver) {
    auto cfg = apdg::testing::watertank_config();
    cfg.N = 2;
    for (auto& x : cfg.x0) x *= 0.25;
    const auto rt = build_problem(cfg);
    const auto res = centralized_solve(rt.local_problems(cfg.x0));
    EXPECT_NEAR(res.J, 8.31359780640932, 1e-6);
    const double expect_u0[] = {0.3299916591508084, -0.5835014357569309, 0.20026963989545177, 0.17022919391113372};
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(res.u[static_cast<std::size_t>(i)](0), expect_u0[i], 1e-6);
}

TEST(Centralized, InfeasibleStateReported) {
    const auto cfg = apdg::testing::watertank_config();
    const auto rt = build_problem(cfg);
    auto x = cfg.x0;
    x[0] = Vector{{2.0, 2.0}};
    try {
        centralized_solve(rt.local_problems(x));
        FAIL() << "expected Infeasible";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Infeasible);
    }
}
