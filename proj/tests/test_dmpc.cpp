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

TEST(TightenedRhs, Blocks) {
    const Vector b = tightened_rhs(4, 3, 2, 0.01);
    ASSERT_EQ(b.size(), 6);
    EXPECT_NEAR(b(0), 0.96, 1e-15);
    EXPECT_NEAR(b(1), 0.96, 1e-15);
    EXPECT_NEAR(b(2), 0.92, 1e-15);
    EXPECT_NEAR(b(5), 0.88, 1e-15);
}

TEST(BuildProblem, WaterTankRuntime) {
    const auto rt = build_problem(apdg::testing::watertank_config());
    EXPECT_EQ(rt.M(), 4);
    EXPECT_NEAR(rt.sigma, 0.16, 1e-15);
    EXPECT_EQ(rt.graph_info.abar, 1.0 / 3.0);
    EXPECT_EQ(rt.b_eps.size(), 16);
    EXPECT_NEAR(rt.b_eps(15), 1.0 - 4 * 8 * 0.0005, 1e-15);
    for (const auto& sub : rt.subs) EXPECT_EQ(sub.terminal.rows(), 8);
    EXPECT_EQ(rt.theta(), 0.0); // coupling rows are rank one per step
}

TEST(BuildProblem, GammaAtBoundRejected) {
    auto cfg = apdg::testing::watertank_config();
    cfg.gamma = 1.0 / (4.0 * 9.0);
    try {
        build_problem(cfg);
        FAIL() << "expected ConfigInvalid";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ConfigInvalid);
    }
}

TEST(BuildProblem, EpsBEqualToEpsAccepted) {
    auto cfg = apdg::testing::watertank_config();
    cfg.eps_b = cfg.eps;
    EXPECT_NO_THROW(build_problem(cfg));
}

TEST(CandidateShift, HorizonOne) {
    auto cfg = apdg::testing::watertank_config();
    cfg.N = 1;
    const auto rt = build_problem(cfg);
    const auto& sub = rt.subs[0];
    const Vector x{{0.1, -0.1}};
    const Vector u{{0.2}};
    const Vector next = sub.sys.A * x + sub.sys.B * u;
    const Vector cand = candidate_shift(sub, x, u);
    ASSERT_EQ(cand.size(), 1);
    EXPECT_NEAR(cand(0), (sub.dare.K * next)(0), 1e-15);
}

TEST(CandidateShift, DropsFirstInputAndAppendsFeedback) {
    const auto rt = build_problem(apdg::testing::watertank_config());
    const auto& sub = rt.subs[2];
    const Vector x{{0.4, -0.3}};
    Vector u(8);
    u << 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8;
    const Vector cand = candidate_shift(sub, x, u);
    EXPECT_TRUE(cand.head(7) == u.tail(7));
    Vector state = x;
    for (int l = 0; l < 8; ++l) state = sub.sys.A * state + sub.sys.B * u.segment(l, 1);
    EXPECT_NEAR(cand(7), (sub.dare.K * state)(0), 1e-12);
}

TEST(ClosedLoop, OriginStaysPut) {
    auto cfg = apdg::testing::watertank_config();
    for (auto& x : cfg.x0) x.setZero();
    const auto rt = build_problem(cfg);
    const auto trace = closed_loop_run(rt, ClosedLoopOptions{SyncMode::Async, 5, false});
    ASSERT_EQ(trace.steps.size(), 5u);
    for (const auto& st : trace.steps) {
        for (int i = 0; i < 4; ++i) {
            EXPECT_EQ(st.iterations[i], 1);
            EXPECT_LT(st.u[i].norm(), 1e-12);
            EXPECT_LT(st.x[i].norm(), 1e-12);
            EXPECT_TRUE(st.in_terminal[i]);
        }
    }
    EXPECT_TRUE(verify_feasibility(trace, rt).ok());
}

TEST(ClosedLoop, InfeasibleInitialState) {
    auto cfg = apdg::testing::watertank_config();
    cfg.x0[0] = Vector{{2.0, 2.0}};
    const auto rt = build_problem(cfg);
    try {
        closed_loop_run(rt, ClosedLoopOptions{SyncMode::Async, 1, false});
        FAIL() << "expected InitialStateInfeasible";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InitialStateInfeasible);
    }
}

TEST(ClosedLoop, ZeroStepsIsEmpty) {
    const auto rt = build_problem(apdg::testing::watertank_config());
    const auto trace = closed_loop_run(rt, ClosedLoopOptions{SyncMode::Async, 0, false});
    EXPECT_TRUE(trace.steps.empty());
    EXPECT_TRUE(trace.final_x[0] == rt.cfg.x0[0]);
}

TEST(Feasibility, ShortRunIsCleanAndFaultsAreFlagged) {
    const auto rt = build_problem(apdg::testing::watertank_config());
    const auto trace = closed_loop_run(rt, ClosedLoopOptions{SyncMode::Async, 3, false});
    const auto rep = verify_feasibility(trace, rt);
    for (const auto& v : rep.violations) ADD_FAILURE() << "t=" << v.t << " " << v.what << " by " << v.amount;

    auto broken = trace;
    broken.steps[1].u[2](0) = 1.3;
    broken.steps[1].global_value(0) += 1.0;
    const auto bad = verify_feasibility(broken, rt);
    ASSERT_FALSE(bad.ok());
    bool saw_input = false, saw_global = false;
    for (const auto& v : bad.violations) {
        EXPECT_EQ(v.t, 1);
        saw_input = saw_input || v.what.find("input 3") != std::string::npos;
        saw_global = saw_global || v.what.find("global") != std::string::npos;
    }
    EXPECT_TRUE(saw_input);
    EXPECT_TRUE(saw_global);
}

TEST(SolveAt, SynchronousModeFinishes) {
    const auto rt = build_problem(apdg::testing::watertank_config());
    const auto sol = solve_at(rt, rt.cfg.x0, SyncMode::Synchronous, 1);
    EXPECT_TRUE(sol.all_terminated);
    EXPECT_GT(sol.sim_time, 0.0);
    EXPECT_LT((sol.coupling - rt.b_eps).maxCoeff(), 4 * rt.cfg.eps);
}
