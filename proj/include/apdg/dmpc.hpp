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
#ifndef APDG_DMPC_HPP
#define APDG_DMPC_HPP

#include "apdg/apdg.hpp"
#include "apdg/common.hpp"
#include "apdg/model.hpp"
#include "apdg/netsim.hpp"
#include "apdg/polytope.hpp"
#include "apdg/qp.hpp"
#include "apdg/schedule.hpp"
#include "apdg/terminal.hpp"

#include <chrono>
#include <cstdint>
#include <iomanip>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace apdg {

struct DmpcConfig {
    std::vector<LtiSubsystem> subsystems;
    int N = 8;
    double gamma = 0.01;
    double eps = 0.0005;
    double eps_b = 0.0001;
    double eps_g = 0.0005;
    std::vector<std::pair<int, int>> edges; ///< 0-based
    Schedule schedule;
    double beta = 0.08;
    std::uint64_t seed = 1;
    int T_sim = 40;
    std::vector<Vector> x0;
    QpOptions qp;
    long local_cap = 100000;
    std::optional<double> c9;  ///< defaults to theta / 2
    double pi4 = 2.0;

    int M() const { return static_cast<int>(subsystems.size()); }

    /// Throws Error{ConfigInvalid} naming the first offending field.
    void validate() const {
        auto fail = [](const std::string& what) { throw Error(ErrorCode::ConfigInvalid, what); };
        if (subsystems.empty()) fail("subsystems: at least one subsystem is required");
        for (std::size_t i = 0; i < subsystems.size(); ++i) {
            try {
                subsystems[i].validate();
            } catch (const Error& e) {
                fail("subsystem " + std::to_string(i + 1) + ": " + e.detail());
            }
            if (subsystems[i].rho() != subsystems.front().rho()) fail("Cg: all subsystems must share rho");
        }
        if (N < 1) fail("N: horizon must be at least 1");
        const double bound = 1.0 / (static_cast<double>(M()) * (N + 1));
        if (!(gamma > 0.0 && gamma < bound)) fail("gamma: must satisfy 0 < gamma < 1/(M(N+1))");
        if (!(eps > 0.0 && eps <= gamma)) fail("eps: must satisfy 0 < eps <= gamma");
        if (!(eps_b >= 0.0 && eps_b <= eps)) fail("eps_b: must satisfy 0 <= eps_b <= eps");
        if (!(eps_g > 0.0)) fail("eps_g: must be positive");
        if (!(beta > 0.0)) fail("beta: must be positive");
        if (T_sim < 0) fail("steps: must be nonnegative");
        if (!schedule.speed.empty() && static_cast<int>(schedule.speed.size()) != M()) {
            fail("speed: one multiplier per subsystem is required");
        }
        for (double s : schedule.speed) {
            if (!(s > 0.0)) fail("speed: multipliers must be positive");
        }
        if (!(schedule.tau_lo > 0.0 && schedule.tau_hi >= schedule.tau_lo)) {
            fail("schedule: need 0 < tau_lo <= tau_hi");
        }
        if (!(schedule.tau_delay >= 0.0)) fail("schedule: delay must be nonnegative");
        if (static_cast<int>(x0.size()) != M()) fail("x0: one initial state per subsystem is required");
        for (std::size_t i = 0; i < x0.size(); ++i) {
            if (x0[i].size() != subsystems[i].n()) fail("x0: subsystem " + std::to_string(i + 1) + " has wrong size");
        }
    }
};

/// b(eps) with block l (0-based) equal to (1 - M (l+1) eps) 1_rho.
inline Vector tightened_rhs(int M, int N, int rho, double eps) {
    Vector b(N * rho);
    for (int l = 0; l < N; ++l) {
        b.segment(l * rho, rho).setConstant(1.0 - static_cast<double>(M) * (l + 1) * eps);
    }
    return b;
}

/**
 * Per-subsystem data that does not depend on the measured state. The local
 * feasible set at state x is {u : G u <= h0 - E x}.
 */
struct SubsystemRuntime {
    LtiSubsystem sys;
    DareSolution dare;
    std::shared_ptr<const CondensedProblem> cp;
    Polytope terminal;
    Matrix G;
    Vector h0;
    Matrix E;

    Polytope feasible(const Vector& x) const { return Polytope(G, h0 - E * x); }
    bool in_terminal(const Vector& x, double tol = 1e-9) const { return terminal.contains(x, tol); }
};

struct DmpcRuntime {
    DmpcConfig cfg;
    std::vector<SubsystemRuntime> subs;
    Digraph graph;
    GraphDiagnostics graph_info;
    Vector b_eps;
    double sigma = 0.0;

    int M() const { return static_cast<int>(subs.size()); }

    std::vector<LocalProblem> local_problems(const std::vector<Vector>& x) const {
        std::vector<LocalProblem> out;
        out.reserve(subs.size());
        for (std::size_t i = 0; i < subs.size(); ++i) {
            out.push_back(LocalProblem{subs[i].cp, subs[i].feasible(x[i]), x[i], b_eps, M(), cfg.qp});
        }
        return out;
    }

    /// Network-wide convexity constants: the smallest theta and largest Lip over subsystems.
    double theta() const {
        double t = subs.front().cp->theta;
        for (const auto& s : subs) t = std::min(t, s.cp->theta);
        return t;
    }
    double Lip() const {
        double l = 0.0;
        for (const auto& s : subs) l = std::max(l, s.cp->Lip);
        return l;
    }
};

inline SubsystemRuntime build_subsystem(const LtiSubsystem& sys, int N, double sigma) {
    SubsystemRuntime rt;
    rt.sys = sys;
    rt.dare = dare_solve(sys.A, sys.B, sys.Q, sys.R);
    auto cp = std::make_shared<CondensedProblem>(condense(sys, N, rt.dare));
    rt.terminal = terminal_set(sys, rt.dare.K, sigma);
    const int n = sys.n();
    const int m = sys.m();
    const int urows = sys.U.rows();
    const int xrows = sys.X.rows();
    const int trows = rt.terminal.rows();
    const int total = N * urows + (N - 1) * xrows + trows;
    rt.G = Matrix::Zero(total, N * m);
    rt.h0 = Vector::Zero(total);
    rt.E = Matrix::Zero(total, n);
    int row = 0;
    for (int l = 0; l < N; ++l) {
        rt.G.block(row, l * m, urows, m) = sys.U.G;
        rt.h0.segment(row, urows) = sys.U.h;
        row += urows;
    }
    for (int l = 1; l < N; ++l) {
        rt.G.block(row, 0, xrows, N * m) = sys.X.G * cp->Bbar.middleRows(l * n, n);
        rt.E.block(row, 0, xrows, n) = sys.X.G * cp->Abar.middleRows(l * n, n);
        rt.h0.segment(row, xrows) = sys.X.h;
        row += xrows;
    }
    rt.G.block(row, 0, trows, N * m) = rt.terminal.G * cp->Bbar.middleRows(N * n, n);
    rt.E.block(row, 0, trows, n) = rt.terminal.G * cp->Abar.middleRows(N * n, n);
    rt.h0.segment(row, trows) = rt.terminal.h;
    rt.cp = std::move(cp);
    return rt;
}

/// Validates the configuration and assembles all state-independent data.
inline DmpcRuntime build_problem(const DmpcConfig& cfg) {
    cfg.validate();
    DmpcRuntime rt;
    rt.cfg = cfg;
    rt.sigma = terminal_budget(cfg.M(), cfg.N, cfg.gamma);
    for (const auto& sys : cfg.subsystems) rt.subs.push_back(build_subsystem(sys, cfg.N, rt.sigma));
    rt.graph = make_digraph(cfg.M(), cfg.edges);
    rt.graph_info = validate_graph(rt.graph);
    rt.b_eps = tightened_rhs(cfg.M(), cfg.N, cfg.subsystems.front().rho(), cfg.eps);
    return rt;
}

inline CertificateInputs certificate_inputs(const DmpcRuntime& rt) {
    CertificateInputs in;
    in.M = rt.M();
    in.abar = rt.graph_info.abar;
    in.tau_lo = rt.cfg.schedule.min_period(rt.M());
    in.tau_hi = rt.cfg.schedule.max_period(rt.M());
    in.tau_delay = rt.cfg.schedule.tau_delay;
    in.theta = rt.theta();
    in.Lip = rt.Lip();
    in.Nrho = rt.subs.front().cp->dual_dim();
    in.beta = rt.cfg.beta;
    in.c9 = rt.cfg.c9.value_or(in.theta / 2.0);
    in.pi4 = rt.cfg.pi4;
    return in;
}

/// Outcome of one distributed solve at a fixed measured state.
struct SolveOnce {
    std::vector<Vector> u;       ///< full horizon inputs per subsystem
    std::vector<long> iterations; ///< local iterations to termination
    std::vector<DualNodeState> states;
    double sim_time = 0.0;       ///< simulated seconds until the last node terminated
    double cpu_seconds = 0.0;
    double J = 0.0;              ///< sum of local costs at the output
    Vector coupling;             ///< sum_i g_i(x_i, u_i)
    bool all_terminated = false;
    std::vector<TraceRow> trace;
};

inline SolveOnce solve_at(const DmpcRuntime& rt, const std::vector<Vector>& x, SyncMode mode, std::uint64_t seed,
                          bool record_trace = false, long max_global_iter = 0) {
    const auto problems = rt.local_problems(x);
    Schedule sched = rt.cfg.schedule;
    sched.mode = mode;
    SimOptions opts;
    opts.beta = rt.cfg.beta;
    opts.termination = TerminationParams{rt.cfg.eps, rt.cfg.eps_b, rt.cfg.eps_g};
    opts.local_cap = rt.cfg.local_cap;
    opts.record_trace = record_trace;
    opts.max_global_iter = max_global_iter;

    const auto start = std::chrono::steady_clock::now();
    SimResult sim = run_apdg(rt.graph, problems, sched, seed, opts);
    SolveOnce out;
    out.cpu_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.sim_time = sim.finish_time;
    out.all_terminated = sim.all_terminated;
    out.coupling = Vector::Zero(rt.b_eps.size());
    for (std::size_t i = 0; i < problems.size(); ++i) {
        const auto& st = sim.states[i];
        out.u.push_back(st.u);
        out.iterations.push_back(st.k_local);
        out.J += problems[i].cost(st.u);
        out.coupling += problems[i].coupling(st.u);
    }
    out.states = std::move(sim.states);
    out.trace = std::move(sim.trace);
    return out;
}

struct MpcStep {
    int t = 0;
    std::vector<Vector> x;       ///< measured states
    std::vector<Vector> u_seq;   ///< full horizon inputs per subsystem
    std::vector<Vector> u;       ///< applied first inputs
    std::vector<long> iterations;
    std::vector<bool> in_terminal;
    Vector global_value;         ///< sum_i (Cg x + Dg u), rho rows
    Vector coupling;             ///< sum_i g_i over the horizon
    double sim_time = 0.0;
    double cpu_seconds = 0.0;
    double J = 0.0;
    std::optional<double> J_star; ///< centralized optimum when the oracle ran
    double dual_residual = 0.0;  ///< max_i ||grad_prev|| at termination
};

struct MpcTrace {
    std::vector<MpcStep> steps;
    std::vector<Vector> final_x;
};

struct ClosedLoopOptions {
    SyncMode mode = SyncMode::Async;
    std::optional<int> steps;
    bool oracle = false;
};

/// Runs the receding-horizon loop: solve distributedly, apply the first inputs, advance the plants.
inline MpcTrace closed_loop_run(const DmpcRuntime& rt, const ClosedLoopOptions& opts = {}) {
    const int T = opts.steps.value_or(rt.cfg.T_sim);
    std::vector<Vector> x = rt.cfg.x0;
    try {
        const auto problems = rt.local_problems(x);
        centralized_solve(problems, rt.cfg.qp);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::Infeasible) throw;
        throw Error(ErrorCode::InitialStateInfeasible, "closed_loop_run: x0 is outside the feasible region");
    }
    MpcTrace trace;
    for (int t = 0; t < T; ++t) {
        MpcStep step;
        step.t = t;
        step.x = x;
        const SolveOnce sol = solve_at(rt, x, opts.mode, rt.cfg.seed + static_cast<std::uint64_t>(t));
        step.u_seq = sol.u;
        step.iterations = sol.iterations;
        step.sim_time = sol.sim_time;
        step.cpu_seconds = sol.cpu_seconds;
        step.J = sol.J;
        step.coupling = sol.coupling;
        for (const auto& st : sol.states) step.dual_residual = std::max(step.dual_residual, st.grad_prev.norm());
        if (opts.oracle) {
            const auto problems = rt.local_problems(x);
            step.J_star = centralized_solve(problems, rt.cfg.qp).J;
        }
        const int rho = rt.subs.front().sys.rho();
        step.global_value = Vector::Zero(rho);
        for (int i = 0; i < rt.M(); ++i) {
            const auto& sub = rt.subs[static_cast<std::size_t>(i)];
            const Vector u0 = sol.u[static_cast<std::size_t>(i)].head(sub.sys.m());
            step.u.push_back(u0);
            step.in_terminal.push_back(sub.in_terminal(x[static_cast<std::size_t>(i)]));
            step.global_value += sub.sys.Cg * x[static_cast<std::size_t>(i)] + sub.sys.Dg * u0;
        }
        for (int i = 0; i < rt.M(); ++i) {
            const auto& sys = rt.subs[static_cast<std::size_t>(i)].sys;
            x[static_cast<std::size_t>(i)] = sys.A * x[static_cast<std::size_t>(i)] + sys.B * step.u[static_cast<std::size_t>(i)];
        }
        trace.steps.push_back(std::move(step));
    }
    trace.final_x = x;
    return trace;
}

/// Shifted input col(u_1, ..., u_{N-1}, K x_N) for a subsystem whose horizon solution is `u`.
inline Vector candidate_shift(const SubsystemRuntime& sub, const Vector& x, const Vector& u) {
    const auto& cp = *sub.cp;
    const Vector traj = cp.predict(x, u);
    Vector out(cp.input_dim());
    const int m = cp.m;
    out.head((cp.N - 1) * m) = u.tail((cp.N - 1) * m);
    out.tail(m) = cp.K * traj.tail(cp.n);
    return out;
}

struct Violation {
    int t = 0;
    std::string what;
    double amount = 0.0;
};

struct FeasibilityReport {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
};

/**
 * Checks each step of a trace: the applied solution keeps the coupling
 * within M eps of b(eps), the plant stays in its local sets and the original
 * global constraint, and the shifted candidate is feasible at the next state.
 */
inline FeasibilityReport verify_feasibility(const MpcTrace& trace, const DmpcRuntime& rt, double tol = 1e-9) {
    FeasibilityReport rep;
    const int M = rt.M();
    const double margin = static_cast<double>(M) * rt.cfg.eps;
    for (std::size_t k = 0; k < trace.steps.size(); ++k) {
        const MpcStep& st = trace.steps[k];
        const double excess = (st.coupling - rt.b_eps).maxCoeff();
        if (!(excess < margin)) rep.violations.push_back({st.t, "coupling exceeds b(eps) + M eps", excess - margin});
        const double global = (st.global_value.array() - 1.0).maxCoeff();
        if (global > tol) rep.violations.push_back({st.t, "global constraint violated", global});
        for (int i = 0; i < M; ++i) {
            const auto& sub = rt.subs[static_cast<std::size_t>(i)];
            const double vx = sub.sys.X.max_violation(st.x[static_cast<std::size_t>(i)]);
            if (vx > tol) rep.violations.push_back({st.t, "state " + std::to_string(i + 1) + " outside X", vx});
            const double vu = sub.sys.U.max_violation(st.u[static_cast<std::size_t>(i)]);
            if (vu > tol) rep.violations.push_back({st.t, "input " + std::to_string(i + 1) + " outside U", vu});
        }

        Vector cand_coupling = Vector::Zero(rt.b_eps.size());
        for (int i = 0; i < M; ++i) {
            const auto& sub = rt.subs[static_cast<std::size_t>(i)];
            const Vector& xi = st.x[static_cast<std::size_t>(i)];
            const Vector& ui = st.u_seq[static_cast<std::size_t>(i)];
            const Vector next_x = sub.sys.A * xi + sub.sys.B * ui.head(sub.sys.m());
            const Vector cand = candidate_shift(sub, xi, ui);
            const double local = sub.feasible(next_x).max_violation(cand);
            if (local > tol) {
                rep.violations.push_back({st.t, "shifted candidate " + std::to_string(i + 1) + " locally infeasible", local});
            }
            cand_coupling += sub.cp->coupling(next_x, cand);
        }
        const double cand_excess = (cand_coupling - rt.b_eps).maxCoeff();
        if (!(cand_excess < tol)) {
            rep.violations.push_back({st.t, "shifted candidate exceeds b(eps)", cand_excess});
        }
    }
    return rep;
}

inline void write_mpc_csv(std::ostream& os, const MpcTrace& trace, const DmpcRuntime& rt) {
    std::ostringstream buf;
    buf << std::setprecision(17);
    buf << "t";
    for (int i = 0; i < rt.M(); ++i) {
        for (int j = 0; j < rt.subs[static_cast<std::size_t>(i)].sys.n(); ++j) buf << ",x" << i + 1 << '_' << j + 1;
    }
    for (int i = 0; i < rt.M(); ++i) {
        for (int j = 0; j < rt.subs[static_cast<std::size_t>(i)].sys.m(); ++j) buf << ",u" << i + 1 << '_' << j + 1;
    }
    for (int r = 0; r < rt.subs.front().sys.rho(); ++r) buf << ",g" << r + 1;
    for (int i = 0; i < rt.M(); ++i) buf << ",iter" << i + 1;
    buf << ",sim_seconds,cpu_seconds\n";
    for (const auto& st : trace.steps) {
        buf << st.t;
        for (const auto& x : st.x) {
            for (int j = 0; j < x.size(); ++j) buf << ',' << x(j);
        }
        for (const auto& u : st.u) {
            for (int j = 0; j < u.size(); ++j) buf << ',' << u(j);
        }
        for (int r = 0; r < st.global_value.size(); ++r) buf << ',' << st.global_value(r);
        for (long it : st.iterations) buf << ',' << it;
        buf << ',' << st.sim_time << ',' << st.cpu_seconds << '\n';
    }
    os << buf.str();
}

} // namespace apdg

#endif // APDG_DMPC_HPP
