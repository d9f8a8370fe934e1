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
// apdg: command-line front end for the distributed MPC library.

#include "apdg/config.hpp"
#include "apdg/dmpc.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> mode;
    std::optional<int> steps;
    bool json = false;
    std::string out_dir = ".";
};

apdg::SyncMode parse_mode(const std::string& s) {
    if (s == "async") return apdg::SyncMode::Async;
    if (s == "synchronous" || s == "sync") return apdg::SyncMode::Synchronous;
    throw apdg::Error(apdg::ErrorCode::ConfigInvalid, "--mode: expected async or synchronous");
}

const char* mode_name(apdg::SyncMode m) { return m == apdg::SyncMode::Async ? "async" : "synchronous"; }

apdg::DmpcConfig load(const Common& c) {
    apdg::DmpcConfig cfg = apdg::load_config(c.config);
    if (c.seed) cfg.seed = *c.seed;
    if (c.mode) cfg.schedule.mode = parse_mode(*c.mode);
    if (c.steps) cfg.T_sim = *c.steps;
    cfg.validate();
    return cfg;
}

std::string fixed(const apdg::Matrix& m, int digits = 4) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << '[';
    for (int i = 0; i < m.rows(); ++i) {
        if (i > 0) os << "; ";
        for (int j = 0; j < m.cols(); ++j) os << (j > 0 ? " " : "") << m(i, j);
    }
    os << ']';
    return os.str();
}

json mat(const apdg::Matrix& m) { return apdg::detail::matrix_json(m); }
json vec(const apdg::Vector& v) { return apdg::detail::vector_json(v); }

std::ofstream open_out(const fs::path& dir, const std::string& name) {
    fs::create_directories(dir);
    std::ofstream os(dir / name);
    if (!os) throw apdg::Error(apdg::ErrorCode::ConfigInvalid, "cannot write " + (dir / name).string());
    return os;
}

int cmd_condense(const Common& c) {
    const apdg::DmpcConfig cfg = load(c);
    json subs = json::array();
    for (int i = 0; i < cfg.M(); ++i) {
        const auto& sys = cfg.subsystems[static_cast<std::size_t>(i)];
        const auto dare = apdg::dare_solve(sys.A, sys.B, sys.Q, sys.R);
        const auto cp = apdg::condense(sys, cfg.N, dare);
        if (c.json) {
            subs.push_back({{"P", mat(dare.P)},
                            {"K", mat(dare.K)},
                            {"CostW_dim", {cp.CostW.rows(), cp.CostW.cols()}},
                            {"ConsH_dim", {cp.ConsH.rows(), cp.ConsH.cols()}},
                            {"mu", cp.mu},
                            {"ell", cp.ell},
                            {"theta", cp.theta},
                            {"Lip", cp.Lip},
                            {"warnings", cp.warnings}});
            continue;
        }
        std::cout << "subsystem " << i + 1 << '\n'
                  << "  P = " << fixed(dare.P) << '\n'
                  << "  K = " << fixed(dare.K) << '\n'
                  << "  CostW " << cp.CostW.rows() << 'x' << cp.CostW.cols() << ", ConsH " << cp.ConsH.rows() << 'x'
                  << cp.ConsH.cols() << '\n'
                  << std::setprecision(6) << "  mu = " << cp.mu << ", ell = " << cp.ell << ", theta = " << cp.theta
                  << ", L = " << cp.Lip << '\n';
        for (const auto& w : cp.warnings) std::cout << "  warning: " << w << '\n';
    }
    if (c.json) {
        std::cout << std::setw(2) << json{{"config", apdg::config_to_json(cfg)}, {"subsystems", subs}} << '\n';
    }
    return 0;
}

int cmd_terminal_set(const Common& c) {
    const apdg::DmpcRuntime rt = apdg::build_problem(load(c));
    json subs = json::array();
    if (!c.json) std::cout << "sigma = " << std::setprecision(6) << rt.sigma << '\n';
    for (int i = 0; i < rt.M(); ++i) {
        const auto& sub = rt.subs[static_cast<std::size_t>(i)];
        const auto& x0 = rt.cfg.x0[static_cast<std::size_t>(i)];
        if (c.json) {
            subs.push_back({{"G", mat(sub.terminal.G)}, {"h", vec(sub.terminal.h)}, {"x0_inside", sub.in_terminal(x0)}});
            continue;
        }
        std::cout << "subsystem " << i + 1 << ": " << sub.terminal.rows() << " halfspaces, x0 "
                  << (sub.in_terminal(x0) ? "inside" : "outside") << '\n';
        for (int r = 0; r < sub.terminal.rows(); ++r) {
            std::cout << "  " << fixed(sub.terminal.G.row(r), 6) << " x <= " << std::fixed << std::setprecision(6)
                      << sub.terminal.h(r) << std::defaultfloat << '\n';
        }
    }
    if (c.json) std::cout << std::setw(2) << json{{"sigma", rt.sigma}, {"subsystems", subs}} << '\n';
    return 0;
}

json certificate_json(const apdg::RateCertificate& rc) {
    json j = {{"valid", rc.valid},     {"eta1", rc.eta1},         {"eta2", rc.eta2},   {"eta", rc.eta},
              {"b", rc.b_exp},         {"xi", rc.xi},             {"c", rc.c},         {"script_L", rc.script_L},
              {"beta1", rc.beta1},     {"beta2", rc.beta2},       {"beta", rc.beta},   {"beta_gap", rc.beta_gap}};
    if (rc.valid) {
        j["delta"] = rc.delta;
        j["one_minus_delta"] = rc.one_minus_delta;
    } else {
        j["reason"] = rc.reason;
    }
    return j;
}

void print_certificate(const apdg::RateCertificate& rc) {
    std::cout << std::setprecision(10) << "eta1 = " << rc.eta1 << ", eta2 = " << rc.eta2 << ", eta = " << rc.eta
              << ", b = " << rc.b_exp << '\n'
              << "xi = " << rc.xi << ", script L = " << rc.script_L << '\n'
              << "beta1 = " << rc.beta1 << ", beta2 = " << rc.beta2 << ", beta = " << rc.beta << '\n';
    if (rc.valid) {
        std::cout << "delta = " << rc.delta << " (1 - delta = " << rc.one_minus_delta << ")\n";
    } else {
        std::cout << rc.reason << '\n';
    }
}

int cmd_certificate(const Common& c) {
    const apdg::DmpcRuntime rt = apdg::build_problem(load(c));
    const auto in = apdg::certificate_inputs(rt);
    const auto rc = apdg::rate_certificate(in);
    if (c.json) {
        json j = certificate_json(rc);
        j["inputs"] = {{"M", in.M},         {"abar", in.abar},   {"tau_lo", in.tau_lo}, {"tau_hi", in.tau_hi},
                       {"tau", in.tau_delay}, {"theta", in.theta}, {"L", in.Lip},         {"Nrho", in.Nrho},
                       {"c9", in.c9},       {"pi4", in.pi4}};
        std::cout << std::setw(2) << j << '\n';
        return 0;
    }
    std::cout << std::setprecision(6) << "M = " << in.M << ", abar = " << in.abar << ", theta = " << in.theta
              << ", L = " << in.Lip << ", N rho = " << in.Nrho << '\n';
    print_certificate(rc);
    return 0;
}

int cmd_solve_once(const Common& c) {
    const apdg::DmpcRuntime rt = apdg::build_problem(load(c));
    const auto& x = rt.cfg.x0;
    const auto sol = apdg::solve_at(rt, x, rt.cfg.schedule.mode, rt.cfg.seed, true);
    const auto problems = rt.local_problems(x);
    const auto central = apdg::centralized_solve(problems, rt.cfg.qp);
    const double gap = sol.J - central.J;
    const double excess = (sol.coupling - rt.b_eps).maxCoeff();
    const auto rc = apdg::rate_certificate(apdg::certificate_inputs(rt));

    const fs::path dir(c.out_dir);
    {
        auto os = open_out(dir, "solve_trace.csv");
        apdg::write_trace_csv(os, sol.trace);
    }
    if (c.json) {
        json iters = sol.iterations;
        json u = json::array();
        for (const auto& ui : sol.u) u.push_back(vec(ui));
        std::cout << std::setw(2)
                  << json{{"mode", mode_name(rt.cfg.schedule.mode)},
                          {"seed", rt.cfg.seed},
                          {"iterations", iters},
                          {"sim_seconds", sol.sim_time},
                          {"J", sol.J},
                          {"J_star", central.J},
                          {"gap", gap},
                          {"coupling_excess", excess},
                          {"u", u},
                          {"certificate", certificate_json(rc)},
                          {"trace", (dir / "solve_trace.csv").string()}}
                  << '\n';
        return 0;
    }
    std::cout << "mode " << mode_name(rt.cfg.schedule.mode) << ", seed " << rt.cfg.seed << '\n' << "iterations:";
    for (long k : sol.iterations) std::cout << ' ' << k;
    std::cout << std::setprecision(10) << "\nsimulated seconds = " << sol.sim_time << '\n'
              << "J = " << sol.J << ", J* = " << central.J << ", gap = " << gap << " (eps_g = " << rt.cfg.eps_g << ")\n"
              << "max coupling excess over b(eps) = " << excess << '\n';
    print_certificate(rc);
    std::cout << "trace written to " << (dir / "solve_trace.csv").string() << '\n';
    return 0;
}

constexpr const char* kPlotScript = R"(#!/usr/bin/env python3
"""Plots the closed-loop outputs written next to this script."""
import os
import pandas as pd
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
times = pd.read_csv(os.path.join(here, "solve_time.csv"))
cons = pd.read_csv(os.path.join(here, "constraint_inputs.csv"))
states = pd.read_csv(os.path.join(here, "states.csv"))

fig, ax = plt.subplots()
ax.plot(times["t"], times["async_seconds"], "o-", label="asynchronous")
ax.plot(times["t"], times["sync_seconds"], "s--", label="synchronous")
ax.set_xlabel("t")
ax.set_ylabel("simulated solve time [s]")
ax.legend()
fig.savefig(os.path.join(here, "solve_time.png"), dpi=150)

fig, (top, bottom) = plt.subplots(2, 1, sharex=True)
top.plot(cons["t"], cons["sum_u"], "k-", label="sum of inputs")
top.axhline(1.5, color="r", ls=":")
top.axhline(-1.5, color="r", ls=":")
top.legend()
for col in [c for c in cons.columns if c.startswith("u")]:
    bottom.plot(cons["t"], cons[col], label=col)
bottom.set_xlabel("t")
bottom.legend()
fig.savefig(os.path.join(here, "constraint_inputs.png"), dpi=150)

fig, ax = plt.subplots()
for col in [c for c in states.columns if c.startswith("x")]:
    ax.plot(states["t"], states[col], label=col)
ax.set_xlabel("t")
ax.legend(ncol=2)
fig.savefig(os.path.join(here, "states.png"), dpi=150)
)";

int cmd_closed_loop(const Common& c) {
    const apdg::DmpcRuntime rt = apdg::build_problem(load(c));
    const apdg::SyncMode mode = rt.cfg.schedule.mode;
    const apdg::SyncMode other = mode == apdg::SyncMode::Async ? apdg::SyncMode::Synchronous : apdg::SyncMode::Async;
    apdg::ClosedLoopOptions opts;
    opts.mode = mode;
    opts.oracle = true;
    const apdg::MpcTrace trace = apdg::closed_loop_run(rt, opts);
    opts.mode = other;
    opts.oracle = false;
    const apdg::MpcTrace other_trace = apdg::closed_loop_run(rt, opts);
    const apdg::MpcTrace& async_trace = mode == apdg::SyncMode::Async ? trace : other_trace;
    const apdg::MpcTrace& sync_trace = mode == apdg::SyncMode::Async ? other_trace : trace;

    const fs::path dir(c.out_dir);
    {
        auto os = open_out(dir, "mpc_trace.csv");
        apdg::write_mpc_csv(os, trace, rt);
    }
    {
        auto os = open_out(dir, "solve_time.csv");
        os << std::setprecision(17) << "t,async_seconds,sync_seconds";
        for (int i = 0; i < rt.M(); ++i) os << ",async_iter" << i + 1;
        for (int i = 0; i < rt.M(); ++i) os << ",sync_iter" << i + 1;
        os << '\n';
        for (std::size_t k = 0; k < trace.steps.size(); ++k) {
            const auto& a = async_trace.steps[k];
            const auto& s = sync_trace.steps[k];
            os << a.t << ',' << a.sim_time << ',' << s.sim_time;
            for (long it : a.iterations) os << ',' << it;
            for (long it : s.iterations) os << ',' << it;
            os << '\n';
        }
    }
    {
        auto os = open_out(dir, "constraint_inputs.csv");
        os << std::setprecision(17) << "t,sum_u";
        for (int r = 0; r < rt.subs.front().sys.rho(); ++r) os << ",g" << r + 1;
        for (int i = 0; i < rt.M(); ++i) {
            for (int j = 0; j < rt.subs[static_cast<std::size_t>(i)].sys.m(); ++j) os << ",u" << i + 1 << '_' << j + 1;
        }
        os << '\n';
        for (const auto& st : trace.steps) {
            double sum = 0.0;
            for (const auto& u : st.u) sum += u.sum();
            os << st.t << ',' << sum;
            for (int r = 0; r < st.global_value.size(); ++r) os << ',' << st.global_value(r);
            for (const auto& u : st.u) {
                for (int j = 0; j < u.size(); ++j) os << ',' << u(j);
            }
            os << '\n';
        }
    }
    {
        auto os = open_out(dir, "states.csv");
        os << std::setprecision(17) << 't';
        for (int i = 0; i < rt.M(); ++i) {
            for (int j = 0; j < rt.subs[static_cast<std::size_t>(i)].sys.n(); ++j) os << ",x" << i + 1 << '_' << j + 1;
        }
        os << '\n';
        for (const auto& st : trace.steps) {
            os << st.t;
            for (const auto& x : st.x) {
                for (int j = 0; j < x.size(); ++j) os << ',' << x(j);
            }
            os << '\n';
        }
    }
    {
        auto os = open_out(dir, "plot.py");
        os << kPlotScript;
    }

    const auto report = apdg::verify_feasibility(trace, rt);
    double worst_gap = 0.0;
    for (const auto& st : trace.steps) worst_gap = std::max(worst_gap, st.J - st.J_star.value_or(st.J));
    double final_norm = 0.0;
    for (const auto& x : trace.final_x) final_norm += x.squaredNorm();
    final_norm = std::sqrt(final_norm);

    if (c.json) {
        json viol = json::array();
        for (const auto& v : report.violations) viol.push_back({{"t", v.t}, {"what", v.what}, {"amount", v.amount}});
        std::cout << std::setw(2)
                  << json{{"mode", mode_name(mode)},    {"steps", trace.steps.size()}, {"worst_gap", worst_gap},
                          {"final_norm", final_norm}, {"violations", viol},          {"out_dir", dir.string()}}
                  << '\n';
        return 0;
    }
    std::cout << "mode " << mode_name(mode) << ", " << trace.steps.size() << " steps\n";
    std::cout << "t    async[s]   sync[s]\n";
    for (std::size_t k = 0; k < trace.steps.size() && k < 8; ++k) {
        std::printf("%-4d %-10.4f %-10.4f\n", trace.steps[k].t, async_trace.steps[k].sim_time, sync_trace.steps[k].sim_time);
    }
    std::cout << std::setprecision(6) << "worst suboptimality gap = " << worst_gap << '\n'
              << "final ||x|| = " << final_norm << '\n'
              << "feasibility violations: " << report.violations.size() << '\n';
    for (const auto& v : report.violations) std::cout << "  t=" << v.t << ": " << v.what << " (" << v.amount << ")\n";
    std::cout << "outputs written to " << dir.string() << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Asynchronous push-sum dual gradient solver for distributed MPC"};
    app.require_subcommand(1);
    Common common;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", common.config, "Configuration file (text or JSON)")->required();
        sub->add_option("--seed", common.seed, "Override the configured seed");
        sub->add_option("--mode", common.mode, "async or synchronous")
            ->check(CLI::IsMember({"async", "synchronous", "sync"}));
        sub->add_option("--steps", common.steps, "Closed-loop steps")->check(CLI::NonNegativeNumber);
        sub->add_flag("--json", common.json, "Machine-readable output");
        sub->add_option("--out-dir", common.out_dir, "Directory for CSV outputs");
    };

    struct Command {
        const char* name;
        const char* help;
        int (*run)(const Common&);
    };
    const Command commands[] = {
        {"condense", "Print DARE solution, condensed dimensions and convexity constants", cmd_condense},
        {"terminal-set", "Print the terminal set of every subsystem", cmd_terminal_set},
        {"solve-once", "Solve the dual problem once at the initial state", cmd_solve_once},
        {"closed-loop", "Run the receding-horizon loop and write CSVs plus a plot script", cmd_closed_loop},
        {"certificate", "Evaluate the linear-rate certificate", cmd_certificate},
    };
    int (*selected)(const Common&) = nullptr;
    for (const auto& cmd : commands) {
        CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
        add_common(sub);
        sub->callback([&selected, run = cmd.run] { selected = run; });
    }

    CLI11_PARSE(app, argc, argv);
    try {
        return selected(common);
    } catch (const apdg::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
