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
#ifndef APDG_APDG_HPP
#define APDG_APDG_HPP

#include "apdg/common.hpp"
#include "apdg/qp.hpp"
#include "apdg/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>

namespace apdg {

/**
 * Per-subsystem state of the asynchronous push-sum dual gradient method.
 *
 * `lambda` is the local dual estimate [w]_+ / y, `d` tracks the network
 * gradient, `grad_prev` is the local gradient at the current `lambda`, and
 * `s` is the local iteration counter advertised to neighbors.
 */
struct DualNodeState {
    Vector lambda;
    Vector z;
    Vector w;
    double y = 1.0;
    Vector d;
    Vector grad_prev;
    Vector u; ///< empty until the first update
    long s = 0;
    bool terminated = false;
    long k_local = 0;

    static DualNodeState initial(int dual_dim) {
        DualNodeState st;
        st.lambda = Vector::Zero(dual_dim);
        st.z = Vector::Zero(dual_dim);
        st.w = Vector::Zero(dual_dim);
        st.d = Vector::Zero(dual_dim);
        st.grad_prev = Vector::Zero(dual_dim);
        return st;
    }
};

/// Immutable envelope carrying (z, y, d, s, l) from `sender` to `receiver`.
struct Message {
    int sender = 0;
    int receiver = 0;
    double weight = 0.0; ///< a_{receiver,sender} = 1 / |N_out(sender)|
    Vector z;
    double y = 0.0;
    Vector d;
    long s = 0;
    bool terminated = false;
    double send_time = 0.0;
    double deliver_time = 0.0;
    std::uint64_t seq = 0;
};

struct UpdateResult {
    DualNodeState state;
    double alpha = 0.0;
};

namespace detail {

struct Mixed {
    Vector w;
    double y = 0.0;
    Vector d;
    long s_tilde = 0;
};

inline Mixed mix(std::span<const Message> buffer, int dim) {
    if (buffer.empty()) {
        throw Error(ErrorCode::DimensionMismatch, "local_update: empty buffer (self-message missing)");
    }
    Mixed m;
    m.w = Vector::Zero(dim);
    m.d = Vector::Zero(dim);
    m.s_tilde = std::numeric_limits<long>::min();
    for (const auto& msg : buffer) {
        m.w += msg.weight * msg.z;
        m.y += msg.weight * msg.y;
        m.d += msg.weight * msg.d;
        m.s_tilde = std::max(m.s_tilde, msg.s);
    }
    return m;
}

inline double adaptive_step(long s_tilde, long s, double beta) {
    return static_cast<double>(std::max(s_tilde - s, 0L) + 1) * beta;
}

} // namespace detail

/**
 * One local iteration: push-sum mixing of the buffered (z, y), projected
 * ratio for the dual estimate, the local best response, an adaptive step
 * scaled by how far the freshest neighbor counter is ahead, and the
 * gradient-tracking update of d.
 *
 * When no buffered counter exceeds the node's own the step is a single beta.
 */
inline UpdateResult local_update(const DualNodeState& state, std::span<const Message> buffer, double beta,
                                 const LocalProblem& problem) {
    if (state.terminated) {
        throw Error(ErrorCode::Frozen, "local_update: node has already terminated");
    }
    const detail::Mixed mixed = detail::mix(buffer, problem.dual_dim());
    UpdateResult out;
    DualNodeState& next = out.state;
    next = state;
    next.w = mixed.w;
    next.y = mixed.y;
    next.lambda = mixed.w.cwiseMax(0.0) / mixed.y;
    next.u = problem.best_response(next.lambda);
    out.alpha = detail::adaptive_step(mixed.s_tilde, state.s, beta);
    next.z = mixed.w - out.alpha * state.d;
    const Vector grad = problem.gradient(next.u);
    next.d = mixed.d + grad - state.grad_prev;
    next.grad_prev = grad;
    next.s = state.s + 1;
    next.k_local = state.k_local + 1;
    return out;
}

/**
 * Forwarding step of a node whose output is already latched: the same
 * mixing and descent on z, with the local gradient held at its final value.
 * Keeps the network sums of y and d intact after the node stops solving.
 */
inline UpdateResult relay_update(const DualNodeState& state, std::span<const Message> buffer, double beta) {
    const detail::Mixed mixed = detail::mix(buffer, static_cast<int>(state.z.size()));
    UpdateResult out;
    DualNodeState& next = out.state;
    next = state;
    next.w = mixed.w;
    next.y = mixed.y;
    out.alpha = detail::adaptive_step(mixed.s_tilde, state.s, beta);
    next.z = mixed.w - out.alpha * state.d;
    next.d = mixed.d;
    next.s = state.s + 1;
    return out;
}

struct TerminationParams {
    double eps = 0.0005;
    double eps_b = 0.0001;
    double eps_g = 0.0005;
};

struct TerminationCheck {
    bool coupling_ok = false; ///< share increase strictly below eps - eps_b in every row
    bool gap_ok = false;      ///< local duality-gap bound below eps_g / M
    double max_increase = 0.0;
    double gap_bound = 0.0;

    bool done() const { return coupling_ok && gap_ok; }
};

/**
 * Distributed stopping test on two consecutive local iterates.
 *
 * The coupling share at the previous iterate is recovered as b/M - grad_prev,
 * which makes the first test well defined before any local solve: with a
 * zero previous gradient the previous share is taken to be b/M.
 */
inline TerminationCheck termination_details(const DualNodeState& prev, const DualNodeState& next,
                                            const LocalProblem& problem, const TerminationParams& params) {
    TerminationCheck out;
    const Vector increase = prev.grad_prev - next.grad_prev;
    out.max_increase = increase.size() ? increase.maxCoeff() : -std::numeric_limits<double>::infinity();
    out.coupling_ok = out.max_increase < params.eps - params.eps_b;
    out.gap_bound = problem.cost(next.u) + prev.grad_prev.norm() * (next.lambda - prev.lambda).norm() +
                    problem.dual_value(next.lambda, next.u);
    out.gap_ok = out.gap_bound <= params.eps_g / static_cast<double>(problem.M);
    return out;
}

inline bool check_termination(const DualNodeState& prev, const DualNodeState& next, const LocalProblem& problem,
                              const TerminationParams& params) {
    return termination_details(prev, next, problem, params).done();
}

struct CertificateInputs {
    int M = 1;
    double abar = 1.0;
    double tau_lo = 1.0;
    double tau_hi = 1.0;
    double tau_delay = 0.0; ///< seconds; converted to ticks of tau_lo
    double theta = 0.0;
    double Lip = 1.0;
    int Nrho = 1;
    double beta = 0.0;
    double c9 = 0.0;
    double pi4 = 2.0;
};

/// Constants of the linear-rate bound. `valid` is false when no rate is certified.
struct RateCertificate {
    long eta1 = 0, eta2 = 0, eta = 0;
    long tau_ticks = 0;
    long b_exp = 0;
    double xi = 0.0;
    double c = 0.0;
    double Mhat = 0.0;
    double c1 = 0, c2 = 0, c3 = 0, c4 = 0, c5 = 0, c6 = 0, c7 = 0, c8 = 0, c9 = 0, c10 = 0, c11 = 0, c12 = 0, c13 = 0,
           c14 = 0;
    double pi1 = 0, pi2 = 0, pi3 = 0, pi4 = 0;
    double script_L = 0.0;
    double beta1 = 0.0;
    double beta2 = 0.0;
    double beta = 0.0;
    double delta = std::numeric_limits<double>::quiet_NaN();
    /// 1 - delta without cancellation; delta itself rounds to 1 when beta2 is tiny.
    double one_minus_delta = std::numeric_limits<double>::quiet_NaN();
    double one_minus_xi = 0.0;
    double beta_gap = 0.0; ///< beta2 - beta1, evaluated stably
    double theta_minus_c9 = 0.0;
    bool valid = false;
    std::string reason; ///< why no certificate was issued (NoCertificate)

    double delta_branch_small(double b) const { return 1.0 - (theta_minus_c9 * b); }
    double delta_branch_large(double b) const { return std::sqrt(script_L * b) + xi; }

    /// 1 - delta on each branch. The large branch takes beta2 - b explicitly.
    double gap_branch_small(double b) const { return theta_minus_c9 * b; }
    double gap_branch_large(double b, double beta2_minus_b) const {
        return script_L * beta2_minus_b / (one_minus_xi + std::sqrt(script_L * b));
    }
};

/**
 * Evaluates the rate certificate for the given network, timing and
 * convexity data. Never throws for out-of-range step sizes: the result
 * carries valid = false and a NoCertificate reason instead.
 */
inline RateCertificate rate_certificate(const CertificateInputs& in) {
    RateCertificate rc;
    const EtaBounds eb = eta_bounds(in.M, in.tau_lo, in.tau_hi, in.tau_delay);
    const double M = in.M;
    rc.eta1 = eb.eta1;
    rc.eta2 = eb.eta2;
    rc.eta = eb.eta;
    rc.tau_ticks = delay_ticks(in.tau_delay, in.tau_lo);
    rc.b_exp = (in.M - 1) * (rc.eta1 + 1) + in.M * (rc.tau_ticks + 1);
    const double b = static_cast<double>(rc.b_exp);
    const double abar_b = std::pow(in.abar, b);
    const double one_minus_xi = -std::expm1(std::log1p(-abar_b) / b);
    rc.xi = 1.0 - one_minus_xi;
    rc.c = 2.0 * (1.0 + 1.0 / abar_b) / (1.0 - abar_b);
    rc.Mhat = M * static_cast<double>(rc.eta + 1);
    const double m_eta = M * static_cast<double>(rc.eta);
    const double sqrt_nrho = std::sqrt(static_cast<double>(in.Nrho));
    const double L = in.Lip;

    rc.pi4 = in.pi4;
    rc.c9 = in.c9;
    rc.beta = in.beta;
    rc.c1 = std::pow(M, m_eta) * rc.c * rc.Mhat;
    rc.pi1 = 2.0 * rc.c1;
    rc.pi2 = rc.pi1 * rc.xi;
    rc.pi3 = rc.pi1 * M * (m_eta + 1.0) * in.beta;
    rc.c2 = rc.c / rc.xi;
    rc.c3 = rc.c2 * std::sqrt(rc.Mhat * in.Nrho);
    rc.c4 = rc.c3 * in.pi4 * (1.0 + 1.0 / rc.xi) * L * in.beta;
    rc.c5 = sqrt_nrho * M * in.pi4 * L * in.beta;
    rc.c6 = std::sqrt(M) / rc.Mhat * (m_eta + 1.0) * in.beta;
    rc.c7 = 2.0 + in.pi4 - in.beta * L;
    rc.c8 = 1.0 - in.beta * L;
    rc.c10 = ((2.0 + in.pi4) * rc.pi1 * M + std::sqrt(M) / rc.Mhat) * (m_eta + 1.0) / in.c9;
    rc.c11 = rc.pi1 * M * (m_eta + 1.0);
    rc.c12 = rc.c3 * in.pi4 * in.pi4 * (1.0 / rc.xi + 1.0 / (rc.xi * rc.xi)) * sqrt_nrho * M;
    rc.c13 = M * in.pi4 * (rc.c3 * (1.0 + 1.0 / rc.xi) + sqrt_nrho);
    rc.c14 = 1.0 - in.beta * in.theta;
    rc.script_L = (rc.c11 + rc.c10 * L) * (rc.c12 + rc.c13);

    rc.theta_minus_c9 = in.theta - in.c9;
    rc.beta2 = one_minus_xi * one_minus_xi / rc.script_L;
    // sqrt(L + 4k(1-xi)) - sqrt(L) written without cancellation.
    const double k = rc.theta_minus_c9;
    const double root = 2.0 * one_minus_xi / (std::sqrt(rc.script_L + 4.0 * k * one_minus_xi) + std::sqrt(rc.script_L));
    rc.beta1 = root * root;
    rc.one_minus_xi = one_minus_xi;
    // beta1 / beta2 = 1 / q^2 with q = (1 + sqrt(1 + e)) / 2 and e = 4k(1-xi)/L.
    const double e = 4.0 * k * one_minus_xi / rc.script_L;
    const double q_minus_1 = e / (2.0 * (std::sqrt(1.0 + e) + 1.0));
    const double q = 1.0 + q_minus_1;
    rc.beta_gap = rc.beta2 * q_minus_1 * (q + 1.0) / (q * q);

    if (!(in.theta > 0.0)) {
        rc.reason = "NoCertificate: theta = 0 (coupling matrix rank deficient)";
        return rc;
    }
    if (!(in.c9 > 0.0 && in.c9 < in.theta)) {
        rc.reason = "NoCertificate: c9 must satisfy 0 < c9 < theta";
        return rc;
    }
    if (!(in.pi4 > 1.0)) {
        rc.reason = "NoCertificate: pi4 must exceed 1";
        return rc;
    }
    if (!std::isfinite(rc.script_L) || !(rc.beta2 > 0.0)) {
        rc.reason = "NoCertificate: constant chain overflowed";
        return rc;
    }
    if (!(in.beta > 0.0 && in.beta < rc.beta2)) {
        rc.reason = "NoCertificate: step size outside (0, beta2)";
        return rc;
    }
    if (in.beta <= rc.beta1) {
        rc.delta = rc.delta_branch_small(in.beta);
        rc.one_minus_delta = rc.gap_branch_small(in.beta);
    } else {
        rc.delta = rc.delta_branch_large(in.beta);
        rc.one_minus_delta = rc.gap_branch_large(in.beta, rc.beta2 - in.beta);
    }
    rc.valid = true;
    return rc;
}

} // namespace apdg

#endif // APDG_APDG_HPP
