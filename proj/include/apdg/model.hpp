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
#ifndef APDG_MODEL_HPP
#define APDG_MODEL_HPP

#include "apdg/common.hpp"
#include "apdg/polytope.hpp"

#include <string>
#include <vector>

namespace apdg {

/**
 * One subsystem x+ = A x + B u with stage weights (Q, R), local sets
 * x in X, u in U, and its share Cg x + Dg u of the global constraint
 * sum_i (Cg_i x_i + Dg_i u_i) <= 1.
 */
struct LtiSubsystem {
    Matrix A, B, Q, R;
    Polytope X, U;
    Matrix Cg, Dg;

    int n() const { return static_cast<int>(A.rows()); }
    int m() const { return static_cast<int>(B.cols()); }
    int rho() const { return static_cast<int>(Cg.rows()); }

    /// Throws Error{ConfigInvalid} naming the offending field.
    void validate() const {
        auto fail = [](const std::string& what) { throw Error(ErrorCode::ConfigInvalid, what); };
        if (A.rows() == 0 || A.rows() != A.cols()) fail("A: must be square and nonempty");
        if (B.rows() != A.rows() || B.cols() == 0) fail("B: must have n rows and at least one column");
        if (Q.rows() != n() || Q.cols() != n()) fail("Q: must be n x n");
        if (R.rows() != m() || R.cols() != m()) fail("R: must be m x m");
        if (!is_positive_definite(Q)) fail("Q: must be symmetric positive definite");
        if (!is_positive_definite(R)) fail("R: must be symmetric positive definite");
        if (X.dim() != n()) fail("X: dimension must equal n");
        if (U.dim() != m()) fail("U: dimension must equal m");
        if (X.rows() == 0 || (X.h.array() <= 0.0).any()) fail("X: origin must lie in the interior");
        if (U.rows() == 0 || (U.h.array() <= 0.0).any()) fail("U: origin must lie in the interior");
        if (Cg.cols() != n() || Cg.rows() == 0) fail("Cg: must be rho x n");
        if (Dg.cols() != m() || Dg.rows() != Cg.rows()) fail("Dg: must be rho x m");
    }
};

struct DareSolution {
    Matrix P;
    Matrix K;
    int iterations = 0;
    double residual = 0.0; ///< max-abs DARE residual at P
};

struct DareOptions {
    double tol = 1e-12;
    int max_iter = 100000;
};

/// Right-hand side of the Riccati map: A'PA - A'PB (R + B'PB)^-1 B'PA + Q.
inline Matrix riccati_map(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R, const Matrix& P) {
    const Matrix BtP = B.transpose() * P;
    const Matrix S = R + BtP * B;
    const Matrix gain = S.ldlt().solve(BtP * A);
    Matrix next = A.transpose() * P * A - (A.transpose() * P * B) * gain + Q;
    return 0.5 * (next + next.transpose());
}

inline Matrix lqr_gain(const Matrix& A, const Matrix& B, const Matrix& R, const Matrix& P) {
    const Matrix BtP = B.transpose() * P;
    return -(R + BtP * B).ldlt().solve(BtP * A);
}

/**
 * Solves the discrete algebraic Riccati equation by fixed-point iteration
 * from P = Q and returns P with the LQR gain K = -(R + B'PB)^-1 B'PA.
 *
 * Throws Error{DareNotConverged} if the iteration does not settle or the
 * resulting closed loop A + BK is not Schur stable.
 */
inline DareSolution dare_solve(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                               const DareOptions& opts = {}) {
    require_dims(A.rows() == A.cols() && B.rows() == A.rows() && Q.rows() == A.rows() && Q.cols() == A.rows() &&
                     R.rows() == B.cols() && R.cols() == B.cols(),
                 "dare_solve: inconsistent matrix sizes");
    Matrix P = Q;
    for (int it = 1; it <= opts.max_iter; ++it) {
        Matrix next = riccati_map(A, B, Q, R, P);
        const double change = (next - P).cwiseAbs().maxCoeff();
        P = std::move(next);
        if (!P.allFinite()) {
            break;
        }
        if (change <= opts.tol * std::max(1.0, P.cwiseAbs().maxCoeff())) {
            DareSolution out;
            out.P = P;
            out.K = lqr_gain(A, B, R, P);
            out.iterations = it;
            out.residual = (riccati_map(A, B, Q, R, P) - P).cwiseAbs().maxCoeff();
            if (spectral_radius(A + B * out.K) >= 1.0) {
                throw Error(ErrorCode::DareNotConverged, "dare_solve: closed loop A+BK is not stable");
            }
            return out;
        }
    }
    throw Error(ErrorCode::DareNotConverged,
                "dare_solve: no convergence (pair may be unstabilizable or badly conditioned)");
}

/**
 * Condensed horizon-N data for one subsystem. The predicted trajectory is
 * Abar x + Bbar u, the cost is u'W u + 2u'F x + x'H x, and the stacked
 * global-constraint share is ConsF x + ConsH u.
 */
struct CondensedProblem {
    int N = 0;
    int n = 0;
    int m = 0;
    int rho = 0;
    Matrix A, B;
    Matrix Abar, Bbar;
    Matrix CostW, CostF, CostH;
    Matrix ConsF, ConsH;
    Matrix P, K;
    double mu = 0.0;
    double ell = 0.0;
    double theta = 0.0;
    double Lip = 0.0;
    std::vector<std::string> warnings;

    int dual_dim() const { return N * rho; }
    int input_dim() const { return N * m; }

    double cost(const Vector& x, const Vector& u) const {
        return u.dot(CostW * u) + 2.0 * u.dot(CostF * x) + x.dot(CostH * x);
    }

    /// Stacked global-constraint share ConsF x + ConsH u.
    Vector coupling(const Vector& x, const Vector& u) const { return ConsF * x + ConsH * u; }

    /// Predicted states x_0..x_N stacked.
    Vector predict(const Vector& x, const Vector& u) const { return Abar * x + Bbar * u; }
};

/// Convexity constants of the condensed cost and of the dual function.
inline void compute_convexity_constants(CondensedProblem& cp) {
    const Vector hess = symmetric_eigenvalues(2.0 * cp.CostW);
    cp.mu = hess.minCoeff();
    cp.ell = hess.maxCoeff();
    const Vector hh = symmetric_eigenvalues(cp.ConsH * cp.ConsH.transpose());
    const double top = hh.maxCoeff();
    double bottom = hh.minCoeff();
    if (bottom <= 1e-12 * std::max(1.0, top)) {
        bottom = 0.0;
        cp.warnings.emplace_back("ConsH*ConsH^T is singular: theta = 0, no rate certificate available");
    }
    cp.theta = bottom / cp.ell;
    cp.Lip = top / cp.mu;
}

/// Stacks the horizon for `sys` with terminal weight/gain from the DARE.
inline CondensedProblem condense(const LtiSubsystem& sys, int N, const DareSolution& dare) {
    require_dims(N >= 1, "condense: horizon must be at least 1");
    const int n = sys.n();
    const int m = sys.m();
    const int rho = sys.rho();
    require_dims(dare.P.rows() == n && dare.K.rows() == m && dare.K.cols() == n, "condense: DARE data mismatch");

    CondensedProblem cp;
    cp.N = N;
    cp.n = n;
    cp.m = m;
    cp.rho = rho;
    cp.A = sys.A;
    cp.B = sys.B;
    cp.P = dare.P;
    cp.K = dare.K;

    std::vector<Matrix> powers(N + 1);
    powers[0] = Matrix::Identity(n, n);
    for (int l = 1; l <= N; ++l) {
        powers[l] = sys.A * powers[l - 1];
    }

    cp.Abar = Matrix::Zero((N + 1) * n, n);
    cp.Bbar = Matrix::Zero((N + 1) * n, N * m);
    for (int l = 0; l <= N; ++l) {
        cp.Abar.block(l * n, 0, n, n) = powers[l];
        for (int j = 0; j < l; ++j) {
            cp.Bbar.block(l * n, j * m, n, m) = powers[l - 1 - j] * sys.B;
        }
    }

    Matrix Qbar = Matrix::Zero((N + 1) * n, (N + 1) * n);
    for (int l = 0; l < N; ++l) {
        Qbar.block(l * n, l * n, n, n) = sys.Q;
    }
    Qbar.block(N * n, N * n, n, n) = dare.P;
    Matrix Rbar = Matrix::Zero(N * m, N * m);
    for (int l = 0; l < N; ++l) {
        Rbar.block(l * m, l * m, m, m) = sys.R;
    }

    cp.CostW = cp.Bbar.transpose() * Qbar * cp.Bbar + Rbar;
    cp.CostW = 0.5 * (cp.CostW + cp.CostW.transpose());
    cp.CostF = cp.Bbar.transpose() * Qbar * cp.Abar;
    cp.CostH = cp.Abar.transpose() * Qbar * cp.Abar;

    // Coupling rows only involve x_0..x_{N-1} and u_0..u_{N-1}.
    Matrix Cbar = Matrix::Zero(N * rho, N * n);
    Matrix Dbar = Matrix::Zero(N * rho, N * m);
    for (int l = 0; l < N; ++l) {
        Cbar.block(l * rho, l * n, rho, n) = sys.Cg;
        Dbar.block(l * rho, l * m, rho, m) = sys.Dg;
    }
    cp.ConsF = Cbar * cp.Abar.topRows(N * n);
    cp.ConsH = Cbar * cp.Bbar.topRows(N * n) + Dbar;

    compute_convexity_constants(cp);
    return cp;
}

inline CondensedProblem condense(const LtiSubsystem& sys, int N) {
    return condense(sys, N, dare_solve(sys.A, sys.B, sys.Q, sys.R));
}

/// Local dual gradient -(ConsF x + ConsH u - b_eps / M).
inline Vector gradient_f(const CondensedProblem& cp, const Vector& x, const Vector& u, const Vector& b_eps, int M) {
    require_dims(x.size() == cp.n && u.size() == cp.input_dim() && b_eps.size() == cp.dual_dim(),
                 "gradient_f: dimension mismatch");
    return -(cp.ConsF * x + cp.ConsH * u - b_eps / static_cast<double>(M));
}

/// LQR rollout col(K x, K A_K x, ..., K A_K^{N-1} x).
inline Vector lqr_rollout(const CondensedProblem& cp, const Vector& x) {
    const Matrix AK = cp.A + cp.B * cp.K;
    Vector u(cp.input_dim());
    Vector state = x;
    for (int l = 0; l < cp.N; ++l) {
        u.segment(l * cp.m, cp.m) = cp.K * state;
        state = AK * state;
    }
    return u;
}

} // namespace apdg

#endif // APDG_MODEL_HPP
