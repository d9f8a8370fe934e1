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
#ifndef APDG_QP_HPP
#define APDG_QP_HPP

#include "apdg/common.hpp"
#include "apdg/model.hpp"
#include "apdg/polytope.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <span>
#include <vector>

namespace apdg {

struct QpOptions {
    double kkt_tol = 1e-8;
    double feas_tol = 1e-9;
    long max_iter = 100000;
};

struct QpSolution {
    Vector u;
    Vector multipliers; ///< one per row of the feasible polytope, >= 0
    double objective = 0.0;
    std::vector<int> active;
    long iterations = 0;
    double kkt_residual = 0.0;
};

namespace detail {

inline void drop_active(std::vector<int>& active, std::vector<double>& mult, int row) {
    const auto it = std::find(active.begin(), active.end(), row);
    const auto pos = it - active.begin();
    active.erase(it);
    mult.erase(mult.begin() + pos);
}

} // namespace detail

/**
 * Minimizes u'W u + q'u subject to G u <= h for W positive definite.
 *
 * Dual active-set method (Goldfarb-Idnani): starts from the unconstrained
 * minimizer and adds the most violated row until the iterate is primal
 * feasible, keeping multipliers nonnegative throughout. The final active set
 * is re-solved as an equality-constrained KKT system to polish the result.
 */
inline QpSolution solve_qp(const Matrix& W, const Vector& q, const Polytope& feas, const QpOptions& opts = {}) {
    const int n = static_cast<int>(W.rows());
    require_dims(W.cols() == n && q.size() == n && feas.dim() == n, "solve_qp: dimension mismatch");

    const Matrix hess = W + W.transpose(); // 2W for symmetric W
    Eigen::LLT<Matrix> llt(hess);
    if (llt.info() != Eigen::Success) {
        throw Error(ErrorCode::DimensionMismatch, "solve_qp: Hessian is not positive definite");
    }
    const Matrix hinv = llt.solve(Matrix::Identity(n, n));
    const Matrix& G = feas.G;
    const Vector& h = feas.h;
    const int rows = feas.rows();

    Vector u = -hinv * q;
    std::vector<int> active;
    std::vector<double> mult;
    long iter = 0;

    auto violation_tol = [&](int j) { return 1e-12 * (1.0 + std::abs(h(j))); };

    while (true) {
        int p = -1;
        double worst = 0.0;
        const Vector slack = h - G * u;
        for (int j = 0; j < rows; ++j) {
            if (slack(j) < -violation_tol(j) && slack(j) < worst &&
                std::find(active.begin(), active.end(), j) == active.end()) {
                worst = slack(j);
                p = j;
            }
        }
        if (p < 0) {
            break;
        }
        double mult_p = 0.0;
        while (true) {
            if (++iter > opts.max_iter) {
                throw Error(ErrorCode::MaxIter, "solve_qp: active-set iteration limit reached");
            }
            const Vector normal = -G.row(p).transpose();
            const Vector hn = hinv * normal;
            Vector z = hn;
            Vector r;
            if (!active.empty()) {
                Matrix N(n, static_cast<int>(active.size()));
                for (std::size_t k = 0; k < active.size(); ++k) {
                    N.col(k) = -G.row(active[k]).transpose();
                }
                const Matrix hN = hinv * N;
                const Matrix S = N.transpose() * hN;
                r = S.ldlt().solve(N.transpose() * hn);
                z -= hN * r;
            }

            double t1 = std::numeric_limits<double>::infinity();
            int leaving = -1;
            for (int k = 0; k < r.size(); ++k) {
                if (r(k) > 1e-14) {
                    const double ratio = mult[k] / r(k);
                    if (ratio < t1) {
                        t1 = ratio;
                        leaving = active[k];
                    }
                }
            }
            const double zn = z.dot(normal);
            const double cur_slack = h(p) - G.row(p).dot(u);
            double t2 = std::numeric_limits<double>::infinity();
            if (zn > 1e-12 * std::max(normal.dot(hn), 1e-300)) {
                t2 = -cur_slack / zn;
            }

            if (!std::isfinite(t1) && !std::isfinite(t2)) {
                throw Error(ErrorCode::Infeasible, "solve_qp: feasible set is empty");
            }
            if (!std::isfinite(t2)) {
                for (int k = 0; k < r.size(); ++k) {
                    mult[k] -= t1 * r(k);
                }
                mult_p += t1;
                detail::drop_active(active, mult, leaving);
                continue;
            }
            const double t = std::min(t1, t2);
            u += t * z;
            for (int k = 0; k < r.size(); ++k) {
                mult[k] -= t * r(k);
            }
            mult_p += t;
            if (t2 <= t1) {
                active.push_back(p);
                mult.push_back(mult_p);
                break;
            }
            detail::drop_active(active, mult, leaving);
        }
    }

    // Polish: solve the KKT system of the final active set.
    const int na = static_cast<int>(active.size());
    if (na > 0) {
        Matrix kkt = Matrix::Zero(n + na, n + na);
        Vector rhs(n + na);
        kkt.topLeftCorner(n, n) = hess;
        rhs.head(n) = -q;
        for (int k = 0; k < na; ++k) {
            kkt.block(0, n + k, n, 1) = G.row(active[k]).transpose();
            kkt.block(n + k, 0, 1, n) = G.row(active[k]);
            rhs(n + k) = h(active[k]);
        }
        const Vector sol = kkt.fullPivLu().solve(rhs);
        const Vector u_pol = sol.head(n);
        const Vector m_pol = sol.tail(na);
        if (sol.allFinite() && (m_pol.array() >= -opts.kkt_tol).all() &&
            feas.max_violation(u_pol) <= std::max(feas.max_violation(u), opts.feas_tol)) {
            u = u_pol;
            for (int k = 0; k < na; ++k) {
                mult[k] = std::max(0.0, m_pol(k));
            }
        }
    }

    QpSolution out;
    out.u = u;
    out.multipliers = Vector::Zero(rows);
    for (int k = 0; k < na; ++k) {
        out.multipliers(active[k]) = mult[k];
    }
    out.active = active;
    out.iterations = iter;
    out.objective = u.dot(W * u) + q.dot(u);
    out.kkt_residual = (hess * u + q + G.transpose() * out.multipliers).cwiseAbs().maxCoeff();
    return out;
}

/// Unique minimizer of u'W u + q'u over `feas`.
inline Vector solve_inner(const Matrix& CostW, const Vector& q, const Polytope& feas, const QpOptions& opts = {}) {
    return solve_qp(CostW, q, feas, opts).u;
}

/**
 * One subsystem's view of the horizon problem at a measured state: the
 * condensed matrices, the feasible input set U_T(x), and the tightened
 * right-hand side shared by all M subsystems.
 */
struct LocalProblem {
    std::shared_ptr<const CondensedProblem> cp;
    Polytope feasible;
    Vector x;
    Vector b_eps;
    int M = 1;
    QpOptions qp;

    int dual_dim() const { return cp->dual_dim(); }
    int input_dim() const { return cp->input_dim(); }

    double cost(const Vector& u) const { return cp->cost(x, u); }
    Vector coupling(const Vector& u) const { return cp->coupling(x, u); }
    Vector share() const { return b_eps / static_cast<double>(M); }

    /// argmax_u { -J(x,u) - (ConsH' lambda)' u } over U_T(x).
    Vector best_response(const Vector& lambda) const {
        const Vector q = 2.0 * cp->CostF * x + cp->ConsH.transpose() * lambda;
        return solve_inner(cp->CostW, q, feasible, qp);
    }

    Vector gradient(const Vector& u) const { return gradient_f(*cp, x, u, b_eps, M); }

    /// f(lambda) = lambda'(b/M - ConsF x) - J(x,u*) - (ConsH' lambda)' u* with u* the best response.
    double dual_value(const Vector& lambda, const Vector& u_star) const {
        return lambda.dot(share() - cp->ConsF * x) - cost(u_star) - (cp->ConsH.transpose() * lambda).dot(u_star);
    }
};

struct CentralizedResult {
    std::vector<Vector> u;
    double J = 0.0;
    Vector lambda; ///< multipliers of the stacked coupling rows
    QpSolution raw;
};

/**
 * Solves min sum_i J_i s.t. u_i in U_T(x_i) and sum_i (ConsF_i x_i + ConsH_i u_i) <= b_eps
 * as one stacked QP. Used as a reference; throws Error{Infeasible} when the
 * state is outside the feasible region.
 */
inline CentralizedResult centralized_solve(std::span<const LocalProblem> problems, const QpOptions& opts = {}) {
    require_dims(!problems.empty(), "centralized_solve: no subsystems");
    const int dual = problems.front().dual_dim();
    int total = 0;
    int local_rows = 0;
    for (const auto& p : problems) {
        require_dims(p.dual_dim() == dual, "centralized_solve: coupling dimension differs between subsystems");
        total += p.input_dim();
        local_rows += p.feasible.rows();
    }
    const Vector& b_eps = problems.front().b_eps;

    Matrix W = Matrix::Zero(total, total);
    Vector q = Vector::Zero(total);
    Matrix G = Matrix::Zero(local_rows + dual, total);
    Vector h = Vector::Zero(local_rows + dual);
    double constant = 0.0;
    Vector coupling_rhs = b_eps;
    int col = 0;
    int row = 0;
    for (const auto& p : problems) {
        const int ni = p.input_dim();
        W.block(col, col, ni, ni) = p.cp->CostW;
        q.segment(col, ni) = 2.0 * p.cp->CostF * p.x;
        constant += p.x.dot(p.cp->CostH * p.x);
        G.block(row, col, p.feasible.rows(), ni) = p.feasible.G;
        h.segment(row, p.feasible.rows()) = p.feasible.h;
        G.block(local_rows, col, dual, ni) = p.cp->ConsH;
        coupling_rhs -= p.cp->ConsF * p.x;
        col += ni;
        row += p.feasible.rows();
    }
    h.tail(dual) = coupling_rhs;

    CentralizedResult out;
    out.raw = solve_qp(W, q, Polytope(G, h), opts);
    col = 0;
    for (const auto& p : problems) {
        out.u.push_back(out.raw.u.segment(col, p.input_dim()));
        col += p.input_dim();
    }
    out.J = out.raw.objective + constant;
    out.lambda = out.raw.multipliers.tail(dual);
    return out;
}

} // namespace apdg

#endif // APDG_QP_HPP
