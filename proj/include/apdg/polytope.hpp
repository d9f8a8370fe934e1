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
#ifndef APDG_POLYTOPE_HPP
#define APDG_POLYTOPE_HPP

#include "apdg/common.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace apdg {

/**
 * Halfspace polytope {x : G x <= h}.
 *
 * A row whose G entries are all zero is vacuous when its h entry is
 * nonnegative and makes the set empty otherwise.
 */
struct Polytope {
    Matrix G;
    Vector h;

    Polytope() = default;
    Polytope(Matrix g, Vector rhs) : G(std::move(g)), h(std::move(rhs)) {
        require_dims(G.rows() == h.size(), "Polytope: G rows must match h size");
    }

    int dim() const { return static_cast<int>(G.cols()); }
    int rows() const { return static_cast<int>(G.rows()); }

    /// Axis-aligned box lo <= x <= hi.
    static Polytope box(const Vector& lo, const Vector& hi) {
        require_dims(lo.size() == hi.size(), "Polytope::box: bound sizes differ");
        const auto n = lo.size();
        Matrix g(2 * n, n);
        g << Matrix::Identity(n, n), -Matrix::Identity(n, n);
        Vector rhs(2 * n);
        rhs << hi, -lo;
        return {g, rhs};
    }

    /// The whole space, represented by one vacuous row.
    static Polytope whole_space(int n) { return {Matrix::Zero(1, n), Vector::Ones(1)}; }

    bool contains(const Vector& x, double tol = 0.0) const {
        require_dims(x.size() == dim(), "Polytope::contains: dimension mismatch");
        if (rows() == 0) {
            return true;
        }
        return ((G * x - h).array() <= tol).all();
    }

    /// Largest constraint violation max_i (G x - h)_i (negative when strictly inside).
    double max_violation(const Vector& x) const {
        if (rows() == 0) {
            return -std::numeric_limits<double>::infinity();
        }
        return (G * x - h).maxCoeff();
    }

    Polytope intersect(const Polytope& other) const {
        require_dims(other.dim() == dim(), "Polytope::intersect: dimension mismatch");
        Matrix g(rows() + other.rows(), dim());
        g << G, other.G;
        Vector rhs(rows() + other.rows());
        rhs << h, other.h;
        return {g, rhs};
    }

    /// Pre-image {x : M x in this}.
    Polytope preimage(const Matrix& M) const {
        require_dims(M.rows() == dim(), "Polytope::preimage: dimension mismatch");
        return {G * M, h};
    }

    /// {x : G x <= h} with every h entry shifted by `delta`.
    Polytope shifted(double delta) const { return {G, h.array() + delta}; }
};

inline bool contains(const Polytope& P, const Vector& x, double tol) { return P.contains(x, tol); }

struct LpResult {
    Vector x;
    double value = 0.0;
};

namespace detail {

// Dense tableau simplex. Rows hold [A | b]; `obj` holds reduced costs
// (c_j - c_B^T B^-1 A_j) and, in the last slot, the negated objective value.
class Tableau {
public:
    Tableau(Matrix body, std::vector<int> basis) : t_(std::move(body)), basis_(std::move(basis)) {}

    int rows() const { return static_cast<int>(t_.rows()); }
    int cols() const { return static_cast<int>(t_.cols()) - 1; }
    double rhs(int i) const { return t_(i, cols()); }
    const std::vector<int>& basis() const { return basis_; }
    double at(int i, int j) const { return t_(i, j); }

    void set_objective(const Vector& c) {
        obj_ = Vector::Zero(cols() + 1);
        obj_.head(cols()) = c;
        for (int i = 0; i < rows(); ++i) {
            const double cb = c(basis_[i]);
            if (cb != 0.0) {
                obj_ -= cb * t_.row(i).transpose();
            }
        }
    }

    double objective_value() const { return -obj_(cols()); }

    void pivot(int r, int c) {
        t_.row(r) /= t_(r, c);
        for (int i = 0; i < rows(); ++i) {
            if (i != r && t_(i, c) != 0.0) {
                t_.row(i) -= t_(i, c) * t_.row(r);
            }
        }
        if (obj_(c) != 0.0) {
            obj_ -= obj_(c) * t_.row(r).transpose();
        }
        basis_[r] = c;
    }

    enum class Status { Optimal, Unbounded };

    // Maximize with Bland's rule over columns [0, allowed_cols).
    Status maximize(int allowed_cols, long max_pivots) {
        constexpr double kReducedTol = 1e-11;
        constexpr double kPivotTol = 1e-11;
        for (long it = 0; it < max_pivots; ++it) {
            int enter = -1;
            for (int j = 0; j < allowed_cols; ++j) {
                if (obj_(j) > kReducedTol) {
                    enter = j;
                    break;
                }
            }
            if (enter < 0) {
                return Status::Optimal;
            }
            int leave = -1;
            double best = std::numeric_limits<double>::infinity();
            for (int i = 0; i < rows(); ++i) {
                const double a = t_(i, enter);
                if (a > kPivotTol) {
                    const double ratio = std::max(0.0, rhs(i)) / a;
                    if (ratio < best - 1e-14 ||
                        (std::abs(ratio - best) <= 1e-14 && leave >= 0 && basis_[i] < basis_[leave])) {
                        best = ratio;
                        leave = i;
                    }
                }
            }
            if (leave < 0) {
                return Status::Unbounded;
            }
            pivot(leave, enter);
        }
        throw Error(ErrorCode::IterationLimit, "simplex pivot limit reached");
    }

private:
    Matrix t_;
    std::vector<int> basis_;
    Vector obj_;
};

} // namespace detail

/**
 * Maximize c^T x over P with a dense two-phase simplex (Bland's rule).
 *
 * Free variables are split as x = p - q. Throws Error{Infeasible} when P is
 * empty and Error{Unbounded} when the objective is unbounded above.
 */
inline LpResult lp_solve(const Vector& c, const Polytope& P) {
    require_dims(c.size() == P.dim(), "lp_solve: objective dimension mismatch");
    const int n = P.dim();
    const int r = P.rows();
    if (r == 0) {
        if (c.isZero(0.0)) {
            return {Vector::Zero(n), 0.0};
        }
        throw Error(ErrorCode::Unbounded, "lp_solve: objective unbounded over the whole space");
    }

    std::vector<int> neg_rows;
    for (int i = 0; i < r; ++i) {
        if (P.h(i) < 0.0) {
            neg_rows.push_back(i);
        }
    }
    const int n_art = static_cast<int>(neg_rows.size());
    const int n_struct = 2 * n + r;
    const int n_cols = n_struct + n_art;

    Matrix body = Matrix::Zero(r, n_cols + 1);
    std::vector<int> basis(r);
    int art = 0;
    for (int i = 0; i < r; ++i) {
        const double sign = P.h(i) < 0.0 ? -1.0 : 1.0;
        body.block(i, 0, 1, n) = sign * P.G.row(i);
        body.block(i, n, 1, n) = -sign * P.G.row(i);
        body(i, 2 * n + i) = sign;
        body(i, n_cols) = sign * P.h(i);
        if (sign < 0.0) {
            body(i, n_struct + art) = 1.0;
            basis[i] = n_struct + art;
            ++art;
        } else {
            basis[i] = 2 * n + i;
        }
    }

    detail::Tableau tab(std::move(body), std::move(basis));
    const long max_pivots = 50L * (n_cols + r) + 1000;

    if (n_art > 0) {
        Vector phase1 = Vector::Zero(n_cols);
        phase1.tail(n_art).setConstant(-1.0);
        tab.set_objective(phase1);
        tab.maximize(n_cols, max_pivots);
        const double scale = std::max(1.0, P.h.cwiseAbs().maxCoeff());
        if (tab.objective_value() < -1e-9 * scale) {
            throw Error(ErrorCode::Infeasible, "lp_solve: polytope is empty");
        }
        // Drive zero-level artificials out of the basis where possible.
        for (int i = 0; i < tab.rows(); ++i) {
            if (tab.basis()[i] >= n_struct) {
                for (int j = 0; j < n_struct; ++j) {
                    if (std::abs(tab.at(i, j)) > 1e-9) {
                        tab.pivot(i, j);
                        break;
                    }
                }
            }
        }
    }

    Vector phase2 = Vector::Zero(n_cols);
    phase2.head(n) = c;
    phase2.segment(n, n) = -c;
    tab.set_objective(phase2);
    if (tab.maximize(n_struct, max_pivots) == detail::Tableau::Status::Unbounded) {
        throw Error(ErrorCode::Unbounded, "lp_solve: objective unbounded above");
    }

    Vector x = Vector::Zero(n);
    for (int i = 0; i < tab.rows(); ++i) {
        const int b = tab.basis()[i];
        if (b < n) {
            x(b) += tab.rhs(i);
        } else if (b < 2 * n) {
            x(b - n) -= tab.rhs(i);
        }
    }
    return {x, c.dot(x)};
}

inline bool is_empty(const Polytope& P) {
    try {
        lp_solve(Vector::Zero(P.dim()), P);
        return false;
    } catch (const Error& e) {
        if (e.code() == ErrorCode::Infeasible) {
            return true;
        }
        throw;
    }
}

/// Support value max g^T x over P; +inf when unbounded.
inline double support(const Polytope& P, const Vector& g) {
    try {
        return lp_solve(g, P).value;
    } catch (const Error& e) {
        if (e.code() == ErrorCode::Unbounded) {
            return std::numeric_limits<double>::infinity();
        }
        throw;
    }
}

/// P subset of Q, tested row by row of Q against the support of P.
inline bool is_subset(const Polytope& P, const Polytope& Q, double tol = 1e-9) {
    require_dims(P.dim() == Q.dim(), "is_subset: dimension mismatch");
    if (is_empty(P)) {
        return true;
    }
    for (int i = 0; i < Q.rows(); ++i) {
        if (support(P, Q.G.row(i).transpose()) > Q.h(i) + tol) {
            return false;
        }
    }
    return true;
}

/**
 * Drop every row that does not change the set. Each row is tested by
 * maximizing it over the remaining rows with its own bound relaxed by one.
 * Empty polytopes are returned unchanged.
 */
inline Polytope remove_redundant(const Polytope& P, double tol = 1e-9) {
    if (P.rows() == 0 || is_empty(P)) {
        return P;
    }
    std::vector<int> keep;
    for (int i = 0; i < P.rows(); ++i) {
        const bool zero_row = P.G.row(i).cwiseAbs().maxCoeff() == 0.0;
        if (!(zero_row && P.h(i) >= 0.0)) {
            keep.push_back(i);
        }
    }
    std::vector<bool> alive(P.rows(), false);
    for (int i : keep) {
        alive[i] = true;
    }
    for (int i : keep) {
        std::vector<int> others;
        for (int j : keep) {
            if (alive[j] && j != i) {
                others.push_back(j);
            }
        }
        Matrix g(static_cast<int>(others.size()) + 1, P.dim());
        Vector rhs(static_cast<int>(others.size()) + 1);
        for (std::size_t k = 0; k < others.size(); ++k) {
            g.row(k) = P.G.row(others[k]);
            rhs(k) = P.h(others[k]);
        }
        g.row(others.size()) = P.G.row(i);
        rhs(others.size()) = P.h(i) + 1.0;
        const double value = support(Polytope(g, rhs), P.G.row(i).transpose());
        if (value <= P.h(i) + tol) {
            alive[i] = false;
        }
    }
    int count = 0;
    for (int i : keep) {
        count += alive[i] ? 1 : 0;
    }
    if (count == 0) {
        return Polytope::whole_space(P.dim());
    }
    Matrix g(count, P.dim());
    Vector rhs(count);
    int k = 0;
    for (int i : keep) {
        if (alive[i]) {
            g.row(k) = P.G.row(i);
            rhs(k) = P.h(i);
            ++k;
        }
    }
    return {g, rhs};
}

/**
 * Maximal positively invariant subset of `base` under x+ = A x.
 *
 * Adds the rows of base mapped through A^k for k = 1, 2, ... and stops at
 * the first k whose rows are all implied by the current set. Throws
 * Error{IterationLimit} if that does not happen within `max_iter` steps.
 */
inline Polytope invariant_subset(const Matrix& A, const Polytope& base, int max_iter = 500, double tol = 1e-9) {
    require_dims(A.rows() == A.cols() && A.rows() == base.dim(), "invariant_subset: dimension mismatch");
    Polytope set = remove_redundant(base, tol);
    if (is_empty(set)) {
        return set;
    }
    Matrix power = A;
    for (int k = 1; k <= max_iter; ++k) {
        const Matrix mapped = base.G * power;
        bool grew = false;
        for (int i = 0; i < mapped.rows(); ++i) {
            const Vector g = mapped.row(i).transpose();
            if (g.cwiseAbs().maxCoeff() == 0.0 && base.h(i) >= 0.0) {
                continue;
            }
            if (support(set, g) > base.h(i) + tol) {
                set = set.intersect(Polytope(g.transpose(), Vector::Constant(1, base.h(i))));
                grew = true;
            }
        }
        if (!grew) {
            return remove_redundant(set, tol);
        }
        power = A * power;
    }
    throw Error(ErrorCode::IterationLimit, "invariant_subset: determinedness index exceeds cap");
}

/// Maximal positively invariant set for x+ = A_K x inside {x in X, K x in U}.
inline Polytope mpi_set(const Matrix& A_K, const Polytope& X, const Polytope& U, const Matrix& K, int max_iter = 500) {
    require_dims(K.cols() == X.dim() && K.rows() == U.dim(), "mpi_set: gain dimension mismatch");
    const Polytope base = X.intersect(U.preimage(K));
    return invariant_subset(A_K, base, max_iter);
}

} // namespace apdg

#endif // APDG_POLYTOPE_HPP
