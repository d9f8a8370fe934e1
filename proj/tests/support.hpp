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
// Shared fixtures and hand-rolled random generators for the test suites.
#ifndef APDG_TESTS_SUPPORT_HPP
#define APDG_TESTS_SUPPORT_HPP

#include "apdg/config.hpp"
#include "apdg/dmpc.hpp"

#include <memory>
#include <random>
#include <string>
#include <vector>

namespace apdg::testing {

inline std::string source_path(const std::string& rel) { return std::string(APDG_SOURCE_DIR) + "/" + rel; }

inline DmpcConfig watertank_config() { return load_config(source_path("configs/watertank.cfg")); }

/// Seeded generator for property tests.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

    Vector vector(int n, double lo, double hi) {
        Vector v(n);
        for (int i = 0; i < n; ++i) v(i) = uniform(lo, hi);
        return v;
    }
    Matrix matrix(int r, int c, double lo, double hi) {
        Matrix m(r, c);
        for (int i = 0; i < r; ++i) {
            for (int j = 0; j < c; ++j) m(i, j) = uniform(lo, hi);
        }
        return m;
    }
    /// Symmetric positive definite with eigenvalues at least `floor`.
    Matrix spd(int n, double floor = 0.5) {
        const Matrix L = matrix(n, n, -1.0, 1.0);
        return L * L.transpose() + floor * Matrix::Identity(n, n);
    }
    /// Uniform point of a bounded polytope by rejection from its bounding box.
    Vector point_in(const Polytope& P, const Vector& lo, const Vector& hi, int max_tries = 100000) {
        for (int k = 0; k < max_tries; ++k) {
            Vector x(lo.size());
            for (int i = 0; i < lo.size(); ++i) x(i) = uniform(lo(i), hi(i));
            if (P.contains(x, 0.0)) return x;
        }
        return Vector::Zero(lo.size());
    }

    std::mt19937_64& engine() { return rng_; }

private:
    std::mt19937_64 rng_;
};

/// Scalar plant x+ = a x + u with |u| <= ubound, |x| <= xbound and coupling row Dg = 1.
inline LtiSubsystem scalar_plant(double a, double ubound = 1.0, double xbound = 10.0, double q = 1.0, double r = 1.0) {
    LtiSubsystem s;
    s.A = Matrix::Constant(1, 1, a);
    s.B = Matrix::Constant(1, 1, 1.0);
    s.Q = Matrix::Constant(1, 1, q);
    s.R = Matrix::Constant(1, 1, r);
    s.X = Polytope::box(Vector::Constant(1, -xbound), Vector::Constant(1, xbound));
    s.U = Polytope::box(Vector::Constant(1, -ubound), Vector::Constant(1, ubound));
    s.Cg = Matrix::Zero(1, 1);
    s.Dg = Matrix::Constant(1, 1, 1.0);
    return s;
}

/**
 * Three scalar subsystems whose shared budget sum_i u_i <= b binds, so the
 * optimal multiplier is strictly positive. Box inputs only, no terminal rows.
 */
struct Toy {
    std::vector<LocalProblem> problems;
    Digraph graph;
};

inline Toy active_toy(int N = 2, double budget = 0.3) {
    Toy toy;
    const double as[] = {0.9, 1.1, 0.7};
    const double xs[] = {-1.0, -0.6, -1.4};
    const int M = 3;
    Vector b = Vector::Constant(N, budget);
    for (int i = 0; i < M; ++i) {
        const LtiSubsystem sys = scalar_plant(as[i]);
        auto cp = std::make_shared<CondensedProblem>(condense(sys, N));
        Matrix G(2 * N, N);
        G << Matrix::Identity(N, N), -Matrix::Identity(N, N);
        LocalProblem p{cp, Polytope(G, Vector::Ones(2 * N)), Vector::Constant(1, xs[i]), b, M, {}};
        toy.problems.push_back(std::move(p));
    }
    toy.graph = make_digraph(M, {{0, 1}, {1, 2}, {2, 0}, {0, 2}});
    return toy;
}

} // namespace apdg::testing

#endif // APDG_TESTS_SUPPORT_HPP
