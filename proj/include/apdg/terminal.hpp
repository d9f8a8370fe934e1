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
#ifndef APDG_TERMINAL_HPP
#define APDG_TERMINAL_HPP

#include "apdg/model.hpp"
#include "apdg/polytope.hpp"

namespace apdg {

/// sigma = 1/M - (N+1) gamma, the per-subsystem budget of the global constraint inside the terminal set.
inline double terminal_budget(int M, int N, double gamma) {
    return 1.0 / static_cast<double>(M) - static_cast<double>(N + 1) * gamma;
}

/**
 * Terminal set for one subsystem: the maximal A_K-invariant subset of
 * X ∩ {K x in U} ∩ {(Cg + Dg K) x <= sigma 1}.
 *
 * The result lies inside the MPI set, is invariant under A_K, and keeps the
 * subsystem's closed-loop share of the global constraint below sigma.
 * Throws Error{EmptyTerminalSet} if the set is empty or misses the origin.
 */
inline Polytope terminal_set(const LtiSubsystem& sys, const Matrix& K, double sigma, int max_iter = 500) {
    require_dims(K.rows() == sys.m() && K.cols() == sys.n(), "terminal_set: gain dimension mismatch");
    if (!(sigma > 0.0)) {
        throw Error(ErrorCode::EmptyTerminalSet, "terminal_set: sigma must be positive (gamma too large)");
    }
    const Matrix AK = sys.A + sys.B * K;
    const Matrix coupling = sys.Cg + sys.Dg * K;
    const Polytope budget(coupling, Vector::Constant(coupling.rows(), sigma));
    const Polytope base = sys.X.intersect(sys.U.preimage(K)).intersect(budget);
    Polytope result = invariant_subset(AK, base, max_iter);
    if (is_empty(result) || !result.contains(Vector::Zero(sys.n()), 0.0)) {
        throw Error(ErrorCode::EmptyTerminalSet, "terminal_set: tightened invariant set is empty");
    }
    return result;
}

} // namespace apdg

#endif // APDG_TERMINAL_HPP
