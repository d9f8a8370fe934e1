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
#ifndef APDG_COMMON_HPP
#define APDG_COMMON_HPP

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace apdg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class ErrorCode {
    DimensionMismatch,
    DareNotConverged,
    Infeasible,
    Unbounded,
    IterationLimit,
    EmptyTerminalSet,
    MaxIter,
    Frozen,
    NotStronglyConnected,
    IterationCap,
    ConfigInvalid,
    InitialStateInfeasible,
    Parse,
};

inline const char* to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DareNotConverged: return "DareNotConverged";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::Unbounded: return "Unbounded";
    case ErrorCode::IterationLimit: return "IterationLimit";
    case ErrorCode::EmptyTerminalSet: return "EmptyTerminalSet";
    case ErrorCode::MaxIter: return "MaxIter";
    case ErrorCode::Frozen: return "Frozen";
    case ErrorCode::NotStronglyConnected: return "NotStronglyConnected";
    case ErrorCode::IterationCap: return "IterationCap";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::InitialStateInfeasible: return "InitialStateInfeasible";
    case ErrorCode::Parse: return "Parse";
    }
    return "Unknown";
}

/// Library error. `code()` identifies the failure class; `what()` carries
/// "<Code>: <detail>".
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& detail)
        : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code), detail_(detail) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

inline void require_dims(bool ok, const std::string& what) {
    if (!ok) {
        throw Error(ErrorCode::DimensionMismatch, what);
    }
}

// Symmetric eigenvalue helpers (input is symmetrized first).
inline Vector symmetric_eigenvalues(const Matrix& S) {
    const Matrix sym = 0.5 * (S + S.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

inline double lambda_min(const Matrix& S) { return symmetric_eigenvalues(S).minCoeff(); }
inline double lambda_max(const Matrix& S) { return symmetric_eigenvalues(S).maxCoeff(); }

inline double spectral_radius(const Matrix& A) {
    if (A.size() == 0) {
        return 0.0;
    }
    Eigen::EigenSolver<Matrix> es(A, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline bool is_symmetric(const Matrix& S, double tol = 1e-10) {
    if (S.rows() != S.cols()) {
        return false;
    }
    if (S.size() == 0) {
        return true;
    }
    return S.rows() == S.cols() && (S - S.transpose()).cwiseAbs().maxCoeff() <= tol * std::max(1.0, S.cwiseAbs().maxCoeff());
}

inline bool is_positive_definite(const Matrix& S) {
    if (!is_symmetric(S)) {
        return false;
    }
    Eigen::LLT<Matrix> llt(S);
    return llt.info() == Eigen::Success;
}

} // namespace apdg

#endif // APDG_COMMON_HPP
