#pragma once

// Constrained LPV state-space model
//   x+ = A(theta) x + B(theta) u,   A(theta) = A0 + sum_i theta_i A_i  (same for B)
// with state, input and scheduling polytopes.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "hptmpc/geometry.hpp"

namespace hptmpc {

struct LpvModel {
    std::vector<Matrix> A;  // A[0] = A0, A[i] multiplies theta_i
    std::vector<Matrix> B;
    Polytope X;
    Polytope U;
    Polytope Theta;
    /// (n_theta1, n_theta2): B depends on the first block only, controllers on
    /// the second only.
    std::optional<std::pair<int, int>> partition;

    int nx() const { return static_cast<int>(A.front().rows()); }
    int nu() const { return static_cast<int>(B.front().cols()); }
    int ntheta() const { return static_cast<int>(A.size()) - 1; }
    /// All B_i (i >= 1) are zero.
    bool b_constant() const;

    /// Throws OutOfSchedulingSet unless theta is in Theta (within feas_tol).
    std::pair<Matrix, Matrix> eval_AB(const Vector& theta, const Tolerances& tol = {}) const;
    /// Unchecked affine evaluations.
    Matrix A_at(const Vector& theta) const;
    Matrix B_at(const Vector& theta) const;
    /// A(theta) x + B(theta) u.
    Vector image_point(const Vector& x, const Vector& theta, const Vector& u) const;

    /// Structural checks (dimensions, proper X and U, bounded Theta). Throws
    /// InvalidInput / NotProper.
    void validate() const;
};

LpvModel model_from_json(const nlohmann::json& j);
nlohmann::json model_to_json(const LpvModel& m);
LpvModel load_model(const std::string& path);

/// Polytope JSON or the shorthand {"box": [...]} where each entry is either a
/// symmetric limit c (meaning [-c, c]) or a pair [lo, hi].
Polytope polytope_or_box(const nlohmann::json& j);

/// Whether a convex synthesis LP exists for the requested controller class:
/// B constant, or theta-independent controls, or a declared partition that
/// separates B's scheduling dependence from the controller's. Throws
/// NonConvexSynthesis listing the offending indices otherwise.
void validate_implementability(const LpvModel& m, bool theta_dependent_controls);

/// Indices i >= 1 with B_i != 0.
std::vector<int> b_dependent_indices(const LpvModel& m);

// Small JSON helpers shared by the loaders.
Matrix matrix_from_json(const nlohmann::json& j);
nlohmann::json matrix_to_json(const Matrix& M);
Vector vector_from_json(const nlohmann::json& j);
nlohmann::json vector_to_json(const Vector& v);

}  // namespace hptmpc
