#pragma once

// Terminal ingredients: a robust LTI terminal gain, the lambda-contractive
// terminal set it admits, the terminal cost F(X) = lbar/(1-lambda) * Psi_Xf(X),
// and the maximal controlled contractive set used as a DOA reference.

#include <optional>
#include <vector>

#include "json.hpp"
#include "hptmpc/model.hpp"

namespace hptmpc {

struct TerminalData {
    Polytope Xf;  // both representations, proper
    Matrix Kf;    // n_u x n_x, u = Kf x
    double lambda = 0.0;
    double lbar = 0.0;
    double cost_coeff = 0.0;  // lbar / (1 - lambda)
    int c = 1;
    Matrix Q;
    Matrix R;
    Norm norm = Norm::Inf;
};

/// Discrete-time LQR gain (u = K x) for (A, B) with weights (Q, R), by
/// Riccati fixed-point iteration. Throws RiccatiDivergence after 10^4 steps.
Matrix lqr_gain(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R);

/// LQR on the scheduling-vertex-averaged pair with unit weights.
Matrix default_gain(const LpvModel& m);

/// LQR on the averaged pair with Q = I and R = r * I.
Matrix averaged_lqr_gain(const LpvModel& m, double r);

/// Largest spectral radius of A(theta_j) + B(theta_j) K over scheduling vertices.
double worst_vertex_radius(const LpvModel& m, const Matrix& K);

/// Largest U-gauge of K v over the vertices v of X: how much of the input
/// range the gain spends on the state constraint set.
double input_budget(const LpvModel& m, const Matrix& K);

/// Gain minimizing worst_vertex_radius subject to input_budget <= budget
/// (penalized Nelder-Mead, started from the averaged-LQR gains). Larger
/// budgets buy faster contraction at the price of a smaller admissible set.
Matrix budgeted_gain(const LpvModel& m, double budget);

struct SetIterationOptions {
    int max_iter = 200;
    double hausdorff_tol = 1e-7;
    /// Preimage rows cutting the iterate by less than prune_tol * h_r are
    /// skipped; keeps near-duplicate facets out of the vertex enumeration.
    double prune_tol = 1e-8;
    /// Iterates with more facets count as non-convergent (slow iterations
    /// with gains barely faster than lambda otherwise run for very long).
    int max_facets = 256;
    Tolerances tol{};
};

/// Largest lambda-contractive set for the closed loop A(theta) + B(theta) Kf
/// inside X and {x : Kf x in U}. Throws NotContractive when the iterates
/// collapse, NoConvergence after max_iter iterations.
Polytope max_contractive_set(const LpvModel& m, const Matrix& Kf, double lambda, const SetIterationOptions& opt = {});

/// Largest controlled lambda-contractive set: a single input per state works
/// for every scheduling vertex. Projection by vertex enumeration of the
/// lifted (x, u) polytope.
Polytope max_controlled_contractive_set(const LpvModel& m, double lambda, const SetIterationOptions& opt = {});

/// max over Xf vertices of ||Q v|| + ||R Kf v||.
double lbar(const Polytope& Xf, const Matrix& Kf, const Matrix& Q, const Matrix& R, Norm norm);

/// Largest gauge((A_j + B_j Kf) v, Xf) over vertices v and scheduling
/// vertices j.
double contraction_factor(const LpvModel& m, const Polytope& Xf, const Matrix& Kf);

/// Throws NotContractive unless TerminalData passes its certificate: Xf in X,
/// Kf Xf in U and contraction_factor <= lambda + contract_tol.
void verify_terminal(const LpvModel& m, const TerminalData& td, const Tolerances& tol = {});

/// cost_coeff * Psi_Xf(X)^c. Throws TerminalViolation when X is not in Xf.
double terminal_cost(const Polytope& X, const TerminalData& td, const Tolerances& tol = {});

struct TerminalOptions {
    double lambda = 0.95;
    std::optional<Matrix> gain;  // user-supplied Kf
    Matrix Q;                    // stage weights (default identity)
    Matrix R;
    Norm norm = Norm::Inf;
    /// R weights tried for the averaged-LQR gain when no gain is given.
    std::vector<double> lqr_weights{1.0, 0.5, 0.3, 0.1, 0.03, 0.01};
    /// Input budgets tried with budgeted_gain.
    std::vector<double> input_budgets{2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 12.0};
    /// Candidates whose Xf has more vertices are skipped; q_f drives the
    /// size of every synthesis LP.
    int max_vertices = 64;
    /// When no candidate certifies at lambda, bisect for the smallest
    /// lambda' in (lambda, 0.999] that the default gain certifies.
    bool relax_lambda = true;
    SetIterationOptions iteration{};
};

/// Full terminal computation. Without a user gain, the averaged-LQR and
/// budgeted candidates are tried and the certified one with the largest Xf
/// volume (within max_vertices) wins.
TerminalData compute_terminal(const LpvModel& m, const TerminalOptions& opt);

void to_json(nlohmann::json& j, const TerminalData& td);
void from_json(const nlohmann::json& j, TerminalData& td);

}  // namespace hptmpc
