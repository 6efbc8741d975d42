#pragma once

// Linear programming layer. Problems are assembled once in a solver-neutral
// form and handed to a backend:
//   * DenseSimplex  - two-phase tableau simplex with Bland's rule. Exact
//     vertex solutions; meant for the many small geometric LPs.
//   * InteriorPoint - Mehrotra predictor-corrector on the inequality form
//     with a sparse normal-equations factorization; meant for the tube
//     synthesis LPs (10^3 columns, 10^4..10^5 rows).

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace hptmpc::lp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Sense : std::uint8_t { LessEqual, Equal, GreaterEqual };

enum class Status : std::uint8_t { Optimal, Infeasible, Unbounded, SolverFailure };

const char* to_string(Status status);

struct Term {
    int var;
    double coef;
};

struct Row {
    std::vector<Term> terms;
    Sense sense;
    double rhs;
};

/// min c'x  s.t.  rows, lower <= x <= upper.
class Problem {
public:
    int add_var(double lower = -kInf, double upper = kInf, double cost = 0.0);
    void set_cost(int var, double cost) { cost_.at(var) = cost; }
    void set_bounds(int var, double lower, double upper);

    void add_row(std::vector<Term> terms, Sense sense, double rhs);
    void add_le(std::vector<Term> terms, double rhs) { add_row(std::move(terms), Sense::LessEqual, rhs); }
    void add_eq(std::vector<Term> terms, double rhs) { add_row(std::move(terms), Sense::Equal, rhs); }
    void add_ge(std::vector<Term> terms, double rhs) { add_row(std::move(terms), Sense::GreaterEqual, rhs); }

    int num_vars() const { return static_cast<int>(cost_.size()); }
    int num_rows() const { return static_cast<int>(rows_.size()); }
    std::size_t num_nonzeros() const;

    const std::vector<Row>& rows() const { return rows_; }
    const std::vector<double>& cost() const { return cost_; }
    const std::vector<double>& lower() const { return lower_; }
    const std::vector<double>& upper() const { return upper_; }

    double objective(std::span<const double> x) const;
    /// Largest violation of any row or bound at x (0 when feasible).
    double max_violation(std::span<const double> x) const;

    /// Plain row/column text dump, one row per line:
    ///   r<i> <sense> <rhs> : <var>:<coef> ...
    void write_text(std::ostream& os) const;

private:
    std::vector<double> cost_;
    std::vector<double> lower_;
    std::vector<double> upper_;
    std::vector<Row> rows_;
};

struct Solution {
    Status status = Status::SolverFailure;
    std::vector<double> x;
    double objective = 0.0;
    int iterations = 0;
};

class Solver {
public:
    virtual ~Solver() = default;
    virtual Solution solve(const Problem& problem) const = 0;
    virtual std::string name() const = 0;
};

struct SimplexOptions {
    double pivot_tol = 1e-10;
    double optimality_tol = 1e-10;
    double feasibility_tol = 1e-9;
    /// Relative relaxation of <= rows against degenerate pivoting (0 = off).
    double perturbation = 1e-10;
    int max_iterations = 200000;
};

class DenseSimplex final : public Solver {
public:
    explicit DenseSimplex(SimplexOptions options = {}) : options_(options) {}
    Solution solve(const Problem& problem) const override;
    std::string name() const override { return "dense-simplex"; }

private:
    SimplexOptions options_;
};

struct InteriorPointOptions {
    double tol = 1e-10;
    /// Accepted accuracy when iterations stall before reaching tol.
    double stall_tol = 1e-8;
    /// Dual residual tolerated at a stall (primal residual and gap must
    /// still meet stall_tol).
    double stall_dual_tol = 1e-6;
    /// Accept a primal iterate that is feasible, complementary and has not
    /// moved for this many iterations while the dual residual stays below
    /// frozen_dual_tol (the dual drifts once mu reaches the rounding floor).
    int frozen_iterations = 6;
    double frozen_dual_tol = 1e-4;
    int max_iterations = 120;
    double step_fraction = 0.995;
    double regularization = 1e-12;
};

/// Equality rows are not supported by this backend (throws InvalidInput).
class InteriorPoint final : public Solver {
public:
    explicit InteriorPoint(InteriorPointOptions options = {}) : options_(options) {}
    Solution solve(const Problem& problem) const override;
    std::string name() const override { return "interior-point"; }

private:
    InteriorPointOptions options_;
};

/// Phase-1 feasibility LP: min t s.t. row_i(x) - t <= rhs_i (rows normalized to
/// unit infinity-norm), t >= -1. Returns the optimal t (<= 0 means feasible)
/// together with the point found.
struct FeasibilityResult {
    Status status = Status::SolverFailure;
    double violation = 0.0;
    std::vector<double> x;
};

FeasibilityResult phase_one(const Problem& problem, const Solver& solver);

}  // namespace hptmpc::lp
