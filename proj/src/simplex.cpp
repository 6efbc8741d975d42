#include <algorithm>
#include <cmath>

#include "hptmpc/errors.hpp"
#include "hptmpc/lp.hpp"

namespace hptmpc::lp {
namespace {

// Original variable j = offset + sum(sign * y_col) over its standard-form columns.
struct VarMap {
    double offset = 0.0;
    int col_pos = -1;
    int col_neg = -1;
    double sign_pos = 1.0;
};

class Tableau {
public:
    Tableau(int rows, int cols) : m_(rows), n_(cols), a_(static_cast<std::size_t>(rows + 1) * (cols + 1), 0.0) {}

    double& at(int i, int j) { return a_[static_cast<std::size_t>(i) * (n_ + 1) + j]; }
    double at(int i, int j) const { return a_[static_cast<std::size_t>(i) * (n_ + 1) + j]; }
    double& rhs(int i) { return at(i, n_); }
    double& obj(int j) { return at(m_, j); }
    int rows() const { return m_; }
    int cols() const { return n_; }

    void pivot(int r, int c) {
        const double p = at(r, c);
        double* prow = &a_[static_cast<std::size_t>(r) * (n_ + 1)];
        for (int j = 0; j <= n_; ++j) prow[j] /= p;
        prow[c] = 1.0;
        for (int i = 0; i <= m_; ++i) {
            if (i == r) continue;
            double* row = &a_[static_cast<std::size_t>(i) * (n_ + 1)];
            const double f = row[c];
            if (f == 0.0) continue;
            for (int j = 0; j <= n_; ++j) row[j] -= f * prow[j];
            row[c] = 0.0;
        }
    }

private:
    int m_;
    int n_;
    std::vector<double> a_;
};

enum class LoopResult { Optimal, Unbounded, IterationLimit };

// Dantzig pricing (most negative reduced cost); after a run of degenerate
// pivots switch to Bland's rule (lowest-index improving column, ties in the
// ratio test broken by lowest basic variable index) until the objective
// moves again.
LoopResult run_simplex(Tableau& t, std::vector<int>& basis, const std::vector<char>& allowed,
                     const SimplexOptions& opt, int& iterations) {
    const int m = t.rows();
    const int n = t.cols();
    constexpr int kDegenerateRun = 50;
    int degenerate = 0;
    while (iterations < opt.max_iterations) {
        const bool bland = degenerate >= kDegenerateRun;
        int enter = -1;
        double most = -opt.optimality_tol;
        for (int j = 0; j < n; ++j) {
            if (!allowed[j] || t.obj(j) >= most) continue;
            enter = j;
            if (bland) break;
            most = t.obj(j);
        }
        if (enter < 0) return LoopResult::Optimal;
        int leave = -1;
        double best = 0.0;
        for (int i = 0; i < m; ++i) {
            const double a = t.at(i, enter);
            if (a <= opt.pivot_tol) continue;
            const double ratio = t.rhs(i) / a;
            const double tie = 1e-12 * (1.0 + std::abs(best));
            if (leave < 0 || ratio < best - tie) {
                leave = i;
                best = ratio;
            } else if (ratio <= best + tie) {
                // Prefer large pivots among ties (stability); Bland's lowest
                // basic index only while breaking a degenerate run.
                const double b = t.at(leave, enter);
                if (bland ? basis[i] < basis[leave] : a > b) {
                    leave = i;
                    best = std::min(best, ratio);
                }
            }
        }
        if (leave < 0) return LoopResult::Unbounded;
        const double before = t.obj(n);
        t.pivot(leave, enter);
        basis[leave] = enter;
        ++iterations;
        if (std::abs(t.obj(n) - before) > 1e-12 * (1.0 + std::abs(before))) degenerate = 0;
        else ++degenerate;
    }
    return LoopResult::IterationLimit;
}

}  // namespace

Solution DenseSimplex::solve(const Problem& problem) const {
    const int n0 = problem.num_vars();
    std::vector<VarMap> vmap(n0);
    int ncols = 0;
    struct BoundRow {
        int col;
        double ub;
    };
    std::vector<BoundRow> bound_rows;
    for (int j = 0; j < n0; ++j) {
        const double lo = problem.lower()[j];
        const double hi = problem.upper()[j];
        if (std::isfinite(lo)) {
            vmap[j] = {lo, ncols++, -1, 1.0};
            if (std::isfinite(hi)) bound_rows.push_back({vmap[j].col_pos, hi - lo});
        } else if (std::isfinite(hi)) {
            vmap[j] = {hi, ncols++, -1, -1.0};
        } else {
            vmap[j].col_pos = ncols++;
            vmap[j].col_neg = ncols++;
        }
    }

    struct StdRow {
        std::vector<std::pair<int, double>> coefs;
        Sense sense;
        double rhs;
    };
    std::vector<StdRow> rows;
    rows.reserve(problem.rows().size() + bound_rows.size());
    for (const Row& r : problem.rows()) {
        StdRow sr{{}, r.sense, r.rhs};
        double scale = 0.0;
        for (const Term& t : r.terms) {
            const VarMap& vm = vmap[t.var];
            sr.rhs -= t.coef * vm.offset;
            sr.coefs.push_back({vm.col_pos, t.coef * vm.sign_pos});
            if (vm.col_neg >= 0) sr.coefs.push_back({vm.col_neg, -t.coef});
            scale = std::max(scale, std::abs(t.coef));
        }
        if (scale > 0.0) {
            for (auto& [c, v] : sr.coefs) v /= scale;
            sr.rhs /= scale;
        }
        rows.push_back(std::move(sr));
    }
    for (const BoundRow& b : bound_rows) rows.push_back({{{b.col, 1.0}}, Sense::LessEqual, b.ub});

    // Flip rows to nonnegative right-hand sides, then count slacks/artificials.
    for (StdRow& r : rows) {
        if (r.rhs < 0.0) {
            r.rhs = -r.rhs;
            for (auto& [c, v] : r.coefs) v = -v;
            if (r.sense == Sense::LessEqual) r.sense = Sense::GreaterEqual;
            else if (r.sense == Sense::GreaterEqual) r.sense = Sense::LessEqual;
        }
    }
    // Relax every <= row by a tiny, row-dependent amount: the synthesis LPs
    // are massively degenerate (many homogeneous rows), and degenerate
    // pivoting in a dense tableau loses accuracy fast. The basic solution is
    // recomputed from the unperturbed right-hand side at the end.
    std::vector<double> b_orig(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        b_orig[i] = rows[i].rhs;
        if (rows[i].sense != Sense::LessEqual) continue;
        const double u = static_cast<double>((i * 2654435761u) % 1000u) / 1000.0;
        rows[i].rhs += options_.perturbation * (1.0 + u) * (1.0 + rows[i].rhs);
    }
    const int m = static_cast<int>(rows.size());
    int nslack = 0;
    int nart = 0;
    for (const StdRow& r : rows) {
        if (r.sense != Sense::Equal) ++nslack;
        if (r.sense != Sense::LessEqual) ++nart;
    }
    const int total = ncols + nslack + nart;
    Tableau t(m, total);
    std::vector<int> basis(m, -1);
    std::vector<int> initial(m, -1);  // identity column of each row: B^-1 at the end
    std::vector<char> is_art(total, 0);
    int slack = ncols;
    int art = ncols + nslack;
    for (int i = 0; i < m; ++i) {
        const StdRow& r = rows[i];
        for (const auto& [c, v] : r.coefs) t.at(i, c) += v;
        t.rhs(i) = r.rhs;
        if (r.sense == Sense::LessEqual) {
            t.at(i, slack) = 1.0;
            basis[i] = slack++;
            initial[i] = basis[i];
        } else {
            if (r.sense == Sense::GreaterEqual) t.at(i, slack++) = -1.0;
            t.at(i, art) = 1.0;
            is_art[art] = 1;
            basis[i] = art++;
            initial[i] = basis[i];
        }
    }

    Solution sol;
    int iterations = 0;
    std::vector<char> allowed(total, 1);

    if (nart > 0) {
        for (int j = 0; j <= total; ++j) t.obj(j) = 0.0;
        for (int i = 0; i < m; ++i) {
            if (!is_art[basis[i]]) continue;
            for (int j = 0; j <= total; ++j) t.obj(j) -= t.at(i, j);
        }
        for (int i = 0; i < m; ++i) t.obj(basis[i]) = 0.0;
        const LoopResult res = run_simplex(t, basis, allowed, options_, iterations);
        if (res == LoopResult::IterationLimit) {
            sol.status = Status::SolverFailure;
            sol.iterations = iterations;
            return sol;
        }
        const double infeas = -t.obj(total);
        if (infeas > options_.feasibility_tol) {
            sol.status = Status::Infeasible;
            sol.iterations = iterations;
            return sol;
        }
        // Drive remaining zero-level artificials out of the basis.
        for (int i = 0; i < m; ++i) {
            if (!is_art[basis[i]]) continue;
            int col = -1;
            double best = options_.pivot_tol;
            for (int j = 0; j < total; ++j) {
                if (is_art[j]) continue;
                if (std::abs(t.at(i, j)) > best) {
                    best = std::abs(t.at(i, j));
                    col = j;
                }
            }
            if (col >= 0) {
                t.pivot(i, col);
                basis[i] = col;
            }
            // Otherwise the row is redundant; its artificial stays basic at zero.
        }
        for (int j = 0; j < total; ++j) {
            if (is_art[j]) allowed[j] = 0;
        }
    }

    // Phase 2 objective row in standard-form columns.
    std::vector<double> cstd(total, 0.0);
    for (int j = 0; j < n0; ++j) {
        const double c = problem.cost()[j];
        const VarMap& vm = vmap[j];
        cstd[vm.col_pos] += c * vm.sign_pos;
        if (vm.col_neg >= 0) cstd[vm.col_neg] -= c;
    }
    for (int j = 0; j < total; ++j) t.obj(j) = cstd[j];
    t.obj(total) = 0.0;
    for (int i = 0; i < m; ++i) {
        const double cb = cstd[basis[i]];
        if (cb == 0.0) continue;
        for (int j = 0; j <= total; ++j) t.obj(j) -= cb * t.at(i, j);
    }
    for (int i = 0; i < m; ++i) t.obj(basis[i]) = 0.0;

    const LoopResult res = run_simplex(t, basis, allowed, options_, iterations);
    sol.iterations = iterations;
    if (res == LoopResult::IterationLimit) {
        sol.status = Status::SolverFailure;
        return sol;
    }
    if (res == LoopResult::Unbounded) {
        sol.status = Status::Unbounded;
        return sol;
    }

    std::vector<double> y(total, 0.0);
    for (int i = 0; i < m; ++i) y[basis[i]] = t.rhs(i);
    if (options_.perturbation > 0.0) {
        std::vector<double> exact(m, 0.0);
        bool ok = true;
        for (int i = 0; i < m && ok; ++i) {
            double v = 0.0;
            for (int k = 0; k < m; ++k) v += t.at(i, initial[k]) * b_orig[k];
            if (v < -options_.feasibility_tol) ok = false;
            exact[i] = std::max(0.0, v);
        }
        // Keep the perturbed point if this basis is not feasible for the
        // original data (it is within the perturbation anyway).
        if (ok) {
            for (int i = 0; i < m; ++i) y[basis[i]] = exact[i];
        }
    }
    sol.x.resize(n0);
    for (int j = 0; j < n0; ++j) {
        const VarMap& vm = vmap[j];
        double v = vm.offset + vm.sign_pos * y[vm.col_pos];
        if (vm.col_neg >= 0) v -= y[vm.col_neg];
        sol.x[j] = v;
    }
    sol.objective = problem.objective(sol.x);
    sol.status = Status::Optimal;
    return sol;
}

}  // namespace hptmpc::lp
