#include "hptmpc/lp.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "hptmpc/errors.hpp"

namespace hptmpc::lp {

const char* to_string(Status status) {
    switch (status) {
        case Status::Optimal: return "optimal";
        case Status::Infeasible: return "infeasible";
        case Status::Unbounded: return "unbounded";
        case Status::SolverFailure: return "solver_failure";
    }
    return "unknown";
}

int Problem::add_var(double lower, double upper, double cost) {
    if (lower > upper) throw Error(ErrorKind::InvalidInput, "variable lower bound exceeds upper bound");
    cost_.push_back(cost);
    lower_.push_back(lower);
    upper_.push_back(upper);
    return static_cast<int>(cost_.size()) - 1;
}

void Problem::set_bounds(int var, double lower, double upper) {
    if (lower > upper) throw Error(ErrorKind::InvalidInput, "variable lower bound exceeds upper bound");
    lower_.at(var) = lower;
    upper_.at(var) = upper;
}

void Problem::add_row(std::vector<Term> terms, Sense sense, double rhs) {
    // Merge duplicate variables so backends can assume unique column entries.
    std::sort(terms.begin(), terms.end(), [](const Term& a, const Term& b) { return a.var < b.var; });
    std::vector<Term> merged;
    merged.reserve(terms.size());
    for (const Term& t : terms) {
        if (t.var < 0 || t.var >= num_vars()) throw Error(ErrorKind::InvalidInput, "row references unknown variable");
        if (!merged.empty() && merged.back().var == t.var) {
            merged.back().coef += t.coef;
        } else {
            merged.push_back(t);
        }
    }
    std::erase_if(merged, [](const Term& t) { return t.coef == 0.0; });
    rows_.push_back(Row{std::move(merged), sense, rhs});
}

std::size_t Problem::num_nonzeros() const {
    std::size_t nnz = 0;
    for (const Row& r : rows_) nnz += r.terms.size();
    return nnz;
}

double Problem::objective(std::span<const double> x) const {
    double v = 0.0;
    for (std::size_t j = 0; j < cost_.size(); ++j) v += cost_[j] * x[j];
    return v;
}

double Problem::max_violation(std::span<const double> x) const {
    double worst = 0.0;
    for (const Row& r : rows_) {
        double lhs = 0.0;
        for (const Term& t : r.terms) lhs += t.coef * x[t.var];
        switch (r.sense) {
            case Sense::LessEqual: worst = std::max(worst, lhs - r.rhs); break;
            case Sense::GreaterEqual: worst = std::max(worst, r.rhs - lhs); break;
            case Sense::Equal: worst = std::max(worst, std::abs(lhs - r.rhs)); break;
        }
    }
    for (std::size_t j = 0; j < cost_.size(); ++j) {
        worst = std::max(worst, lower_[j] - x[j]);
        worst = std::max(worst, x[j] - upper_[j]);
    }
    return worst;
}

void Problem::write_text(std::ostream& os) const {
    os << "vars " << num_vars() << " rows " << num_rows() << "\n";
    os << "min";
    for (int j = 0; j < num_vars(); ++j) {
        if (cost_[j] != 0.0) os << " x" << j << ":" << cost_[j];
    }
    os << "\n";
    for (int j = 0; j < num_vars(); ++j) {
        if (std::isfinite(lower_[j]) || std::isfinite(upper_[j])) {
            os << "bound x" << j << " " << lower_[j] << " " << upper_[j] << "\n";
        }
    }
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        const Row& r = rows_[i];
        const char* s = r.sense == Sense::LessEqual ? "<=" : (r.sense == Sense::Equal ? "=" : ">=");
        os << "r" << i << " " << s << " " << r.rhs << " :";
        for (const Term& t : r.terms) os << " x" << t.var << ":" << t.coef;
        os << "\n";
    }
}

FeasibilityResult phase_one(const Problem& problem, const Solver& solver) {
    Problem p1;
    const int n = problem.num_vars();
    for (int j = 0; j < n; ++j) p1.add_var();
    const int t = p1.add_var(-kInf, kInf, 1.0);

    auto add_relaxed = [&](std::vector<Term> terms, double rhs) {
        double scale = 0.0;
        for (const Term& term : terms) scale = std::max(scale, std::abs(term.coef));
        if (scale == 0.0) scale = 1.0;
        for (Term& term : terms) term.coef /= scale;
        terms.push_back({t, -1.0});
        p1.add_le(std::move(terms), rhs / scale);
    };
    auto negated = [](const std::vector<Term>& terms) {
        std::vector<Term> out(terms);
        for (Term& term : out) term.coef = -term.coef;
        return out;
    };

    for (const Row& r : problem.rows()) {
        if (r.terms.empty()) continue;
        if (r.sense != Sense::GreaterEqual) add_relaxed(r.terms, r.rhs);
        if (r.sense != Sense::LessEqual) add_relaxed(negated(r.terms), -r.rhs);
    }
    for (int j = 0; j < n; ++j) {
        if (std::isfinite(problem.upper()[j])) add_relaxed({{j, 1.0}}, problem.upper()[j]);
        if (std::isfinite(problem.lower()[j])) add_relaxed({{j, -1.0}}, -problem.lower()[j]);
    }
    p1.add_le({{t, -1.0}}, 1.0);

    FeasibilityResult out;
    // Constant rows cannot be relaxed through x; check them directly.
    double constant_violation = 0.0;
    for (const Row& r : problem.rows()) {
        if (!r.terms.empty()) continue;
        if (r.sense != Sense::GreaterEqual) constant_violation = std::max(constant_violation, -r.rhs);
        if (r.sense != Sense::LessEqual) constant_violation = std::max(constant_violation, r.rhs);
    }

    Solution sol = solver.solve(p1);
    out.status = sol.status;
    if (sol.status != Status::Optimal) return out;
    out.violation = std::max(sol.x[t], constant_violation);
    out.x.assign(sol.x.begin(), sol.x.begin() + n);
    return out;
}

}  // namespace hptmpc::lp
