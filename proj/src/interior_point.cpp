#include <Eigen/OrderingMethods>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>
#include <limits>

#include "hptmpc/errors.hpp"
#include "hptmpc/lp.hpp"

namespace hptmpc::lp {
namespace {

using SpMat = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
using Vec = Eigen::VectorXd;

// G x <= h in compressed row storage, rows scaled to unit infinity-norm.
struct InequalityForm {
    int n = 0;
    int m = 0;
    std::vector<int> row_ptr{0};
    std::vector<int> col;
    std::vector<double> val;
    std::vector<double> h;

    void push(const std::vector<Term>& terms, double sign, double rhs) {
        double scale = 0.0;
        for (const Term& t : terms) scale = std::max(scale, std::abs(t.coef));
        for (const Term& t : terms) {
            col.push_back(t.var);
            val.push_back(sign * t.coef / scale);
        }
        h.push_back(sign * rhs / scale);
        row_ptr.push_back(static_cast<int>(col.size()));
        ++m;
    }

    void multiply(const Vec& x, Vec& out) const {
        out.resize(m);
        for (int i = 0; i < m; ++i) {
            double acc = 0.0;
            for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k) acc += val[k] * x[col[k]];
            out[i] = acc;
        }
    }

    void multiply_transpose(const Vec& y, Vec& out) const {
        out.setZero(n);
        for (int i = 0; i < m; ++i) {
            const double yi = y[i];
            if (yi == 0.0) continue;
            for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k) out[col[k]] += val[k] * yi;
        }
    }
};

// Assembles G' diag(w) G into a fixed lower-triangular sparsity pattern.
class NormalMatrix {
public:
    explicit NormalMatrix(const InequalityForm& g) : g_(g) {
        std::vector<std::vector<int>> cols(g.n);
        for (int j = 0; j < g.n; ++j) cols[j].push_back(j);
        for (int i = 0; i < g.m; ++i) {
            for (int a = g.row_ptr[i]; a < g.row_ptr[i + 1]; ++a) {
                for (int b = g.row_ptr[i]; b < g.row_ptr[i + 1]; ++b) {
                    if (g.col[a] >= g.col[b]) cols[g.col[b]].push_back(g.col[a]);
                }
            }
        }
        std::vector<Eigen::Triplet<double, int>> trips;
        for (int j = 0; j < g.n; ++j) {
            auto& c = cols[j];
            std::sort(c.begin(), c.end());
            c.erase(std::unique(c.begin(), c.end()), c.end());
            for (int r : c) trips.emplace_back(r, j, 0.0);
        }
        mat_.resize(g.n, g.n);
        mat_.setFromTriplets(trips.begin(), trips.end());
        mat_.makeCompressed();

        const int* outer = mat_.outerIndexPtr();
        const int* inner = mat_.innerIndexPtr();
        auto locate = [&](int r, int c) {
            const int* first = inner + outer[c];
            const int* last = inner + outer[c + 1];
            return static_cast<int>(std::lower_bound(first, last, r) - inner);
        };
        diag_pos_.resize(g.n);
        for (int j = 0; j < g.n; ++j) diag_pos_[j] = locate(j, j);
        for (int i = 0; i < g.m; ++i) {
            for (int a = g.row_ptr[i]; a < g.row_ptr[i + 1]; ++a) {
                for (int b = g.row_ptr[i]; b < g.row_ptr[i + 1]; ++b) {
                    if (g.col[a] >= g.col[b]) pos_.push_back(locate(g.col[a], g.col[b]));
                }
            }
        }
    }

    const SpMat& assemble(const Vec& w, double reg) {
        double* v = mat_.valuePtr();
        std::fill(v, v + mat_.nonZeros(), 0.0);
        std::size_t p = 0;
        for (int i = 0; i < g_.m; ++i) {
            const double wi = w[i];
            for (int a = g_.row_ptr[i]; a < g_.row_ptr[i + 1]; ++a) {
                for (int b = g_.row_ptr[i]; b < g_.row_ptr[i + 1]; ++b) {
                    if (g_.col[a] >= g_.col[b]) v[pos_[p++]] += wi * g_.val[a] * g_.val[b];
                }
            }
        }
        reg_.resize(g_.n);
        for (int j = 0; j < g_.n; ++j) {
            reg_[j] = reg * (1.0 + v[diag_pos_[j]]);
            v[diag_pos_[j]] += reg_[j];
        }
        return mat_;
    }

    // y = M x using the lower-triangular storage, without the regularization
    // (refinement then converges to the unperturbed system).
    void multiply(const Vec& x, Vec& y) const {
        y.setZero(g_.n);
        for (int j = 0; j < g_.n; ++j) y[j] -= reg_[j] * x[j];
        for (int c = 0; c < g_.n; ++c) {
            for (SpMat::InnerIterator it(mat_, c); it; ++it) {
                const int r = it.row();
                y[r] += it.value() * x[c];
                if (r != c) y[c] += it.value() * x[r];
            }
        }
    }

private:
    const InequalityForm& g_;
    SpMat mat_;
    std::vector<int> pos_;
    std::vector<int> diag_pos_;
    std::vector<double> reg_;
};

double max_step(const Vec& v, const Vec& dv) {
    double alpha = 1.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (dv[i] < 0.0) alpha = std::min(alpha, -v[i] / dv[i]);
    }
    return alpha;
}

}  // namespace

Solution InteriorPoint::solve(const Problem& problem) const {
    InequalityForm g;
    g.n = problem.num_vars();
    Solution sol;
    for (const Row& r : problem.rows()) {
        if (r.sense == Sense::Equal) {
            throw Error(ErrorKind::InvalidInput, "interior-point backend does not accept equality rows");
        }
        const double sign = r.sense == Sense::LessEqual ? 1.0 : -1.0;
        if (r.terms.empty()) {
            if (sign * r.rhs < -1e-12) {
                sol.status = Status::Infeasible;
                return sol;
            }
            continue;
        }
        g.push(r.terms, sign, r.rhs);
    }
    for (int j = 0; j < g.n; ++j) {
        if (std::isfinite(problem.upper()[j])) g.push({{j, 1.0}}, 1.0, problem.upper()[j]);
        if (std::isfinite(problem.lower()[j])) g.push({{j, 1.0}}, -1.0, problem.lower()[j]);
    }
    const int n = g.n;
    const int m = g.m;
    Vec c(n);
    for (int j = 0; j < n; ++j) c[j] = problem.cost()[j];
    Vec h = Eigen::Map<const Vec>(g.h.data(), m);

    if (m == 0) {
        // Unconstrained: optimal only for a zero objective.
        sol.x.assign(n, 0.0);
        sol.status = c.lpNorm<Eigen::Infinity>() == 0.0 ? Status::Optimal : Status::Unbounded;
        return sol;
    }

    NormalMatrix normal(g);
    Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt;
    bool analyzed = false;

    auto factor = [&](const Vec& w) {
        const SpMat& M = normal.assemble(w, options_.regularization);
        if (!analyzed) {
            ldlt.analyzePattern(M);
            analyzed = true;
        }
        ldlt.factorize(M);
        return ldlt.info() == Eigen::Success;
    };
    auto solve_refined = [&](const Vec& rhs) {
        Vec x = ldlt.solve(rhs);
        Vec r(n);
        for (int it = 0; it < 2; ++it) {
            normal.multiply(x, r);
            r = rhs - r;
            x += ldlt.solve(r);
        }
        return x;
    };

    // Starting point: least-squares x, then shift slacks and multipliers into
    // the positive orthant.
    Vec x(n), s(m), z(m), tmp(m), gx(m), gtz(n);
    if (!factor(Vec::Ones(m))) return sol;
    {
        Vec gth(n);
        g.multiply_transpose(h, gth);
        x = solve_refined(gth);
        g.multiply(x, gx);
        s = h - gx;
        // z0 = -G (G'G)^{-1} c: least-norm dual residual.
        const Vec y = solve_refined(c);
        g.multiply(y, z);
        z = -z;
        const double sa = -s.minCoeff();
        if (sa >= 0.0) s.array() += 1.0 + sa;
        const double za = -z.minCoeff();
        if (za >= 0.0) z.array() += 1.0 + za;
    }

    const double hnorm = 1.0 + h.lpNorm<Eigen::Infinity>();
    const double cnorm = 1.0 + c.lpNorm<Eigen::Infinity>();
    Vec rp(m), rd(n), rc(m), dx(n), ds(m), dz(m), w(m), rhs(n);

    auto direction = [&](const Vec& rcomp) {
        // M dx = -rd - G' [(-rc + z.*rp)./s]
        tmp = ((-rcomp).array() + z.array() * rp.array()) / s.array();
        g.multiply_transpose(tmp, rhs);
        rhs = -rd - rhs;
        dx = solve_refined(rhs);
        g.multiply(dx, gx);
        ds = -rp - gx;
        dz = ((-rcomp).array() - z.array() * ds.array()) / s.array();
    };

    // Best iterate seen so far; used when progress stalls near the accuracy
    // floor of the normal equations.
    // The relaxed merit lets the dual residual sit at stall_dual_tol: once
    // mu is tiny the normal equations cannot reduce it further, while the
    // primal point and objective are already accurate.
    double best_merit = std::numeric_limits<double>::infinity();
    double best_relaxed = std::numeric_limits<double>::infinity();
    double stalled_ref = std::numeric_limits<double>::infinity();
    int stalled_for = 0;
    Vec best_x = x;
    Vec best_relaxed_x = x;
    const double dual_weight = options_.stall_tol / options_.stall_dual_tol;
    // Primal iterate frozen: feasible, complementarity gone and the objective
    // no longer moving while only the dual residual jitters.
    double frozen_obj = std::numeric_limits<double>::quiet_NaN();
    int frozen_for = 0;
    auto finish_stalled = [&]() {
        const Vec* pick = best_merit <= options_.stall_tol     ? &best_x
                          : best_relaxed <= options_.stall_tol ? &best_relaxed_x
                                                               : nullptr;
        if (pick) {
            sol.status = Status::Optimal;
            sol.x.assign(pick->data(), pick->data() + n);
            sol.objective = problem.objective(sol.x);
        }
        return sol;
    };

    for (int iter = 0; iter < options_.max_iterations; ++iter) {
        sol.iterations = iter;
        g.multiply(x, gx);
        rp = gx + s - h;
        g.multiply_transpose(z, gtz);
        rd = gtz + c;
        const double mu = s.dot(z) / m;
        const double pobj = c.dot(x);
        const double dobj = -h.dot(z);
        const double pres = rp.lpNorm<Eigen::Infinity>() / hnorm;
        const double dres = rd.lpNorm<Eigen::Infinity>() / cnorm;
        const double gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj));
        const double merit = std::max({pres, dres, gap});
        const double relaxed = std::max({pres, gap, dual_weight * dres});
        if (merit < best_merit) {
            best_merit = merit;
            best_x = x;
        }
        if (relaxed < best_relaxed) {
            best_relaxed = relaxed;
            best_relaxed_x = x;
        }
        if (merit <= options_.tol) {
            sol.status = Status::Optimal;
            break;
        }
        // Farkas certificate: z >= 0, G'z ~ 0, h'z < 0 (the dual objective
        // runs off to +infinity while the primal residual stalls).
        {
            const double hz = h.dot(z);
            if (hz < 0.0 && pres > options_.tol && gtz.lpNorm<Eigen::Infinity>() <= 1e-9 * std::abs(hz)) {
                sol.status = Status::Infeasible;
                return sol;
            }
        }
        if (pres <= options_.stall_tol && mu <= 1e-14 && dres <= options_.frozen_dual_tol &&
            std::abs(pobj - frozen_obj) <= 1e-12 * (1.0 + std::abs(pobj))) {
            if (++frozen_for >= options_.frozen_iterations) {
                sol.status = Status::Optimal;
                break;
            }
        } else {
            frozen_for = 0;
        }
        frozen_obj = pobj;
        // Accuracy floor of the normal equations: no progress for a while.
        if (relaxed < 0.5 * stalled_ref) {
            stalled_ref = relaxed;
            stalled_for = 0;
        } else if (++stalled_for >= 6 && best_relaxed <= options_.stall_tol) {
            return finish_stalled();
        }
        if (!std::isfinite(mu) || !std::isfinite(pobj)) return finish_stalled();

        w = z.array() / s.array();
        if (!factor(w)) return finish_stalled();

        // Predictor.
        rc = s.array() * z.array();
        direction(rc);
        const double ap = max_step(s, ds);
        const double ad = max_step(z, dz);
        const double mu_aff = (s + ap * ds).dot(z + ad * dz) / m;
        const double sigma = std::pow(mu_aff / mu, 3.0);

        // Corrector.
        rc = s.array() * z.array() + ds.array() * dz.array() - sigma * mu;
        direction(rc);
        const double alpha_p = std::min(1.0, options_.step_fraction * max_step(s, ds));
        const double alpha_d = std::min(1.0, options_.step_fraction * max_step(z, dz));
        x += alpha_p * dx;
        s += alpha_p * ds;
        z += alpha_d * dz;
    }

    if (sol.status != Status::Optimal) return finish_stalled();
    sol.x.assign(x.data(), x.data() + n);
    sol.objective = problem.objective(sol.x);
    return sol;
}

}  // namespace hptmpc::lp
