#include "hptmpc/terminal.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "hptmpc/errors.hpp"

namespace hptmpc {

Matrix lqr_gain(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R) {
    Matrix P = Q;
    for (int it = 0; it < 10000; ++it) {
        const Matrix S = R + B.transpose() * P * B;
        const Matrix K = S.ldlt().solve(B.transpose() * P * A);
        Matrix Pn = Q + A.transpose() * P * A - A.transpose() * P * B * K;
        Pn = 0.5 * (Pn + Pn.transpose());
        if (!Pn.allFinite()) break;
        const double diff = (Pn - P).lpNorm<Eigen::Infinity>();
        P = std::move(Pn);
        if (diff <= 1e-12 * (1.0 + P.lpNorm<Eigen::Infinity>())) {
            return -(R + B.transpose() * P * B).ldlt().solve(B.transpose() * P * A);
        }
    }
    throw Error(ErrorKind::RiccatiDivergence, "Riccati iteration did not converge in 10^4 steps");
}

namespace {

std::pair<Matrix, Matrix> averaged_pair(const LpvModel& m) {
    const Matrix& V = m.Theta.vertices();
    Matrix A = Matrix::Zero(m.nx(), m.nx());
    Matrix B = Matrix::Zero(m.nx(), m.nu());
    for (Eigen::Index j = 0; j < V.cols(); ++j) {
        A += m.A_at(V.col(j));
        B += m.B_at(V.col(j));
    }
    return {A / static_cast<double>(V.cols()), B / static_cast<double>(V.cols())};
}

std::vector<Matrix> closed_loop_vertices(const LpvModel& m, const Matrix& Kf) {
    std::vector<Matrix> out;
    const Matrix& V = m.Theta.vertices();
    for (Eigen::Index j = 0; j < V.cols(); ++j) out.push_back(m.A_at(V.col(j)) + m.B_at(V.col(j)) * Kf);
    return out;
}

Polytope dual_rep(const Matrix& H, const Vector& h, const Tolerances& tol) {
    return to_vrep(Polytope::from_halfspaces(H, h), tol);
}

// Largest normalized constraint excess of A's vertices w.r.t. B (B is an
// outer approximation of A in the iterations, so this measures distance).
double excess(const Polytope& A, const Polytope& B) {
    double d = 0.0;
    for (int v = 0; v < A.num_vertices(); ++v) {
        const Vector e = B.H() * A.vertex(v) - B.h();
        for (Eigen::Index r = 0; r < e.size(); ++r) d = std::max(d, e[r] / B.H().row(r).norm());
    }
    return d;
}

void check_collapse(const Polytope& P, double scale0) {
    if (!P.is_proper(1e-9 * scale0)) throw Error(ErrorKind::NotContractive, "iterates lost the origin from their interior");
    if (volume(P) < 1e-12) throw Error(ErrorKind::NotContractive, "iterates collapsed to a null set");
}

// Downhill simplex on f: R^n -> R; deterministic, derivative-free.
Vector nelder_mead(const std::function<double(const Vector&)>& f, const Vector& x0, double step, int max_eval) {
    const Eigen::Index n = x0.size();
    std::vector<Vector> pts(n + 1, x0);
    std::vector<double> val(n + 1);
    for (Eigen::Index i = 0; i < n; ++i) pts[i + 1][i] += step * std::max(1.0, std::abs(x0[i]));
    for (Eigen::Index i = 0; i <= n; ++i) val[i] = f(pts[i]);
    int evals = static_cast<int>(n + 1);
    std::vector<Eigen::Index> order(n + 1);
    while (evals < max_eval) {
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return val[a] < val[b]; });
        const Eigen::Index lo = order.front(), hi = order.back(), nh = order[n - 1];
        if (val[hi] - val[lo] <= 1e-12 * (1.0 + std::abs(val[lo]))) break;
        Vector c = Vector::Zero(n);
        for (Eigen::Index i = 0; i <= n; ++i) if (i != hi) c += pts[i];
        c /= static_cast<double>(n);
        const Vector xr = c + (c - pts[hi]);
        const double fr = f(xr);
        ++evals;
        if (fr < val[lo]) {
            const Vector xe = c + 2.0 * (c - pts[hi]);
            const double fe = f(xe);
            ++evals;
            if (fe < fr) { pts[hi] = xe; val[hi] = fe; } else { pts[hi] = xr; val[hi] = fr; }
        } else if (fr < val[nh]) {
            pts[hi] = xr;
            val[hi] = fr;
        } else {
            const Vector xc = fr < val[hi] ? Vector(c + 0.5 * (xr - c)) : Vector(c + 0.5 * (pts[hi] - c));
            const double fc = f(xc);
            ++evals;
            if (fc < std::min(fr, val[hi])) {
                pts[hi] = xc;
                val[hi] = fc;
            } else {
                for (Eigen::Index i = 0; i <= n; ++i) {
                    if (i == lo) continue;
                    pts[i] = pts[lo] + 0.5 * (pts[i] - pts[lo]);
                    val[i] = f(pts[i]);
                    ++evals;
                }
            }
        }
    }
    return pts[std::min_element(val.begin(), val.end()) - val.begin()];
}

}  // namespace

Matrix default_gain(const LpvModel& m) { return averaged_lqr_gain(m, 1.0); }

Matrix averaged_lqr_gain(const LpvModel& m, double r) {
    const auto [A, B] = averaged_pair(m);
    return lqr_gain(A, B, Matrix::Identity(m.nx(), m.nx()), r * Matrix::Identity(m.nu(), m.nu()));
}

double worst_vertex_radius(const LpvModel& m, const Matrix& K) {
    double rho = 0.0;
    for (const Matrix& A : closed_loop_vertices(m, K)) rho = std::max(rho, A.eigenvalues().cwiseAbs().maxCoeff());
    return rho;
}

double input_budget(const LpvModel& m, const Matrix& K) {
    if (!m.U.is_proper(0.0)) throw Error(ErrorKind::NotProper, "input set must contain the origin in its interior");
    double b = 0.0;
    for (int v = 0; v < m.X.num_vertices(); ++v) b = std::max(b, gauge(K * m.X.vertex(v), m.U));
    return b;
}

Matrix budgeted_gain(const LpvModel& m, double budget) {
    const int nu = m.nu(), nx = m.nx();
    auto unpack = [&](const Vector& k) { return Eigen::Map<const Matrix>(k.data(), nu, nx); };
    auto objective = [&](const Vector& k) {
        const Matrix K = unpack(k);
        return worst_vertex_radius(m, K) + 100.0 * std::max(0.0, input_budget(m, K) - budget);
    };
    Vector best;
    double best_val = std::numeric_limits<double>::infinity();
    for (double r : {1.0, 0.1, 0.01}) {
        Matrix K0;
        try {
            K0 = averaged_lqr_gain(m, r);
        } catch (const Error&) {
            continue;
        }
        // Start inside the budget: shrink the LQR gain if it overspends.
        const double b0 = input_budget(m, K0);
        if (b0 > budget) K0 *= budget / b0;
        Vector k = Eigen::Map<const Vector>(K0.data(), K0.size());
        for (int restart = 0; restart < 3; ++restart) k = nelder_mead(objective, k, 0.5, 4000);
        const double v = objective(k);
        if (v < best_val) {
            best_val = v;
            best = k;
        }
    }
    if (best.size() == 0) throw Error(ErrorKind::RiccatiDivergence, "no averaged-LQR starting gain");
    return unpack(best);
}

Polytope max_contractive_set(const LpvModel& m, const Matrix& Kf, double lambda, const SetIterationOptions& opt) {
    if (!(lambda > 0.0 && lambda < 1.0)) throw Error(ErrorKind::InvalidInput, "lambda must lie in (0, 1)");
    const std::vector<Matrix> Acl = closed_loop_vertices(m, Kf);
    // A lambda-contractive set requires every vertex system to contract at
    // rate lambda; this rules out hopeless gains before iterating.
    for (const Matrix& A : Acl) {
        if (A.eigenvalues().cwiseAbs().maxCoeff() > lambda) {
            throw Error(ErrorKind::NotContractive, "a closed-loop vertex matrix has spectral radius above lambda");
        }
    }
    Matrix H0(m.X.H().rows() + m.U.H().rows(), m.nx());
    H0 << m.X.H(), m.U.H() * Kf;
    Vector h0(H0.rows());
    h0 << m.X.h(), m.U.h();
    Polytope omega = dual_rep(H0, h0, opt.tol);
    const double scale0 = omega.h().minCoeff();

    for (int it = 0; it < opt.max_iter; ++it) {
        // Only preimage rows that cut the current iterate by more than the
        // pruning slack are added; when none does, the iterate is its own
        // successor (to within that slack) and the iteration has converged.
        std::vector<Vector> rows;
        std::vector<double> rhs;
        for (const Matrix& A : Acl) {
            const Matrix HA = omega.H() * A;
            const Vector reach = (HA * omega.vertices()).rowwise().maxCoeff();
            for (Eigen::Index r = 0; r < HA.rows(); ++r) {
                const double b = lambda * omega.h()[r];
                if (reach[r] > b + opt.prune_tol * omega.h()[r]) {
                    rows.emplace_back(HA.row(r).transpose());
                    rhs.push_back(b);
                }
            }
        }
        if (rows.empty()) return omega;
        if (omega.num_facets() + static_cast<int>(rows.size()) > opt.max_facets) {
            throw Error(ErrorKind::NoConvergence, "contractive set iteration exceeded the facet limit");
        }
        const Eigen::Index k = omega.H().rows();
        Matrix H(k + static_cast<Eigen::Index>(rows.size()), m.nx());
        Vector h(H.rows());
        H.topRows(k) = omega.H();
        h.head(k) = omega.h();
        for (std::size_t r = 0; r < rows.size(); ++r) {
            H.row(k + static_cast<Eigen::Index>(r)) = rows[r].transpose();
            h[k + static_cast<Eigen::Index>(r)] = rhs[r];
        }
        Polytope next = dual_rep(H, h, opt.tol);
        check_collapse(next, scale0);
        const double d = excess(omega, next);
        omega = std::move(next);
        if (d <= opt.hausdorff_tol && contraction_factor(m, omega, Kf) <= lambda + opt.tol.contract_tol) return omega;
    }
    throw Error(ErrorKind::NoConvergence, "contractive set iteration did not converge");
}

Polytope max_controlled_contractive_set(const LpvModel& m, double lambda, const SetIterationOptions& opt) {
    if (!(lambda > 0.0 && lambda <= 1.0)) throw Error(ErrorKind::InvalidInput, "lambda must lie in (0, 1]");
    const int n = m.nx();
    const int nu = m.nu();
    const Matrix& TV = m.Theta.vertices();
    Polytope omega = m.X;
    const double scale0 = omega.h().minCoeff();
    for (int it = 0; it < opt.max_iter; ++it) {
        const Eigen::Index k = omega.H().rows();
        const Eigen::Index q = TV.cols();
        Matrix H(m.X.H().rows() + m.U.H().rows() + k * q, n + nu);
        Vector h(H.rows());
        H.setZero();
        Eigen::Index r = 0;
        H.block(r, 0, m.X.H().rows(), n) = m.X.H();
        h.segment(r, m.X.H().rows()) = m.X.h();
        r += m.X.H().rows();
        H.block(r, n, m.U.H().rows(), nu) = m.U.H();
        h.segment(r, m.U.H().rows()) = m.U.h();
        r += m.U.H().rows();
        for (Eigen::Index j = 0; j < q; ++j) {
            H.block(r, 0, k, n) = omega.H() * m.A_at(TV.col(j));
            H.block(r, n, k, nu) = omega.H() * m.B_at(TV.col(j));
            h.segment(r, k) = lambda * omega.h();
            r += k;
        }
        const Polytope lifted = dual_rep(H, h, opt.tol);
        const Matrix proj = lifted.vertices().topRows(n);
        Polytope next = to_hrep(Polytope::from_vertices(proj, opt.tol.geom_tol), opt.tol);
        check_collapse(next, scale0);
        const double d = excess(omega, next);
        omega = std::move(next);
        if (d <= opt.hausdorff_tol) return omega;
    }
    throw Error(ErrorKind::NoConvergence, "controlled contractive set iteration did not converge");
}

double lbar(const Polytope& Xf, const Matrix& Kf, const Matrix& Q, const Matrix& R, Norm kind) {
    double best = 0.0;
    for (int v = 0; v < Xf.num_vertices(); ++v) {
        const Vector x = Xf.vertex(v);
        best = std::max(best, norm(Q * x, kind) + norm(R * (Kf * x), kind));
    }
    return best;
}

double contraction_factor(const LpvModel& m, const Polytope& Xf, const Matrix& Kf) {
    double g = 0.0;
    for (const Matrix& A : closed_loop_vertices(m, Kf)) {
        for (int v = 0; v < Xf.num_vertices(); ++v) g = std::max(g, gauge(A * Xf.vertex(v), Xf));
    }
    return g;
}

void verify_terminal(const LpvModel& m, const TerminalData& td, const Tolerances& tol) {
    if (!td.Xf.is_proper(0.0)) throw Error(ErrorKind::NotContractive, "terminal set is not proper");
    if (!includes(td.Xf, m.X, tol.feas_tol)) throw Error(ErrorKind::NotContractive, "terminal set leaves the state constraints");
    for (int v = 0; v < td.Xf.num_vertices(); ++v) {
        if (!m.U.contains(td.Kf * td.Xf.vertex(v), tol.feas_tol)) {
            throw Error(ErrorKind::NotContractive, "terminal controller violates the input constraints");
        }
    }
    const double g = contraction_factor(m, td.Xf, td.Kf);
    if (g > td.lambda + tol.contract_tol) {
        throw Error(ErrorKind::NotContractive, "contractivity certificate failed: factor " + std::to_string(g));
    }
}

double terminal_cost(const Polytope& X, const TerminalData& td, const Tolerances& tol) {
    const double psi = set_gauge(X, td.Xf);
    if (psi > 1.0 + tol.feas_tol) throw Error(ErrorKind::TerminalViolation, "set is not contained in the terminal set");
    return td.cost_coeff * std::pow(psi, td.c);
}

TerminalData compute_terminal(const LpvModel& m, const TerminalOptions& opt) {
    TerminalData td;
    td.lambda = opt.lambda;
    td.Q = opt.Q.size() ? opt.Q : Matrix::Identity(m.nx(), m.nx());
    td.R = opt.R.size() ? opt.R : Matrix::Identity(m.nu(), m.nu());
    td.norm = opt.norm;

    auto attempt = [&](const Matrix& K) {
        TerminalData c = td;
        c.Kf = K;
        c.Xf = max_contractive_set(m, K, opt.lambda, opt.iteration);
        verify_terminal(m, c, opt.iteration.tol);
        return c;
    };

    if (opt.gain) {
        if (opt.gain->rows() != m.nu() || opt.gain->cols() != m.nx()) throw Error(ErrorKind::InvalidInput, "gain must be n_u by n_x");
        td = attempt(*opt.gain);
    } else {
        std::vector<std::function<Matrix()>> candidates;
        for (double r : opt.lqr_weights) candidates.emplace_back([&m, r] { return averaged_lqr_gain(m, r); });
        for (double b : opt.input_budgets) candidates.emplace_back([&m, b] { return budgeted_gain(m, b); });
        std::optional<TerminalData> best;
        double best_vol = -1.0;
        std::string last_error = "no candidate gains";
        for (const auto& make : candidates) {
            try {
                TerminalData c = attempt(make());
                if (c.Xf.num_vertices() > opt.max_vertices) {
                    last_error = "terminal set with " + std::to_string(c.Xf.num_vertices()) + " vertices exceeds the limit";
                    continue;
                }
                const double v = volume(c.Xf);
                if (v > best_vol) {
                    best_vol = v;
                    best = std::move(c);
                }
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::NotContractive && e.kind() != ErrorKind::NoConvergence &&
                    e.kind() != ErrorKind::RiccatiDivergence && e.kind() != ErrorKind::DegenerateSet) {
                    throw;
                }
                last_error = e.what();
            }
        }
        if (!best && opt.relax_lambda) {
            // Smallest lambda' the default gain certifies; larger lambda' only
            // enlarges the contractive set, so feasibility is monotone.
            const Matrix K = default_gain(m);
            auto certify = [&](double lam) -> std::optional<TerminalData> {
                TerminalData c = td;
                c.lambda = lam;
                c.Kf = K;
                try {
                    c.Xf = max_contractive_set(m, K, lam, opt.iteration);
                    verify_terminal(m, c, opt.iteration.tol);
                } catch (const Error&) {
                    return std::nullopt;
                }
                return c;
            };
            double lo = opt.lambda, hi = 0.999;
            std::optional<TerminalData> found = certify(hi);
            if (found) {
                for (int it = 0; it < 20 && hi - lo > 1e-4; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    if (auto c = certify(mid)) {
                        found = std::move(c);
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                best = std::move(found);
            }
        }
        if (!best) throw Error(ErrorKind::NotContractive, "no candidate gain admits a contractive set: " + last_error);
        td = std::move(*best);
    }
    td.lbar = lbar(td.Xf, td.Kf, td.Q, td.R, td.norm);
    td.cost_coeff = td.lbar / (1.0 - std::pow(td.lambda, td.c));
    return td;
}

void to_json(nlohmann::json& j, const TerminalData& td) {
    j = nlohmann::json::object();
    j["Xf"] = td.Xf;
    j["Kf"] = matrix_to_json(td.Kf);
    j["lambda"] = td.lambda;
    j["lbar"] = td.lbar;
    j["cost_coeff"] = td.cost_coeff;
    j["c"] = td.c;
    j["Q"] = matrix_to_json(td.Q);
    j["R"] = matrix_to_json(td.R);
    j["norm"] = to_string(td.norm);
}

void from_json(const nlohmann::json& j, TerminalData& td) {
    td.Xf = j.at("Xf").get<Polytope>();
    if (!(td.Xf.has_vrep() && td.Xf.has_hrep())) td.Xf = to_vrep(to_hrep(td.Xf));
    td.Kf = matrix_from_json(j.at("Kf"));
    td.lambda = j.at("lambda").get<double>();
    td.c = j.value("c", 1);
    td.Q = j.contains("Q") ? matrix_from_json(j["Q"]) : Matrix::Identity(td.Xf.dim(), td.Xf.dim());
    td.R = j.contains("R") ? matrix_from_json(j["R"]) : Matrix::Identity(td.Kf.rows(), td.Kf.rows());
    td.norm = parse_norm(j.value("norm", std::string("inf")));
    td.lbar = j.contains("lbar") ? j["lbar"].get<double>() : lbar(td.Xf, td.Kf, td.Q, td.R, td.norm);
    td.cost_coeff = j.contains("cost_coeff") ? j["cost_coeff"].get<double>() : td.lbar / (1.0 - td.lambda);
}

}  // namespace hptmpc
