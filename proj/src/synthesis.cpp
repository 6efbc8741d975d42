#include "hptmpc/synthesis.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include "hptmpc/errors.hpp"

namespace hptmpc {

const char* to_string(ControlKind kind) {
    switch (kind) {
        case ControlKind::SimpleOffset: return "simple";
        case ControlKind::ThetaOffset: return "theta";
        case ControlKind::VertexPolicy: return "vertex";
    }
    return "simple";
}

ControlKind parse_control_kind(const std::string& s) {
    if (s == "simple" || s == "SimpleOffset") return ControlKind::SimpleOffset;
    if (s == "theta" || s == "ThetaOffset") return ControlKind::ThetaOffset;
    if (s == "vertex" || s == "VertexPolicy") return ControlKind::VertexPolicy;
    throw Error(ErrorKind::InvalidInput, "unknown control parameterization '" + s + "'");
}

bool theta_dependent(ControlKind kind) { return kind != ControlKind::SimpleOffset; }

const char* to_string(SynthesisStatus s) {
    switch (s) {
        case SynthesisStatus::Optimal: return "optimal";
        case SynthesisStatus::Infeasible: return "infeasible";
        case SynthesisStatus::SolverFailure: return "solver_failure";
    }
    return "solver_failure";
}

// ---------------------------------------------------------------------------
// Parameterization structures

int ParameterizationStructure::N0() const {
    return !segments.empty() && segments.front().scenario ? segments.front().until : 0;
}

ControlKind ParameterizationStructure::control(int i) const {
    int start = 0;
    for (const Segment& seg : segments) {
        if (i >= start && i < seg.until) {
            if (seg.scenario) throw Error(ErrorKind::InvalidInput, "step lies in the scenario prefix");
            return seg.control;
        }
        start = seg.until;
    }
    throw Error(ErrorKind::InvalidInput, "step outside the horizon");
}

bool ParameterizationStructure::theta_dependent() const {
    for (const Segment& seg : segments) {
        if (seg.scenario || hptmpc::theta_dependent(seg.control)) return true;
    }
    return false;
}

void ParameterizationStructure::validate() const {
    if (N < 1) throw Error(ErrorKind::InvalidInput, "horizon must be positive");
    if (segments.empty()) throw Error(ErrorKind::InvalidInput, "structure has no segments");
    int start = 0;
    std::optional<ControlKind> prev;
    for (std::size_t k = 0; k < segments.size(); ++k) {
        const Segment& seg = segments[k];
        if (seg.until <= start) throw Error(ErrorKind::InvalidInput, "segments must have increasing 'until' steps");
        if (seg.scenario) {
            if (k != 0) throw Error(ErrorKind::InvalidInput, "a scenario segment is only allowed as the prefix");
        } else {
            // Step i-1 must be able to express step i's controller.
            if (prev && static_cast<int>(seg.control) > static_cast<int>(*prev)) {
                throw Error(ErrorKind::InvalidInput, std::string("homothetic control '") + to_string(seg.control) +
                                                         "' cannot follow the less expressive '" + to_string(*prev) + "'");
            }
            prev = seg.control;
        }
        start = seg.until;
    }
    if (start != N) throw Error(ErrorKind::InvalidInput, "segments must end at the horizon N");
    if (N0() > 0 && N < 2) throw Error(ErrorKind::InvalidInput, "a scenario part needs N >= 2");
}

ParameterizationStructure ParameterizationStructure::homothetic(int N, ControlKind kind) {
    return {N, {Segment{false, kind, N}}};
}

ParameterizationStructure ParameterizationStructure::scenario(int N) { return {N, {Segment{true, {}, N}}}; }

void to_json(nlohmann::json& j, const ParameterizationStructure& s) {
    j = nlohmann::json{{"N", s.N}, {"segments", nlohmann::json::array()}};
    for (const Segment& seg : s.segments) {
        nlohmann::json e{{"kind", seg.scenario ? "scenario" : "homothetic"}, {"until", seg.until}};
        if (!seg.scenario) e["control"] = to_string(seg.control);
        j["segments"].push_back(e);
    }
}

void from_json(const nlohmann::json& j, ParameterizationStructure& s) {
    s.N = j.at("N").get<int>();
    s.segments.clear();
    for (const auto& e : j.at("segments")) {
        Segment seg;
        const std::string kind = e.at("kind").get<std::string>();
        if (kind == "scenario") {
            seg.scenario = true;
        } else if (kind == "homothetic") {
            seg.control = parse_control_kind(e.value("control", std::string("simple")));
        } else {
            throw Error(ErrorKind::InvalidInput, "unknown segment kind '" + kind + "'");
        }
        seg.until = e.at("until").get<int>();
        s.segments.push_back(seg);
    }
    s.validate();
}

ParameterizationStructure load_structure(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::InvalidInput, "cannot open structure file " + path);
    try {
        return nlohmann::json::parse(in).get<ParameterizationStructure>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::InvalidInput, std::string("malformed structure file: ") + e.what());
    }
}

int n0_heuristic(int q_f, int q_theta) {
    if (q_f < 2 || q_theta < 2) throw Error(ErrorKind::InvalidInput, "vertex counts must be at least 2");
    return static_cast<int>(std::floor(std::log(q_f) / std::log(q_theta) + 0.5)) + 2;
}

long long degrees_of_freedom(const ParameterizationStructure& s, int q_theta, int q_f) {
    s.validate();
    long long dof = 0;
    long long nodes = 1;
    for (int i = 0; i < s.N; ++i) {
        if (s.scenario_step(i)) {
            dof += nodes;  // q_theta^i
            nodes *= q_theta;
            continue;
        }
        if (i == 0) {
            ++dof;
            continue;
        }
        switch (s.control(i)) {
            case ControlKind::SimpleOffset: dof += 1; break;
            case ControlKind::ThetaOffset: dof += q_theta; break;
            case ControlKind::VertexPolicy: dof += static_cast<long long>(q_theta) * q_f; break;
        }
    }
    return dof;
}

// ---------------------------------------------------------------------------
// Affine expressions

Vector AffineVec::eval(const std::vector<double>& x) const {
    Vector v = c;
    for (const auto& [var, col] : terms) v += x[static_cast<std::size_t>(var)] * col;
    return v;
}

namespace {

AffineVec operator*(const Matrix& M, const AffineVec& a) {
    AffineVec out{M * a.c, {}};
    out.terms.reserve(a.terms.size());
    for (const auto& [var, col] : a.terms) out.terms.emplace_back(var, M * col);
    return out;
}

AffineVec operator+(AffineVec a, const AffineVec& b) {
    a.c += b.c;
    a.terms.insert(a.terms.end(), b.terms.begin(), b.terms.end());
    return a;
}

AffineVec variables(int first, int n) {
    AffineVec a{Vector::Zero(n), {}};
    for (int k = 0; k < n; ++k) a.terms.emplace_back(first + k, Vector::Unit(n, k));
    return a;
}

AffineVec scaled(int var, const Vector& col) { return {Vector::Zero(col.size()), {{var, col}}}; }

class Builder {
public:
    Builder(SynthesisLp& out, double tol) : out_(out), tol_(tol) {}

    int vars(int n, double lo = -lp::kInf, double hi = lp::kInf) {
        const int first = out_.problem.num_vars();
        for (int k = 0; k < n; ++k) out_.problem.add_var(lo, hi);
        return first;
    }

    using Extra = std::pair<int, Vector>;

    // H p + sum_k coef_k * var_k <= h, one row per row of H; each extra
    // variable carries its own per-row coefficient vector.
    void rows_le(const Matrix& H, const AffineVec& p, const Vector& h, const std::vector<Extra>& extras = {}) {
        const Vector Hc = H * p.c;
        Matrix cols(H.rows(), static_cast<Eigen::Index>(p.terms.size()));
        for (std::size_t k = 0; k < p.terms.size(); ++k) cols.col(static_cast<Eigen::Index>(k)) = H * p.terms[k].second;
        for (Eigen::Index r = 0; r < H.rows(); ++r) {
            std::vector<lp::Term> terms;
            terms.reserve(p.terms.size() + 1);
            for (std::size_t k = 0; k < p.terms.size(); ++k) {
                const double v = cols(r, static_cast<Eigen::Index>(k));
                if (v != 0.0) terms.push_back({p.terms[k].first, v});
            }
            for (const auto& [var, coef] : extras) {
                if (var >= 0 && coef[r] != 0.0) terms.push_back({var, coef[r]});
            }
            const double rhs = h[r] - Hc[r];
            if (terms.empty()) {
                if (rhs < -tol_ * (1.0 + std::abs(h[r]))) out_.trivially_infeasible = true;
                continue;
            }
            out_.problem.add_le(std::move(terms), rhs);
        }
    }

    // Variable bounding ||y|| from above.
    int norm_bound(const AffineVec& y, Norm kind) {
        const Eigen::Index n = y.c.size();
        const int v = vars(1, 0.0);
        if (kind == Norm::Inf) {
            Matrix H(2 * n, n);
            H << Matrix::Identity(n, n), -Matrix::Identity(n, n);
            rows_le(H, y, Vector::Zero(2 * n), {{v, Vector::Constant(2 * n, -1.0)}});
            return v;
        }
        const int w = vars(static_cast<int>(n), 0.0);
        for (Eigen::Index r = 0; r < n; ++r) {
            Matrix e = Matrix::Zero(2, n);
            e(0, r) = 1.0;
            e(1, r) = -1.0;
            rows_le(e, y, Vector::Zero(2), {{w + static_cast<int>(r), Vector::Constant(2, -1.0)}});
        }
        std::vector<lp::Term> sum{{v, -1.0}};
        for (Eigen::Index r = 0; r < n; ++r) sum.push_back({w + static_cast<int>(r), 1.0});
        out_.problem.add_le(std::move(sum), 0.0);
        return v;
    }

private:
    SynthesisLp& out_;
    double tol_;
};

// Key identifying which scheduling vertices must share a control: with a
// partition, controls may only depend on the trailing theta block.
std::vector<int> control_groups(const LpvModel& m, const Matrix& TV) {
    std::vector<int> group(static_cast<std::size_t>(TV.cols()));
    if (!m.partition || m.b_constant()) {
        for (Eigen::Index j = 0; j < TV.cols(); ++j) group[static_cast<std::size_t>(j)] = static_cast<int>(j);
        return group;
    }
    const int n1 = m.partition->first;
    std::vector<Vector> keys;
    for (Eigen::Index j = 0; j < TV.cols(); ++j) {
        const Vector key = TV.col(j).tail(TV.rows() - n1);
        int found = -1;
        for (std::size_t k = 0; k < keys.size(); ++k) {
            if ((keys[k] - key).lpNorm<Eigen::Infinity>() <= 1e-12) found = static_cast<int>(k);
        }
        if (found < 0) {
            found = static_cast<int>(keys.size());
            keys.push_back(key);
        }
        group[static_cast<std::size_t>(j)] = found;
    }
    return group;
}

}  // namespace

SynthesisLp build_synthesis_lp(const LpvModel& m, const AffineVec& x, const SchedulingTube& tube,
                               const ParameterizationStructure& s, const TerminalData& td, bool with_cost,
                               const Tolerances& tol, int reserved) {
    s.validate();
    if (tube.N() != s.N) throw Error(ErrorKind::LengthMismatch, "scheduling tube length differs from the horizon");
    const int N = s.N;
    const int N0 = s.N0();
    const int nx = m.nx();
    const int nu = m.nu();
    const Matrix& Vf = td.Xf.vertices();
    const int qf = static_cast<int>(Vf.cols());

    SynthesisLp out;
    Builder b(out, tol.feas_tol);
    b.vars(reserved);
    out.points.resize(static_cast<std::size_t>(N + 1));
    out.inputs.resize(static_cast<std::size_t>(N));
    out.offsets.resize(static_cast<std::size_t>(N));
    out.z.resize(static_cast<std::size_t>(N + 1));
    out.alpha.assign(static_cast<std::size_t>(N + 1), -1);
    out.stage.assign(static_cast<std::size_t>(N), -1);

    // Homothetic cross-section parameters for steps max(N0, 1)..N when a tail
    // exists; with N0 = 0 the first cross section is the point {x}.
    if (N0 < N) {
        for (int i = N0; i <= N; ++i) {
            if (i == 0) {
                out.z[0] = x;
                continue;
            }
            out.z[static_cast<std::size_t>(i)] = variables(b.vars(nx), nx);
            out.alpha[static_cast<std::size_t>(i)] = b.vars(1, 0.0);
        }
    }
    auto homothetic_points = [&](int i) {
        std::vector<AffineVec> pts;
        const AffineVec& z = *out.z[static_cast<std::size_t>(i)];
        const int a = out.alpha[static_cast<std::size_t>(i)];
        if (a < 0) return std::vector<AffineVec>{z};
        for (int l = 0; l < qf; ++l) pts.push_back(z + scaled(a, Vf.col(l)));
        return pts;
    };
    // p in z_i + alpha_i Xf  <=>  Hf (p - z_i) - alpha_i hf <= 0.
    auto into_cross_section = [&](const AffineVec& p, int i) {
        const AffineVec& z = *out.z[static_cast<std::size_t>(i)];
        b.rows_le(td.Xf.H(), p + (-Matrix::Identity(nx, nx)) * z, Vector::Zero(td.Xf.H().rows()),
                  {{out.alpha[static_cast<std::size_t>(i)], -td.Xf.h()}});
    };

    if (N0 > 0) out.points[0] = {x};
    for (int i = 0; i < N; ++i) {
        const Matrix& TV = tube[i].vertices();
        const int qt = static_cast<int>(TV.cols());
        const std::vector<int> group = control_groups(m, TV);
        const int ngroups = *std::max_element(group.begin(), group.end()) + 1;
        const bool tree = i < N0;
        const std::vector<AffineVec> pts = tree ? out.points[static_cast<std::size_t>(i)] : homothetic_points(i);
        if (!tree) out.points[static_cast<std::size_t>(i)] = pts;
        const int q = static_cast<int>(pts.size());

        // Inputs per (point l, scheduling vertex j).
        std::vector<AffineVec>& U = out.inputs[static_cast<std::size_t>(i)];
        U.reserve(static_cast<std::size_t>(q * qt));
        std::optional<ControlKind> kind;
        if (!tree) kind = s.control(i);
        if (tree || *kind == ControlKind::VertexPolicy) {
            for (int l = 0; l < q; ++l) {
                std::vector<AffineVec> shared(static_cast<std::size_t>(ngroups));
                for (int g = 0; g < ngroups; ++g) shared[static_cast<std::size_t>(g)] = variables(b.vars(nu), nu);
                out.control_dof += ngroups;
                for (int j = 0; j < qt; ++j) U.push_back(shared[static_cast<std::size_t>(group[static_cast<std::size_t>(j)])]);
            }
        } else {
            const int a = out.alpha[static_cast<std::size_t>(i)];
            // One offset (SimpleOffset) or one per scheduling vertex, shared
            // within a partition group (ThetaOffset).
            auto& offs = out.offsets[static_cast<std::size_t>(i)];
            if (*kind == ControlKind::SimpleOffset) {
                offs.push_back(variables(b.vars(nu), nu));
                out.control_dof += 1;
            } else {
                std::vector<AffineVec> shared;
                for (int g = 0; g < ngroups; ++g) shared.push_back(variables(b.vars(nu), nu));
                out.control_dof += ngroups;
                for (int j = 0; j < qt; ++j) offs.push_back(shared[static_cast<std::size_t>(group[static_cast<std::size_t>(j)])]);
            }
            for (int l = 0; l < q; ++l) {
                for (int j = 0; j < qt; ++j) {
                    const AffineVec& c = offs[offs.size() == 1 ? 0 : static_cast<std::size_t>(j)];
                    // c + Kf (p_l - z_i) = c + alpha_i Kf v_l.
                    U.push_back(a < 0 ? c : c + scaled(a, td.Kf * Vf.col(l)));
                }
            }
        }

        // Tree nodes and inputs stay in the constraint sets; homothetic
        // inputs into U as well.
        if (tree) {
            for (const AffineVec& p : pts) b.rows_le(m.X.H(), p, m.X.h());
        }
        const int a = tree ? -1 : out.alpha[static_cast<std::size_t>(i)];
        const bool next_tree = i + 1 < N0 || (N0 == N && i + 1 == N);
        if (!tree && *kind != ControlKind::VertexPolicy && a >= 0) {
            // Offset controls on z + alpha Xf: every vertex image is
            // A_j z + B_j c_j + alpha (A_j + B_j Kf) v_l, so each facet row
            // only needs the largest vertex term (alpha >= 0).
            const AffineVec& z = *out.z[static_cast<std::size_t>(i)];
            const AffineVec& z1 = *out.z[static_cast<std::size_t>(i + 1)];
            const int a1 = out.alpha[static_cast<std::size_t>(i + 1)];
            const auto& offs = out.offsets[static_cast<std::size_t>(i)];
            const Vector sigma_u = (m.U.H() * td.Kf * Vf).rowwise().maxCoeff();
            for (std::size_t k = 0; k < offs.size(); ++k) b.rows_le(m.U.H(), offs[k], m.U.h(), {{a, sigma_u}});
            for (int j = 0; j < qt; ++j) {
                const Vector th = TV.col(j);
                const Matrix Bj = m.B_at(th);
                const AffineVec& c = offs[offs.size() == 1 ? 0 : static_cast<std::size_t>(j)];
                const AffineVec base = m.A_at(th) * z + Bj * c;
                const Matrix AV = (m.A_at(th) + Bj * td.Kf) * Vf;
                b.rows_le(m.X.H(), base, m.X.h(), {{a, (m.X.H() * AV).rowwise().maxCoeff()}});
                b.rows_le(td.Xf.H(), base + (-Matrix::Identity(nx, nx)) * z1, Vector::Zero(td.Xf.H().rows()),
                          {{a, (td.Xf.H() * AV).rowwise().maxCoeff()}, {a1, -td.Xf.h()}});
            }
        } else {
            for (int l = 0; l < q; ++l) {
                for (int j = 0; j < qt; ++j) {
                    // SimpleOffset inputs do not depend on j; one check suffices.
                    if (kind == ControlKind::SimpleOffset && j > 0) continue;
                    b.rows_le(m.U.H(), U[static_cast<std::size_t>(l * qt + j)], m.U.h());
                }
            }
            std::vector<AffineVec> next;
            next.reserve(static_cast<std::size_t>(q * qt));
            for (int l = 0; l < q; ++l) {
                for (int j = 0; j < qt; ++j) {
                    const Vector th = TV.col(j);
                    next.push_back(m.A_at(th) * pts[static_cast<std::size_t>(l)] + m.B_at(th) * U[static_cast<std::size_t>(l * qt + j)]);
                }
            }
            if (next_tree) {
                out.points[static_cast<std::size_t>(i + 1)] = std::move(next);
            } else {
                for (const AffineVec& p : next) {
                    b.rows_le(m.X.H(), p, m.X.h());
                    into_cross_section(p, i + 1);
                }
            }
        }

        if (with_cost) {
            const int si = b.vars(1, 0.0);
            out.problem.set_cost(si, 1.0);
            out.stage[static_cast<std::size_t>(i)] = si;
            std::vector<int> a_pt;
            for (const AffineVec& p : pts) a_pt.push_back(b.norm_bound(td.Q * p, td.norm));
            for (int l = 0; l < q; ++l) {
                for (int j = 0; j < qt; ++j) {
                    const std::size_t k = static_cast<std::size_t>(l * qt + j);
                    // Shared inputs (same group or SimpleOffset) give identical rows; skip repeats.
                    if (j > 0 && U[k].terms.size() == U[k - 1].terms.size() && U[k].c == U[k - 1].c &&
                        std::equal(U[k].terms.begin(), U[k].terms.end(), U[k - 1].terms.begin(),
                                   [](const auto& a, const auto& c) { return a.first == c.first && a.second == c.second; })) {
                        continue;
                    }
                    const int bu = b.norm_bound(td.R * U[k], td.norm);
                    out.problem.add_le({{a_pt[static_cast<std::size_t>(l)], 1.0}, {bu, 1.0}, {si, -1.0}}, 0.0);
                }
            }
        }
    }

    // Terminal inclusion with its gauge epigraph: X_N in t * Xf, t <= 1.
    out.terminal = b.vars(1, 0.0, 1.0);
    if (with_cost) out.problem.set_cost(out.terminal, td.cost_coeff);
    const Vector& hf = td.Xf.h();
    if (N0 == N) {
        for (const AffineVec& p : out.points[static_cast<std::size_t>(N)]) b.rows_le(td.Xf.H(), p, Vector::Zero(hf.size()), {{out.terminal, -hf}});
    } else {
        // sup over z + alpha Xf of Hf_r x is Hf_r z + alpha hf_r, so
        // Hf zN + (alpha - t) hf <= 0.
        const AffineVec& zN = *out.z[static_cast<std::size_t>(N)];
        const Matrix& Hf = td.Xf.H();
        for (Eigen::Index r = 0; r < hf.size(); ++r) {
            std::vector<lp::Term> terms;
            for (const auto& [var, col] : zN.terms) {
                const double v = Hf.row(r).dot(col);
                if (v != 0.0) terms.push_back({var, v});
            }
            terms.push_back({out.alpha[static_cast<std::size_t>(N)], hf[r]});
            terms.push_back({out.terminal, -hf[r]});
            out.problem.add_le(std::move(terms), -Hf.row(r).dot(zN.c));
        }
    }
    // Initial state inside X when it is a point (the DOA sweep passes a
    // parametrized state that must also stay in X).
    if (N0 == 0) b.rows_le(m.X.H(), x, m.X.h());
    return out;
}

lp::Solution solve_classified(const lp::Problem& p, Backend backend) {
    lp::InteriorPoint ipm;
    lp::DenseSimplex simplex;
    const lp::Solver& solver = backend == Backend::InteriorPoint ? static_cast<const lp::Solver&>(ipm) : simplex;
    lp::Solution sol = solver.solve(p);
    if (sol.status == lp::Status::Optimal) return sol;
    // Infeasibility is decided by the phase-1 problem rather than by how the
    // backend happened to stop.
    const lp::FeasibilityResult f = lp::phase_one(p, solver);
    if (f.status == lp::Status::Optimal && f.violation > 1e-7) {
        sol.status = lp::Status::Infeasible;
    } else if (f.status == lp::Status::Optimal) {
        sol.status = lp::Status::SolverFailure;
    }
    return sol;
}

SynthesisReport synthesize(const LpvModel& m, const Vector& x, const SchedulingTube& tube,
                           const ParameterizationStructure& s, const TerminalData& td, const SynthesisOptions& opt) {
    using clock = std::chrono::steady_clock;
    if (x.size() != m.nx()) throw Error(ErrorKind::InvalidInput, "state dimension mismatch");
    try {
        validate_implementability(m, s.theta_dependent());
    } catch (const Error& e) {
        throw Error(ErrorKind::ImplementabilityViolation, e.what());
    }
    SynthesisReport rep;
    const auto t0 = clock::now();
    const SynthesisLp built = build_synthesis_lp(m, AffineVec::constant(x), tube, s, td, true, opt.tol);
    const auto t1 = clock::now();
    rep.stats.rows = built.problem.num_rows();
    rep.stats.cols = built.problem.num_vars();
    rep.stats.nonzeros = built.problem.num_nonzeros();
    rep.stats.control_dof = built.control_dof;
    rep.stats.build_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    rep.stats.backend = opt.backend == Backend::InteriorPoint ? "interior-point" : "dense-simplex";
    if (opt.emit_lp) built.problem.write_text(*opt.emit_lp);
    if (built.trivially_infeasible) {
        rep.status = SynthesisStatus::Infeasible;
        rep.message = "initial state violates the state constraints";
        return rep;
    }

    const lp::Solution sol = solve_classified(built.problem, opt.backend);
    rep.stats.solve_ms = std::chrono::duration<double, std::milli>(clock::now() - t1).count();
    rep.stats.iterations = sol.iterations;
    if (sol.status == lp::Status::Infeasible) {
        rep.status = SynthesisStatus::Infeasible;
        rep.message = "no admissible tube for this state";
        return rep;
    }
    if (sol.status != lp::Status::Optimal) {
        rep.status = SynthesisStatus::SolverFailure;
        rep.message = std::string("LP backend stopped with status ") + lp::to_string(sol.status);
        return rep;
    }

    const int N = s.N;
    Tube t;
    t.N = N;
    t.N0 = s.N0();
    t.Xf = td.Xf;
    t.Kf = td.Kf;
    t.theta = tube.sets;
    t.z.assign(static_cast<std::size_t>(N + 1), Vector());
    t.alpha.assign(static_cast<std::size_t>(N + 1), 0.0);
    t.kinds.assign(static_cast<std::size_t>(N), std::nullopt);
    t.offsets.assign(static_cast<std::size_t>(N), Matrix());
    auto columns = [&](const std::vector<AffineVec>& list, int rows) {
        Matrix M(rows, static_cast<Eigen::Index>(list.size()));
        for (std::size_t k = 0; k < list.size(); ++k) M.col(static_cast<Eigen::Index>(k)) = list[k].eval(sol.x);
        return M;
    };
    for (int i = 0; i <= N; ++i) {
        const auto si = static_cast<std::size_t>(i);
        if (built.z[si]) {
            t.z[si] = built.z[si]->eval(sol.x);
            t.alpha[si] = built.alpha[si] >= 0 ? std::max(0.0, sol.x[static_cast<std::size_t>(built.alpha[si])]) : 0.0;
        }
        if (i == N && t.homothetic(N)) {
            Matrix P(m.nx(), td.Xf.num_vertices());
            for (int l = 0; l < td.Xf.num_vertices(); ++l) P.col(l) = t.z[si] + t.alpha[si] * td.Xf.vertex(l);
            t.points.push_back(P);
        } else {
            t.points.push_back(columns(built.points[si], m.nx()));
        }
        if (i == N) break;
        t.inputs.push_back(columns(built.inputs[si], m.nu()));
        if (i >= t.N0) {
            t.kinds[si] = s.control(i);
            if (!built.offsets[si].empty()) t.offsets[si] = columns(built.offsets[si], m.nu());
        }
        t.stage_costs.push_back(sol.x[static_cast<std::size_t>(built.stage[si])]);
    }
    t.terminal_gauge = sol.x[static_cast<std::size_t>(built.terminal)];
    t.value = sol.objective;
    rep.value = sol.objective;
    if (opt.verify) verify_tube(m, t, opt.tol);
    rep.tube = std::move(t);
    rep.status = SynthesisStatus::Optimal;
    return rep;
}

void verify_tube(const LpvModel& m, const Tube& t, const Tolerances& tol) {
    auto fail = [](int i, const std::string& what) {
        throw Error(ErrorKind::SolverFailure, "tube check failed at step " + std::to_string(i) + ": " + what);
    };
    const double scale = 1.0 + std::max(m.X.h().lpNorm<Eigen::Infinity>(), m.U.h().lpNorm<Eigen::Infinity>());
    const double slack = 10.0 * tol.feas_tol * scale;
    for (int i = 0; i < t.N; ++i) {
        const auto si = static_cast<std::size_t>(i);
        if (t.alpha[si] < 0.0) fail(i, "negative scaling");
        const Matrix& P = t.points[si];
        const Matrix& TV = t.theta[si].vertices();
        const Eigen::Index qt = TV.cols();
        for (Eigen::Index l = 0; l < P.cols(); ++l) {
            for (Eigen::Index j = 0; j < qt; ++j) {
                const Vector u = t.inputs[si].col(l * qt + j);
                if (!m.U.contains(u, slack)) fail(i, "vertex input outside U");
                const Vector img = m.image_point(P.col(l), TV.col(j), u);
                if (!m.X.contains(img, slack)) fail(i, "image point outside X");
                if (t.homothetic(i + 1)) {
                    const Vector e = t.Xf.H() * (img - t.z[si + 1]) - t.alpha[si + 1] * t.Xf.h();
                    if (e.maxCoeff() > slack) fail(i, "image point outside the next cross section");
                } else {
                    const Vector d = img - t.points[si + 1].col(l * qt + j);
                    if (d.lpNorm<Eigen::Infinity>() > slack) fail(i, "tree successor mismatch");
                }
            }
        }
    }
    // Terminal inclusion through the vertex list of X_N.
    const Matrix& PN = t.points.back();
    for (Eigen::Index l = 0; l < PN.cols(); ++l) {
        if ((t.Xf.H() * PN.col(l) - t.Xf.h()).maxCoeff() > slack) fail(t.N, "last cross section leaves Xf");
    }
}

Vector evaluate_controller(const Tube& t, int i, const Vector& x, const Vector& theta, const Tolerances& tol) {
    if (i < 0 || i >= t.N) throw Error(ErrorKind::InvalidInput, "step outside the horizon");
    const auto si = static_cast<std::size_t>(i);
    const Matrix& TV = t.theta[si].vertices();
    const Eigen::Index qt = TV.cols();
    const std::optional<ControlKind> kind = t.kinds[si];
    const Vector mu = kind == ControlKind::SimpleOffset ? Vector::Ones(1) : convm_points(theta, TV, tol);
    if (!kind || *kind == ControlKind::VertexPolicy) {
        const Matrix& P = t.points[si];
        const Vector eta = convm_points(x, P, tol);
        Vector u = Vector::Zero(t.inputs[si].rows());
        for (Eigen::Index l = 0; l < P.cols(); ++l) {
            if (eta[l] == 0.0) continue;
            for (Eigen::Index j = 0; j < qt; ++j) u += eta[l] * mu[j] * t.inputs[si].col(l * qt + j);
        }
        return u;
    }
    // Offsets: membership of x still matters for the guarantees.
    convm_points(x, t.points[si], tol);
    const Vector fb = t.Kf * (x - t.z[si]);
    if (*kind == ControlKind::SimpleOffset) return t.offsets[si].col(0) + fb;
    Vector c = Vector::Zero(t.offsets[si].rows());
    for (Eigen::Index j = 0; j < qt; ++j) c += mu[j] * t.offsets[si].col(j);
    return c + fb;
}

void to_json(nlohmann::json& j, const Tube& t) {
    j = nlohmann::json::object();
    j["N"] = t.N;
    j["N0"] = t.N0;
    j["steps"] = nlohmann::json::array();
    for (int i = 0; i <= t.N; ++i) {
        const auto si = static_cast<std::size_t>(i);
        nlohmann::json e;
        e["step"] = i;
        if (t.homothetic(i)) {
            e["z"] = vector_to_json(t.z[si]);
            e["alpha"] = t.alpha[si];
        } else {
            e["points"] = matrix_to_json(t.points[si].transpose());
        }
        if (i < t.N) {
            e["kind"] = t.kinds[si] ? to_string(*t.kinds[si]) : "scenario";
            e["inputs"] = matrix_to_json(t.inputs[si].transpose());
            if (t.offsets[si].size()) e["offsets"] = matrix_to_json(t.offsets[si].transpose());
            e["stage_cost"] = t.stage_costs[si];
        }
        j["steps"].push_back(e);
    }
    j["terminal_gauge"] = t.terminal_gauge;
    j["value"] = t.value;
}

void to_json(nlohmann::json& j, const SynthesisReport& r) {
    j = nlohmann::json::object();
    j["status"] = to_string(r.status);
    j["value"] = r.status == SynthesisStatus::Optimal ? nlohmann::json(r.value) : nlohmann::json(nullptr);
    j["lp"] = {{"rows", r.stats.rows},
               {"cols", r.stats.cols},
               {"nonzeros", r.stats.nonzeros},
               {"control_dof", r.stats.control_dof},
               {"iterations", r.stats.iterations},
               {"build_ms", r.stats.build_ms},
               {"solve_ms", r.stats.solve_ms},
               {"backend", r.stats.backend}};
    if (!r.message.empty()) j["message"] = r.message;
    if (r.tube) j["tube"] = *r.tube;
}

}  // namespace hptmpc
