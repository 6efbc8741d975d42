#include "hptmpc/control.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

#include "hptmpc/errors.hpp"

namespace hptmpc {

SchedulingTube SchedulingRecipe::build(const LpvModel& m, int N, const Vector& theta_now, int k,
                                       const Tolerances& tol) const {
    switch (kind) {
        case Kind::Worst: return worst_case_tube(m, N, theta_now, tol);
        case Kind::Rov: return rov_tube(m, theta_now, dtheta, N, tol);
        case Kind::Nominal: {
            if (static_cast<int>(nominal.size()) < k + N) {
                throw Error(ErrorKind::LengthMismatch, "nominal scheduling trajectory ends before step " + std::to_string(k + N - 1));
            }
            const std::vector<Vector> window(nominal.begin() + k, nominal.begin() + k + N);
            SchedulingTube t = nominal_tube(m, window, delta, N, tol);
            if (!m.Theta.contains(theta_now, tol.feas_tol)) {
                throw Error(ErrorKind::OutOfSchedulingSet, "theta lies outside the scheduling set");
            }
            t.sets[0] = Polytope::point(theta_now);
            return t;
        }
    }
    throw Error(ErrorKind::InvalidInput, "unknown scheduling recipe");
}

SchedulingRecipe parse_scheduling(const std::string& spec) {
    SchedulingRecipe r;
    if (spec == "worst") return r;
    const auto colon = spec.find(':');
    const std::string head = spec.substr(0, colon);
    const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
    if (head == "rov") {
        r.kind = SchedulingRecipe::Kind::Rov;
        std::vector<double> d;
        std::stringstream ss(arg);
        std::string item;
        while (std::getline(ss, item, ',')) {
            try {
                d.push_back(std::stod(item));
            } catch (const std::exception&) {
                throw Error(ErrorKind::InvalidInput, "bad rate bound '" + item + "'");
            }
        }
        if (d.empty()) throw Error(ErrorKind::InvalidInput, "rov needs a rate bound, e.g. rov:0.1,0.1");
        r.dtheta = Eigen::Map<Vector>(d.data(), static_cast<Eigen::Index>(d.size()));
        return r;
    }
    if (head == "nominal") {
        r.kind = SchedulingRecipe::Kind::Nominal;
        std::ifstream in(arg);
        if (!in) throw Error(ErrorKind::InvalidInput, "cannot open nominal scheduling file " + arg);
        try {
            const auto j = nlohmann::json::parse(in);
            for (const auto& v : j.at("nominal")) r.nominal.push_back(vector_from_json(v));
            r.delta = polytope_or_box(j.at("delta"));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::InvalidInput, std::string("malformed nominal scheduling file: ") + e.what());
        }
        return r;
    }
    throw Error(ErrorKind::InvalidInput, "unknown scheduling recipe '" + spec + "' (worst | rov:<d> | nominal:<file>)");
}

Controller::Controller(LpvModel m, ControllerConfig cfg) : m_(std::move(m)), cfg_(std::move(cfg)) {
    cfg_.structure.validate();
    prev_.sets.assign(static_cast<std::size_t>(cfg_.structure.N), m_.Theta);
}

StepResult Controller::step(const Vector& x, const Vector& theta) {
    SchedulingTube tube;
    try {
        tube = cfg_.scheduling.build(m_, cfg_.structure.N, theta, k_, cfg_.synthesis.tol);
    } catch (const StepError&) {
        throw;
    } catch (const Error& e) {
        throw StepError(e.kind(), k_, e.what());
    }
    return step(x, theta, tube);
}

StepResult Controller::step(const Vector& x, const Vector& theta, const SchedulingTube& tube_in) {
    const Tolerances& tol = cfg_.synthesis.tol;
    if (tube_in.N() != cfg_.structure.N) throw StepError(ErrorKind::LengthMismatch, k_, "scheduling tube length differs from N");
    if (!m_.X.contains(x, tol.feas_tol)) throw StepError(ErrorKind::InvalidInput, k_, "state outside X");
    if (!tube_in[0].contains(theta, tol.feas_tol)) {
        throw StepError(ErrorKind::OutOfSchedulingSet, k_, "measured theta is not in the first scheduling set");
    }
    SchedulingTube tube = tube_in;
    if (!refines(tube, prev_, tol)) {
        if (!cfg_.force_refine) {
            throw StepError(ErrorKind::RefinementViolation, k_, "scheduling tube does not refine the previous one");
        }
        try {
            tube = force_refine(tube, prev_, tol);
        } catch (const Error& e) {
            throw StepError(e.kind(), k_, e.what());
        }
    }

    StepResult r;
    try {
        r.report = synthesize(m_, x, tube, cfg_.structure, cfg_.terminal, cfg_.synthesis);
    } catch (const Error& e) {
        throw StepError(e.kind(), k_, e.what());
    }
    r.solve_ms = r.report.stats.build_ms + r.report.stats.solve_ms;
    if (r.report.status == SynthesisStatus::Infeasible) {
        // Past the first step a loss of feasibility breaks the guarantee.
        if (k_ > 0) throw StepError(ErrorKind::InfeasibleAtStep, k_, "synthesis became infeasible");
        throw StepError(ErrorKind::Infeasible, k_, "initial state is outside the domain of attraction");
    }
    if (r.report.status != SynthesisStatus::Optimal) throw StepError(ErrorKind::SolverFailure, k_, r.report.message);

    r.u = evaluate_controller(*r.report.tube, 0, x, theta, tol);
    r.value = r.report.value;
    const TerminalData& td = cfg_.terminal;
    r.stage = norm(td.Q * x, td.norm) + norm(td.R * r.u, td.norm);
    prev_ = std::move(tube);
    ++k_;
    return r;
}

namespace {

// Bounding box of Theta from its vertices.
std::pair<Vector, Vector> theta_box(const LpvModel& m) {
    const Matrix& V = m.Theta.vertices();
    return {V.rowwise().minCoeff(), V.rowwise().maxCoeff()};
}

Vector uniform_in(std::mt19937_64& rng, const Vector& lo, const Vector& hi) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Vector v(lo.size());
    for (Eigen::Index k = 0; k < v.size(); ++k) v[k] = lo[k] + u(rng) * (hi[k] - lo[k]);
    return v;
}

Vector uniform_theta(std::mt19937_64& rng, const LpvModel& m) {
    const auto [lo, hi] = theta_box(m);
    for (int tries = 0; tries < 10000; ++tries) {
        Vector th = uniform_in(rng, lo, hi);
        if (m.Theta.contains(th, 0.0)) return th;
    }
    throw Error(ErrorKind::InvalidInput, "could not sample the scheduling set");
}

}  // namespace

std::vector<Vector> generate_theta(const LpvModel& m, const ThetaGenerator& gen, int T, std::uint64_t seed) {
    std::vector<Vector> out;
    out.reserve(static_cast<std::size_t>(T));
    std::mt19937_64 rng(seed);
    switch (gen.kind) {
        case ThetaGenerator::Kind::Uniform:
            for (int k = 0; k < T; ++k) out.push_back(uniform_theta(rng, m));
            break;
        case ThetaGenerator::Kind::Fixed:
            if (static_cast<int>(gen.sequence.size()) < T) {
                throw Error(ErrorKind::LengthMismatch, "fixed scheduling sequence is shorter than the simulation");
            }
            out.assign(gen.sequence.begin(), gen.sequence.begin() + T);
            break;
        case ThetaGenerator::Kind::RovWalk: {
            if (gen.dtheta.size() != m.ntheta()) throw Error(ErrorKind::InvalidInput, "walk rate bound has the wrong size");
            Vector th = uniform_theta(rng, m);
            for (int k = 0; k < T; ++k) {
                out.push_back(th);
                for (int tries = 0; tries < 100; ++tries) {
                    const Vector next = th + uniform_in(rng, -gen.dtheta, gen.dtheta);
                    if (m.Theta.contains(next, 0.0)) {
                        th = next;
                        break;
                    }
                }
            }
            break;
        }
    }
    return out;
}

SimulationTrace simulate(const LpvModel& m, const ControllerConfig& cfg, const Vector& x0, const ThetaGenerator& gen,
                         int T, std::uint64_t seed) {
    return simulate(m, cfg, x0, gen, T, seed, nullptr);
}

SimulationTrace simulate(const LpvModel& m, const ControllerConfig& cfg, const Vector& x0, const ThetaGenerator& gen,
                         int T, std::uint64_t seed, std::string* stopped) {
    if (T < 0) throw Error(ErrorKind::InvalidInput, "number of steps must be nonnegative");
    const std::vector<Vector> thetas = generate_theta(m, gen, T, seed);
    Controller ctrl(m, cfg);
    SimulationTrace trace;
    Vector x = x0;
    for (int k = 0; k < T; ++k) {
        const Vector& th = thetas[static_cast<std::size_t>(k)];
        StepResult r;
        try {
            r = ctrl.step(x, th);
        } catch (const StepError& e) {
            if (!stopped) throw;
            *stopped = e.what();
            break;
        }
        trace.records.push_back({k, x, th, r.u, r.value, r.stage, r.solve_ms, true});
        x = m.image_point(x, th, r.u);
    }
    trace.x_final = x;
    double total = 0.0;
    for (std::size_t k = 0; k < trace.records.size(); ++k) {
        const SimulationRecord& rec = trace.records[k];
        total += rec.solve_ms;
        trace.max_solve_ms = std::max(trace.max_solve_ms, rec.solve_ms);
        if (k + 1 < trace.records.size()) {
            const double residual = trace.records[k + 1].value - rec.value + rec.stage;
            trace.decrease_residual = std::max(trace.decrease_residual, residual);
        }
    }
    if (!trace.records.empty()) trace.mean_solve_ms = total / static_cast<double>(trace.records.size());
    trace.decrease_ok = trace.decrease_residual <= 1e-6;
    return trace;
}

void write_trace_csv(std::ostream& os, const SimulationTrace& t) {
    if (t.records.empty()) {
        os << "k,V,stage,solve_ms\n";
        return;
    }
    const SimulationRecord& r0 = t.records.front();
    os << "k";
    for (Eigen::Index i = 0; i < r0.x.size(); ++i) os << ",x" << i + 1;
    for (Eigen::Index i = 0; i < r0.theta.size(); ++i) os << ",theta" << i + 1;
    for (Eigen::Index i = 0; i < r0.u.size(); ++i) os << ",u" << i + 1;
    os << ",V,stage,solve_ms\n";
    os << std::setprecision(17);
    for (const SimulationRecord& r : t.records) {
        os << r.k;
        for (Eigen::Index i = 0; i < r.x.size(); ++i) os << ',' << r.x[i];
        for (Eigen::Index i = 0; i < r.theta.size(); ++i) os << ',' << r.theta[i];
        for (Eigen::Index i = 0; i < r.u.size(); ++i) os << ',' << r.u[i];
        os << ',' << r.value << ',' << r.stage << ',' << std::setprecision(6) << r.solve_ms << std::setprecision(17) << '\n';
    }
}

nlohmann::json trace_summary(const SimulationTrace& t) {
    nlohmann::json j;
    j["steps"] = t.records.size();
    j["all_feasible"] = std::all_of(t.records.begin(), t.records.end(), [](const auto& r) { return r.feasible; });
    j["decrease_ok"] = t.decrease_ok;
    j["decrease_residual"] = t.records.size() > 1 ? nlohmann::json(t.decrease_residual) : nlohmann::json(nullptr);
    j["x_final"] = t.x_final.size() ? vector_to_json(t.x_final) : nlohmann::json(nullptr);
    j["x_final_inf_norm"] = t.x_final.size() ? t.x_final.lpNorm<Eigen::Infinity>() : 0.0;
    j["mean_solve_ms"] = t.mean_solve_ms;
    j["max_solve_ms"] = t.max_solve_ms;
    return j;
}

}  // namespace hptmpc
