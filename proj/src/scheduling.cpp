#include "hptmpc/scheduling.hpp"

#include "hptmpc/errors.hpp"

namespace hptmpc {

namespace {

void require_member(const LpvModel& m, const Vector& theta, const Tolerances& tol) {
    if (theta.size() != m.ntheta()) throw Error(ErrorKind::InvalidInput, "scheduling vector has the wrong size");
    if (!m.Theta.contains(theta, tol.feas_tol)) throw Error(ErrorKind::OutOfSchedulingSet, "theta lies outside the scheduling set");
}

void require_horizon(int N) {
    if (N < 1) throw Error(ErrorKind::InvalidInput, "scheduling tube length must be positive");
}

Polytope clipped(const Polytope& p, const LpvModel& m, const Tolerances& tol) {
    auto r = intersect(p, m.Theta, tol);
    if (!r) throw Error(ErrorKind::EmptySchedulingSet, "scheduling set intersection is empty");
    return *r;
}

}  // namespace

SchedulingTube worst_case_tube(const LpvModel& m, int N, const std::optional<Vector>& theta_now, const Tolerances& tol) {
    require_horizon(N);
    SchedulingTube t;
    t.sets.assign(static_cast<std::size_t>(N), m.Theta);
    if (theta_now) {
        require_member(m, *theta_now, tol);
        t.sets[0] = Polytope::point(*theta_now);
    }
    return t;
}

SchedulingTube rov_tube(const LpvModel& m, const Vector& theta_now, const Vector& dtheta, int N, const Tolerances& tol) {
    require_horizon(N);
    require_member(m, theta_now, tol);
    if (dtheta.size() != m.ntheta() || dtheta.minCoeff() < 0.0) {
        throw Error(ErrorKind::InvalidInput, "rate bound must be a nonnegative vector of size n_theta");
    }
    SchedulingTube t;
    t.sets.push_back(Polytope::point(theta_now));
    for (int i = 1; i < N; ++i) {
        const Vector r = static_cast<double>(i) * dtheta;
        t.sets.push_back(clipped(Polytope::box(theta_now - r, theta_now + r), m, tol));
    }
    return t;
}

SchedulingTube nominal_tube(const LpvModel& m, const std::vector<Vector>& nominal, const Polytope& delta, int N,
                            const Tolerances& tol) {
    require_horizon(N);
    if (static_cast<int>(nominal.size()) < N) throw Error(ErrorKind::LengthMismatch, "nominal scheduling sequence is shorter than N");
    if (delta.dim() != m.ntheta()) throw Error(ErrorKind::InvalidInput, "band polytope has the wrong dimension");
    SchedulingTube t;
    for (int i = 0; i < N; ++i) {
        const Vector& c = nominal[static_cast<std::size_t>(i)];
        require_member(m, c, tol);
        t.sets.push_back(clipped(scale_translate(delta, 1.0, c), m, tol));
    }
    return t;
}

bool refines(const SchedulingTube& next, const SchedulingTube& prev, const Tolerances& tol) {
    if (next.N() != prev.N()) throw Error(ErrorKind::LengthMismatch, "scheduling tubes have different lengths");
    for (int i = 0; i + 1 < next.N(); ++i) {
        const Polytope& outer = prev[i + 1];
        if (outer.has_hrep()) {
            if (!includes(next[i], outer, tol.feas_tol)) return false;
            continue;
        }
        for (int v = 0; v < next[i].num_vertices(); ++v) {
            if (!outer.contains(next[i].vertex(v), tol.feas_tol)) return false;
        }
    }
    return true;
}

SchedulingTube force_refine(const SchedulingTube& next, const SchedulingTube& prev, const Tolerances& tol) {
    if (next.N() != prev.N()) throw Error(ErrorKind::LengthMismatch, "scheduling tubes have different lengths");
    SchedulingTube out = next;
    for (int i = 0; i + 1 < next.N(); ++i) {
        auto r = intersect(next[i], prev[i + 1], tol);
        if (!r) throw Error(ErrorKind::EmptySchedulingSet, "forced refinement produced an empty set at step " + std::to_string(i));
        out.sets[static_cast<std::size_t>(i)] = *r;
    }
    return out;
}

void to_json(nlohmann::json& j, const SchedulingTube& t) {
    j = nlohmann::json::object();
    j["N"] = t.N();
    j["sets"] = nlohmann::json::array();
    for (const Polytope& p : t.sets) j["sets"].push_back(p);
}

void from_json(const nlohmann::json& j, SchedulingTube& t) {
    t.sets.clear();
    for (const auto& s : j.at("sets")) {
        Polytope p = s.get<Polytope>();
        if (!p.has_vrep()) {
            auto v = vertices_of(p);
            if (!v) throw Error(ErrorKind::EmptySchedulingSet, "scheduling tube contains an empty set");
            p = *v;
        }
        t.sets.push_back(std::move(p));
    }
    if (j.contains("N") && j["N"].get<int>() != t.N()) throw Error(ErrorKind::LengthMismatch, "tube N does not match its set count");
}

}  // namespace hptmpc
