#pragma once

// Scheduling tubes: horizon-indexed polytopic subsets of the scheduling set
// bounding the future scheduling trajectory.

#include <optional>
#include <vector>

#include "json.hpp"
#include "hptmpc/model.hpp"

namespace hptmpc {

struct SchedulingTube {
    std::vector<Polytope> sets;  // Theta_0 .. Theta_{N-1}, each with a vertex list

    int N() const { return static_cast<int>(sets.size()); }
    const Polytope& operator[](int i) const { return sets[static_cast<std::size_t>(i)]; }
};

/// {{theta_now}, Theta, ..., Theta}, or Theta^N without theta_now.
SchedulingTube worst_case_tube(const LpvModel& m, int N, const std::optional<Vector>& theta_now,
                               const Tolerances& tol = {});

/// Theta_i = (theta_now + [-i*dtheta, i*dtheta]) intersected with Theta.
SchedulingTube rov_tube(const LpvModel& m, const Vector& theta_now, const Vector& dtheta, int N,
                        const Tolerances& tol = {});

/// Theta_i = (nominal_i + Delta) intersected with Theta.
SchedulingTube nominal_tube(const LpvModel& m, const std::vector<Vector>& nominal, const Polytope& delta, int N,
                            const Tolerances& tol = {});

/// next refines prev: next_i is contained in prev_{i+1} for i = 0..N-2.
bool refines(const SchedulingTube& next, const SchedulingTube& prev, const Tolerances& tol = {});

/// Repairs a tube so that it refines prev by intersecting next_i with
/// prev_{i+1}. Throws EmptySchedulingSet when an intersection is empty.
SchedulingTube force_refine(const SchedulingTube& next, const SchedulingTube& prev, const Tolerances& tol = {});

void to_json(nlohmann::json& j, const SchedulingTube& t);
void from_json(const nlohmann::json& j, SchedulingTube& t);

}  // namespace hptmpc
