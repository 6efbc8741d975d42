#pragma once

// Receding-horizon controller and closed-loop simulator. Each step builds a
// scheduling tube that starts at the measured theta, checks that it refines
// the previous one, synthesizes a tube and applies its first control.

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "hptmpc/scheduling.hpp"
#include "hptmpc/synthesis.hpp"

namespace hptmpc {

/// How the controller builds Theta_k from the measured theta(k).
struct SchedulingRecipe {
    enum class Kind { Worst, Rov, Nominal };
    Kind kind = Kind::Worst;
    Vector dtheta;               // Rov: rate bound per step
    std::vector<Vector> nominal;  // Nominal: trajectory indexed by absolute time
    Polytope delta;              // Nominal: band around it

    /// Theta_0 = {theta_now}; later sets from the recipe, shifted to time k.
    SchedulingTube build(const LpvModel& m, int N, const Vector& theta_now, int k, const Tolerances& tol = {}) const;
};

/// "worst", "rov:<d1,d2,...>" or "nominal:<file>" (JSON {"nominal": [[...]],
/// "delta": Polytope or box}).
SchedulingRecipe parse_scheduling(const std::string& spec);

struct ControllerConfig {
    ParameterizationStructure structure;
    TerminalData terminal;
    SchedulingRecipe scheduling;
    /// Intersect a non-refining tube with the previous one instead of failing.
    bool force_refine = false;
    SynthesisOptions synthesis;
};

struct StepResult {
    Vector u;
    double value = 0.0;
    /// ||Q x|| + ||R u|| at the applied pair.
    double stage = 0.0;
    double solve_ms = 0.0;
    SynthesisReport report;
};

class Controller {
public:
    Controller(LpvModel m, ControllerConfig cfg);

    /// One step at time k(): Theta_k from the recipe.
    StepResult step(const Vector& x, const Vector& theta);
    /// Same with a caller-supplied Theta_k (its first set must hold theta).
    StepResult step(const Vector& x, const Vector& theta, const SchedulingTube& tube);

    int k() const { return k_; }
    const SchedulingTube& previous_tube() const { return prev_; }
    const LpvModel& model() const { return m_; }
    const ControllerConfig& config() const { return cfg_; }

private:
    LpvModel m_;
    ControllerConfig cfg_;
    int k_ = 0;
    SchedulingTube prev_;  // Theta_{k-1}; Theta^N before the first step
};

struct ThetaGenerator {
    enum class Kind { Uniform, Fixed, RovWalk };
    Kind kind = Kind::Uniform;
    std::vector<Vector> sequence;  // Fixed
    Vector dtheta;                 // RovWalk: |theta(k+1) - theta(k)| <= dtheta
};

struct SimulationRecord {
    int k = 0;
    Vector x;
    Vector theta;
    Vector u;
    double value = 0.0;
    double stage = 0.0;
    double solve_ms = 0.0;
    bool feasible = true;
};

struct SimulationTrace {
    std::vector<SimulationRecord> records;
    Vector x_final;
    /// max_k (V_{k+1} - V_k + stage_k); <= 1e-6 certifies the decrease.
    double decrease_residual = -std::numeric_limits<double>::infinity();
    bool decrease_ok = true;
    double mean_solve_ms = 0.0;
    double max_solve_ms = 0.0;
};

/// Closed loop from x0 for T steps. Deterministic given the seed; step
/// errors propagate as StepError with their time index.
SimulationTrace simulate(const LpvModel& m, const ControllerConfig& cfg, const Vector& x0, const ThetaGenerator& gen,
                         int T, std::uint64_t seed);
/// Same, but a StepError ends the run: its message goes to *stopped and the
/// steps completed so far are returned.
SimulationTrace simulate(const LpvModel& m, const ControllerConfig& cfg, const Vector& x0, const ThetaGenerator& gen,
                         int T, std::uint64_t seed, std::string* stopped);

/// Scheduling values the generator produces for T steps (uniform and walk
/// sample the bounding box of Theta with rejection).
std::vector<Vector> generate_theta(const LpvModel& m, const ThetaGenerator& gen, int T, std::uint64_t seed);

/// Columns k, x..., theta..., u..., V, stage, solve_ms.
void write_trace_csv(std::ostream& os, const SimulationTrace& t);
nlohmann::json trace_summary(const SimulationTrace& t);

}  // namespace hptmpc
