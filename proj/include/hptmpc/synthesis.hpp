#pragma once

// Tube synthesis under heterogeneous parameterization structures: a scenario
// tree over the first N0 steps followed by a homothetic tail
// X_i = z_i + alpha_i * Xf, whose controls are one of three affine/vertex
// families. Everything reduces to a single LP.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "hptmpc/lp.hpp"
#include "hptmpc/scheduling.hpp"
#include "hptmpc/terminal.hpp"

namespace hptmpc {

/// Control families on homothetic steps, ordered by expressiveness.
enum class ControlKind {
    SimpleOffset,  // c_i + Kf (x - z_i)
    ThetaOffset,   // sum_j mu_j c_i^(j) + Kf (x - z_i)
    VertexPolicy,  // vertex inputs u^(l,j), interpolated
};

const char* to_string(ControlKind kind);
ControlKind parse_control_kind(const std::string& s);
/// Control and scheduling dependence: every kind but SimpleOffset uses theta.
bool theta_dependent(ControlKind kind);

struct Segment {
    bool scenario = false;
    ControlKind control = ControlKind::SimpleOffset;  // homothetic segments only
    int until = 0;                                    // exclusive end step
};

struct ParameterizationStructure {
    int N = 0;
    std::vector<Segment> segments;

    /// Length of the scenario prefix (0 when there is none).
    int N0() const;
    bool scenario_step(int i) const { return i < N0(); }
    /// Control kind of homothetic step i (InvalidInput on scenario steps).
    ControlKind control(int i) const;
    /// Some step uses scheduling-dependent controls.
    bool theta_dependent() const;

    /// Throws InvalidInput: contiguous segments ending at N, scenario only
    /// as a prefix, N >= 2 with a scenario part, and homothetic kinds
    /// non-increasing in expressiveness along the tail.
    void validate() const;

    static ParameterizationStructure homothetic(int N, ControlKind kind);
    static ParameterizationStructure scenario(int N);
};

void to_json(nlohmann::json& j, const ParameterizationStructure& s);
void from_json(const nlohmann::json& j, ParameterizationStructure& s);
ParameterizationStructure load_structure(const std::string& path);

/// round(log q_f / log q_theta) + 2, half-up.
int n0_heuristic(int q_f, int q_theta);

/// Control degrees of freedom (in units of n_u scalars) for a singleton first
/// cross section and scheduling set: scenario step i gives q_theta^i,
/// homothetic step 0 gives 1, later ones 1 / q_theta / q_theta * q_f.
long long degrees_of_freedom(const ParameterizationStructure& s, int q_theta, int q_f);

struct Tube {
    int N = 0;
    int N0 = 0;
    /// Cross-section vertex points per step 0..N (columns). Scenario steps
    /// hold tree nodes in path order (child of node n via vertex j is
    /// n * q_theta(i) + j); homothetic steps hold z_i + alpha_i * v_l.
    std::vector<Matrix> points;
    /// Homothetic parameters; empty z / alpha = 0 on scenario steps.
    std::vector<Vector> z;
    std::vector<double> alpha;
    /// Vertex inputs per step 0..N-1, column l * q_theta(i) + j.
    std::vector<Matrix> inputs;
    /// Offsets of SimpleOffset (1 column) / ThetaOffset (q_theta columns) steps.
    std::vector<Matrix> offsets;
    std::vector<std::optional<ControlKind>> kinds;  // nullopt on scenario steps
    std::vector<Polytope> theta;                    // Theta_0 .. Theta_{N-1}
    Polytope Xf;
    Matrix Kf;
    std::vector<double> stage_costs;
    double terminal_gauge = 0.0;
    double value = 0.0;

    /// Whether step i's cross section is a homothetic copy of Xf.
    bool homothetic(int i) const { return z[static_cast<std::size_t>(i)].size() > 0; }
};

enum class SynthesisStatus { Optimal, Infeasible, SolverFailure };
const char* to_string(SynthesisStatus s);

struct LpStats {
    int rows = 0;
    int cols = 0;
    std::size_t nonzeros = 0;
    long long control_dof = 0;  // in units of n_u scalars
    int iterations = 0;
    double build_ms = 0.0;
    double solve_ms = 0.0;
    std::string backend;
};

struct SynthesisReport {
    SynthesisStatus status = SynthesisStatus::SolverFailure;
    std::optional<Tube> tube;
    LpStats stats;
    double value = 0.0;
    std::string message;
};

enum class Backend { InteriorPoint, Simplex };

struct SynthesisOptions {
    Tolerances tol{};
    Backend backend = Backend::InteriorPoint;
    /// Re-check the tube invariants after solving (throws SolverFailure).
    bool verify = true;
    /// When set, the LP is dumped here in plain text before solving.
    std::ostream* emit_lp = nullptr;
};

/// Affine vector expression c + sum_k x_{var_k} * col_k in LP variables.
struct AffineVec {
    Vector c;
    std::vector<std::pair<int, Vector>> terms;

    static AffineVec constant(const Vector& v) { return {v, {}}; }
    Vector eval(const std::vector<double>& x) const;
};

/// The synthesis LP with the bookkeeping needed to read a tube back.
struct SynthesisLp {
    lp::Problem problem;
    /// Set while building when a constant row is violated (x outside X).
    bool trivially_infeasible = false;
    long long control_dof = 0;

    // Step-indexed layouts (see Tube).
    std::vector<std::vector<AffineVec>> points;  // per step, per vertex
    std::vector<std::vector<AffineVec>> inputs;  // per step, column l * q + j
    std::vector<std::vector<AffineVec>> offsets;
    std::vector<std::optional<AffineVec>> z;
    std::vector<int> alpha;  // variable index or -1
    std::vector<int> stage;  // epigraph variables s_i (or -1 without cost)
    int terminal = -1;       // t
};

/// Builds the LP for an initial state given as an affine expression (the
/// DOA sweep passes states with free coordinates). The first `reserved` LP
/// variables are left free for such expressions. With with_cost = false the
/// stage-cost epigraphs are omitted and the objective is zero.
SynthesisLp build_synthesis_lp(const LpvModel& m, const AffineVec& x, const SchedulingTube& tube,
                               const ParameterizationStructure& s, const TerminalData& td, bool with_cost,
                               const Tolerances& tol = {}, int reserved = 0);

/// Solves the LP and classifies non-optimal outcomes by a phase-1 LP.
lp::Solution solve_classified(const lp::Problem& p, Backend backend);

/// V(x, tube | s): optimal tube and value. Throws ImplementabilityViolation
/// when the structure would make the synthesis non-convex for m.
SynthesisReport synthesize(const LpvModel& m, const Vector& x, const SchedulingTube& tube,
                           const ParameterizationStructure& s, const TerminalData& td,
                           const SynthesisOptions& opt = {});

/// Throws SolverFailure describing the first violated tube invariant.
void verify_tube(const LpvModel& m, const Tube& t, const Tolerances& tol = {});

/// Control law of step i at (x, theta); x in X_i, theta in Theta_i.
Vector evaluate_controller(const Tube& t, int i, const Vector& x, const Vector& theta, const Tolerances& tol = {});

void to_json(nlohmann::json& j, const Tube& t);
void to_json(nlohmann::json& j, const SynthesisReport& r);

}  // namespace hptmpc
