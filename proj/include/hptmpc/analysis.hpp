#pragma once

// Domain-of-attraction estimation on a state grid, reproduction of the two
// worked examples and the plot/data artifacts behind them.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "hptmpc/control.hpp"

namespace hptmpc {

/// Axis-aligned box split into res[a] equal cells per axis. Cells are
/// indexed with axis 0 varying fastest; a cell is represented by its centre.
struct GridSpec {
    Vector lo;
    Vector hi;
    std::vector<int> res;

    static GridSpec over(const Polytope& X, int res_per_axis);

    int dim() const { return static_cast<int>(res.size()); }
    std::size_t cells() const;
    double cell_width(int axis) const { return (hi[axis] - lo[axis]) / res[static_cast<std::size_t>(axis)]; }
    double cell_volume() const;
    double center(int axis, int i) const { return lo[axis] + (i + 0.5) * cell_width(axis); }
    Vector center(std::size_t cell) const;
    std::size_t index(const std::vector<int>& multi) const;
    std::vector<int> multi_index(std::size_t cell) const;
};

enum class DoaMethod {
    /// Nested sweep: the domain is convex, so for fixed trailing coordinates
    /// two LPs over the leading ones give the feasible range of the next
    /// coordinate. Exact up to LP tolerance at the cell centres.
    Sweep,
    /// One phase-1 feasibility LP per cell centre.
    PerCell,
};

struct DoaOptions {
    DoaMethod method = DoaMethod::Sweep;
    int jobs = 1;
    Backend backend = Backend::InteriorPoint;
    Tolerances tol{};
    /// Centres within this distance outside a swept range still count.
    double boundary_tol = 1e-9;
};

struct DoaEstimate {
    GridSpec grid;
    std::vector<std::uint8_t> feasible;  // one entry per cell
    std::size_t feasible_cells = 0;
    double volume = 0.0;
    nlohmann::json structure;
    nlohmann::json tube;
    std::string method;
    int lp_solves = 0;

    bool at(const std::vector<int>& multi) const { return feasible[grid.index(multi)] != 0; }
    /// Cell containing the origin (the centre cell for symmetric odd grids).
    bool origin_feasible() const;
    /// Bitmap invariant under x -> -x on the grid.
    bool centrally_symmetric() const;
};

DoaEstimate estimate_doa(const LpvModel& m, const ParameterizationStructure& s, const TerminalData& td,
                         const SchedulingTube& sched, int grid_res, const DoaOptions& opt = {});
DoaEstimate estimate_doa(const LpvModel& m, const ParameterizationStructure& s, const TerminalData& td,
                         const SchedulingTube& sched, const GridSpec& grid, const DoaOptions& opt = {});

/// Every feasible cell of `inner` is feasible in `outer` (same grid).
bool bitmap_subset(const DoaEstimate& inner, const DoaEstimate& outer);

void to_json(nlohmann::json& j, const GridSpec& g);
/// Summary without the bitmap.
void to_json(nlohmann::json& j, const DoaEstimate& d);
/// Columns x1..xn, feasible; one row per cell.
void write_doa_csv(std::ostream& os, const DoaEstimate& d);

// ---------------------------------------------------------------------------
// Worked examples

/// Configuration of one design of a worked example, read from the fixture's
/// "settings" block (N, Q, R, lambda, x0).
struct ExampleSetup {
    std::string id;
    int design = 0;
    LpvModel model;
    ParameterizationStructure structure;
    TerminalOptions terminal;
    Vector x0;
    int grid = 0;  // default DOA resolution per axis
};

/// id is "ex1" or "ex2"; design 1 (vertex control everywhere), 2 (simple
/// offsets everywhere) or 3 (scenario prefix, then the cheaper tail).
ExampleSetup example_setup(const std::string& id, int design, const std::filesystem::path& fixture_dir);

struct ExampleOverrides {
    std::optional<int> grid;
    int steps = 40;
    std::uint64_t seed = 1;
    int jobs = 1;
    bool doa = true;
    std::optional<Vector> x0;
    /// Shared across the designs of one example to avoid recomputing.
    std::optional<TerminalData> terminal;
};

struct ExampleReport {
    ExampleSetup setup;
    TerminalData terminal;
    long long dof = 0;
    std::optional<DoaEstimate> doa;
    SimulationTrace trace;
    /// Set when the closed loop stopped early; the trace holds the steps run.
    std::optional<std::string> simulation_error;
};

ExampleReport run_example(const std::string& id, int design, const std::filesystem::path& fixture_dir,
                          const ExampleOverrides& ov = {});

/// Table row {DOA vol, DOF, avg/max solve ms} plus context.
nlohmann::json table_row(const ExampleReport& r);

/// Writes <id>_d<design>_{report.json,doa.csv,doa.json,trace.csv} into dir.
void write_example_artifacts(const ExampleReport& r, const std::filesystem::path& dir);

/// Renders SVGs from artifacts in dir: a DOA overlay per 2-D example
/// (optionally with <id>_reference.json, a polytope drawn underneath), an
/// (x1, x2) projection per higher-dimensional example and a trajectory plot
/// per trace. Returns the files written; MissingArtifacts when dir holds
/// nothing to plot.
std::vector<std::filesystem::path> emit_plots(const std::filesystem::path& dir);

}  // namespace hptmpc
