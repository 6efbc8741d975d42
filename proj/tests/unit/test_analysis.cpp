#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "hptmpc/analysis.hpp"
#include "hptmpc/errors.hpp"
#include "../support/builders.hpp"

using namespace hptmpc;
using namespace hptmpc::testing;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = HPTMPC_FIXTURE_DIR;

const ExampleSetup& setup(int d) {
    static const ExampleSetup s[3] = {example_setup("ex1", 1, kFixtures), example_setup("ex1", 2, kFixtures),
                                      example_setup("ex1", 3, kFixtures)};
    return s[d - 1];
}

const TerminalData& td1() {
    static const TerminalData td = compute_terminal(setup(1).model, setup(1).terminal);
    return td;
}

DoaEstimate doa(int d, int res, DoaMethod method = DoaMethod::Sweep) {
    const ExampleSetup& e = setup(d);
    DoaOptions o;
    o.method = method;
    return estimate_doa(e.model, e.structure, td1(), worst_case_tube(e.model, e.structure.N, std::nullopt), res, o);
}

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an error");
    return ErrorKind::InvalidInput;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("hptmpc_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("grid indexing") {
    GridSpec g;
    g.lo = vec({-1.0, -2.0, 0.0});
    g.hi = vec({1.0, 2.0, 3.0});
    g.res = {4, 5, 3};
    CHECK(g.cells() == 60);
    CHECK(g.cell_volume() == doctest::Approx(0.5 * 0.8 * 1.0));
    for (std::size_t c = 0; c < g.cells(); ++c) CHECK(g.index(g.multi_index(c)) == c);
    CHECK(g.index({1, 0, 0}) == 1);
    CHECK(g.index({0, 1, 0}) == 4);
    CHECK(g.center(g.index({3, 4, 2})).isApprox(vec({0.75, 1.6, 2.5})));

    const GridSpec x = GridSpec::over(setup(1).model.X, 61);
    CHECK(x.lo.isApprox(vec({-6.0, -6.0})));
    CHECK(x.center(0, 30) == 0.0);
    CHECK(kind_of([] { GridSpec::over(setup(1).model.X, 0); }) == ErrorKind::InvalidInput);
}

TEST_CASE("a single cell at the origin") {
    const DoaEstimate d = doa(2, 1);
    CHECK(d.feasible_cells == 1);
    CHECK(d.volume == doctest::Approx(144.0));
    CHECK(d.origin_feasible());
}

TEST_CASE("sweep and per-cell evaluation agree") {
    for (auto [design, res] : {std::pair{2, 15}, std::pair{1, 7}}) {
        CAPTURE(design);
        const DoaEstimate a = doa(design, res);
        const DoaEstimate b = doa(design, res, DoaMethod::PerCell);
        CHECK(a.feasible == b.feasible);
        CHECK(a.lp_solves < b.lp_solves);
        CHECK(b.lp_solves == res * res);
    }
}

TEST_CASE("DOA bitmaps: origin, symmetry, bounds and design containment") {
    const DoaEstimate d1 = doa(1, 21), d2 = doa(2, 21), d3 = doa(3, 21);
    for (const DoaEstimate* d : {&d1, &d2, &d3}) {
        CHECK(d->origin_feasible());
        CHECK(d->centrally_symmetric());
        CHECK(d->volume > 0.0);
        CHECK(d->volume <= 144.0);
    }
    CHECK(bitmap_subset(d2, d1));
    CHECK(bitmap_subset(d1, d3));
    CHECK(d2.volume < d1.volume);
    CHECK(d1.volume <= d3.volume);
}

TEST_CASE("grid refinement changes the volume little") {
    const double coarse = doa(2, 31).volume;
    const double fine = doa(2, 61).volume;
    CHECK(std::abs(coarse - fine) / fine <= 0.10);
}

TEST_CASE("the shifted state (-4, 2) lies in the grid domains as computed") {
    // The cell containing (-4, 2) on the 61 grid agrees with a direct
    // synthesis at its centre.
    const DoaEstimate d = doa(2, 61);
    const std::vector<int> cell{static_cast<int>((-4.0 + 6.0) / (12.0 / 61)), static_cast<int>((2.0 + 6.0) / (12.0 / 61))};
    const Vector x = d.grid.center(d.grid.index(cell));
    const ExampleSetup& e = setup(2);
    const SynthesisReport r = synthesize(e.model, x, worst_case_tube(e.model, e.structure.N, std::nullopt), e.structure, td1());
    CHECK(d.at(cell) == (r.status == SynthesisStatus::Optimal));
}

TEST_CASE("one-dimensional sweep") {
    const LpvModel m = scalar_model(1.2, 0.1, 1.0, 10.0, 1.0);
    TerminalOptions o;
    o.lambda = 0.9;
    const TerminalData td = compute_terminal(m, o);
    const auto s = ParameterizationStructure::homothetic(3, ControlKind::SimpleOffset);
    const auto tube = worst_case_tube(m, 3, std::nullopt);
    const DoaEstimate a = estimate_doa(m, s, td, tube, 41);
    DoaOptions cell;
    cell.method = DoaMethod::PerCell;
    const DoaEstimate b = estimate_doa(m, s, td, tube, 41, cell);
    CHECK(a.feasible == b.feasible);
    CHECK(a.centrally_symmetric());
    CHECK(a.origin_feasible());
    CHECK(a.feasible_cells < 41);
}

TEST_CASE("DOA argument checks") {
    const ExampleSetup& e = setup(2);
    CHECK(kind_of([&] { estimate_doa(e.model, e.structure, td1(), worst_case_tube(e.model, 4, std::nullopt), 5); }) ==
          ErrorKind::LengthMismatch);
    GridSpec g = GridSpec::over(e.model.X, 5);
    g.res.push_back(3);
    g.lo = vec({-6.0, -6.0, 0.0});
    g.hi = vec({6.0, 6.0, 1.0});
    CHECK(kind_of([&] { estimate_doa(e.model, e.structure, td1(), worst_case_tube(e.model, 10, std::nullopt), g); }) ==
          ErrorKind::InvalidInput);
}

TEST_CASE("example setups") {
    // Degrees of freedom with the terminal-set size of the reference tables.
    CHECK(degrees_of_freedom(setup(1).structure, 8, 10) == 721);
    CHECK(degrees_of_freedom(setup(2).structure, 8, 10) == 10);
    CHECK(degrees_of_freedom(setup(3).structure, 8, 10) == 317);
    const ExampleSetup e2[3] = {example_setup("ex2", 1, kFixtures), example_setup("ex2", 2, kFixtures),
                                example_setup("ex2", 3, kFixtures)};
    CHECK(degrees_of_freedom(e2[0].structure, 4, 48) == 1345);
    CHECK(degrees_of_freedom(e2[1].structure, 4, 48) == 8);
    CHECK(degrees_of_freedom(e2[2].structure, 4, 48) == 89);
    CHECK(e2[2].structure.N0() == 4);
    CHECK(e2[0].terminal.lambda == 0.98);
    CHECK(e2[0].terminal.R(0, 0) == 5.0);
    CHECK(e2[0].grid == 31);
    CHECK(setup(1).grid == 61);
    CHECK(setup(1).x0.isApprox(vec({1.0, 1.0})));

    CHECK(kind_of([] { example_setup("ex3", 1, kFixtures); }) == ErrorKind::InvalidInput);
    CHECK(kind_of([] { example_setup("ex1", 4, kFixtures); }) == ErrorKind::InvalidInput);
    CHECK(kind_of([] { example_setup("ex1", 1, "/nonexistent"); }) == ErrorKind::MissingArtifacts);
}

TEST_CASE("example run, artifacts and plots") {
    const fs::path dir = fresh_dir("example");
    CHECK(kind_of([&] { emit_plots(dir); }) == ErrorKind::MissingArtifacts);
    CHECK(kind_of([&] { emit_plots(dir / "missing"); }) == ErrorKind::MissingArtifacts);

    ExampleOverrides ov;
    ov.grid = 11;
    ov.steps = 5;
    ov.x0 = vec({0.5, 0.5});
    ov.terminal = td1();
    const ExampleReport r = run_example("ex1", 2, kFixtures, ov);
    CHECK(r.dof == degrees_of_freedom(setup(2).structure, 8, td1().Xf.num_vertices()));
    REQUIRE(r.doa);
    CHECK(r.doa->grid.res == std::vector<int>{11, 11});
    CHECK_FALSE(r.simulation_error);
    CHECK(r.trace.records.size() == 5);
    const auto row = table_row(r);
    CHECK(row.at("dof") == 10);
    CHECK(row.at("doa_volume").get<double>() == r.doa->volume);
    CHECK(row.contains("avg_solve_ms"));
    CHECK(row.contains("max_solve_ms"));

    write_example_artifacts(r, dir);
    for (const char* f : {"ex1_d2_report.json", "ex1_d2_trace.csv", "ex1_d2_doa.csv", "ex1_d2_doa.json"}) {
        CHECK(fs::exists(dir / f));
    }
    std::ifstream trace(dir / "ex1_d2_trace.csv");
    std::string header;
    std::getline(trace, header);
    CHECK(std::count(header.begin(), header.end(), ',') + 1 == 1 + 2 + 3 + 1 + 3);

    std::ifstream doa_csv(dir / "ex1_d2_doa.csv");
    int lines = 0;
    for (std::string l; std::getline(doa_csv, l);) ++lines;
    CHECK(lines == 1 + 121);

    const auto files = emit_plots(dir);
    CHECK(std::find(files.begin(), files.end(), dir / "ex1_doa.svg") != files.end());
    CHECK(std::find(files.begin(), files.end(), dir / "ex1_d2_trace.svg") != files.end());
    std::ifstream svg(dir / "ex1_doa.svg");
    std::stringstream ss;
    ss << svg.rdbuf();
    CHECK(ss.str().find("<svg") == 0);
    CHECK(ss.str().find("design 2") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("an initially infeasible example run is reported, not thrown") {
    ExampleOverrides ov;
    ov.doa = false;
    ov.steps = 3;
    ov.x0 = vec({5.9, 5.9});
    ov.terminal = td1();
    const ExampleReport r = run_example("ex1", 2, kFixtures, ov);
    REQUIRE(r.simulation_error);
    CHECK(r.simulation_error->find("Infeasible") == 0);
    CHECK(r.trace.records.empty());
    CHECK_FALSE(r.doa);
}
