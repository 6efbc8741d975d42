#include "hptmpc/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "hptmpc/errors.hpp"

namespace hptmpc {

namespace fs = std::filesystem;

GridSpec GridSpec::over(const Polytope& X, int res_per_axis) {
    if (res_per_axis < 1) throw Error(ErrorKind::InvalidInput, "grid resolution must be positive");
    const Matrix& V = X.vertices();
    GridSpec g;
    g.lo = V.rowwise().minCoeff();
    g.hi = V.rowwise().maxCoeff();
    g.res.assign(static_cast<std::size_t>(V.rows()), res_per_axis);
    return g;
}

std::size_t GridSpec::cells() const {
    std::size_t n = 1;
    for (int r : res) n *= static_cast<std::size_t>(r);
    return n;
}

double GridSpec::cell_volume() const {
    double v = 1.0;
    for (int a = 0; a < dim(); ++a) v *= cell_width(a);
    return v;
}

std::size_t GridSpec::index(const std::vector<int>& multi) const {
    std::size_t idx = 0;
    for (int a = dim() - 1; a >= 0; --a) {
        idx = idx * static_cast<std::size_t>(res[static_cast<std::size_t>(a)]) +
              static_cast<std::size_t>(multi[static_cast<std::size_t>(a)]);
    }
    return idx;
}

std::vector<int> GridSpec::multi_index(std::size_t cell) const {
    std::vector<int> m(res.size());
    for (std::size_t a = 0; a < res.size(); ++a) {
        m[a] = static_cast<int>(cell % static_cast<std::size_t>(res[a]));
        cell /= static_cast<std::size_t>(res[a]);
    }
    return m;
}

Vector GridSpec::center(std::size_t cell) const {
    const std::vector<int> m = multi_index(cell);
    Vector c(dim());
    for (int a = 0; a < dim(); ++a) c[a] = center(a, m[static_cast<std::size_t>(a)]);
    return c;
}

bool DoaEstimate::origin_feasible() const {
    std::vector<int> m(grid.res.size());
    for (int a = 0; a < grid.dim(); ++a) {
        const double w = grid.cell_width(a);
        if (grid.lo[a] > 0.0 || grid.hi[a] < 0.0) return false;
        m[static_cast<std::size_t>(a)] = std::min(grid.res[static_cast<std::size_t>(a)] - 1,
                                                  static_cast<int>(std::floor((0.0 - grid.lo[a]) / w)));
    }
    return at(m);
}

bool DoaEstimate::centrally_symmetric() const {
    for (std::size_t c = 0; c < feasible.size(); ++c) {
        std::vector<int> m = grid.multi_index(c);
        for (std::size_t a = 0; a < m.size(); ++a) m[a] = grid.res[a] - 1 - m[a];
        if (feasible[c] != feasible[grid.index(m)]) return false;
    }
    return true;
}

namespace {

// Runs f(0..n-1) on up to `jobs` threads; the first exception is rethrown.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& f) {
    const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex mu;
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    f(i);
                } catch (...) {
                    std::lock_guard lock(mu);
                    if (!error) error = std::current_exception();
                    next = n;
                }
            }
        });
    }
    pool.clear();
    if (error) std::rethrow_exception(error);
}

enum class CellStatus { Feasible, Infeasible };

CellStatus cell_feasible(const LpvModel& m, const Vector& x, const ParameterizationStructure& s,
                         const TerminalData& td, const SchedulingTube& sched, const DoaOptions& opt) {
    if (!m.X.contains(x, opt.tol.feas_tol)) return CellStatus::Infeasible;
    const SynthesisLp lp = build_synthesis_lp(m, AffineVec::constant(x), sched, s, td, false, opt.tol);
    if (lp.trivially_infeasible) return CellStatus::Infeasible;
    const lp::Solution sol = solve_classified(lp.problem, opt.backend);
    if (sol.status == lp::Status::Optimal) return CellStatus::Feasible;
    if (sol.status == lp::Status::Infeasible) return CellStatus::Infeasible;
    throw Error(ErrorKind::SolverFailure, "feasibility LP failed at a grid cell");
}

// One sweep task: coordinates of axes > k are fixed (stored in `fixed`),
// axes 0..k are free and we look for the range of x_k.
struct SweepTask {
    int k;
    Vector fixed;
    std::vector<int> multi;  // grid indices of the fixed axes
};

struct Range {
    bool empty = true;
    double lo = 0.0;
    double hi = 0.0;
};

Range sweep_range(const LpvModel& m, const ParameterizationStructure& s, const TerminalData& td,
                  const SchedulingTube& sched, const SweepTask& t, const DoaOptions& opt) {
    AffineVec x;
    x.c = t.fixed;
    for (int a = 0; a <= t.k; ++a) x.terms.emplace_back(a, Vector::Unit(m.nx(), a));
    SynthesisLp built = build_synthesis_lp(m, x, sched, s, td, false, opt.tol, t.k + 1);
    Range r;
    if (built.trivially_infeasible) return r;
    double ends[2];
    for (int side = 0; side < 2; ++side) {
        built.problem.set_cost(t.k, side == 0 ? 1.0 : -1.0);
        const lp::Solution sol = solve_classified(built.problem, opt.backend);
        if (sol.status == lp::Status::Infeasible) return r;
        if (sol.status != lp::Status::Optimal) {
            std::ostringstream where;
            where << "DOA sweep LP (free axes 1.." << t.k + 1 << ", fixed " << t.fixed.transpose() << ") stopped with status "
                  << lp::to_string(sol.status);
            throw Error(ErrorKind::SolverFailure, where.str());
        }
        ends[side] = sol.x[static_cast<std::size_t>(t.k)];
    }
    r.empty = false;
    r.lo = ends[0];
    r.hi = ends[1];
    return r;
}

}  // namespace

DoaEstimate estimate_doa(const LpvModel& m, const ParameterizationStructure& s, const TerminalData& td,
                         const SchedulingTube& sched, int grid_res, const DoaOptions& opt) {
    return estimate_doa(m, s, td, sched, GridSpec::over(m.X, grid_res), opt);
}

DoaEstimate estimate_doa(const LpvModel& m, const ParameterizationStructure& s, const TerminalData& td,
                         const SchedulingTube& sched, const GridSpec& grid, const DoaOptions& opt) {
    s.validate();
    if (grid.dim() != m.nx()) throw Error(ErrorKind::InvalidInput, "grid dimension differs from the state dimension");
    if (sched.N() != s.N) throw Error(ErrorKind::LengthMismatch, "scheduling tube length differs from N");
    try {
        validate_implementability(m, s.theta_dependent());
    } catch (const Error& e) {
        throw Error(ErrorKind::ImplementabilityViolation, e.what());
    }

    DoaEstimate d;
    d.grid = grid;
    d.feasible.assign(grid.cells(), 0);
    d.structure = s;
    d.tube = sched;
    std::atomic<int> solves{0};

    if (opt.method == DoaMethod::PerCell) {
        d.method = "per-cell";
        parallel_for(grid.cells(), opt.jobs, [&](std::size_t c) {
            d.feasible[c] = cell_feasible(m, grid.center(c), s, td, sched, opt) == CellStatus::Feasible;
            ++solves;
        });
    } else {
        d.method = "sweep";
        const int n = grid.dim();
        std::vector<SweepTask> level{{n - 1, Vector::Zero(n), std::vector<int>(static_cast<std::size_t>(n), 0)}};
        while (!level.empty()) {
            std::vector<std::vector<SweepTask>> children(level.size());
            parallel_for(level.size(), opt.jobs, [&](std::size_t i) {
                const SweepTask& t = level[i];
                const Range r = sweep_range(m, s, td, sched, t, opt);
                solves += 2;
                if (r.empty) return;
                for (int j = 0; j < grid.res[static_cast<std::size_t>(t.k)]; ++j) {
                    const double c = grid.center(t.k, j);
                    if (c < r.lo - opt.boundary_tol || c > r.hi + opt.boundary_tol) continue;
                    SweepTask child{t.k - 1, t.fixed, t.multi};
                    child.fixed[t.k] = c;
                    child.multi[static_cast<std::size_t>(t.k)] = j;
                    if (t.k == 0) {
                        d.feasible[grid.index(child.multi)] = 1;
                    } else {
                        children[i].push_back(std::move(child));
                    }
                }
            });
            std::vector<SweepTask> next;
            for (auto& c : children) std::move(c.begin(), c.end(), std::back_inserter(next));
            level = std::move(next);
        }
    }
    d.lp_solves = solves;
    d.feasible_cells = static_cast<std::size_t>(std::count(d.feasible.begin(), d.feasible.end(), 1));
    d.volume = static_cast<double>(d.feasible_cells) * grid.cell_volume();
    return d;
}

bool bitmap_subset(const DoaEstimate& inner, const DoaEstimate& outer) {
    if (inner.feasible.size() != outer.feasible.size()) throw Error(ErrorKind::InvalidInput, "bitmaps on different grids");
    for (std::size_t c = 0; c < inner.feasible.size(); ++c) {
        if (inner.feasible[c] && !outer.feasible[c]) return false;
    }
    return true;
}

void to_json(nlohmann::json& j, const GridSpec& g) {
    j = {{"lo", vector_to_json(g.lo)}, {"hi", vector_to_json(g.hi)}, {"res", g.res}, {"cell_volume", g.cell_volume()}};
}

void to_json(nlohmann::json& j, const DoaEstimate& d) {
    // FNV-1a of the bitmap, for quick determinism comparisons.
    std::uint64_t h = 1469598103934665603ull;
    for (std::uint8_t b : d.feasible) h = (h ^ b) * 1099511628211ull;
    std::ostringstream hex;
    hex << std::hex << std::setw(16) << std::setfill('0') << h;
    j = {{"grid", d.grid},
         {"feasible_cells", d.feasible_cells},
         {"volume", d.volume},
         {"method", d.method},
         {"lp_solves", d.lp_solves},
         {"origin_feasible", d.origin_feasible()},
         {"centrally_symmetric", d.centrally_symmetric()},
         {"bitmap_fnv1a", hex.str()},
         {"structure", d.structure},
         {"tube", d.tube}};
}

void write_doa_csv(std::ostream& os, const DoaEstimate& d) {
    for (int a = 0; a < d.grid.dim(); ++a) os << 'x' << a + 1 << ',';
    os << "feasible\n" << std::setprecision(17);
    for (std::size_t c = 0; c < d.feasible.size(); ++c) {
        const Vector x = d.grid.center(c);
        for (Eigen::Index a = 0; a < x.size(); ++a) os << x[a] << ',';
        os << static_cast<int>(d.feasible[c]) << '\n';
    }
}

// ---------------------------------------------------------------------------

ExampleSetup example_setup(const std::string& id, int design, const fs::path& fixture_dir) {
    if (id != "ex1" && id != "ex2") throw Error(ErrorKind::InvalidInput, "unknown example '" + id + "' (ex1 | ex2)");
    if (design < 1 || design > 3) throw Error(ErrorKind::InvalidInput, "design must be 1, 2 or 3");
    const fs::path path = fixture_dir / (id + ".json");
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::MissingArtifacts, "fixture not found: " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::InvalidInput, path.string() + ": " + e.what());
    }

    ExampleSetup e;
    e.id = id;
    e.design = design;
    e.model = model_from_json(j);
    const auto& st = j.at("settings");
    const int N = st.at("N").get<int>();
    e.terminal.lambda = st.at("lambda").get<double>();
    e.terminal.Q = matrix_from_json(st.at("Q"));
    e.terminal.R = matrix_from_json(st.at("R"));
    e.x0 = vector_from_json(st.at("x0"));
    e.grid = e.model.nx() == 2 ? 61 : 31;

    using PS = ParameterizationStructure;
    if (design == 1) {
        e.structure = PS::homothetic(N, ControlKind::VertexPolicy);
    } else if (design == 2) {
        e.structure = PS::homothetic(N, ControlKind::SimpleOffset);
    } else if (id == "ex1") {
        e.structure = PS{N, {{true, {}, 3}, {false, ControlKind::VertexPolicy, 6}, {false, ControlKind::SimpleOffset, N}}};
    } else {
        e.structure = PS{N, {{true, {}, 4}, {false, ControlKind::SimpleOffset, N}}};
    }
    e.structure.validate();
    return e;
}

ExampleReport run_example(const std::string& id, int design, const fs::path& fixture_dir, const ExampleOverrides& ov) {
    ExampleReport r;
    r.setup = example_setup(id, design, fixture_dir);
    if (ov.x0) r.setup.x0 = *ov.x0;
    if (ov.grid) r.setup.grid = *ov.grid;
    const LpvModel& m = r.setup.model;
    const ParameterizationStructure& s = r.setup.structure;
    r.terminal = ov.terminal ? *ov.terminal : compute_terminal(m, r.setup.terminal);
    r.dof = degrees_of_freedom(s, m.Theta.num_vertices(), r.terminal.Xf.num_vertices());

    if (ov.doa) {
        DoaOptions o;
        o.jobs = ov.jobs;
        r.doa = estimate_doa(m, s, r.terminal, worst_case_tube(m, s.N, std::nullopt), r.setup.grid, o);
    }

    ControllerConfig cfg;
    cfg.structure = s;
    cfg.terminal = r.terminal;
    std::string stopped;
    r.trace = simulate(m, cfg, r.setup.x0, {}, ov.steps, ov.seed, &stopped);
    if (!stopped.empty()) r.simulation_error = stopped;
    return r;
}

nlohmann::json table_row(const ExampleReport& r) {
    nlohmann::json j = {{"example", r.setup.id},
                        {"design", r.setup.design},
                        {"N", r.setup.structure.N},
                        {"N0", r.setup.structure.N0()},
                        {"dof", r.dof},
                        {"terminal_vertices", r.terminal.Xf.num_vertices()},
                        {"doa_volume", r.doa ? nlohmann::json(r.doa->volume) : nlohmann::json(nullptr)},
                        {"doa_grid", r.doa ? nlohmann::json(r.setup.grid) : nlohmann::json(nullptr)},
                        {"avg_solve_ms", r.trace.mean_solve_ms},
                        {"max_solve_ms", r.trace.max_solve_ms},
                        {"steps", r.trace.records.size()}};
    j["simulation_error"] = r.simulation_error ? nlohmann::json(*r.simulation_error) : nlohmann::json(nullptr);
    return j;
}

namespace {

void write_file(const fs::path& p, const std::function<void(std::ostream&)>& f) {
    std::ofstream out(p);
    if (!out) throw Error(ErrorKind::InvalidInput, "cannot write " + p.string());
    f(out);
}

}  // namespace

void write_example_artifacts(const ExampleReport& r, const fs::path& dir) {
    fs::create_directories(dir);
    const std::string stem = r.setup.id + "_d" + std::to_string(r.setup.design);
    nlohmann::json rep = {{"row", table_row(r)},
                          {"structure", r.setup.structure},
                          {"terminal", r.terminal},
                          {"x0", vector_to_json(r.setup.x0)},
                          {"simulation", trace_summary(r.trace)}};
    if (r.doa) rep["doa"] = *r.doa;
    write_file(dir / (stem + "_report.json"), [&](std::ostream& os) { os << rep.dump(2) << '\n'; });
    write_file(dir / (stem + "_trace.csv"), [&](std::ostream& os) { write_trace_csv(os, r.trace); });
    if (r.doa) {
        write_file(dir / (stem + "_doa.csv"), [&](std::ostream& os) { write_doa_csv(os, *r.doa); });
        write_file(dir / (stem + "_doa.json"), [&](std::ostream& os) { os << nlohmann::json(*r.doa).dump(2) << '\n'; });
    }
}

// ---------------------------------------------------------------------------
// Plots

namespace {

struct Bitmap {
    int design = 0;
    Vector lo, hi;
    std::vector<int> res;
    std::vector<std::uint8_t> cells;
    double volume = 0.0;
};

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(item);
    return out;
}

Bitmap read_bitmap(const fs::path& csv, const fs::path& summary) {
    Bitmap b;
    std::ifstream js(summary);
    if (!js) throw Error(ErrorKind::MissingArtifacts, "missing " + summary.string());
    const auto j = nlohmann::json::parse(js);
    b.lo = vector_from_json(j.at("grid").at("lo"));
    b.hi = vector_from_json(j.at("grid").at("hi"));
    b.res = j.at("grid").at("res").get<std::vector<int>>();
    b.volume = j.at("volume").get<double>();
    std::ifstream in(csv);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        b.cells.push_back(static_cast<std::uint8_t>(line.back() == '1'));
    }
    std::size_t expect = 1;
    for (int r : b.res) expect *= static_cast<std::size_t>(r);
    if (b.cells.size() != expect) throw Error(ErrorKind::MissingArtifacts, csv.string() + " is incomplete");
    return b;
}

// Maps state coordinates (x1, x2) into a square SVG canvas.
struct Canvas {
    double x0, x1, y0, y1;
    double size = 480.0, margin = 40.0;
    double sx(double x) const { return margin + (x - x0) / (x1 - x0) * size; }
    double sy(double y) const { return margin + (y1 - y) / (y1 - y0) * size; }

    void begin(std::ostream& os, const std::string& title) const {
        const double w = size + 2 * margin;
        os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << w + 20
           << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
           << "<rect x=\"" << margin << "\" y=\"" << margin << "\" width=\"" << size << "\" height=\"" << size
           << "\" fill=\"white\" stroke=\"black\"/>\n"
           << "<text x=\"" << margin << "\" y=\"" << margin - 12 << "\">" << title << "</text>\n"
           << "<text x=\"" << margin << "\" y=\"" << margin + size + 16 << "\">x1 in [" << x0 << ", " << x1
           << "], x2 in [" << y0 << ", " << y1 << "]</text>\n";
    }
};

const char* kColors[] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e"};

// Feasible cells of a 2-D mask as horizontal runs.
void draw_mask(std::ostream& os, const Canvas& cv, const Bitmap& b, const std::vector<std::uint8_t>& mask,
               const std::string& color, double opacity) {
    const double w = (b.hi[0] - b.lo[0]) / b.res[0];
    const double h = (b.hi[1] - b.lo[1]) / b.res[1];
    os << "<g fill=\"" << color << "\" fill-opacity=\"" << opacity << "\">\n";
    for (int j = 0; j < b.res[1]; ++j) {
        int i = 0;
        while (i < b.res[0]) {
            if (!mask[static_cast<std::size_t>(j * b.res[0] + i)]) {
                ++i;
                continue;
            }
            int e = i;
            while (e < b.res[0] && mask[static_cast<std::size_t>(j * b.res[0] + e)]) ++e;
            const double xa = b.lo[0] + i * w, xb = b.lo[0] + e * w;
            const double ya = b.lo[1] + j * h, yb = ya + h;
            os << "<rect x=\"" << cv.sx(xa) << "\" y=\"" << cv.sy(yb) << "\" width=\"" << cv.sx(xb) - cv.sx(xa)
               << "\" height=\"" << cv.sy(ya) - cv.sy(yb) << "\"/>\n";
            i = e;
        }
    }
    os << "</g>\n";
}

// (x1, x2) footprint: a cell is set when any cell above it is feasible.
std::vector<std::uint8_t> project12(const Bitmap& b) {
    const std::size_t plane = static_cast<std::size_t>(b.res[0]) * static_cast<std::size_t>(b.res[1]);
    std::vector<std::uint8_t> out(plane, 0);
    for (std::size_t c = 0; c < b.cells.size(); ++c) out[c % plane] |= b.cells[c];
    return out;
}

}  // namespace

std::vector<fs::path> emit_plots(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw Error(ErrorKind::MissingArtifacts, "no result directory " + dir.string());
    std::map<std::string, std::vector<Bitmap>> doas;
    std::vector<fs::path> traces;
    std::vector<fs::path> entries;
    for (const auto& e : fs::directory_iterator(dir)) entries.push_back(e.path());
    std::sort(entries.begin(), entries.end());
    for (const fs::path& p : entries) {
        const std::string name = p.filename().string();
        const auto ends_with = [&](const std::string& suf) {
            return name.size() > suf.size() && name.compare(name.size() - suf.size(), suf.size(), suf) == 0;
        };
        if (ends_with("_doa.csv")) {
            const std::string stem = name.substr(0, name.size() - 8);
            const auto d = stem.rfind("_d");
            if (d == std::string::npos) continue;
            Bitmap b = read_bitmap(p, dir / (stem + "_doa.json"));
            b.design = std::atoi(stem.c_str() + d + 2);
            doas[stem.substr(0, d)].push_back(std::move(b));
        } else if (ends_with("_trace.csv")) {
            traces.push_back(p);
        }
    }
    if (doas.empty() && traces.empty()) throw Error(ErrorKind::MissingArtifacts, "nothing to plot in " + dir.string());

    std::vector<fs::path> written;
    for (auto& [id, maps] : doas) {
        // Largest region first so the smaller ones stay visible on top.
        std::sort(maps.begin(), maps.end(), [](const Bitmap& a, const Bitmap& b) { return a.volume > b.volume; });
        const Bitmap& ref = maps.front();
        Canvas cv{ref.lo[0], ref.hi[0], ref.lo[1], ref.hi[1]};
        const bool planar = ref.res.size() == 2;
        const fs::path out = dir / (id + (planar ? "_doa.svg" : "_doa_x1x2.svg"));
        std::ofstream os(out);
        cv.begin(os, id + (planar ? " domains of attraction" : " domains of attraction, (x1, x2) projection"));
        const fs::path refp = dir / (id + "_reference.json");
        if (std::ifstream rin(refp); rin) {
            Polytope P;
            from_json(nlohmann::json::parse(rin), P);
            const Matrix& V = P.vertices();
            // Order the vertices by angle around their mean for drawing.
            const Vector c = V.rowwise().mean();
            std::vector<int> order(static_cast<std::size_t>(V.cols()));
            for (std::size_t k = 0; k < order.size(); ++k) order[k] = static_cast<int>(k);
            std::sort(order.begin(), order.end(), [&](int a, int b) {
                return std::atan2(V(1, a) - c[1], V(0, a) - c[0]) < std::atan2(V(1, b) - c[1], V(0, b) - c[0]);
            });
            os << "<polygon fill=\"#dddddd\" stroke=\"#555555\" points=\"";
            for (int k : order) os << cv.sx(V(0, k)) << ',' << cv.sy(V(1, k)) << ' ';
            os << "\"/>\n";
        }
        int legend = 0;
        for (const Bitmap& b : maps) {
            const std::string color = kColors[static_cast<std::size_t>(b.design) % 5];
            draw_mask(os, cv, b, planar ? b.cells : project12(b), color, 0.55);
            os << "<text x=\"" << cv.margin + 8 << "\" y=\"" << cv.margin + 16 + 14 * legend++ << "\" fill=\"" << color
               << "\">design " << b.design << ": volume " << b.volume << "</text>\n";
        }
        os << "</svg>\n";
        written.push_back(out);
    }

    for (const fs::path& p : traces) {
        std::ifstream in(p);
        std::string header;
        std::getline(in, header);
        const auto cols = split(header, ',');
        const auto ix = std::find(cols.begin(), cols.end(), "x1");
        const auto iy = std::find(cols.begin(), cols.end(), "x2");
        if (ix == cols.end() || iy == cols.end()) continue;
        std::vector<std::pair<double, double>> pts;
        std::string line;
        while (std::getline(in, line)) {
            const auto f = split(line, ',');
            pts.emplace_back(std::stod(f[static_cast<std::size_t>(ix - cols.begin())]),
                             std::stod(f[static_cast<std::size_t>(iy - cols.begin())]));
        }
        if (pts.empty()) continue;
        double x0 = 0, x1 = 0, y0 = 0, y1 = 0;
        for (auto [x, y] : pts) {
            x0 = std::min(x0, x), x1 = std::max(x1, x), y0 = std::min(y0, y), y1 = std::max(y1, y);
        }
        const double pad = 0.05 * std::max({x1 - x0, y1 - y0, 1e-6});
        Canvas cv{x0 - pad, x1 + pad, y0 - pad, y1 + pad};
        fs::path out = p;
        out.replace_extension(".svg");
        std::ofstream os(out);
        cv.begin(os, p.stem().string() + " state trajectory");
        os << "<polyline fill=\"none\" stroke=\"#1b9e77\" stroke-width=\"1.5\" points=\"";
        for (auto [x, y] : pts) os << cv.sx(x) << ',' << cv.sy(y) << ' ';
        os << "\"/>\n<circle cx=\"" << cv.sx(pts.front().first) << "\" cy=\"" << cv.sy(pts.front().second)
           << "\" r=\"4\" fill=\"#d95f02\"/>\n</svg>\n";
        written.push_back(out);
    }
    return written;
}

}  // namespace hptmpc
