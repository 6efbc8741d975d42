// Command-line front end: terminal sets, single syntheses, closed-loop runs,
// DOA grids and the two worked examples.
//
// Exit codes: 0 ok, 2 infeasible, 3 validation error, 4 solver failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "hptmpc/analysis.hpp"
#include "hptmpc/errors.hpp"

using namespace hptmpc;
namespace fs = std::filesystem;

namespace {

int exit_code(ErrorKind k) {
    switch (k) {
        case ErrorKind::Infeasible:
        case ErrorKind::InfeasibleAtStep: return 2;
        case ErrorKind::SolverFailure:
        case ErrorKind::NoConvergence:
        case ErrorKind::RiccatiDivergence:
        case ErrorKind::NotContractive: return 4;
        default: return 3;
    }
}

Vector parse_vector(const std::string& s) {
    std::vector<double> v;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            v.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw Error(ErrorKind::InvalidInput, "bad number '" + item + "' in '" + s + "'");
        }
    }
    return Eigen::Map<Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

nlohmann::json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::InvalidInput, "cannot open " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::InvalidInput, path + ": " + e.what());
    }
}

TerminalData load_terminal(const std::string& path) {
    try {
        return read_json(path).get<TerminalData>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::InvalidInput, path + ": " + e.what());
    }
}

void write_json(const fs::path& p, const nlohmann::json& j) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p);
    if (!out) throw Error(ErrorKind::InvalidInput, "cannot write " + p.string());
    out << j.dump(2) << '\n';
}

struct Common {
    std::string model, structure, terminal, out = ".";
    std::string x0, theta, sched = "worst", backend = "ipm", emit_lp, fixtures = HPTMPC_FIXTURE_DIR;
    std::string method = "sweep";
    std::string designs = "1,2,3";
    double lambda = 0.0;
    int jobs = 1, grid = 0, steps = 40;
    std::uint64_t seed = 1;
    bool force_refine = false, no_doa = false;
};

Backend parse_backend(const std::string& s) {
    if (s == "ipm") return Backend::InteriorPoint;
    if (s == "simplex") return Backend::Simplex;
    throw Error(ErrorKind::InvalidInput, "unknown backend '" + s + "' (ipm | simplex)");
}

int cmd_terminal(const Common& c) {
    const nlohmann::json j = read_json(c.model);
    const LpvModel m = model_from_json(j);
    TerminalOptions o;
    if (j.contains("settings")) {
        const auto& st = j["settings"];
        if (st.contains("lambda")) o.lambda = st["lambda"].get<double>();
        if (st.contains("Q")) o.Q = matrix_from_json(st["Q"]);
        if (st.contains("R")) o.R = matrix_from_json(st["R"]);
    }
    if (c.lambda > 0.0) o.lambda = c.lambda;
    const TerminalData td = compute_terminal(m, o);
    write_json(fs::path(c.out) / "terminal.json", td);
    std::cout << nlohmann::json{{"vertices", td.Xf.num_vertices()},
                                {"volume", volume(td.Xf)},
                                {"lambda", td.lambda},
                                {"contraction", contraction_factor(m, td.Xf, td.Kf)},
                                {"Kf", matrix_to_json(td.Kf)}}
                     .dump(2)
              << '\n';
    return 0;
}

int cmd_synthesize(const Common& c) {
    const LpvModel m = load_model(c.model);
    const ParameterizationStructure s = load_structure(c.structure);
    const TerminalData td = load_terminal(c.terminal);
    const Vector x = parse_vector(c.x0);
    SchedulingTube tube;
    if (c.theta.empty()) {
        tube = worst_case_tube(m, s.N, std::nullopt);
    } else {
        tube = parse_scheduling(c.sched).build(m, s.N, parse_vector(c.theta), 0);
    }
    SynthesisOptions opt;
    opt.backend = parse_backend(c.backend);
    std::ofstream lp_out;
    if (!c.emit_lp.empty()) {
        lp_out.open(c.emit_lp);
        if (!lp_out) throw Error(ErrorKind::InvalidInput, "cannot write " + c.emit_lp);
        opt.emit_lp = &lp_out;
    }
    const SynthesisReport r = synthesize(m, x, tube, s, td, opt);
    write_json(fs::path(c.out) / "synthesis.json", r);
    const nlohmann::json j = r;
    std::cout << nlohmann::json{{"status", j["status"]}, {"value", j["value"]}, {"lp", j["lp"]}}.dump(2) << '\n';
    if (r.status == SynthesisStatus::Infeasible) return 2;
    if (r.status == SynthesisStatus::SolverFailure) return 4;
    return 0;
}

int cmd_simulate(const Common& c) {
    const LpvModel m = load_model(c.model);
    ControllerConfig cfg;
    cfg.structure = load_structure(c.structure);
    cfg.terminal = load_terminal(c.terminal);
    cfg.scheduling = parse_scheduling(c.sched);
    cfg.force_refine = c.force_refine;
    cfg.synthesis.backend = parse_backend(c.backend);
    ThetaGenerator gen;
    if (cfg.scheduling.kind == SchedulingRecipe::Kind::Rov) {
        gen.kind = ThetaGenerator::Kind::RovWalk;
        gen.dtheta = cfg.scheduling.dtheta;
    } else if (cfg.scheduling.kind == SchedulingRecipe::Kind::Nominal) {
        gen.kind = ThetaGenerator::Kind::Fixed;
        gen.sequence = cfg.scheduling.nominal;
    }
    std::string stopped;
    const SimulationTrace t = simulate(m, cfg, parse_vector(c.x0), gen, c.steps, c.seed, &stopped);
    fs::create_directories(c.out);
    {
        std::ofstream csv(fs::path(c.out) / "trace.csv");
        write_trace_csv(csv, t);
    }
    nlohmann::json summary = trace_summary(t);
    summary["stopped"] = stopped.empty() ? nlohmann::json(nullptr) : nlohmann::json(stopped);
    write_json(fs::path(c.out) / "summary.json", summary);
    std::cout << summary.dump(2) << '\n';
    if (!stopped.empty()) {
        std::cerr << stopped << '\n';
        return stopped.find(to_string(ErrorKind::SolverFailure)) == 0 ? 4
               : stopped.find(to_string(ErrorKind::Infeasible)) == 0 ? 2
                                                                      : 3;
    }
    return 0;
}

int cmd_doa(const Common& c) {
    const LpvModel m = load_model(c.model);
    const ParameterizationStructure s = load_structure(c.structure);
    const TerminalData td = load_terminal(c.terminal);
    DoaOptions o;
    o.jobs = c.jobs;
    o.backend = parse_backend(c.backend);
    if (c.method == "cell") {
        o.method = DoaMethod::PerCell;
    } else if (c.method != "sweep") {
        throw Error(ErrorKind::InvalidInput, "unknown DOA method '" + c.method + "' (sweep | cell)");
    }
    const int grid = c.grid > 0 ? c.grid : (m.nx() == 2 ? 61 : 31);
    const DoaEstimate d = estimate_doa(m, s, td, worst_case_tube(m, s.N, std::nullopt), grid, o);
    fs::create_directories(c.out);
    {
        std::ofstream csv(fs::path(c.out) / "doa.csv");
        write_doa_csv(csv, d);
    }
    write_json(fs::path(c.out) / "doa.json", d);
    std::cout << nlohmann::json{{"volume", d.volume}, {"feasible_cells", d.feasible_cells}, {"lp_solves", d.lp_solves}}.dump(2)
              << '\n';
    return 0;
}

int cmd_example(const Common& c, const std::string& id) {
    const fs::path out(c.out);
    std::vector<int> designs;
    for (double d : parse_vector(c.designs)) designs.push_back(static_cast<int>(d));
    ExampleOverrides ov;
    if (c.grid > 0) ov.grid = c.grid;
    ov.steps = c.steps;
    ov.seed = c.seed;
    ov.jobs = c.jobs;
    ov.doa = !c.no_doa;
    if (!c.x0.empty()) ov.x0 = parse_vector(c.x0);

    const ExampleSetup base = example_setup(id, designs.empty() ? 1 : designs.front(), c.fixtures);
    ov.terminal = compute_terminal(base.model, base.terminal);
    fs::create_directories(out);
    write_json(out / (id + "_terminal.json"), *ov.terminal);
    if (base.model.nx() == 2) {
        // Controlled invariant set with scheduling-independent inputs,
        // drawn under the design regions.
        write_json(out / (id + "_reference.json"), max_controlled_contractive_set(base.model, 1.0));
    }
    nlohmann::json table = nlohmann::json::array();
    for (int d : designs) {
        const ExampleReport r = run_example(id, d, c.fixtures, ov);
        write_example_artifacts(r, out);
        table.push_back(table_row(r));
        std::cout << table.back().dump() << std::endl;
    }
    write_json(out / (id + "_table.json"), table);
    if (!c.no_doa) emit_plots(out);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tube MPC for LPV systems with heterogeneous parameterizations"};
    app.require_subcommand(1);
    Common c;

    auto add_model = [&](CLI::App* s) { s->add_option("--model", c.model, "model JSON")->required()->check(CLI::ExistingFile); };
    auto add_synth = [&](CLI::App* s) {
        add_model(s);
        s->add_option("--structure", c.structure, "parameterization structure JSON")->required()->check(CLI::ExistingFile);
        s->add_option("--terminal", c.terminal, "terminal data JSON (from terminal-set)")->required()->check(CLI::ExistingFile);
        s->add_option("--backend", c.backend, "LP backend: ipm | simplex")->capture_default_str();
    };

    auto* term = app.add_subcommand("terminal-set", "contractive terminal set and gain");
    add_model(term);
    term->add_option("--lambda", c.lambda, "contraction factor (default: model settings or 0.95)");
    term->add_option("--out", c.out, "output directory")->capture_default_str();

    auto* syn = app.add_subcommand("synthesize", "optimal tube at one state");
    add_synth(syn);
    syn->add_option("--x0", c.x0, "state, comma separated")->required();
    syn->add_option("--theta", c.theta, "measured scheduling value; without it the tube is Theta^N");
    syn->add_option("--sched", c.sched, "worst | rov:<d,...> | nominal:<file>")->capture_default_str();
    syn->add_option("--emit-lp", c.emit_lp, "write the LP in text form to this file");
    syn->add_option("--out", c.out, "output directory")->capture_default_str();

    auto* sim = app.add_subcommand("simulate", "closed-loop simulation");
    add_synth(sim);
    sim->add_option("--x0", c.x0, "initial state, comma separated")->required();
    sim->add_option("--steps", c.steps, "number of steps")->capture_default_str();
    sim->add_option("--seed", c.seed, "scheduling sequence seed")->capture_default_str();
    sim->add_option("--sched", c.sched, "worst | rov:<d,...> | nominal:<file>")->capture_default_str();
    sim->add_flag("--force-refine", c.force_refine, "intersect non-refining tubes with the previous one");
    sim->add_option("--out", c.out, "output directory")->capture_default_str();

    auto* doa = app.add_subcommand("doa", "domain of attraction on a state grid (tube Theta^N)");
    add_synth(doa);
    doa->add_option("--grid", c.grid, "cells per axis (default 61 in 2-D, 31 otherwise)");
    doa->add_option("--jobs", c.jobs, "worker threads")->capture_default_str();
    doa->add_option("--method", c.method, "sweep | cell")->capture_default_str();
    doa->add_option("--out", c.out, "output directory")->capture_default_str();

    std::string example_id;
    auto* ex = app.add_subcommand("example", "reproduce a worked example");
    ex->add_option("id", example_id, "ex1 | ex2")->required();
    ex->add_option("--designs", c.designs, "comma separated subset of 1,2,3")->capture_default_str();
    ex->add_option("--grid", c.grid, "DOA cells per axis");
    ex->add_option("--jobs", c.jobs, "worker threads")->capture_default_str();
    ex->add_option("--seed", c.seed, "scheduling sequence seed")->capture_default_str();
    ex->add_option("--steps", c.steps, "closed-loop steps")->capture_default_str();
    ex->add_option("--x0", c.x0, "override the initial state");
    ex->add_flag("--no-doa", c.no_doa, "skip DOA estimation");
    ex->add_option("--fixtures", c.fixtures, "fixture directory")->capture_default_str();
    ex->add_option("--out", c.out, "output directory")->capture_default_str();

    auto* plots = app.add_subcommand("plots", "render SVGs from an output directory");
    plots->add_option("--out", c.out, "result directory")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 3;
    }

    try {
        if (*term) return cmd_terminal(c);
        if (*syn) return cmd_synthesize(c);
        if (*sim) return cmd_simulate(c);
        if (*doa) return cmd_doa(c);
        if (*ex) return cmd_example(c, example_id);
        if (*plots) {
            for (const auto& p : emit_plots(c.out)) std::cout << p.string() << '\n';
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
