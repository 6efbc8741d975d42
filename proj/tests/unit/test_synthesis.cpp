#include <functional>
#include <random>
#include <sstream>

#include "doctest.h"
#include "hptmpc/errors.hpp"
#include "hptmpc/synthesis.hpp"
#include "../support/builders.hpp"
#include "../support/nominal_mpc.hpp"

using namespace hptmpc;
using namespace hptmpc::testing;

namespace {

using PS = ParameterizationStructure;

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an error");
    return ErrorKind::InvalidInput;
}

const LpvModel& ex1() {
    static const LpvModel m = load_model(fixture("ex1.json"));
    return m;
}

const TerminalData& ex1_terminal() {
    static const TerminalData td = [] {
        TerminalOptions o;
        o.lambda = 0.95;
        return compute_terminal(ex1(), o);
    }();
    return td;
}

PS mixed(int N, int n0, int vertex_until) {
    PS s{N, {Segment{true, {}, n0}}};
    if (vertex_until > n0) s.segments.push_back({false, ControlKind::VertexPolicy, vertex_until});
    if (N > vertex_until) s.segments.push_back({false, ControlKind::SimpleOffset, N});
    return s;
}

PS design(int d, int N) {
    if (d == 1) return PS::homothetic(N, ControlKind::VertexPolicy);
    if (d == 2) return PS::homothetic(N, ControlKind::SimpleOffset);
    return mixed(N, 3, 6);
}

double value_of(const SynthesisReport& r) {
    REQUIRE(r.status == SynthesisStatus::Optimal);
    return r.value;
}

SchedulingTube singleton_tube(const Vector& theta, int N) {
    SchedulingTube t;
    for (int i = 0; i < N; ++i) t.sets.push_back(Polytope::point(theta));
    return t;
}

// Uniform point of the scheduling box.
Vector random_theta(std::mt19937& rng, const LpvModel& m) {
    const Matrix& V = m.Theta.vertices();
    Vector lo = V.rowwise().minCoeff();
    Vector hi = V.rowwise().maxCoeff();
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Vector th(lo.size());
    for (Eigen::Index k = 0; k < th.size(); ++k) th[k] = lo[k] + u(rng) * (hi[k] - lo[k]);
    return th;
}

// Random convex combination of the columns of P.
Vector random_in_hull(std::mt19937& rng, const Matrix& P) {
    std::exponential_distribution<double> e(1.0);
    Vector w(P.cols());
    for (Eigen::Index k = 0; k < w.size(); ++k) w[k] = e(rng);
    return P * (w / w.sum());
}

}  // namespace

TEST_CASE("N0 heuristic") {
    CHECK(n0_heuristic(8, 8) == 3);
    CHECK(n0_heuristic(10, 8) == 3);
    CHECK(n0_heuristic(48, 4) == 5);
    CHECK(n0_heuristic(2, 4) == 3);  // round(0.5) + 2, half-up
    CHECK(kind_of([] { n0_heuristic(1, 4); }) == ErrorKind::InvalidInput);
}

TEST_CASE("degrees of freedom of the example designs") {
    CHECK(degrees_of_freedom(design(1, 10), 8, 10) == 721);
    CHECK(degrees_of_freedom(design(2, 10), 8, 10) == 10);
    CHECK(degrees_of_freedom(design(3, 10), 8, 10) == 317);
    CHECK(degrees_of_freedom(PS::homothetic(8, ControlKind::VertexPolicy), 4, 48) == 1345);
    CHECK(degrees_of_freedom(PS::homothetic(8, ControlKind::SimpleOffset), 4, 48) == 8);
    // 1 + 4 + 16 + 64 scenario inputs, then four offsets.
    CHECK(degrees_of_freedom(mixed(8, 4, 4), 4, 48) == 89);
    CHECK(degrees_of_freedom(PS::homothetic(3, ControlKind::ThetaOffset), 4, 48) == 1 + 4 + 4);
    CHECK(degrees_of_freedom(PS::scenario(3), 2, 5) == 1 + 2 + 4);
}

TEST_CASE("structure validation") {
    CHECK_NOTHROW(design(3, 10).validate());
    PS scenario_late{6, {{false, ControlKind::VertexPolicy, 2}, {true, {}, 6}}};
    CHECK(kind_of([&] { scenario_late.validate(); }) == ErrorKind::InvalidInput);
    PS richer_later{6, {{false, ControlKind::SimpleOffset, 3}, {false, ControlKind::VertexPolicy, 6}}};
    CHECK(kind_of([&] { richer_later.validate(); }) == ErrorKind::InvalidInput);
    PS theta_then_simple{6, {{false, ControlKind::ThetaOffset, 3}, {false, ControlKind::SimpleOffset, 6}}};
    CHECK_NOTHROW(theta_then_simple.validate());
    PS short_cover{6, {{false, ControlKind::SimpleOffset, 5}}};
    CHECK(kind_of([&] { short_cover.validate(); }) == ErrorKind::InvalidInput);
    CHECK(kind_of([] { PS::scenario(1).validate(); }) == ErrorKind::InvalidInput);
    CHECK_NOTHROW(PS::homothetic(1, ControlKind::SimpleOffset).validate());
}

TEST_CASE("structure JSON") {
    const auto j = nlohmann::json::parse(R"({"N": 10, "segments": [
        {"kind":"scenario","until":3},
        {"kind":"homothetic","control":"vertex","until":6},
        {"kind":"homothetic","control":"simple","until":10}]})");
    const PS s = j.get<PS>();
    CHECK(s.N == 10);
    CHECK(s.N0() == 3);
    CHECK(s.control(4) == ControlKind::VertexPolicy);
    CHECK(s.control(9) == ControlKind::SimpleOffset);
    CHECK(s.theta_dependent());
    CHECK(nlohmann::json(s) == j);
    CHECK_FALSE(design(2, 4).theta_dependent());
    const auto bad = nlohmann::json::parse(R"({"N": 4, "segments": [{"kind":"tree","until":4}]})");
    CHECK(kind_of([&] { bad.get<PS>(); }) == ErrorKind::InvalidInput);
}

TEST_CASE("origin gives the zero tube") {
    const LpvModel& m = ex1();
    const TerminalData& td = ex1_terminal();
    for (int d : {1, 2, 3}) {
        const PS s = design(d, 8);
        const SynthesisReport r = synthesize(m, Vector::Zero(2), worst_case_tube(m, 8, Vector::Zero(3)), s, td);
        REQUIRE(r.status == SynthesisStatus::Optimal);
        CHECK(std::abs(r.value) <= 1e-7);
        const Tube& t = *r.tube;
        for (int i = 0; i < t.N; ++i) {
            CHECK(t.inputs[static_cast<std::size_t>(i)].lpNorm<Eigen::Infinity>() <= 1e-7);
            CHECK(t.alpha[static_cast<std::size_t>(i)] <= 1e-7);
        }
    }
}

TEST_CASE("frozen scheduling and pure scenario reduce to nominal MPC") {
    const LpvModel& m = ex1();
    const TerminalData& td = ex1_terminal();
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    const int N = 6;
    int compared = 0;
    for (int trial = 0; trial < 8; ++trial) {
        const Vector x{{u(rng), u(rng)}};
        const Vector th = random_theta(rng, m);
        const auto ref = oracle::nominal_mpc_value(m, th, x, N, td.Xf, td.Q, td.R, td.cost_coeff);
        const SynthesisReport r = synthesize(m, x, singleton_tube(th, N), PS::scenario(N), td);
        REQUIRE(ref.has_value() == (r.status == SynthesisStatus::Optimal));
        if (!ref) continue;
        ++compared;
        CHECK(r.value == doctest::Approx(*ref).epsilon(1e-6));
    }
    CHECK(compared >= 4);
}

TEST_CASE("simplex and interior point agree") {
    const LpvModel& m = ex1();
    const TerminalData& td = ex1_terminal();
    const Vector x{{0.8, -0.4}};
    const SchedulingTube tube = worst_case_tube(m, 4, Vector::Zero(3));
    SynthesisOptions simplex;
    simplex.backend = Backend::Simplex;
    const double a = value_of(synthesize(m, x, tube, design(2, 4), td));
    const double b = value_of(synthesize(m, x, tube, design(2, 4), td, simplex));
    CHECK(a == doctest::Approx(b).epsilon(1e-7));
}

TEST_CASE("vertex sufficiency of the interpolated controllers") {
    const LpvModel& m = ex1();
    const TerminalData& td = ex1_terminal();
    std::mt19937 rng(11);
    const Tolerances tol;
    const PS s{7, {{true, {}, 2}, {false, ControlKind::VertexPolicy, 4}, {false, ControlKind::ThetaOffset, 5},
                   {false, ControlKind::SimpleOffset, 7}}};
    const SynthesisReport r = synthesize(m, Vector{{1.0, 1.0}}, worst_case_tube(m, 7, Vector{{0.2, -0.5, 0.1}}), s, td);
    REQUIRE(r.status == SynthesisStatus::Optimal);
    const Tube& t = *r.tube;
    const double slack = 1e-6;
    for (int i = 0; i < t.N; ++i) {
        const auto si = static_cast<std::size_t>(i);
        for (int k = 0; k < 200; ++k) {
            const Vector x = random_in_hull(rng, t.points[si]);
            const Vector th = random_in_hull(rng, t.theta[si].vertices());
            const Vector u = evaluate_controller(t, i, x, th, tol);
            CHECK(m.U.contains(u, slack));
            const Vector img = m.image_point(x, th, u);
            CHECK(m.X.contains(img, slack));
            if (t.homothetic(i + 1)) {
                CHECK((t.Xf.H() * (img - t.z[si + 1]) - t.alpha[si + 1] * t.Xf.h()).maxCoeff() <= slack);
            } else {
                CHECK_NOTHROW(convm_points(img, t.points[si + 1], Tolerances{1e-6, 1e-9, 1e-6}));
            }
        }
    }
}

TEST_CASE("controller at vertices and centers") {
    const LpvModel& m = ex1();
    const TerminalData& td = ex1_terminal();
    const Vector th0{{0.3, 0.3, -0.2}};
    const PS s{5, {{false, ControlKind::VertexPolicy, 3}, {false, ControlKind::SimpleOffset, 5}}};
    const SynthesisReport r = synthesize(m, Vector{{1.0, 0.5}}, worst_case_tube(m, 5, th0), s, td);
    REQUIRE(r.status == SynthesisStatus::Optimal);
    const Tube& t = *r.tube;
    // Step 1 is a vertex policy on a homothetic set.
    const Matrix& TV = t.theta[1].vertices();
    const Eigen::Index qt = TV.cols();
    if (t.alpha[1] > 1e-3) {
        for (Eigen::Index l : {Eigen::Index{0}, t.points[1].cols() - 1}) {
            for (Eigen::Index j : {Eigen::Index{0}, qt - 1}) {
                const Vector u = evaluate_controller(t, 1, t.points[1].col(l), TV.col(j));
                CHECK((u - t.inputs[1].col(l * qt + j)).lpNorm<Eigen::Infinity>() <= 1e-7);
            }
        }
    }
    // Step 4 uses a single offset: at the center the law returns it.
    CHECK((evaluate_controller(t, 4, t.z[4], TV.col(0)) - t.offsets[4].col(0)).lpNorm<Eigen::Infinity>() <= 1e-12);
    // Step 0 sits on the singleton {x} and the measured theta.
    const Vector u0 = evaluate_controller(t, 0, Vector{{1.0, 0.5}}, th0);
    CHECK((u0 - t.inputs[0].col(0)).lpNorm<Eigen::Infinity>() <= 1e-9);
    CHECK(kind_of([&] { evaluate_controller(t, 0, Vector{{1.5, 0.5}}, th0); }) == ErrorKind::NotMember);
}

TEST_CASE("value is sub-homogeneous along rays") {
    const LpvModel& m = ex1();
    const TerminalData& td = ex1_terminal();
    const SchedulingTube tube = worst_case_tube(m, 6, Vector{{0.5, -0.5, 0.0}});
    for (int d : {1, 2, 3}) {
        const PS s = d == 3 ? mixed(6, 2, 4) : design(d, 6);
        const Vector x{{1.0, 1.0}};
        const double v = value_of(synthesize(m, x, tube, s, td));
        for (double a : {0.25, 0.5, 0.75}) {
            CHECK(value_of(synthesize(m, a * x, tube, s, td)) <= a * v + 1e-6);
        }
    }
}

TEST_CASE("smaller scheduling tubes never cost more") {
    const LpvModel& m = ex1();
    const TerminalData& td = ex1_terminal();
    const Vector th{{0.2, -0.1, 0.4}};
    const int N = 6;
    const PS s = mixed(N, 2, 4);
    const Vector x{{-1.0, 1.2}};
    SchedulingTube frozen;
    for (int i = 0; i < N; ++i) frozen.sets.push_back(Polytope::point(th));
    const double vf = value_of(synthesize(m, x, frozen, s, td));
    const double vr = value_of(synthesize(m, x, rov_tube(m, th, Vector::Constant(3, 0.1), N), s, td));
    const double vw = value_of(synthesize(m, x, worst_case_tube(m, N, th), s, td));
    CHECK(vf <= vr + 1e-6);
    CHECK(vr <= vw + 1e-6);
}

TEST_CASE("offset feasibility implies vertex-policy feasibility") {
    const LpvModel& m = ex1();
    const TerminalData& td = ex1_terminal();
    const int N = 6;
    const SchedulingTube tube = worst_case_tube(m, N, std::nullopt);
    int feasible = 0;
    for (double x1 : {-2.0, -1.0, 0.5, 1.5}) {
        for (double x2 : {-1.0, -0.3, 0.3, 1.0}) {
            const Vector x{{x1, x2}};
            const SynthesisReport simple = synthesize(m, x, tube, design(2, N), td);
            if (simple.status != SynthesisStatus::Optimal) continue;
            ++feasible;
            const SynthesisReport vertex = synthesize(m, x, tube, design(1, N), td);
            CHECK(vertex.status == SynthesisStatus::Optimal);
            CHECK(vertex.value <= simple.value + 1e-6);
        }
    }
    CHECK(feasible >= 3);
}

TEST_CASE("infeasible states are classified") {
    const LpvModel& m = ex1();
    const TerminalData& td = ex1_terminal();
    const SchedulingTube tube = worst_case_tube(m, 6, Vector::Zero(3));
    // Inside X but drifting out faster than one bounded input can brake.
    const SynthesisReport r = synthesize(m, Vector{{5.5, 5.5}}, tube, design(1, 6), td);
    CHECK(r.status == SynthesisStatus::Infeasible);
    CHECK_FALSE(r.tube.has_value());
    // Outside X altogether.
    CHECK(synthesize(m, Vector{{7.0, 0.0}}, tube, design(2, 6), td).status == SynthesisStatus::Infeasible);
}

TEST_CASE("scheduling-dependent inputs need a separating partition") {
    // Input gain varies with theta_1; the state matrix with theta_2.
    LpvModel m;
    m.A = {mat({{1.1, 0.2}, {0.0, 0.9}}), mat({{0.0, 0.0}, {0.0, 0.0}}), mat({{0.1, 0.0}, {0.0, 0.1}})};
    m.B = {mat({{0.0}, {1.0}}), mat({{0.0}, {0.2}}), mat({{0.0}, {0.0}})};
    m.X = Polytope::box(vec({-5, -5}), vec({5, 5}));
    m.U = interval(-1, 1);
    m.Theta = Polytope::box(vec({-1, -1}), vec({1, 1}));
    TerminalOptions o;
    o.lambda = 0.95;
    const TerminalData td = compute_terminal(m, o);
    const SchedulingTube tube = worst_case_tube(m, 4, Vector::Zero(2));
    const Vector x{{0.5, -0.5}};
    const PS vertex = PS::homothetic(4, ControlKind::VertexPolicy);
    CHECK(kind_of([&] { synthesize(m, x, tube, vertex, td); }) == ErrorKind::ImplementabilityViolation);
    CHECK(synthesize(m, x, tube, PS::homothetic(4, ControlKind::SimpleOffset), td).status == SynthesisStatus::Optimal);

    m.partition = std::make_pair(1, 1);
    const SynthesisReport r = synthesize(m, x, tube, vertex, td);
    REQUIRE(r.status == SynthesisStatus::Optimal);
    // Vertices of Theta_1 differing only in theta_1 share their inputs.
    const Tube& t = *r.tube;
    const Matrix& TV = t.theta[1].vertices();
    const Eigen::Index qt = TV.cols();
    for (Eigen::Index a = 0; a < qt; ++a) {
        for (Eigen::Index b = 0; b < qt; ++b) {
            if (std::abs(TV(1, a) - TV(1, b)) > 1e-12) continue;
            for (Eigen::Index l = 0; l < t.points[1].cols(); ++l) {
                CHECK((t.inputs[1].col(l * qt + a) - t.inputs[1].col(l * qt + b)).norm() <= 1e-12);
            }
        }
    }
}

TEST_CASE("LP dump and report JSON") {
    const LpvModel& m = ex1();
    const TerminalData& td = ex1_terminal();
    std::ostringstream os;
    SynthesisOptions opt;
    opt.emit_lp = &os;
    const SynthesisReport r = synthesize(m, Vector{{0.5, 0.5}}, worst_case_tube(m, 3, Vector::Zero(3)), design(2, 3), td, opt);
    REQUIRE(r.status == SynthesisStatus::Optimal);
    const std::string dump = os.str();
    CHECK(dump.find("r0 ") != std::string::npos);
    const auto lines = std::count(dump.begin(), dump.end(), '\n');
    CHECK(lines >= r.stats.rows);
    const nlohmann::json j = r;
    CHECK(j.at("status") == "optimal");
    CHECK(j.at("tube").at("steps").size() == 4);
    CHECK(j.at("lp").at("control_dof").get<long long>() == 3);
    CHECK(j.at("value").get<double>() == doctest::Approx(r.value));
}

TEST_CASE("tube invariants are checked independently") {
    const LpvModel& m = ex1();
    const TerminalData& td = ex1_terminal();
    const SynthesisReport r = synthesize(m, Vector{{1.0, -1.0}}, worst_case_tube(m, 5, Vector::Zero(3)), mixed(5, 2, 3), td);
    REQUIRE(r.status == SynthesisStatus::Optimal);
    Tube t = *r.tube;
    CHECK_NOTHROW(verify_tube(m, t));
    t.inputs[2](0, 0) += 5.0;
    CHECK(kind_of([&] { verify_tube(m, t); }) == ErrorKind::SolverFailure);
    Tube u = *r.tube;
    u.points.back().array() += 10.0;
    CHECK(kind_of([&] { verify_tube(m, u); }) == ErrorKind::SolverFailure);
}
