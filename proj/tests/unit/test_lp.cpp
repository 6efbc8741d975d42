#include <cmath>
#include <random>

#include "doctest.h"
#include "hptmpc/lp.hpp"

using namespace hptmpc::lp;

namespace {

// max 3x + 2y s.t. x + y <= 4, x + 3y <= 6, x <= 3 -> (3, 1), value 11.
Problem textbook() {
    Problem p;
    const int x = p.add_var(0.0, kInf, -3.0);
    const int y = p.add_var(0.0, kInf, -2.0);
    p.add_le({{x, 1.0}, {y, 1.0}}, 4.0);
    p.add_le({{x, 1.0}, {y, 3.0}}, 6.0);
    p.add_le({{x, 1.0}}, 3.0);
    return p;
}

}  // namespace

TEST_CASE("simplex solves a textbook LP") {
    const Solution s = DenseSimplex().solve(textbook());
    REQUIRE(s.status == Status::Optimal);
    CHECK(s.objective == doctest::Approx(-11.0));
    CHECK(s.x[0] == doctest::Approx(3.0));
    CHECK(s.x[1] == doctest::Approx(1.0));
}

TEST_CASE("interior point agrees on the textbook LP") {
    const Solution s = InteriorPoint().solve(textbook());
    REQUIRE(s.status == Status::Optimal);
    CHECK(s.objective == doctest::Approx(-11.0).epsilon(1e-8));
}

TEST_CASE("infeasible and unbounded problems are classified") {
    Problem inf;
    const int x = inf.add_var(0.0, kInf, 1.0);
    inf.add_ge({{x, 1.0}}, 2.0);
    inf.add_le({{x, 1.0}}, 1.0);
    CHECK(DenseSimplex().solve(inf).status == Status::Infeasible);
    CHECK(InteriorPoint().solve(inf).status != Status::Optimal);
    const FeasibilityResult f = phase_one(inf, DenseSimplex());
    REQUIRE(f.status == Status::Optimal);
    CHECK(f.violation > 0.1);

    Problem unb;
    const int y = unb.add_var(-kInf, kInf, -1.0);
    unb.add_ge({{y, 1.0}}, 0.0);
    CHECK(DenseSimplex().solve(unb).status == Status::Unbounded);
}

TEST_CASE("equality rows, free and upper-bounded variables") {
    Problem p;
    const int a = p.add_var(-kInf, kInf, 1.0);
    const int b = p.add_var(-kInf, 2.0, -1.0);
    p.add_eq({{a, 1.0}, {b, 1.0}}, 1.0);
    p.add_ge({{a, 1.0}}, -5.0);
    const Solution s = DenseSimplex().solve(p);
    REQUIRE(s.status == Status::Optimal);
    CHECK(s.x[1] == doctest::Approx(2.0));
    CHECK(s.x[0] == doctest::Approx(-1.0));
    CHECK(p.max_violation(s.x) <= 1e-9);
}

TEST_CASE("degenerate LP terminates under Bland's rule") {
    // Beale's cycling example.
    Problem p;
    const int x1 = p.add_var(0.0, kInf, -0.75);
    const int x2 = p.add_var(0.0, kInf, 150.0);
    const int x3 = p.add_var(0.0, kInf, -0.02);
    const int x4 = p.add_var(0.0, kInf, 6.0);
    p.add_le({{x1, 0.25}, {x2, -60.0}, {x3, -0.04}, {x4, 9.0}}, 0.0);
    p.add_le({{x1, 0.5}, {x2, -90.0}, {x3, -0.02}, {x4, 3.0}}, 0.0);
    p.add_le({{x3, 1.0}}, 1.0);
    const Solution s = DenseSimplex().solve(p);
    REQUIRE(s.status == Status::Optimal);
    CHECK(s.objective == doctest::Approx(-0.05));
}

TEST_CASE("random LPs: simplex and interior point objective values match") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
        Problem p;
        const int n = 6;
        for (int j = 0; j < n; ++j) p.add_var(-kInf, kInf, U(rng));
        // Bounded feasible region: box plus random cuts through a point near 0.
        for (int j = 0; j < n; ++j) {
            p.add_le({{j, 1.0}}, 1.0 + 0.5 * std::abs(U(rng)));
            p.add_ge({{j, 1.0}}, -1.0 - 0.5 * std::abs(U(rng)));
        }
        for (int r = 0; r < 12; ++r) {
            std::vector<Term> t;
            for (int j = 0; j < n; ++j) t.push_back({j, U(rng)});
            p.add_le(t, 0.2 + std::abs(U(rng)));
        }
        const Solution a = DenseSimplex().solve(p);
        const Solution b = InteriorPoint().solve(p);
        REQUIRE(a.status == Status::Optimal);
        REQUIRE(b.status == Status::Optimal);
        CHECK(std::abs(a.objective - b.objective) <= 1e-7 * (1.0 + std::abs(a.objective)));
        CHECK(p.max_violation(b.x) <= 1e-8);
    }
}

TEST_CASE("phase one reports a nonpositive violation on feasible problems") {
    const FeasibilityResult f = phase_one(textbook(), InteriorPoint());
    REQUIRE(f.status == Status::Optimal);
    CHECK(f.violation <= 0.0);
}
