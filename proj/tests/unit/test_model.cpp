#include <random>

#include "doctest.h"
#include "hptmpc/errors.hpp"
#include "hptmpc/model.hpp"
#include "../support/builders.hpp"

using namespace hptmpc;
using namespace hptmpc::testing;

TEST_CASE("fixtures load with the documented dimensions") {
    const LpvModel m1 = load_model(fixture("ex1.json"));
    CHECK(m1.nx() == 2);
    CHECK(m1.nu() == 1);
    CHECK(m1.ntheta() == 3);
    CHECK(m1.b_constant());
    CHECK(m1.Theta.num_vertices() == 8);

    const LpvModel m2 = load_model(fixture("ex2.json"));
    CHECK(m2.nx() == 3);
    CHECK(m2.ntheta() == 2);
    CHECK(m2.b_constant());
    // A(theta) at theta = (1, 1) recovers I + tau * Ac with tau = 0.36.
    const Matrix A = m2.A_at(vec({1.0, 1.0}));
    CHECK(A(1, 0) == doctest::Approx(-0.7 * 0.36));
    CHECK(A(2, 2) == doctest::Approx(1.0 - 0.1 * 0.36));
    CHECK(m2.B_at(vec({1.0, 1.0}))(2, 0) == doctest::Approx(0.36));
}

TEST_CASE("box shorthand accepts symmetric limits and pairs") {
    const Polytope P = polytope_or_box(nlohmann::json::parse(R"({"box": [2, [-1, 3]]})"));
    CHECK(P.contains(vec({-2.0, 3.0}), 1e-12));
    CHECK_FALSE(P.contains(vec({0.0, -1.5}), 1e-12));
    CHECK(P.num_vertices() == 4);
}

TEST_CASE("round trip through JSON") {
    const LpvModel m = load_model(fixture("ex1.json"));
    const LpvModel back = model_from_json(model_to_json(m));
    for (std::size_t i = 0; i < m.A.size(); ++i) CHECK((m.A[i] - back.A[i]).norm() == 0.0);
    CHECK(includes(back.X, m.X, 1e-12));
    CHECK(includes(m.X, back.X, 1e-12));
}

TEST_CASE("eval_AB rejects scheduling values outside Theta") {
    const LpvModel m = scalar_model(0.5, 0.1, 1.0, 1.0, 1.0);
    CHECK_NOTHROW(m.eval_AB(vec({1.0})));
    try {
        m.eval_AB(vec({1.5}));
        FAIL("expected OutOfSchedulingSet");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::OutOfSchedulingSet);
    }
}

TEST_CASE("affinity and homogeneity of the model map") {
    const LpvModel m = load_model(fixture("ex1.json"));
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const Matrix& V = m.Theta.vertices();
    for (int trial = 0; trial < 20; ++trial) {
        Vector w(V.cols());
        for (Eigen::Index j = 0; j < w.size(); ++j) w[j] = u01(rng);
        w /= w.sum();
        const Vector theta = V * w;
        const auto [A, B] = m.eval_AB(theta);
        Matrix Acomb = Matrix::Zero(m.nx(), m.nx());
        for (Eigen::Index j = 0; j < V.cols(); ++j) Acomb += w[j] * m.A_at(V.col(j));
        CHECK((A - Acomb).lpNorm<Eigen::Infinity>() <= 1e-10);
        CHECK((B - m.B_at(V.col(0))).lpNorm<Eigen::Infinity>() == 0.0);

        const Vector x = Vector::Random(m.nx());
        const Vector u = Vector::Random(m.nu());
        const double alpha = u01(rng) * 3.0;
        const Vector lhs = m.image_point(alpha * x, theta, alpha * u);
        CHECK((lhs - alpha * m.image_point(x, theta, u)).lpNorm<Eigen::Infinity>() <= 1e-12);
    }
}

TEST_CASE("implementability") {
    const LpvModel m1 = load_model(fixture("ex1.json"));
    CHECK_NOTHROW(validate_implementability(m1, true));

    LpvModel m = scalar_model(0.5, 0.1, 1.0, 1.0, 1.0);
    m.B[1] = mat({{0.2}});
    CHECK(b_dependent_indices(m) == std::vector<int>{1});
    CHECK_NOTHROW(validate_implementability(m, false));
    try {
        validate_implementability(m, true);
        FAIL("expected NonConvexSynthesis");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NonConvexSynthesis);
    }
}

TEST_CASE("implementability with a partition") {
    // theta_1 drives B, theta_2 drives the controller: separable.
    LpvModel m;
    m.A = {mat({{0.5}}), mat({{0.1}}), mat({{0.1}})};
    m.B = {mat({{1.0}}), mat({{0.2}}), mat({{0.0}})};
    m.X = interval(-1, 1);
    m.U = interval(-1, 1);
    m.Theta = Polytope::box(vec({-1, -1}), vec({1, 1}));
    CHECK_THROWS_AS(validate_implementability(m, true), Error);
    m.partition = std::make_pair(1, 1);
    CHECK_NOTHROW(validate_implementability(m, true));
    m.B[2] = mat({{0.3}});
    CHECK_THROWS_AS(validate_implementability(m, true), Error);
}
