#include "mfg/errors.hpp"
#include "mfg/model.hpp"
#include "mfg/model_io.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace mfg;

namespace {

LqModel identity_model() {
    LqModel m = zero_cost_model(2, 1.0);
    m.Q = Mat::Identity(2, 2);
    return m;
}

MeasureSummary summary_at(const Vec& mean) {
    MeasureSummary s;
    s.mean = mean;
    s.covariance = Mat::Zero(mean.size(), mean.size());
    s.second_moment = mean.squaredNorm();
    return s;
}

} // namespace

TEST_CASE("Quadratic identity case") {
    const LqCostModel cost(identity_model());
    const G1Eval g = cost.eval_g1(Vec::Unit(2, 0), Vec::Unit(2, 1));
    CHECK(g.value == doctest::Approx(1.0));
    CHECK((g.grad_v - Vec::Unit(2, 1)).norm() == 0.0);
    CHECK((g.hess_vv - Mat::Identity(2, 2)).norm() == 0.0);
}

TEST_CASE("Mean-field matrix of the counterexample") {
    const LqModel m = counterexample_model();
    const LqCostModel cost(m);
    const G2Eval g = cost.eval_g2(Vec::Constant(2, 0.3), summary_at(Vec::Constant(2, 1.0)));
    CHECK((g.mfield_matrix - 0.941 * m.Qbar).norm() < 1e-14);
    CHECK(operator_norm(g.mfield_matrix) == doctest::Approx(1.027).epsilon(1e-3));
}

TEST_CASE("Scalar mean-field matrix") {
    CHECK(convex_benchmark_model().mfield_matrix()(0, 0) == doctest::Approx(-0.05));
}

TEST_CASE("Assumption constants") {
    SUBCASE("counterexample") {
        const AssumptionConstants c = assumption_constants(counterexample_model());
        CHECK(c.lambda_big == doctest::Approx(0.010137).epsilon(1e-4));
        CHECK(c.lambda_g1 == doctest::Approx(0.41956).epsilon(1e-4));
        CHECK(c.lambda_g2 == doctest::Approx(1.0916).epsilon(1e-4));
        CHECK(c.c_g2 == doctest::Approx(1.027).epsilon(1e-3));
        CHECK(c.lambda_h1 == 0.0);
    }
    SUBCASE("identity and zero") {
        const AssumptionConstants c = assumption_constants(zero_cost_model(3));
        CHECK(c.lambda_big == doctest::Approx(1.0));
        CHECK(c.lambda_g1 == 0.0);
        CHECK(c.lambda_g2 == 0.0);
        CHECK(c.lambda_h1 == 0.0);
        CHECK(c.c_g2 == 0.0);
    }
    SUBCASE("scalar convex") {
        const AssumptionConstants c = assumption_constants(convex_benchmark_model());
        CHECK(c.lambda_big == doctest::Approx(2.0));
        CHECK(c.lambda_g1 == doctest::Approx(-1.0));
        CHECK(c.lambda_g2 == doctest::Approx(-0.1));
        CHECK(c.lambda_h1 == doctest::Approx(-1.0));
        CHECK(c.c_g2 == doctest::Approx(0.05));
    }
}

TEST_CASE("Analytic derivatives agree with finite differences") {
    const LqCostModel cost(counterexample_model());
    Vec y(2), v(2);
    y << 0.3, -1.2;
    v << 0.7, 0.1;
    CHECK(finite_difference_gradient_error(cost, y, v, summary_at(Vec::Constant(2, 0.4))) < 1e-6);
}

TEST_CASE("Batched members match pointwise evaluation") {
    const LqCostModel cost(counterexample_model());
    Mat Y(3, 2), U(3, 2), P(3, 2);
    Y << 1, 2, -0.5, 0.3, 0, 0;
    P << 0.2, -1, 1, 1, 0.5, 0;
    const MeasureSummary m = summary_at(Vec::Constant(2, 0.4));
    cost.feedback(Y, P, U);
    Mat G;
    Vec c;
    cost.driver(Y, U, m, G);
    cost.running_cost(Y, U, m, c);
    for (int i = 0; i < 3; ++i) {
        const Vec y = Y.row(i).transpose(), u = U.row(i).transpose();
        CHECK((P.row(i).transpose() + cost.eval_g1(y, u).grad_v).norm() < 1e-12);
        CHECK((G.row(i).transpose() - cost.eval_g1(y, u).grad_y - cost.eval_g2(y, m).grad_y).norm() < 1e-12);
        CHECK(c(i) == doctest::Approx(cost.eval_g1(y, u).value + cost.eval_g2(y, m).value));
    }
}

TEST_CASE("Model validation") {
    LqModel m = convex_benchmark_model();
    m.R(0, 0) = -1.0;
    CHECK_THROWS_AS(m.validate(), InputError);
    m = convex_benchmark_model();
    m.eta(0, 0) = 0.0;
    CHECK_THROWS_AS(m.validate(), InputError);
}

TEST_CASE("Model files") {
    SUBCASE("well-formed 2-d file") {
        const LqModel m = parse_model("dim = 2\nhorizon = 0.5\neta = 1 0; 0 2\nQ = 1 2; 3 4\nR = 2 0; 0 2\n"
                                      "Qbar = 0 0; 0 0\nS = 1 0; 0 1\nQT = 0.5 0; 0 0.5\n");
        CHECK(m.dim == 2);
        CHECK(m.horizon == 0.5);
        CHECK(m.Q(1, 0) == 3.0);
        CHECK(m.eta(1, 1) == 2.0);
    }
    SUBCASE("missing R names the key") {
        try {
            parse_model("dim = 1\nhorizon = 1\neta = 1\nQ = 1\nQbar = 0\nS = 0\nQT = 0\n");
            FAIL("expected a parse error");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("'R'") != std::string::npos);
        }
    }
    SUBCASE("wrong matrix length carries the line") {
        try {
            parse_model("dim = 2\nhorizon = 1\neta = 1 0 0 1\nQ = 1 2 3\nR = 1 0 0 1\nQbar = 0 0 0 0\n"
                        "S = 0 0 0 0\nQT = 0 0 0 0\n");
            FAIL("expected a parse error");
        } catch (const ParseError& e) {
            CHECK(e.line() == 4);
        }
    }
    SUBCASE("rank-deficient eta") {
        CHECK_THROWS_AS(parse_model("dim = 2\nhorizon = 1\neta = 1 1 1 1\nQ = 0 0 0 0\nR = 1 0 0 1\n"
                                    "Qbar = 0 0 0 0\nS = 0 0 0 0\nQT = 0 0 0 0\n"),
                        ParseError);
    }
    SUBCASE("unknown and duplicate keys") {
        CHECK_THROWS_AS(parse_model("dim = 1\ndim = 1\n"), ParseError);
        CHECK_THROWS_AS(parse_model("colour = 1\n"), ParseError);
    }
    SUBCASE("round trip is bit-exact") {
        for (const LqModel& m : {counterexample_model(), convex_benchmark_model(), zero_cost_model(3, 0.7)})
            CHECK(parse_model(serialize_model(m)) == m);
    }
    SUBCASE("files on disk") {
        const auto path = std::filesystem::temp_directory_path() / "mfg_model_roundtrip.model";
        write_model_file(path.string(), counterexample_model());
        CHECK(read_model_file(path.string()) == counterexample_model());
        std::filesystem::remove(path);
        CHECK_THROWS_AS(read_model_file(path.string()), InputError);
    }
}
