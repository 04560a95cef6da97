#include "mfg/errors.hpp"
#include "mfg/lq_oracle.hpp"

#include <doctest.h>

#include <cmath>

using namespace mfg;

namespace {

LqModel scalar(double Q, double R, double Qbar, double S, double QT, double T) {
    LqModel m = zero_cost_model(1, T);
    m.Q(0, 0) = Q;
    m.R(0, 0) = R;
    m.Qbar(0, 0) = Qbar;
    m.S(0, 0) = S;
    m.QT(0, 0) = QT;
    return m;
}

// RK4 shot of the mean-path ODE from (ybar0, p0); returns pbar(T) - G ybar(T).
double shoot(const Mat& pi, double G, double y0, double p0, double T, int steps) {
    Vec z(2);
    z << y0, p0;
    const double h = T / steps;
    for (int i = 0; i < steps; ++i) {
        const Vec k1 = pi * z, k2 = pi * (z + 0.5 * h * k1), k3 = pi * (z + 0.5 * h * k2), k4 = pi * (z + h * k3);
        z += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return z(1) - G * z(0);
}

} // namespace

TEST_CASE("Matrix exponential") {
    SUBCASE("zero and diagonal") {
        CHECK((matrix_exponential(Mat::Zero(3, 3)) - Mat::Identity(3, 3)).norm() == 0.0);
        Mat a = Mat::Zero(2, 2);
        a(0, 0) = 1.0;
        a(1, 1) = -1.0;
        const Mat e = matrix_exponential(a);
        CHECK(e(0, 0) == doctest::Approx(2.718282).epsilon(1e-6));
        CHECK(e(1, 1) == doctest::Approx(0.367879).epsilon(1e-6));
        CHECK(e(0, 1) == 0.0);
    }
    SUBCASE("nilpotent and rotation") {
        Mat n(2, 2);
        n << 0, 3, 0, 0;
        CHECK((matrix_exponential(n) - (Mat(2, 2) << 1, 3, 0, 1).finished()).norm() < 1e-15);
        Mat r(2, 2);
        r << 0, -1, 1, 0;
        const Mat e = matrix_exponential(2.0 * r);
        CHECK(e(0, 0) == doctest::Approx(std::cos(2.0)).epsilon(1e-14));
        CHECK(e(1, 0) == doctest::Approx(std::sin(2.0)).epsilon(1e-14));
    }
    SUBCASE("semigroup with large norm") {
        const Mat pi = build_pi(counterexample_model());
        const Mat a = matrix_exponential(pi * 3.0);
        const Mat b = matrix_exponential(pi * 1.5);
        CHECK((a - b * b).norm() / a.norm() < 1e-12);
    }
    SUBCASE("non-finite input") {
        Mat a = Mat::Zero(2, 2);
        a(0, 0) = std::numeric_limits<double>::infinity();
        CHECK_THROWS_AS(matrix_exponential(a), InputError);
    }
}

TEST_CASE("Mean-path generator") {
    SUBCASE("zero-cost blocks") {
        LqModel m = zero_cost_model(2);
        m.R = 0.5 * Mat::Identity(2, 2);
        Mat want = Mat::Zero(4, 4);
        want.topRightCorner(2, 2) = -2.0 * Mat::Identity(2, 2);
        CHECK((build_pi(m) - want).norm() < 1e-15);
    }
    SUBCASE("counterexample lower-left block") {
        const LqModel m = counterexample_model();
        const Mat pi = build_pi(m);
        const Mat want = -m.Q_sym() - m.Qbar_sym() * (Mat::Identity(2, 2) - m.S);
        CHECK((pi.bottomLeftCorner(2, 2) - want).norm() < 1e-14);
        CHECK((pi.topRightCorner(2, 2) + m.R_sym().inverse()).norm() < 1e-12);
    }
    SUBCASE("scalar block evaluation") {
        // -2 (R + R^T)^{-1} = -1 and -1/2 (Q + Q^T) = -1 for Q = R = 1.
        const Mat pi = build_pi(scalar(1, 1, 0, 0, 0, 1));
        CHECK(pi(0, 1) == doctest::Approx(-1.0));
        CHECK(pi(1, 0) == doctest::Approx(-1.0));
        CHECK(pi(0, 0) == 0.0);
        CHECK(pi(1, 1) == 0.0);
    }
}

TEST_CASE("Fundamental matrix") {
    const LqModel m = counterexample_model();
    CHECK((fundamental_matrix(m, 0.0).assembled() - Mat::Identity(4, 4)).norm() < 1e-15);
    const Mat pi = build_pi(m);
    for (double s : {0.05, 0.3, 1.0}) {
        const double det = fundamental_matrix(m, s).assembled().determinant();
        CHECK(det == doctest::Approx(std::exp(pi.trace() * s)).epsilon(1e-8));
    }
}

TEST_CASE("Mean-path boundary-value problem") {
    SUBCASE("costless problem") {
        const Vec y0 = Vec::Constant(2, 0.7);
        const MeanBvpSolution s = solve_mean_bvp(zero_cost_model(2, 1.0), y0, 11);
        CHECK(s.pbar0.norm() == 0.0);
        for (const auto& pt : s.path) CHECK((pt.ybar - y0).norm() < 1e-15);
    }
    SUBCASE("shooting oracle") {
        const LqModel m = convex_benchmark_model();
        const MeanBvpSolution s = solve_mean_bvp(m, Vec::Constant(1, 1.0), 101);
        const Mat pi = build_pi(m);
        const double f0 = shoot(pi, 1.0, 1.0, 0.0, 1.0, 4000);
        const double f1 = shoot(pi, 1.0, 1.0, 1.0, 1.0, 4000);
        const double p0 = -f0 / (f1 - f0);
        CHECK(std::abs(s.pbar0(0) - p0) < 1e-6);
        CHECK(s.path.back().pbar(0) == doctest::Approx(s.path.back().ybar(0)).epsilon(1e-10));
    }
    SUBCASE("singular at the detected root") {
        LqModel m = counterexample_model();
        const BlowupReport r = detect_blowup(m, 0.05, 1.0, 200);
        REQUIRE(r.root);
        m.horizon = *r.root;
        CHECK_THROWS_AS(solve_mean_bvp(m, Vec::Constant(2, 1.0), 11), SingularSystem);
    }
}

TEST_CASE("Blow-up detection") {
    SUBCASE("hand-computed root") {
        // Pi = [[0, -1], [0, 0]] so Phi = [[1, -s], [0, 1]] and det = 1 - 2s with G = -2.
        const BlowupReport r = detect_blowup(scalar(0, 1, 0, 0, -2, 1), 0.0, 1.0, 101);
        REQUIRE(r.root);
        CHECK(std::abs(*r.root - 0.5) < 1e-12);
        REQUIRE(r.bracket);
        CHECK(r.bracket->first <= 0.5);
        CHECK(r.bracket->second >= 0.5);
    }
    SUBCASE("convex model has no root") {
        const BlowupReport r = detect_blowup(convex_benchmark_model(), 1e-3, 10.0, 400);
        CHECK_FALSE(r.root);
        for (const auto& [s, det] : r.det_samples) CHECK(det > 0.0);
    }
}

TEST_CASE("Riccati solve") {
    SUBCASE("costless") {
        const RiccatiSolution r = riccati_solve(zero_cost_model(2), uniform_grid(0.0, 1.0, 50));
        for (const Mat& P : r.P) CHECK(P.norm() == 0.0);
    }
    SUBCASE("tanh closed form") {
        const RiccatiSolution r = riccati_solve(scalar(1, 1, 0, 0, 0, 1), uniform_grid(0.0, 1.0, 1000));
        CHECK(r.P.front()(0, 0) == doctest::Approx(std::tanh(1.0)).epsilon(1e-10));
        CHECK(r.at(0.5)(0, 0) == doctest::Approx(std::tanh(0.5)).epsilon(1e-6));
    }
    SUBCASE("step halving and terminal value") {
        const LqModel m = convex_benchmark_model();
        const RiccatiSolution a = riccati_solve(m, uniform_grid(0.0, 1.0, 500));
        const RiccatiSolution b = riccati_solve(m, uniform_grid(0.0, 1.0, 1000));
        CHECK(std::abs(a.P.front()(0, 0) - b.P.front()(0, 0)) < 1e-8);
        CHECK(b.P.back()(0, 0) == m.QT_sym()(0, 0));
    }
    SUBCASE("symmetry") {
        LqModel m = counterexample_model();
        m.Q = (Mat(2, 2) << 1, 0.4, -0.2, 2).finished();
        m.Qbar = Mat::Zero(2, 2);
        m.QT = (Mat(2, 2) << 1, 0.5, 0, 1).finished();
        m.R = (Mat(2, 2) << 1, 0.3, 0.1, 2).finished();
        const RiccatiSolution r = riccati_solve(m, uniform_grid(0.0, 0.11, 100));
        CHECK((r.P.back() - m.QT_sym()).norm() == 0.0);
        for (const Mat& P : r.P) CHECK((P - P.transpose()).norm() < 1e-10);
    }
    SUBCASE("blow-up") {
        // P' = P^2 + 1 backward from P(T) = 0 escapes at T - pi/2.
        LqModel m = scalar(-1, 1, 0, 0, 0, 3);
        CHECK_THROWS_AS(riccati_solve(m, uniform_grid(0.0, 3.0, 3000)), RiccatiBlowup);
    }
}

TEST_CASE("Counterexample report") {
    const CounterexampleReport r = counterexample_report();
    CHECK(r.ci_margin_at_0_11 == doctest::Approx(0.000994).epsilon(2e-2));
    CHECK(r.cii_margin_at_0_10 == doctest::Approx(-0.00255).epsilon(1e-2));
    CHECK(r.lifespan == doctest::Approx(0.0894).epsilon(1e-3));
    CHECK(r.constants.c_g2 == doctest::Approx(1.027).epsilon(1e-3));
    CHECK(r.det_at_0_10 == doctest::Approx(solvability_determinant(fundamental_matrix(r.model, 0.10),
                                                                   r.model.QT_sym())));
}
