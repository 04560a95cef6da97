#include "mfg/errors.hpp"
#include "mfg/measure.hpp"
#include "mfg/regression.hpp"

#include <doctest.h>

using namespace mfg;

namespace {

Mat sample(Eigen::Index n, int d, std::uint64_t seed) { return gaussian_ensemble(n, Vec::Zero(d), 1.0, seed).states; }

} // namespace

TEST_CASE("Polynomial basis") {
    const PolynomialBasis b(2, 2);
    CHECK(b.size() == 6);
    const Mat X = b.design((Mat(1, 2) << 2.0, 3.0).finished());
    // 1, y1, y2, then the degree-2 monomials.
    CHECK(X(0, 0) == 1.0);
    CHECK(X(0, 1) == 2.0);
    CHECK(X(0, 2) == 3.0);
    CHECK(X.row(0).tail(3).sum() == doctest::Approx(4.0 + 6.0 + 9.0));
    const Mat g = b.gradient((Vec(2) << 2.0, 3.0).finished());
    CHECK(g.rows() == 6);
    CHECK(g(1, 0) == 1.0);
    CHECK(g(2, 1) == 1.0);
}

TEST_CASE("Affine targets are recovered") {
    const Mat Y = sample(500, 2, 1);
    Mat A(2, 2);
    A << 1.5, -0.3, 0.2, 0.7;
    const Vec c = (Vec(2) << 0.4, -1.1).finished();
    const Mat T = (Y * A).rowwise() + c.transpose();
    const FieldSlice f = regress_field(Y, T, RegressionOptions{});
    CHECK((f.slope() - A.transpose()).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((f.coeffs.row(0).transpose() - c).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((f.jacobian(Vec::Zero(2)) - A.transpose()).cwiseAbs().maxCoeff() < 1e-8);
    const Mat V = sample(5, 2, 2);
    CHECK((f.directional(Y.topRows(5), V) - V * A).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((f.value_at(Y.row(3).transpose()) - T.row(3).transpose()).norm() < 1e-8);
}

TEST_CASE("Constant targets") {
    const Mat Y = sample(300, 1, 3);
    const FieldSlice f = regress_field(Y, Mat::Constant(300, 1, 2.5), RegressionOptions{});
    CHECK(f.coeffs(0, 0) == doctest::Approx(2.5).epsilon(1e-10));
    CHECK(std::abs(f.coeffs(1, 0)) < 1e-10);
}

TEST_CASE("Quadratic targets project onto the affine space") {
    const Mat Y = sample(1000, 1, 4);
    const Mat T = Y.array().square().matrix() + 0.5 * Y;
    const FieldSlice f = regress_field(Y, T, RegressionOptions{});
    Mat X(1000, 2);
    X.col(0).setOnes();
    X.col(1) = Y.col(0);
    const Mat beta = (X.transpose() * X).ldlt().solve(X.transpose() * T);
    CHECK((f.coeffs - beta).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("Higher degree recovers a quadratic") {
    const Mat Y = sample(800, 2, 5);
    const Mat T = (Y.col(0).array() * Y.col(1).array() - 0.5 * Y.col(0).array().square()).matrix();
    RegressionOptions o;
    o.degree = 2;
    const FieldSlice f = regress_field(Y, T, o);
    CHECK((f.evaluate(Y) - T).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("Collapsed ensembles fit a constant") {
    const Mat Y = Mat::Constant(50, 2, 0.3);
    const FieldSlice f = regress_field(Y, Mat::Constant(50, 2, -1.0), RegressionOptions{});
    CHECK((f.evaluate(Y).array() + 1.0).abs().maxCoeff() < 1e-12);
    CHECK(f.slope().norm() == 0.0);
}

TEST_CASE("Too few samples") {
    RegressionOptions o;
    o.degree = 2;
    CHECK_THROWS_AS(regress_field(sample(5, 2, 6), Mat::Zero(5, 1), o), InputError);
}

TEST_CASE("Thread count does not change the fit") {
    const Mat Y = sample(5000, 2, 7);
    const Mat T = Y.array().sin().matrix();
    RegressionOptions a, b;
    b.threads = 3;
    CHECK((regress_field(Y, T, a).coeffs - regress_field(Y, T, b).coeffs).norm() == 0.0);
}
