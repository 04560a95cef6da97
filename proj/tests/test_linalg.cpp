#include "mfg/errors.hpp"
#include "mfg/linalg.hpp"

#include <doctest.h>

using namespace mfg;

TEST_CASE("Jacobi eigenpairs of a symmetric 3x3") {
    Mat a(3, 3);
    a << 4, 1, 2, 1, 3, 0, 2, 0, 5;
    const SymmetricEigen e = symmetric_eigen(a);
    const Eigen::SelfAdjointEigenSolver<Mat> ref(a);
    for (int i = 0; i < 3; ++i) CHECK(e.values(i) == doctest::Approx(ref.eigenvalues()(i)).epsilon(1e-12));
    CHECK((a * e.vectors - e.vectors * e.values.asDiagonal()).norm() < 1e-12);
    CHECK((e.vectors.transpose() * e.vectors - Mat::Identity(3, 3)).norm() < 1e-12);
    CHECK(e.values(0) <= e.values(1));
}

TEST_CASE("Eigenvalues use the symmetric part") {
    Mat a(2, 2);
    a << 1, 4, 0, 1;
    CHECK(least_eigenvalue(a) == doctest::Approx(-1.0));
    CHECK(greatest_eigenvalue(a) == doctest::Approx(3.0));
    CHECK((symmetrize(a) - (Mat(2, 2) << 1, 2, 2, 1).finished()).norm() == 0.0);
}

TEST_CASE("Operator and 1-norms") {
    Mat a(2, 2);
    a << 3, 0, 4, 5;
    const Eigen::JacobiSVD<Mat> svd(a);
    CHECK(operator_norm(a) == doctest::Approx(svd.singularValues()(0)).epsilon(1e-12));
    CHECK(norm_1(a) == doctest::Approx(7.0));
    CHECK(operator_norm(Mat::Zero(3, 3)) == 0.0);
}

TEST_CASE("Non-finite input is rejected") {
    Mat a = Mat::Identity(2, 2);
    a(0, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS(symmetric_eigen(a));
}
