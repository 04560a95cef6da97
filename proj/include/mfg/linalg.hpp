#pragma once

#include <Eigen/Dense>

namespace mfg {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Eigen-decomposition of a symmetric matrix.
struct SymmetricEigen {
    Vec values;   // ascending
    Mat vectors;  // columns are eigenvectors
    int sweeps = 0;
};

/// Cyclic Jacobi sweep on the symmetric part of `a`. Deterministic row-major
/// pivot order. Throws ConvergenceError (message includes the matrix) if the
/// off-diagonal mass does not vanish within `max_sweeps`.
SymmetricEigen symmetric_eigen(const Mat& a, int max_sweeps = 100);

Mat symmetrize(const Mat& a);
double least_eigenvalue(const Mat& a);
double greatest_eigenvalue(const Mat& a);

/// Spectral norm (largest singular value) via Jacobi on a^T a.
double operator_norm(const Mat& a);

double norm_1(const Mat& a);

} // namespace mfg
