#pragma once

#include "mfg/linalg.hpp"

#include <vector>

namespace mfg {

/// Monomials in d variables of total degree <= degree, in graded order:
/// 1, y1..yd, then degree-2 terms, ...
class PolynomialBasis {
public:
    PolynomialBasis() = default;
    PolynomialBasis(int dim, int degree);

    int dim() const { return dim_; }
    int degree() const { return degree_; }
    int size() const { return static_cast<int>(exponents_.size()); }
    const std::vector<std::vector<int>>& exponents() const { return exponents_; }

    /// Design matrix, rows = samples.
    Mat design(const Mat& Y) const;
    /// d/dy_j of every basis function at y: size() x dim().
    Mat gradient(const Vec& y) const;

private:
    int dim_ = 0;
    int degree_ = 0;
    std::vector<std::vector<int>> exponents_;
};

/// One time slice of a decoupling field y -> p: p = coeffs^T phi(y).
struct FieldSlice {
    PolynomialBasis basis;
    Mat coeffs;  // basis.size() x output dimension

    Mat evaluate(const Mat& Y) const;
    Vec value_at(const Vec& y) const;
    /// Jacobian dp_i/dy_j at y.
    Mat jacobian(const Vec& y) const;
    /// out.row(i) = jacobian(Y.row(i)) V.row(i).
    Mat directional(const Mat& Y, const Mat& V) const;
    /// Jacobian rows of an affine (or higher) fit at the origin; the exact
    /// slope matrix when the basis is affine.
    Mat slope() const;
};

struct RegressionOptions {
    int degree = 1;
    int threads = 1;
    double ridge = 1e-10;         // relative to trace(X^T X) / basis size
    double collapse_trace = 1e-14;  // covariance trace below which a constant is fitted
};

/// Least-squares fit of targets (N x m) on the polynomial basis of Y (N x d)
/// by ridge-stabilized normal equations. Falls back to a constant fit when
/// the sample has collapsed to a point.
FieldSlice regress_field(const Mat& Y, const Mat& targets, const RegressionOptions& options);

} // namespace mfg
