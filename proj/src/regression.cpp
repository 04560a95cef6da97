#include "mfg/regression.hpp"

#include "mfg/errors.hpp"
#include "mfg/parallel.hpp"

#include <cmath>
#include <functional>

namespace mfg {

PolynomialBasis::PolynomialBasis(int dim, int degree) : dim_(dim), degree_(degree) {
    if (dim < 1 || degree < 0) throw InputError("PolynomialBasis: bad dimension or degree");
    std::vector<int> e(static_cast<size_t>(dim), 0);
    for (int total = 0; total <= degree; ++total) {
        // All exponent vectors with the given total, first variable varying slowest.
        std::function<void(int, int)> rec = [&](int var, int left) {
            if (var == dim - 1) {
                e[static_cast<size_t>(var)] = left;
                exponents_.push_back(e);
                return;
            }
            for (int k = left; k >= 0; --k) {
                e[static_cast<size_t>(var)] = k;
                rec(var + 1, left - k);
            }
        };
        rec(0, total);
    }
}

Mat PolynomialBasis::design(const Mat& Y) const {
    const Eigen::Index n = Y.rows();
    Mat X(n, size());
    for (int b = 0; b < size(); ++b) {
        const auto& ex = exponents_[static_cast<size_t>(b)];
        auto col = X.col(b);
        col.setOnes();
        for (int j = 0; j < dim_; ++j)
            for (int k = 0; k < ex[static_cast<size_t>(j)]; ++k) col.array() *= Y.col(j).array();
    }
    return X;
}

Mat PolynomialBasis::gradient(const Vec& y) const {
    Mat g = Mat::Zero(size(), dim_);
    for (int b = 0; b < size(); ++b) {
        const auto& ex = exponents_[static_cast<size_t>(b)];
        for (int j = 0; j < dim_; ++j) {
            if (ex[static_cast<size_t>(j)] == 0) continue;
            double v = ex[static_cast<size_t>(j)];
            for (int i = 0; i < dim_; ++i) {
                const int power = ex[static_cast<size_t>(i)] - (i == j ? 1 : 0);
                for (int k = 0; k < power; ++k) v *= y(i);
            }
            g(b, j) = v;
        }
    }
    return g;
}

Mat FieldSlice::evaluate(const Mat& Y) const {
    if (basis.degree() == 1 && basis.dim() == Y.cols()) {
        // Affine fast path: intercept row plus slope block.
        Mat out = Y * coeffs.bottomRows(basis.dim());
        out.rowwise() += coeffs.row(0);
        return out;
    }
    if (basis.degree() == 0) {
        Mat out(Y.rows(), coeffs.cols());
        out.rowwise() = coeffs.row(0);
        return out;
    }
    return basis.design(Y) * coeffs;
}

Vec FieldSlice::value_at(const Vec& y) const {
    const Mat row = y.transpose();
    return evaluate(row).row(0).transpose();
}

Mat FieldSlice::jacobian(const Vec& y) const { return (basis.gradient(y).transpose() * coeffs).transpose(); }

Mat FieldSlice::directional(const Mat& Y, const Mat& V) const {
    if (basis.degree() == 0) return Mat::Zero(Y.rows(), coeffs.cols());
    if (basis.degree() == 1) return V * coeffs.bottomRows(basis.dim());
    Mat out(Y.rows(), coeffs.cols());
    for (Eigen::Index i = 0; i < Y.rows(); ++i)
        out.row(i) = (basis.gradient(Y.row(i).transpose()) * V.row(i).transpose()).transpose() * coeffs;
    return out;
}

Mat FieldSlice::slope() const { return jacobian(Vec::Zero(basis.dim())); }

FieldSlice regress_field(const Mat& Y, const Mat& targets, const RegressionOptions& options) {
    const Eigen::Index n = Y.rows();
    const int d = static_cast<int>(Y.cols());
    if (targets.rows() != n) throw InputError("regress_field: sample and target counts differ");
    if (options.degree < 1) throw InputError("regress_field: degree must be at least 1");

    // Collapsed ensemble: trace of the sample covariance.
    const Vec mean = Y.colwise().mean().transpose();
    const double spread = (Y.rowwise() - mean.transpose()).squaredNorm() / static_cast<double>(n);
    const int degree = spread < options.collapse_trace ? 0 : options.degree;

    FieldSlice slice;
    slice.basis = PolynomialBasis(d, degree);
    const int B = slice.basis.size();
    if (degree == 0) {
        slice.coeffs = targets.colwise().mean();
        return slice;
    }
    if (n <= B) throw InputError("regress_field: need more samples than basis functions");

    const auto chunks = static_cast<size_t>(chunk_count(n));
    std::vector<Mat> gram(chunks), cross(chunks);
    parallel_chunks(n, options.threads, [&](std::ptrdiff_t c, std::ptrdiff_t b, std::ptrdiff_t e) {
        const Mat X = slice.basis.design(Y.middleRows(b, e - b));
        gram[static_cast<size_t>(c)] = X.transpose() * X;
        cross[static_cast<size_t>(c)] = X.transpose() * targets.middleRows(b, e - b);
    });
    Mat G = pairwise_sum(std::move(gram)) / static_cast<double>(n);
    const Mat C = pairwise_sum(std::move(cross)) / static_cast<double>(n);
    const double ridge = options.ridge * G.trace() / B;
    G.diagonal().array() += ridge;

    Eigen::LDLT<Mat> ldlt(G);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.vectorD().minCoeff() <= 0.0)
        throw ConvergenceError("regress_field: rank-deficient design after ridge (degenerate ensemble)");
    slice.coeffs = ldlt.solve(C);
    if (!slice.coeffs.allFinite())
        throw ConvergenceError("regress_field: rank-deficient design after ridge (degenerate ensemble)");
    return slice;
}

} // namespace mfg
