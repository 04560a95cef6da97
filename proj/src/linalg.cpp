#include "mfg/linalg.hpp"

#include "mfg/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

namespace mfg {

Mat symmetrize(const Mat& a) { return 0.5 * (a + a.transpose()); }

SymmetricEigen symmetric_eigen(const Mat& input, int max_sweeps) {
    if (input.rows() != input.cols()) throw InputError("symmetric_eigen: matrix is not square");
    if (!input.allFinite()) throw InputError("symmetric_eigen: non-finite entries");
    const Eigen::Index n = input.rows();
    Mat a = symmetrize(input);
    Mat v = Mat::Identity(n, n);

    auto off_norm = [&]() {
        double s = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i + 1; j < n; ++j) s += a(i, j) * a(i, j);
        return std::sqrt(2.0 * s);
    };
    const double scale = std::max(a.norm(), std::numeric_limits<double>::min());

    SymmetricEigen out;
    int sweep = 0;
    for (; sweep < max_sweeps; ++sweep) {
        if (off_norm() <= 1e-15 * scale) break;
        for (Eigen::Index p = 0; p < n; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double app = a(p, p);
                const double aqq = a(q, q);
                // Rotation angle that annihilates a(p,q) (Golub & Van Loan 8.4).
                const double tau = (aqq - app) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    if (off_norm() > 1e-15 * scale) {
        std::ostringstream msg;
        msg << "symmetric_eigen: Jacobi sweep did not converge in " << max_sweeps << " sweeps for matrix\n"
            << input;
        throw ConvergenceError(msg.str());
    }

    std::vector<Eigen::Index> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return a(i, i) < a(j, j); });
    out.values.resize(n);
    out.vectors.resize(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        out.values(k) = a(order[k], order[k]);
        out.vectors.col(k) = v.col(order[k]);
    }
    out.sweeps = sweep;
    return out;
}

double least_eigenvalue(const Mat& a) { return symmetric_eigen(a).values(0); }

double greatest_eigenvalue(const Mat& a) {
    const auto e = symmetric_eigen(a);
    return e.values(e.values.size() - 1);
}

double operator_norm(const Mat& a) {
    if (a.size() == 0) return 0.0;
    const double g = greatest_eigenvalue(a.transpose() * a);
    return std::sqrt(std::max(g, 0.0));
}

double norm_1(const Mat& a) {
    double best = 0.0;
    for (Eigen::Index j = 0; j < a.cols(); ++j) best = std::max(best, a.col(j).cwiseAbs().sum());
    return best;
}

} // namespace mfg
