#include "mfg/lq_oracle.hpp"

#include "mfg/analysis.hpp"
#include "mfg/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mfg {

Mat matrix_exponential(const Mat& a) {
    if (a.rows() != a.cols()) throw InputError("matrix_exponential: matrix is not square");
    if (!a.allFinite()) throw InputError("matrix_exponential: non-finite entries");
    const Eigen::Index n = a.rows();
    if (n == 0) return a;
    if (a.isZero(0.0)) return Mat::Identity(n, n);

    static constexpr double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                                   1187353796428800.0,  129060195264000.0,   10559470521600.0,
                                   670442572800.0,      33522128640.0,       1323241920.0,
                                   40840800.0,          960960.0,            16380.0,
                                   182.0,               1.0};
    constexpr double theta13 = 5.371920351148152;

    const double norm = norm_1(a);
    int squarings = 0;
    if (norm > theta13) squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm / theta13))));
    const Mat as = a / std::ldexp(1.0, squarings);

    const Mat id = Mat::Identity(n, n);
    const Mat a2 = as * as;
    const Mat a4 = a2 * a2;
    const Mat a6 = a4 * a2;
    const Mat u_inner = a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id;
    const Mat u = as * u_inner;
    const Mat v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;
    Mat r = (v - u).partialPivLu().solve(v + u);
    for (int k = 0; k < squarings; ++k) r = r * r;
    return r;
}

Mat build_pi(const LqModel& model) {
    model.validate();
    const int d = model.dim;
    const Mat id = Mat::Identity(d, d);
    const Mat r2 = model.R + model.R.transpose();
    Eigen::FullPivLU<Mat> lu(r2);
    if (!lu.isInvertible()) throw InputError("build_pi: R + R^T is singular");
    Mat pi = Mat::Zero(2 * d, 2 * d);
    pi.block(0, d, d, d) = -2.0 * lu.solve(id);
    pi.block(d, 0, d, d) = -(model.Q_sym() + model.Qbar_sym() * (id - model.S));
    return pi;
}

Mat FundamentalMatrix::assembled() const {
    const Eigen::Index d = phi11.rows();
    Mat out(2 * d, 2 * d);
    out << phi11, phi12, phi21, phi22;
    return out;
}

FundamentalMatrix fundamental_matrix(const Mat& pi, int dim, double s) {
    const Mat e = matrix_exponential(pi * s);
    FundamentalMatrix f;
    f.s = s;
    f.phi11 = e.block(0, 0, dim, dim);
    f.phi12 = e.block(0, dim, dim, dim);
    f.phi21 = e.block(dim, 0, dim, dim);
    f.phi22 = e.block(dim, dim, dim, dim);
    return f;
}

FundamentalMatrix fundamental_matrix(const LqModel& model, double s) {
    return fundamental_matrix(build_pi(model), model.dim, s);
}

double solvability_determinant(const FundamentalMatrix& phi, const Mat& terminal_weight) {
    return (phi.phi22 - terminal_weight * phi.phi12).determinant();
}

MeanBvpSolution solve_mean_bvp(const LqModel& model, const Vec& ybar0, const std::vector<double>& grid) {
    model.validate();
    if (ybar0.size() != model.dim) throw InputError("solve_mean_bvp: ybar0 dimension mismatch");
    const int d = model.dim;
    const Mat pi = build_pi(model);
    const Mat g = model.QT_sym();
    const FundamentalMatrix phi = fundamental_matrix(pi, d, model.horizon);

    const Mat system = phi.phi22 - g * phi.phi12;
    const Vec rhs = (g * phi.phi11 - phi.phi21) * ybar0;
    const double det = system.determinant();
    if (std::abs(det) < 1e-10 * (1.0 + system.norm())) {
        std::ostringstream msg;
        msg << "mean-path boundary-value problem is singular at T=" << model.horizon << " (det=" << det << ")";
        throw SingularSystem(msg.str(), det);
    }

    MeanBvpSolution out;
    out.determinant = det;
    out.pbar0 = system.partialPivLu().solve(rhs);
    Vec x0(2 * d);
    x0 << ybar0, out.pbar0;
    out.path.reserve(grid.size());
    for (double s : grid) {
        const Vec x = matrix_exponential(pi * s) * x0;
        out.path.push_back({s, x.head(d), x.tail(d)});
    }
    return out;
}

MeanBvpSolution solve_mean_bvp(const LqModel& model, const Vec& ybar0, int n_points) {
    return solve_mean_bvp(model, ybar0, uniform_grid(0.0, model.horizon, std::max(1, n_points - 1)));
}

BlowupReport detect_blowup(const LqModel& model, double t_lo, double t_hi, int samples) {
    if (t_lo < 0.0 || !(t_hi > t_lo)) throw InputError("detect_blowup: need 0 <= t_lo < t_hi");
    if (samples < 2) throw InputError("detect_blowup: need at least 2 samples");
    const Mat pi = build_pi(model);
    const Mat g = model.QT_sym();
    const int d = model.dim;
    auto det_at = [&](double s) { return solvability_determinant(fundamental_matrix(pi, d, s), g); };

    BlowupReport rep;
    rep.t_lo = t_lo;
    rep.t_hi = t_hi;
    for (int k = 0; k < samples; ++k) {
        const double s = t_lo + (t_hi - t_lo) * k / (samples - 1);
        rep.det_samples.emplace_back(s, det_at(s));
    }
    for (size_t k = 1; k < rep.det_samples.size(); ++k) {
        auto [a, fa] = rep.det_samples[k - 1];
        auto [b, fb] = rep.det_samples[k];
        if (fa == 0.0) {
            rep.root = a;
            rep.bracket = std::make_pair(a, a);
            break;
        }
        if ((fa < 0.0) == (fb < 0.0)) continue;
        rep.bracket = std::make_pair(a, b);
        while (b - a > 1e-8) {
            const double mid = 0.5 * (a + b);
            const double fm = det_at(mid);
            if (fm == 0.0) {
                a = b = mid;
                break;
            }
            if ((fm < 0.0) == (fa < 0.0)) {
                a = mid;
                fa = fm;
            } else {
                b = mid;
                fb = fm;
            }
        }
        // Secant point of the final bracket: det is smooth, so this is accurate to rounding.
        rep.root = (a == b || fa == fb) ? 0.5 * (a + b) : a - fa * (b - a) / (fb - fa);
        break;
    }
    return rep;
}

std::vector<double> uniform_grid(double t0, double t1, int n_steps) {
    std::vector<double> g(static_cast<size_t>(n_steps) + 1);
    for (int k = 0; k <= n_steps; ++k) g[static_cast<size_t>(k)] = t0 + (t1 - t0) * k / n_steps;
    g.back() = t1;
    return g;
}

Mat RiccatiSolution::at(double s) const {
    if (grid.empty()) throw InputError("RiccatiSolution::at: empty solution");
    if (s <= grid.front()) return P.front();
    if (s >= grid.back()) return P.back();
    const auto it = std::upper_bound(grid.begin(), grid.end(), s);
    const size_t k = static_cast<size_t>(it - grid.begin());
    const double w = (s - grid[k - 1]) / (grid[k] - grid[k - 1]);
    return (1.0 - w) * P[k - 1] + w * P[k];
}

RiccatiSolution riccati_solve(const LqModel& model, const std::vector<double>& grid) {
    model.validate();
    if (grid.size() < 2) throw InputError("riccati_solve: grid needs at least two points");
    for (size_t k = 1; k < grid.size(); ++k)
        if (!(grid[k] > grid[k - 1])) throw InputError("riccati_solve: grid must be strictly ascending");
    if (std::abs(grid.back() - model.horizon) > 1e-12 * (1.0 + model.horizon))
        throw InputError("riccati_solve: grid must end at the horizon");

    const Mat r_inv = model.R_sym().inverse();
    const Mat q = model.Q_sym() + model.Qbar_sym();
    auto rhs = [&](const Mat& p) -> Mat { return p * r_inv * p - q; };

    RiccatiSolution sol;
    sol.grid = grid;
    sol.P.resize(grid.size());
    Mat p = model.QT_sym();
    sol.P.back() = p;
    for (size_t k = grid.size() - 1; k > 0; --k) {
        const double h = -(grid[k] - grid[k - 1]);
        const Mat k1 = rhs(p);
        const Mat k2 = rhs(p + 0.5 * h * k1);
        const Mat k3 = rhs(p + 0.5 * h * k2);
        const Mat k4 = rhs(p + h * k3);
        p = p + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        p = symmetrize(p);
        if (!p.allFinite() || p.cwiseAbs().maxCoeff() > 1e12) {
            std::ostringstream msg;
            msg << "Riccati solution blew up at s=" << grid[k - 1];
            throw RiccatiBlowup(msg.str(), grid[k - 1]);
        }
        sol.P[k - 1] = p;
    }
    return sol;
}

CounterexampleReport counterexample_report() {
    CounterexampleReport rep;
    rep.model = counterexample_model(0.11);
    rep.constants = assumption_constants(rep.model);
    rep.scan = detect_blowup(rep.model, 0.05, 0.15, 101);
    rep.extended_scan = detect_blowup(rep.model, 0.05, 1.0, 951);
    const Mat pi = build_pi(rep.model);
    rep.det_at_0_10 = fundamental_matrix(pi, 2, 0.10).phi22.determinant();
    rep.det_at_0_11 = fundamental_matrix(pi, 2, 0.11).phi22.determinant();
    rep.ci_margin_at_0_11 = ci_margin(rep.constants, 0.11);
    rep.cii_margin_at_0_10 = cii_margin(rep.constants, 0.10);
    rep.lifespan = lifespan_bound(rep.constants).value_or(std::numeric_limits<double>::infinity());
    return rep;
}

} // namespace mfg
