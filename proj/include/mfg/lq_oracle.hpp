#pragma once

#include "mfg/model.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace mfg {

/// exp(A) by scaling and squaring with the degree-13 diagonal Pade
/// approximant (Higham 2005). Throws InputError on non-finite input.
Mat matrix_exponential(const Mat& a);

/// Generator of the mean-path ODE d/ds (ybar, pbar) = Pi (ybar, pbar):
///   Pi = [[0, -2(R+R^T)^{-1}], [-1/2(Q+Q^T) - 1/2(Qbar+Qbar^T)(I-S), 0]].
Mat build_pi(const LqModel& model);

/// Phi(s) = exp(Pi s) split into d x d blocks.
struct FundamentalMatrix {
    double s = 0.0;
    Mat phi11, phi12, phi21, phi22;

    Mat assembled() const;
};

FundamentalMatrix fundamental_matrix(const LqModel& model, double s);
FundamentalMatrix fundamental_matrix(const Mat& pi, int dim, double s);

/// det(Phi22(s) - G Phi12(s)) with G = 1/2(QT+QT^T); vanishes where the mean
/// path boundary-value problem loses unique solvability.
double solvability_determinant(const FundamentalMatrix& phi, const Mat& terminal_weight);

struct MeanPathPoint {
    double s = 0.0;
    Vec ybar, pbar;
};

struct MeanBvpSolution {
    Vec pbar0;
    std::vector<MeanPathPoint> path;
    double determinant = 0.0;
};

/// Solves (Phi22(T) - G Phi12(T)) pbar0 = (G Phi11(T) - Phi21(T)) ybar0 and
/// tabulates the mean path on `grid` (times in [0, T]). Throws SingularSystem
/// when |det| < 1e-10 (1 + ||Phi22 - G Phi12||_F).
MeanBvpSolution solve_mean_bvp(const LqModel& model, const Vec& ybar0, const std::vector<double>& grid);
MeanBvpSolution solve_mean_bvp(const LqModel& model, const Vec& ybar0, int n_points = 101);

struct BlowupReport {
    double t_lo = 0.0, t_hi = 0.0;
    std::vector<std::pair<double, double>> det_samples;  // (s, det)
    std::optional<double> root;
    std::optional<std::pair<double, double>> bracket;    // sign-change pair of det_samples
};

/// Samples det(Phi22(s) - G Phi12(s)) at `samples` equispaced points of
/// [t_lo, t_hi]; on the first sign change bisects to width 1e-8.
BlowupReport detect_blowup(const LqModel& model, double t_lo, double t_hi, int samples);

struct RiccatiSolution {
    std::vector<double> grid;
    std::vector<Mat> P;

    /// Linear interpolation in time.
    Mat at(double s) const;
};

/// Integrates P' = P R_sym^{-1} P - Q_sym - Qbar_sym backward from
/// P(T) = QT_sym with classical RK4 on the steps of `grid` (which must end at
/// T). Throws RiccatiBlowup when an entry exceeds 1e12.
RiccatiSolution riccati_solve(const LqModel& model, const std::vector<double>& grid);

std::vector<double> uniform_grid(double t0, double t1, int n_steps);

struct CounterexampleReport {
    LqModel model;
    AssumptionConstants constants;
    BlowupReport scan;           // [0.05, 0.15]
    BlowupReport extended_scan;  // [0.05, 1.0]
    double det_at_0_10 = 0.0;
    double det_at_0_11 = 0.0;
    double ci_margin_at_0_11 = 0.0;
    double cii_margin_at_0_10 = 0.0;
    double lifespan = 0.0;
};

CounterexampleReport counterexample_report();

} // namespace mfg
