#include "mfg/analysis.hpp"

#include "mfg/errors.hpp"
#include "mfg/format.hpp"
#include "mfg/log.hpp"
#include "mfg/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mfg {

namespace {

constexpr double kDivergence = 1e100;

FieldSlice zero_slice(int d) {
    FieldSlice s;
    s.basis = PolynomialBasis(d, 0);
    s.coeffs = Mat::Zero(1, d);
    return s;
}

double max_of(const std::vector<double>& parts) {
    double m = 0.0;
    for (double v : parts) {
        if (std::isnan(v)) return v;
        m = std::max(m, v);
    }
    return m;
}

/// Linear FBSDE for (Dy, Dp) along frozen base paths. The field for Dp at
/// step k is J_k(y) Dy + A_k(y): J_k is the Jacobian of the base field (the
/// Hessian of h1 at the horizon) and A_k is regressed on the base state.
class JacobianEngine {
public:
    JacobianEngine(const SolveReport& sol, const CostModel& model, const Vec& psi)
        : sol_(sol), model_(model), cfg_(sol.config), steps_(sol.grid.n_steps()), d_(model.dim()),
          dt_(sol.grid.dt()) {
        const Mat& init = sol.flow.checkpoints.at(0).states;
        n_ = init.rows();
        base_ = simulate_paths(model, init, sol.grid, sol.field, cfg_);
        noise_ = diffusion_increments(model, cfg_, n_, steps_, dt_);
        controls_.resize(static_cast<size_t>(steps_));
        for (Eigen::Index k = 0; k < steps_; ++k) {
            const Mat& Y = base_[static_cast<size_t>(k)];
            Mat& U = controls_[static_cast<size_t>(k)];
            U.resize(n_, d_);
            const FieldSlice& F = sol.field.at(k);
            parallel_chunks(n_, cfg_.threads, [&](std::ptrdiff_t, std::ptrdiff_t b, std::ptrdiff_t e) {
                const Mat Yc = Y.middleRows(b, e - b);
                Mat Uc;
                model.feedback(Yc, F.evaluate(Yc), Uc);
                U.middleRows(b, e - b) = Uc;
            });
        }
        if (model.constant_hessians()) {
            const G1Eval g1 = model.eval_g1(Vec::Zero(d_), Vec::Zero(d_));
            const G2Eval g2 = model.eval_g2(Vec::Zero(d_), sol.flow.summaries.front());
            hyy_ = g1.hess_yy + g2.hess_yy;
            hyv_ = g1.hess_yv;
            hvv_inv_ = g1.hess_vv.inverse();
            mfield_ = g2.mfield_matrix;
        }
        psi_row_ = psi.transpose();
        ropts_.degree = cfg_.basis_degree;
        ropts_.threads = cfg_.threads;
        tol_ = cfg_.picard_tol * psi.cwiseAbs().maxCoeff();
    }

    const MeasureSummary& law(Eigen::Index k) const { return sol_.flow.summaries[static_cast<size_t>(k)]; }

    /// J_k(Y) Dy for k < n, hess h1 Dy at the horizon.
    Mat linear_part(Eigen::Index k, const Mat& Y, const Mat& Dy) const {
        Mat out;
        if (k == steps_)
            model_.terminal_hessian_apply(Y, Dy, out);
        else
            out = sol_.field.at(k).directional(Y, Dy);
        return out;
    }

    /// Du from the linearized first-order condition, and the linear driver.
    void linearize(Eigen::Index k, Eigen::Index b, Eigen::Index e, const Mat& Dy, const Mat& Dp, const Vec& mean_dy,
                   Mat& Du, Mat* drive) const {
        const Eigen::Index rows = e - b;
        if (model_.constant_hessians()) {
            Du = -(Dp + Dy * hyv_) * hvv_inv_.transpose();
            if (drive) {
                *drive = Dy * hyy_.transpose() + Du * hyv_.transpose();
                drive->rowwise() += (mfield_ * mean_dy).transpose();
            }
            return;
        }
        const Mat& Y = base_[static_cast<size_t>(k)];
        const Mat& U = controls_[static_cast<size_t>(k)];
        Du.resize(rows, d_);
        if (drive) drive->resize(rows, d_);
        for (Eigen::Index i = 0; i < rows; ++i) {
            const Vec y = Y.row(b + i).transpose();
            const G1Eval g1 = model_.eval_g1(y, U.row(b + i).transpose());
            const G2Eval g2 = model_.eval_g2(y, law(k));
            const Vec dy = Dy.row(i).transpose();
            const Vec du = -g1.hess_vv.ldlt().solve(Dp.row(i).transpose() + g1.hess_yv.transpose() * dy);
            Du.row(i) = du.transpose();
            if (drive)
                drive->row(i) = ((g1.hess_yy + g2.hess_yy) * dy + g1.hess_yv * du + g2.mfield_matrix * mean_dy).transpose();
        }
    }

    Vec mean_of(const Mat& A) const {
        std::vector<Vec> parts(static_cast<size_t>(chunk_count(n_)));
        parallel_chunks(n_, cfg_.threads, [&](std::ptrdiff_t c, std::ptrdiff_t b, std::ptrdiff_t e) {
            parts[static_cast<size_t>(c)] = A.middleRows(b, e - b).colwise().sum().transpose();
        });
        return pairwise_sum(std::move(parts)) / static_cast<double>(n_);
    }

    /// One forward step of the linear system: returns Dp_k and writes Dy_{k+1}.
    Mat forward_step(Eigen::Index k, const FieldSlice& A, const Mat& Dy, Mat& Du, Mat& DyNext) const {
        const Mat& Y = base_[static_cast<size_t>(k)];
        Mat Dp(n_, d_);
        Du.resize(n_, d_);
        DyNext.resize(n_, d_);
        const Vec mdy = mean_of(Dy);
        parallel_chunks(n_, cfg_.threads, [&](std::ptrdiff_t, std::ptrdiff_t b, std::ptrdiff_t e) {
            const Mat Yc = Y.middleRows(b, e - b);
            const Mat Dyc = Dy.middleRows(b, e - b);
            const Mat Dpc = linear_part(k, Yc, Dyc) + A.evaluate(Yc);
            Mat Duc;
            linearize(k, b, e, Dyc, Dpc, mdy, Duc, nullptr);
            Dp.middleRows(b, e - b) = Dpc;
            Du.middleRows(b, e - b) = Duc;
            DyNext.middleRows(b, e - b) = Dyc + dt_ * Duc;
        });
        return Dp;
    }

    /// Regression residual target for A_k.
    Mat target(Eigen::Index k, const FieldSlice* next_a, const Mat& Dy, const Mat& Dp, const Mat& DyNext) const {
        const Mat& Y = base_[static_cast<size_t>(k)];
        const Mat& Yn = base_[static_cast<size_t>(k + 1)];
        const Mat& U = controls_[static_cast<size_t>(k)];
        const Mat& noise = noise_[static_cast<size_t>(k)];
        const Vec mdy = mean_of(Dy);
        Mat T(n_, d_);
        parallel_chunks(n_, cfg_.threads, [&](std::ptrdiff_t, std::ptrdiff_t b, std::ptrdiff_t e) {
            const Mat Yc = Y.middleRows(b, e - b);
            const Mat Ync = Yn.middleRows(b, e - b);
            const Mat Dyc = Dy.middleRows(b, e - b);
            const Mat Dync = DyNext.middleRows(b, e - b);
            Mat next = linear_part(k + 1, Ync, Dync);
            if (next_a != nullptr) {
                const Mat predicted = Yc + dt_ * U.middleRows(b, e - b);
                next += next_a->evaluate(Ync) - next_a->directional(predicted, noise.middleRows(b, e - b));
            }
            Mat Du, drive;
            linearize(k, b, e, Dyc, Dp.middleRows(b, e - b), mdy, Du, &drive);
            T.middleRows(b, e - b) = next + dt_ * drive - linear_part(k, Yc, Dyc);
        });
        return T;
    }

    double change(const FieldSlice& a, const FieldSlice& b, const Mat& Y) const {
        std::vector<double> parts(static_cast<size_t>(chunk_count(n_)), 0.0);
        parallel_chunks(n_, cfg_.threads, [&](std::ptrdiff_t c, std::ptrdiff_t s, std::ptrdiff_t e) {
            const Mat Yc = Y.middleRows(s, e - s);
            const Mat diff = a.evaluate(Yc) - b.evaluate(Yc);
            double m = 0.0;
            for (Eigen::Index i = 0; i < diff.rows(); ++i) {
                const double r = diff.row(i).norm();
                if (std::isnan(r)) {
                    m = r;
                    break;
                }
                m = std::max(m, r);
            }
            parts[static_cast<size_t>(c)] = m;
        });
        return max_of(parts);
    }

    void forward_pass() {
        dy_.resize(static_cast<size_t>(steps_ + 1));
        dy_[0] = psi_row_.replicate(n_, 1);
        Mat Du;
        for (Eigen::Index k = 0; k < steps_; ++k)
            forward_step(k, a_[static_cast<size_t>(k)], dy_[static_cast<size_t>(k)], Du, dy_[static_cast<size_t>(k + 1)]);
    }

    bool local_solve(Eigen::Index s, Eigen::Index e, SubintervalRecord& rec, double& sweep_change) {
        const Eigen::Index w = e - s;
        const FieldSlice* proxy = (e == steps_) ? nullptr : &a_[static_cast<size_t>(e)];
        std::vector<FieldSlice> cur(a_.begin() + s, a_.begin() + e);
        std::vector<Mat> Dy(static_cast<size_t>(w + 1)), Dp(static_cast<size_t>(w)), Du(static_cast<size_t>(w));
        Dy[0] = dy_[static_cast<size_t>(s)];
        rec.distances.clear();
        rec.ratios.clear();
        rec.converged = false;
        bool diverged = false;
        for (int it = 0; it < cfg_.max_picard; ++it) {
            for (Eigen::Index j = 0; j < w; ++j) {
                const auto sj = static_cast<size_t>(j);
                Dp[sj] = forward_step(s + j, cur[sj], Dy[sj], Du[sj], Dy[sj + 1]);
            }
            std::vector<FieldSlice> fresh(static_cast<size_t>(w));
            for (Eigen::Index j = w - 1; j >= 0; --j) {
                const auto sj = static_cast<size_t>(j);
                const FieldSlice* next = (j == w - 1) ? proxy : &fresh[sj + 1];
                fresh[sj] = regress_field(base_[static_cast<size_t>(s + j)], target(s + j, next, Dy[sj], Dp[sj], Dy[sj + 1]),
                                          ropts_);
            }
            double dist = 0.0;
            for (Eigen::Index j = 0; j < w && !std::isnan(dist); ++j) {
                const double c = change(fresh[static_cast<size_t>(j)], cur[static_cast<size_t>(j)],
                                        base_[static_cast<size_t>(s + j)]);
                dist = std::isnan(c) ? c : std::max(dist, c);
            }
            if (!rec.distances.empty()) rec.ratios.push_back(dist / rec.distances.back());
            rec.distances.push_back(dist);
            cur = std::move(fresh);
            if (!std::isfinite(dist) || dist > kDivergence) {
                diverged = true;
                break;
            }
            if (dist <= tol_) {
                rec.converged = true;
                break;
            }
        }
        rec.iterations = static_cast<int>(rec.distances.size());
        if (diverged || (!rec.converged && !rec.ratios.empty() && !(rec.ratios.back() < 1.0))) {
            status_ = SolveStatus::non_contraction;
            return false;
        }
        if (!rec.converged) {
            status_ = SolveStatus::max_iterations;
            return false;
        }
        for (Eigen::Index j = 0; j < w; ++j) {
            const auto sj = static_cast<size_t>(j);
            sweep_change = std::max(sweep_change, change(cur[sj], a_[static_cast<size_t>(s + j)], base_[static_cast<size_t>(s + j)]));
            a_[static_cast<size_t>(s + j)] = std::move(cur[sj]);
        }
        return true;
    }

    JacobianFlowResult run() {
        JacobianFlowResult out;
        out.direction = psi_row_.transpose();
        a_.assign(static_cast<size_t>(steps_ + 1), zero_slice(d_));
        forward_pass();
        const auto& bounds = sol_.grid.boundaries;
        bool converged = false;
        status_ = SolveStatus::converged;
        for (int sweep = 0; sweep < cfg_.max_picard; ++sweep) {
            std::vector<SubintervalRecord> records;
            double sweep_change = 0.0;
            for (size_t i = bounds.size() - 1; i > 0; --i) {
                SubintervalRecord rec;
                rec.step_begin = bounds[i - 1];
                rec.step_end = bounds[i];
                rec.t_begin = sol_.grid.times[static_cast<size_t>(rec.step_begin)];
                rec.t_end = sol_.grid.times[static_cast<size_t>(rec.step_end)];
                const bool ok = local_solve(rec.step_begin, rec.step_end, rec, sweep_change);
                records.push_back(rec);
                if (!ok) break;
            }
            std::reverse(records.begin(), records.end());
            out.subintervals = records;
            if (status_ != SolveStatus::converged) break;
            forward_pass();
            out.sweep_distances.push_back(sweep_change);
            // The first sweep starts from A = 0, so its change is not a convergence measure.
            if (sweep > 0 && sweep_change <= tol_) {
                converged = true;
                break;
            }
            if (!std::isfinite(sweep_change) || sweep_change > kDivergence) {
                status_ = SolveStatus::non_contraction;
                break;
            }
        }
        if (status_ == SolveStatus::converged && !converged) {
            const auto& sd = out.sweep_distances;
            status_ = (sd.size() >= 2 && !(sd.back() < sd[sd.size() - 2])) ? SolveStatus::non_contraction
                                                                          : SolveStatus::max_iterations;
        }
        out.status = status_;
        out.converged = status_ == SolveStatus::converged;

        out.times = sol_.grid.times;
        out.dp_norms.resize(static_cast<size_t>(steps_ + 1));
        out.dy_norms.resize(static_cast<size_t>(steps_ + 1));
        for (Eigen::Index k = 0; k <= steps_; ++k) {
            const Mat& Y = base_[static_cast<size_t>(k)];
            const Mat& Dy = dy_[static_cast<size_t>(k)];
            Mat Dp(n_, d_);
            parallel_chunks(n_, cfg_.threads, [&](std::ptrdiff_t, std::ptrdiff_t b, std::ptrdiff_t e) {
                const Mat Yc = Y.middleRows(b, e - b);
                Dp.middleRows(b, e - b) = linear_part(k, Yc, Dy.middleRows(b, e - b)) + a_[static_cast<size_t>(k)].evaluate(Yc);
            });
            out.dp_norms[static_cast<size_t>(k)] = std::sqrt(mean_of(Dp.rowwise().squaredNorm())(0));
            out.dy_norms[static_cast<size_t>(k)] = std::sqrt(mean_of(Dy.rowwise().squaredNorm())(0));
        }
        return out;
    }

private:
    const SolveReport& sol_;
    const CostModel& model_;
    const SolverConfig& cfg_;
    Eigen::Index n_ = 0, steps_;
    int d_;
    double dt_;
    std::vector<Mat> base_, controls_, noise_, dy_;
    std::vector<FieldSlice> a_;
    Mat hyy_, hyv_, hvv_inv_, mfield_;
    Eigen::RowVectorXd psi_row_;
    RegressionOptions ropts_;
    double tol_ = 0.0;
    SolveStatus status_ = SolveStatus::converged;
};

} // namespace

JacobianFlowResult jacobian_flow_solve(const SolveReport& solution, const CostModel& model, const Vec& psi,
                                       std::optional<double> gamma3) {
    if (psi.size() != model.dim()) throw InputError("jacobian_flow_solve: psi dimension does not match the model");
    if (!psi.allFinite()) throw InputError("jacobian_flow_solve: psi must be finite");
    if (!solution.converged) throw InputError("jacobian_flow_solve: base solution did not converge");
    if (!solution.flow.checkpoints.count(0)) throw InputError("jacobian_flow_solve: base solution lacks the initial ensemble");

    JacobianEngine engine(solution, model, psi);
    JacobianFlowResult out = engine.run();
    const AssumptionConstants& c = model.constants();
    out.gamma3 = gamma3.value_or(default_gamma3(c));
    out.c2_bound = c2_bound(c, out.gamma3);
    out.bound_satisfied = false;
    if (out.c2_bound && out.converged) {
        const double limit = *out.c2_bound * (1.0 + 1e-2);
        out.bound_satisfied = std::all_of(out.dp_norms.begin(), out.dp_norms.end(), [&](double v) { return v <= limit; });
    }
    if (!out.converged)
        log_message(LogLevel::info, std::string("Jacobian flow stopped: ") + to_string(out.status));
    return out;
}

} // namespace mfg
