#include "mfg/model.hpp"

#include "mfg/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mfg {

namespace {

void require_shape(const Mat& m, int d, const char* name) {
    if (m.rows() != d || m.cols() != d) {
        std::ostringstream msg;
        msg << "matrix " << name << " is " << m.rows() << "x" << m.cols() << ", expected " << d << "x" << d;
        throw InputError(msg.str());
    }
    if (!m.allFinite()) throw InputError(std::string("matrix ") + name + " has non-finite entries");
}

} // namespace

void LqModel::validate() const {
    if (dim < 1) throw InputError("dim must be positive");
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw InputError("horizon must be positive");
    require_shape(eta, dim, "eta");
    require_shape(Q, dim, "Q");
    require_shape(R, dim, "R");
    require_shape(Qbar, dim, "Qbar");
    require_shape(S, dim, "S");
    require_shape(QT, dim, "QT");
    if (!((eta * eta.transpose()).determinant() > 0.0)) throw InputError("eta is rank deficient");
    if (!(least_eigenvalue(R_sym()) > 0.0)) throw InputError("symmetric part of R is not positive definite");
}

void AssumptionConstants::validate() const {
    if (!(lambda_big > 0.0)) throw InputError("lambda_big must be positive");
    if (c_g2 < 0.0 || C_g1 < 0.0 || C_g2 < 0.0 || C_h1 < 0.0)
        throw InputError("c_g2, C_g1, C_g2, C_h1 must be non-negative");
}

// ---------------------------------------------------------------------------
// CostModel defaults

Vec CostModel::solve_foc(const Vec& y, const Vec& p) const {
    Vec v = Vec::Zero(p.size());
    const double target = 1e-12 * (1.0 + p.norm());
    double residual = 0.0;
    for (int it = 0; it < 50; ++it) {
        const G1Eval g = eval_g1(y, v);
        const Vec f = p + g.grad_v;
        residual = f.norm();
        if (residual <= target) return v;
        v -= g.hess_vv.ldlt().solve(f);
    }
    const Vec f = p + eval_g1(y, v).grad_v;
    residual = f.norm();
    if (residual <= target) return v;
    std::ostringstream msg;
    msg << "solve_foc: Newton did not converge in 50 iterations, last residual " << residual;
    throw ConvergenceError(msg.str());
}

void CostModel::feedback(const Mat& Y, const Mat& P, Mat& U) const {
    U.resize(Y.rows(), Y.cols());
    for (Eigen::Index i = 0; i < Y.rows(); ++i)
        U.row(i) = solve_foc(Y.row(i).transpose(), P.row(i).transpose()).transpose();
}

void CostModel::driver(const Mat& Y, const Mat& U, const MeasureSummary& m, Mat& G) const {
    G.resize(Y.rows(), Y.cols());
    for (Eigen::Index i = 0; i < Y.rows(); ++i) {
        const Vec y = Y.row(i).transpose();
        G.row(i) = (eval_g1(y, U.row(i).transpose()).grad_y + eval_g2(y, m).grad_y).transpose();
    }
}

void CostModel::terminal_gradient(const Mat& Y, Mat& G) const {
    G.resize(Y.rows(), Y.cols());
    for (Eigen::Index i = 0; i < Y.rows(); ++i) G.row(i) = eval_h1(Y.row(i).transpose()).grad.transpose();
}

void CostModel::terminal_hessian_apply(const Mat& Y, const Mat& V, Mat& out) const {
    out.resize(Y.rows(), Y.cols());
    for (Eigen::Index i = 0; i < Y.rows(); ++i)
        out.row(i) = (eval_h1(Y.row(i).transpose()).hess * V.row(i).transpose()).transpose();
}

void CostModel::control_gradient(const Mat& Y, const Mat& U, Mat& G) const {
    G.resize(U.rows(), U.cols());
    for (Eigen::Index i = 0; i < Y.rows(); ++i)
        G.row(i) = eval_g1(Y.row(i).transpose(), U.row(i).transpose()).grad_v.transpose();
}

void CostModel::running_cost(const Mat& Y, const Mat& U, const MeasureSummary& m, Vec& c) const {
    c.resize(Y.rows());
    for (Eigen::Index i = 0; i < Y.rows(); ++i) {
        const Vec y = Y.row(i).transpose();
        c(i) = eval_g1(y, U.row(i).transpose()).value + eval_g2(y, m).value;
    }
}

void CostModel::terminal_cost(const Mat& Y, Vec& c) const {
    c.resize(Y.rows());
    for (Eigen::Index i = 0; i < Y.rows(); ++i) c(i) = eval_h1(Y.row(i).transpose()).value;
}

// ---------------------------------------------------------------------------
// LQ

LqCostModel::LqCostModel(LqModel model) : model_(std::move(model)) {
    model_.validate();
    r_sym_ = model_.R_sym();
    r_sym_inv_ = r_sym_.inverse();
    q_sym_ = model_.Q_sym();
    qbar_sym_ = model_.Qbar_sym();
    qt_sym_ = model_.QT_sym();
    state_hessian_ = q_sym_ + qbar_sym_;
    mfield_ = model_.mfield_matrix();
    constants_ = assumption_constants(model_);
}

G1Eval LqCostModel::eval_g1(const Vec& y, const Vec& v) const {
    const int d = model_.dim;
    G1Eval g;
    g.value = 0.5 * y.dot(model_.Q * y) + 0.5 * v.dot(model_.R * v);
    g.grad_y = q_sym_ * y;
    g.grad_v = r_sym_ * v;
    g.hess_yy = q_sym_;
    g.hess_yv = Mat::Zero(d, d);
    g.hess_vv = r_sym_;
    return g;
}

G2Eval LqCostModel::eval_g2(const Vec& y, const MeasureSummary& m) const {
    const Vec z = y - model_.S * m.mean;
    G2Eval g;
    g.value = 0.5 * z.dot(model_.Qbar * z);
    g.grad_y = qbar_sym_ * z;
    g.hess_yy = qbar_sym_;
    g.mfield_matrix = mfield_;
    return g;
}

H1Eval LqCostModel::eval_h1(const Vec& y) const {
    H1Eval h;
    h.value = 0.5 * y.dot(model_.QT * y);
    h.grad = qt_sym_ * y;
    h.hess = qt_sym_;
    return h;
}

Vec LqCostModel::solve_foc(const Vec&, const Vec& p) const { return -(r_sym_inv_ * p); }

void LqCostModel::feedback(const Mat&, const Mat& P, Mat& U) const { U.noalias() = -(P * r_sym_inv_); }

void LqCostModel::driver(const Mat& Y, const Mat&, const MeasureSummary& m, Mat& G) const {
    const Vec shift = qbar_sym_ * (model_.S * m.mean);
    G.noalias() = Y * state_hessian_;
    G.rowwise() -= shift.transpose();
}

void LqCostModel::terminal_gradient(const Mat& Y, Mat& G) const { G.noalias() = Y * qt_sym_; }

void LqCostModel::terminal_hessian_apply(const Mat&, const Mat& V, Mat& out) const { out.noalias() = V * qt_sym_; }

void LqCostModel::control_gradient(const Mat&, const Mat& U, Mat& G) const { G.noalias() = U * r_sym_; }

void LqCostModel::running_cost(const Mat& Y, const Mat& U, const MeasureSummary& m, Vec& c) const {
    const Mat Z = Y.rowwise() - (model_.S * m.mean).transpose();
    c = 0.5 * ((Y * q_sym_).cwiseProduct(Y).rowwise().sum() + (U * r_sym_).cwiseProduct(U).rowwise().sum() +
               (Z * qbar_sym_).cwiseProduct(Z).rowwise().sum());
}

void LqCostModel::terminal_cost(const Mat& Y, Vec& c) const { c = 0.5 * (Y * qt_sym_).cwiseProduct(Y).rowwise().sum(); }

// ---------------------------------------------------------------------------

FunctionalCostModel::FunctionalCostModel(int dim, Mat eta, Callbacks callbacks, AssumptionConstants constants)
    : dim_(dim), eta_(std::move(eta)), cb_(std::move(callbacks)), constants_(constants) {
    if (dim_ < 1) throw InputError("dim must be positive");
    if (eta_.rows() != dim_ || eta_.cols() != dim_) throw InputError("eta dimension mismatch");
    if (!cb_.g1 || !cb_.g2 || !cb_.h1) throw InputError("g1, g2 and h1 callbacks are required");
    constants_.validate();
}

std::shared_ptr<const LqCostModel> lq_cost_model(const LqModel& model) {
    return std::make_shared<const LqCostModel>(model);
}

AssumptionConstants assumption_constants(const LqModel& model) {
    model.validate();
    AssumptionConstants c;
    const Mat r = model.R_sym();
    const Mat q = model.Q_sym();
    const Mat qbar = model.Qbar_sym();
    const Mat qt = model.QT_sym();
    c.lambda_big = least_eigenvalue(r);
    c.lambda_g1 = -least_eigenvalue(q);
    c.lambda_g2 = -least_eigenvalue(qbar);
    c.lambda_h1 = -least_eigenvalue(qt);
    c.c_g2 = operator_norm(model.mfield_matrix());
    // The Hessian of g1 in (y, v) is block diagonal.
    c.C_g1 = std::max(operator_norm(q), operator_norm(r));
    c.C_g2 = operator_norm(qbar);
    c.C_h1 = operator_norm(qt);
    return c;
}

double finite_difference_gradient_error(const CostModel& model, const Vec& y, const Vec& v,
                                        const MeasureSummary& m, double step) {
    const G1Eval g1 = model.eval_g1(y, v);
    const G2Eval g2 = model.eval_g2(y, m);
    const H1Eval h1 = model.eval_h1(y);
    double worst = 0.0;
    auto compare = [&](double analytic, double fd) {
        const double err = std::abs(analytic - fd) / std::max(1.0, std::abs(analytic));
        worst = std::max(worst, err);
    };
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        Vec yp = y, ym = y;
        yp(i) += step;
        ym(i) -= step;
        compare(g1.grad_y(i), (model.eval_g1(yp, v).value - model.eval_g1(ym, v).value) / (2 * step));
        compare(g2.grad_y(i), (model.eval_g2(yp, m).value - model.eval_g2(ym, m).value) / (2 * step));
        compare(h1.grad(i), (model.eval_h1(yp).value - model.eval_h1(ym).value) / (2 * step));
        Vec vp = v, vm = v;
        vp(i) += step;
        vm(i) -= step;
        compare(g1.grad_v(i), (model.eval_g1(y, vp).value - model.eval_g1(y, vm).value) / (2 * step));
    }
    return worst;
}

// ---------------------------------------------------------------------------

LqModel counterexample_model(double horizon) {
    LqModel m;
    m.dim = 2;
    m.horizon = horizon;
    m.label = "counterexample";
    m.eta = 0.2 * Mat::Identity(2, 2);
    m.R.resize(2, 2);
    m.R << 0.812, -0.826, -0.826, 0.861;
    m.Q.resize(2, 2);
    m.Q << -0.419, -0.0150, -0.0150, -0.0180;
    m.Qbar.resize(2, 2);
    m.Qbar << -0.360, 0.416, 0.416, -0.855;
    m.S = -0.941 * Mat::Identity(2, 2);
    m.QT = Mat::Zero(2, 2);
    return m;
}

LqModel convex_benchmark_model() {
    LqModel m;
    m.dim = 1;
    m.horizon = 1.0;
    m.label = "convex-1d";
    m.eta = Mat::Constant(1, 1, 0.5);
    m.Q = Mat::Constant(1, 1, 1.0);
    m.R = Mat::Constant(1, 1, 2.0);
    m.Qbar = Mat::Constant(1, 1, 0.1);
    m.S = Mat::Constant(1, 1, 0.5);
    m.QT = Mat::Constant(1, 1, 1.0);
    return m;
}

LqModel zero_cost_model(int dim, double horizon) {
    LqModel m;
    m.dim = dim;
    m.horizon = horizon;
    m.label = "zero-cost";
    m.eta = Mat::Identity(dim, dim);
    m.Q = Mat::Zero(dim, dim);
    m.R = Mat::Identity(dim, dim);
    m.Qbar = Mat::Zero(dim, dim);
    m.S = Mat::Zero(dim, dim);
    m.QT = Mat::Zero(dim, dim);
    return m;
}

} // namespace mfg
