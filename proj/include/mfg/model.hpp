#pragma once

#include "mfg/linalg.hpp"

#include <functional>
#include <memory>
#include <string>

namespace mfg {

/// Linear-quadratic mean-field game:
///   g1(y,v) = 1/2 y.Qy + 1/2 v.Rv,
///   g2(y,L) = 1/2 (y - S m).Qbar (y - S m),  m = E_L[z],
///   h1(y)   = 1/2 y.QT y,  h2 = 0,
/// with state dynamics dy = v ds + eta dW.
struct LqModel {
    int dim = 1;
    double horizon = 1.0;
    Mat eta;
    Mat Q, R, Qbar, S, QT;
    std::string label;

    /// Throws InputError if dimensions disagree, eta is rank deficient or
    /// the symmetric part of R is not positive definite.
    void validate() const;

    Mat R_sym() const { return symmetrize(R); }
    Mat Q_sym() const { return symmetrize(Q); }
    Mat Qbar_sym() const { return symmetrize(Qbar); }
    Mat QT_sym() const { return symmetrize(QT); }

    /// The constant value of grad_{y'} (d/dnu) grad_y g2: -1/2 (Qbar S + Qbar^T S).
    Mat mfield_matrix() const { return -0.5 * (Qbar * S + Qbar.transpose() * S); }

    bool operator==(const LqModel&) const = default;
};

/// Structural constants of the cost functions.
struct AssumptionConstants {
    double lambda_big = 1.0;  // convexity modulus of g1 in v
    double lambda_g1 = 0.0;   // semi-concavity constants (sign free)
    double lambda_g2 = 0.0;
    double lambda_h1 = 0.0;
    double c_g2 = 0.0;        // bound on the measure derivative of grad_y g2
    double C_g1 = 0.0;        // Hessian norm bounds
    double C_g2 = 0.0;
    double C_h1 = 0.0;

    void validate() const;
};

/// Finite-dimensional summary of a population law.
struct MeasureSummary {
    Vec mean;
    Mat covariance;
    double second_moment = 0.0;
};

struct G1Eval {
    double value = 0.0;
    Vec grad_y, grad_v;
    Mat hess_yy, hess_yv, hess_vv;  // hess_yv(i,j) = d^2 g1 / dy_i dv_j
};

struct G2Eval {
    double value = 0.0;
    Vec grad_y;
    Mat hess_yy;
    Mat mfield_matrix;  // grad_{y'} (d/dnu) grad_y g2 (y, L)(y')
};

struct H1Eval {
    double value = 0.0;
    Vec grad;
    Mat hess;
};

/// Cost model consumed by the solver and the analysis routines.
///
/// Batched members act on ensembles stored one particle per row. Their
/// default implementations loop over the pointwise evaluations; analytic
/// models override them.
class CostModel {
public:
    virtual ~CostModel() = default;

    virtual int dim() const = 0;
    virtual const AssumptionConstants& constants() const = 0;

    virtual G1Eval eval_g1(const Vec& y, const Vec& v) const = 0;
    virtual G2Eval eval_g2(const Vec& y, const MeasureSummary& m) const = 0;
    virtual H1Eval eval_h1(const Vec& y) const = 0;
    virtual double eval_h2(const MeasureSummary& m) const = 0;

    /// Diffusion matrix eta (d x d).
    virtual const Mat& diffusion() const = 0;

    /// Solves p + grad_v g1(y, v) = 0 for v. The default is Newton's method
    /// from v = 0; throws ConvergenceError after 50 iterations.
    virtual Vec solve_foc(const Vec& y, const Vec& p) const;

    /// U.row(i) = solve_foc(Y.row(i), P.row(i)).
    virtual void feedback(const Mat& Y, const Mat& P, Mat& U) const;

    /// Backward driver G.row(i) = grad_y g1(y_i, u_i) + grad_y g2(y_i, m).
    virtual void driver(const Mat& Y, const Mat& U, const MeasureSummary& m, Mat& G) const;

    /// G.row(i) = grad_y h1(y_i).
    virtual void terminal_gradient(const Mat& Y, Mat& G) const;

    /// out.row(i) = hess h1(y_i) V.row(i).
    virtual void terminal_hessian_apply(const Mat& Y, const Mat& V, Mat& out) const;

    /// G.row(i) = grad_v g1(y_i, u_i).
    virtual void control_gradient(const Mat& Y, const Mat& U, Mat& G) const;

    /// c(i) = g1(y_i, u_i) + g2(y_i, m).
    virtual void running_cost(const Mat& Y, const Mat& U, const MeasureSummary& m, Vec& c) const;

    /// c(i) = h1(y_i).
    virtual void terminal_cost(const Mat& Y, Vec& c) const;

    /// True when every second derivative is independent of the arguments.
    virtual bool constant_hessians() const { return false; }
};

/// Exact LQ cost model. The measure summary used by g2 is the mean only.
class LqCostModel final : public CostModel {
public:
    explicit LqCostModel(LqModel model);

    int dim() const override { return model_.dim; }
    const AssumptionConstants& constants() const override { return constants_; }
    const Mat& diffusion() const override { return model_.eta; }
    const LqModel& model() const { return model_; }

    G1Eval eval_g1(const Vec& y, const Vec& v) const override;
    G2Eval eval_g2(const Vec& y, const MeasureSummary& m) const override;
    H1Eval eval_h1(const Vec& y) const override;
    double eval_h2(const MeasureSummary&) const override { return 0.0; }

    Vec solve_foc(const Vec& y, const Vec& p) const override;
    void feedback(const Mat& Y, const Mat& P, Mat& U) const override;
    void driver(const Mat& Y, const Mat& U, const MeasureSummary& m, Mat& G) const override;
    void terminal_gradient(const Mat& Y, Mat& G) const override;
    void terminal_hessian_apply(const Mat& Y, const Mat& V, Mat& out) const override;
    void control_gradient(const Mat& Y, const Mat& U, Mat& G) const override;
    void running_cost(const Mat& Y, const Mat& U, const MeasureSummary& m, Vec& c) const override;
    void terminal_cost(const Mat& Y, Vec& c) const override;
    bool constant_hessians() const override { return true; }

private:
    LqModel model_;
    AssumptionConstants constants_;
    Mat r_sym_, r_sym_inv_, q_sym_, qbar_sym_, qt_sym_, state_hessian_, mfield_;
};

/// Cost model assembled from user-supplied analytic callbacks. Growth
/// constants are declared by the caller, not verified.
class FunctionalCostModel final : public CostModel {
public:
    struct Callbacks {
        std::function<G1Eval(const Vec&, const Vec&)> g1;
        std::function<G2Eval(const Vec&, const MeasureSummary&)> g2;
        std::function<H1Eval(const Vec&)> h1;
        std::function<double(const MeasureSummary&)> h2;
    };

    FunctionalCostModel(int dim, Mat eta, Callbacks callbacks, AssumptionConstants constants);

    int dim() const override { return dim_; }
    const AssumptionConstants& constants() const override { return constants_; }
    const Mat& diffusion() const override { return eta_; }

    G1Eval eval_g1(const Vec& y, const Vec& v) const override { return cb_.g1(y, v); }
    G2Eval eval_g2(const Vec& y, const MeasureSummary& m) const override { return cb_.g2(y, m); }
    H1Eval eval_h1(const Vec& y) const override { return cb_.h1(y); }
    double eval_h2(const MeasureSummary& m) const override { return cb_.h2 ? cb_.h2(m) : 0.0; }

private:
    int dim_;
    Mat eta_;
    Callbacks cb_;
    AssumptionConstants constants_;
};

std::shared_ptr<const LqCostModel> lq_cost_model(const LqModel& model);

/// Constants of an LQ model from eigenvalues of the symmetrized matrices.
AssumptionConstants assumption_constants(const LqModel& model);

/// Largest relative discrepancy between the analytic first derivatives of
/// g1, g2, h1 and central finite differences of their values at (y, v, m).
/// Validation helper only; the solver never differentiates numerically.
double finite_difference_gradient_error(const CostModel& model, const Vec& y, const Vec& v,
                                        const MeasureSummary& m, double step = 1e-6);

// Reference models used by the tests, the acceptance suite and the CLI.
LqModel counterexample_model(double horizon = 0.11);
LqModel convex_benchmark_model();  // d=1: Q=1, R=2, Qbar=0.1, S=0.5, QT=1, T=1
LqModel zero_cost_model(int dim = 1, double horizon = 1.0);

} // namespace mfg
