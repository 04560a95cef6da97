#pragma once

#include "mfg/solver.hpp"

#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

namespace mfg {

// Structural margins. Positive values mean the condition holds on [0, T].

/// Lambda - (lambda_h1)+ T - (lambda_g1 + lambda_g2)+ T^2 / 2.
double ci_margin(const AssumptionConstants& c, double T);
/// Lambda - (lambda_h1)+ T - (lambda_g1 + lambda_g2 + c_g2)+ T^2 / 2.
double cii_margin(const AssumptionConstants& c, double T);
/// lambda_h1 < 0 and lambda_g1 + lambda_g2 + c_g2 < 0: the horizon-free regime.
bool cii_star(const AssumptionConstants& c);
/// Longest horizon allowed by the small mean-field condition; empty when unbounded.
std::optional<double> lifespan_bound(const AssumptionConstants& c);
/// Largest c_g2 compatible with the small mean-field condition at horizon T.
double cg2_cap(const AssumptionConstants& c, double T);

struct AssumptionReport {
    double horizon = 0.0;
    AssumptionConstants constants;
    double ci_margin = 0.0;
    double cii_margin = 0.0;
    bool cii_star = false;
    std::optional<double> lifespan_t0;  // empty: unbounded
    double cg2_cap = 0.0;
};

AssumptionReport check_assumptions(const LqModel& model, double T);

struct MonotonicityReport {
    double llm_min_eig = 0.0;
    double dm_min_eig = 0.0;
    bool llm_holds = false;
    bool dm_holds = false;
    int samples = 0;
    double llm_sampled_min = 0.0;  // min of the quadratic forms over unit directions
    double dm_sampled_min = 0.0;
    bool sampled_agree = false;    // sampled signs never contradict the matrix verdicts
};

MonotonicityReport monotonicity_check(const LqModel& model, int samples = 100, std::uint64_t seed = 0);

/// Bound on the Jacobian flow of p; empty outside the horizon-free regime.
std::optional<double> c2_bound(const AssumptionConstants& c, double gamma3);
/// gamma3 equalizing the two gamma3-dependent terms of the bound.
double default_gamma3(const AssumptionConstants& c);

struct JacobianFlowResult {
    Vec direction;
    SolveStatus status = SolveStatus::max_iterations;
    bool converged = false;
    std::vector<double> times;
    std::vector<double> dp_norms;  // sqrt(E |D p(s)|^2)
    std::vector<double> dy_norms;
    std::vector<SubintervalRecord> subintervals;
    std::vector<double> sweep_distances;
    double gamma3 = 0.0;
    std::optional<double> c2_bound;
    bool bound_satisfied = false;
};

/// Linearized FBSDE along the converged base solution, initial perturbation
/// psi applied to every particle. Same partition and regression scheme as the
/// base solve. The scheme is linear in psi.
JacobianFlowResult jacobian_flow_solve(const SolveReport& solution, const CostModel& model, const Vec& psi,
                                       std::optional<double> gamma3 = std::nullopt);

struct ValueEstimate {
    double value = 0.0;
    double std_error = 0.0;
    Vec grad_fd;
    Vec grad_std_error;
    Eigen::Index n_paths = 0;
};

/// Monte Carlo cost of the feedback control of the solved field from (x, t)
/// under the frozen population flow. The gradient uses central differences
/// with step 1e-4 on common random numbers.
ValueEstimate value_function(const CostModel& model, const SolveReport& solution, const Vec& x, double t,
                             Eigen::Index n_paths, std::uint64_t seed, int threads = 1);

/// inf_v [g1(x, v) + g2(x, m) + v.p], attained at the feedback control.
double hamiltonian(const CostModel& model, const Vec& x, const MeasureSummary& m, const Vec& p);

struct HjbLattice {
    double t_lo = 0.0, t_hi = 0.5, dt = 0.01;
    double x_lo = 0.0, x_hi = 2.0, dx = 0.05;
    Eigen::Index n_paths = 20000;
    std::uint64_t seed = 0;
};

struct HjbNode {
    double t = 0.0, x = 0.0, residual = 0.0;
};

struct HjbResidual {
    std::vector<double> t, x;
    Mat value;                  // value(i, j) = V(t[i], x[j])
    std::vector<HjbNode> nodes;  // interior nodes only
    double max_abs = 0.0;
};

/// dV/dt + 1/2 eta^2 d2V/dx2 + H(x, m(t), dV/dx) on the interior of a 1-d
/// lattice by centered differences of Monte Carlo values.
HjbResidual hjb_residual(const CostModel& model, const SolveReport& solution, const HjbLattice& lattice,
                         int threads = 1);

void write_hjb_csv(std::ostream& out, const HjbResidual& residual);

} // namespace mfg
