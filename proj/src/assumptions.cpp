#include "mfg/analysis.hpp"

#include "mfg/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mfg {

namespace {

double pos(double v) { return std::max(v, 0.0); }

} // namespace

double ci_margin(const AssumptionConstants& c, double T) {
    return c.lambda_big - pos(c.lambda_h1) * T - pos(c.lambda_g1 + c.lambda_g2) * T * T / 2.0;
}

double cii_margin(const AssumptionConstants& c, double T) {
    return c.lambda_big - pos(c.lambda_h1) * T - pos(c.lambda_g1 + c.lambda_g2 + c.c_g2) * T * T / 2.0;
}

bool cii_star(const AssumptionConstants& c) { return c.lambda_h1 < 0.0 && c.lambda_g1 + c.lambda_g2 + c.c_g2 < 0.0; }

std::optional<double> lifespan_bound(const AssumptionConstants& c) {
    const double a = c.c_g2 + c.lambda_g1 + c.lambda_g2;
    if (!(a > 0.0)) return std::nullopt;
    const double h = pos(c.lambda_h1);
    return (std::sqrt(2.0 * c.lambda_big * a + h * h) - h) / a;
}

double cg2_cap(const AssumptionConstants& c, double T) {
    const double convex = -c.lambda_g1 - c.lambda_g2;
    if (c.c_g2 <= convex) return convex;
    return 2.0 * (c.lambda_big - pos(c.lambda_h1) * T) / (T * T) + convex;
}

AssumptionReport check_assumptions(const LqModel& model, double T) {
    AssumptionReport r;
    r.horizon = T;
    r.constants = assumption_constants(model);
    r.ci_margin = ci_margin(r.constants, T);
    r.cii_margin = cii_margin(r.constants, T);
    r.cii_star = cii_star(r.constants);
    r.lifespan_t0 = lifespan_bound(r.constants);
    r.cg2_cap = cg2_cap(r.constants, T);
    return r;
}

MonotonicityReport monotonicity_check(const LqModel& model, int samples, std::uint64_t seed) {
    model.validate();
    const LqCostModel cost(model);
    const int d = model.dim;
    const G1Eval g1 = cost.eval_g1(Vec::Zero(d), Vec::Zero(d));
    MeasureSummary m{Vec::Zero(d), Mat::Zero(d, d), 0.0};
    const G2Eval g2 = cost.eval_g2(Vec::Zero(d), m);

    const Mat schur = g1.hess_yy - g1.hess_yv * g1.hess_vv.ldlt().solve(g1.hess_yv.transpose());
    const Mat llm = symmetrize(g2.mfield_matrix);
    const Mat dm = symmetrize(schur + g2.hess_yy) + llm;

    MonotonicityReport r;
    r.llm_min_eig = least_eigenvalue(llm);
    r.dm_min_eig = least_eigenvalue(dm);
    r.llm_holds = r.llm_min_eig >= -1e-12;
    r.dm_holds = r.dm_min_eig >= -1e-12;

    r.samples = samples;
    r.llm_sampled_min = std::numeric_limits<double>::infinity();
    r.dm_sampled_min = std::numeric_limits<double>::infinity();
    for (int i = 0; i < samples; ++i) {
        Vec v(d);
        for (int j = 0; j < d; ++j)
            v(j) = counter_normal(seed, Stream::projection, static_cast<std::uint32_t>(i), 0, static_cast<std::uint32_t>(j));
        v /= v.norm();
        r.llm_sampled_min = std::min(r.llm_sampled_min, v.dot(llm * v));
        r.dm_sampled_min = std::min(r.dm_sampled_min, v.dot(dm * v));
    }
    r.sampled_agree = samples > 0 && (r.llm_sampled_min < -1e-12) == !r.llm_holds &&
                      (r.dm_sampled_min < -1e-12) == !r.dm_holds;
    return r;
}

std::optional<double> c2_bound(const AssumptionConstants& c, double gamma3) {
    if (!cii_star(c) || !(gamma3 > 0.0)) return std::nullopt;
    const double a = c.lambda_g1 + c.lambda_g2 + c.c_g2;
    const double B = c.c_g2 + c.C_g2 + c.C_g1 * (1.0 + (c.C_g1 + 1.0) / c.lambda_big);
    const double terminal = -c.lambda_h1 / (c.C_h1 * c.C_h1);
    const double running = c.C_g1 > 0.0 ? (gamma3 / 2.0) / (c.C_g1 * B) : std::numeric_limits<double>::infinity();
    const double mean_field = -a * (2.0 / gamma3) / B;
    const double inv = std::min({terminal, running, mean_field});
    if (!(inv > 0.0) || !std::isfinite(inv)) return std::nullopt;
    return 1.0 / inv;
}

double default_gamma3(const AssumptionConstants& c) {
    const double a = c.lambda_g1 + c.lambda_g2 + c.c_g2;
    if (!(a < 0.0) || !(c.C_g1 > 0.0)) return 1.0;
    return 2.0 * std::sqrt(c.C_g1 * -a);
}

} // namespace mfg
