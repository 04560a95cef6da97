#include "mfg/report_json.hpp"

#include "mfg/model_io.hpp"

#include <algorithm>

namespace mfg {

namespace {

Json vec_json(const Vec& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

Json record_json(const SubintervalRecord& r) {
    Json j;
    j["t_begin"] = r.t_begin;
    j["t_end"] = r.t_end;
    j["step_begin"] = r.step_begin;
    j["step_end"] = r.step_end;
    j["c_q"] = r.c_q;
    j["delta_loc"] = r.delta_loc;
    j["iterations"] = r.iterations;
    j["converged"] = r.converged;
    j["distances"] = r.distances;
    j["ratios"] = r.ratios;
    return j;
}

} // namespace

Json matrix_json(const Mat& m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

Json to_json(const AssumptionConstants& c) {
    Json j;
    j["lambda_big"] = c.lambda_big;
    j["lambda_g1"] = c.lambda_g1;
    j["lambda_g2"] = c.lambda_g2;
    j["lambda_h1"] = c.lambda_h1;
    j["c_g2"] = c.c_g2;
    j["C_g1"] = c.C_g1;
    j["C_g2"] = c.C_g2;
    j["C_h1"] = c.C_h1;
    return j;
}

Json to_json(const SolveReport& r, bool with_wall_time) {
    Json j;
    j["converged"] = r.converged;
    j["status"] = to_string(r.status);
    j["failed_interval"] = r.failed_interval ? Json(*r.failed_interval) : Json(nullptr);
    Json cfg;
    cfg["n_particles"] = r.config.n_particles;
    cfg["dt"] = r.config.dt;
    cfg["basis_degree"] = r.config.basis_degree;
    cfg["max_picard"] = r.config.max_picard;
    cfg["picard_tol"] = r.config.picard_tol;
    cfg["gamma1"] = r.config.gamma1;
    cfg["delta_override"] = optional_json(r.config.delta_override);
    cfg["seed"] = r.config.seed;
    cfg["center_increments"] = r.config.center_increments;
    j["config"] = cfg;
    j["t0"] = r.grid.t0;
    j["T"] = r.grid.T;
    j["n_steps"] = r.grid.n_steps();
    Json subs = Json::array();
    for (const auto& rec : r.subintervals) subs.push_back(record_json(rec));
    j["subintervals"] = subs;
    j["sweep_distances"] = r.sweep_distances;
    j["foc_residual"] = r.foc_residual;
    j["warnings"] = r.warnings;
    if (with_wall_time) j["wall_time_ms"] = r.wall_time_ms;
    return j;
}

Json to_json(const AssumptionReport& r) {
    Json j;
    j["horizon"] = r.horizon;
    j["constants"] = to_json(r.constants);
    j["ci_margin"] = r.ci_margin;
    j["cii_margin"] = r.cii_margin;
    j["cii_star"] = r.cii_star;
    j["lifespan_t0"] = optional_json(r.lifespan_t0);
    j["cg2_cap"] = r.cg2_cap;
    return j;
}

Json to_json(const MonotonicityReport& r) {
    Json j;
    j["llm_min_eig"] = r.llm_min_eig;
    j["dm_min_eig"] = r.dm_min_eig;
    j["llm_holds"] = r.llm_holds;
    j["dm_holds"] = r.dm_holds;
    j["samples"] = r.samples;
    j["llm_sampled_min"] = r.llm_sampled_min;
    j["dm_sampled_min"] = r.dm_sampled_min;
    j["sampled_agree"] = r.sampled_agree;
    return j;
}

Json to_json(const JacobianFlowResult& r) {
    Json j;
    j["direction"] = vec_json(r.direction);
    j["status"] = to_string(r.status);
    j["converged"] = r.converged;
    j["gamma3"] = r.gamma3;
    j["c2_bound"] = optional_json(r.c2_bound);
    j["bound_satisfied"] = r.bound_satisfied;
    j["dp_norm_max"] = r.dp_norms.empty() ? 0.0 : *std::max_element(r.dp_norms.begin(), r.dp_norms.end());
    j["dp_norm_initial"] = r.dp_norms.empty() ? 0.0 : r.dp_norms.front();
    Json subs = Json::array();
    for (const auto& rec : r.subintervals) subs.push_back(record_json(rec));
    j["subintervals"] = subs;
    j["sweep_distances"] = r.sweep_distances;
    return j;
}

Json to_json(const BlowupReport& r) {
    Json j;
    j["interval"] = {r.t_lo, r.t_hi};
    Json samples = Json::array();
    for (const auto& [s, det] : r.det_samples) samples.push_back({s, det});
    j["det_samples"] = samples;
    j["root"] = r.root ? Json(*r.root) : Json(nullptr);
    j["bracket"] = r.bracket ? Json{r.bracket->first, r.bracket->second} : Json(nullptr);
    return j;
}

Json to_json(const CounterexampleReport& r) {
    Json j;
    j["model"] = serialize_model(r.model);
    j["constants"] = to_json(r.constants);
    j["det_at_0_10"] = r.det_at_0_10;
    j["det_at_0_11"] = r.det_at_0_11;
    j["ci_margin_at_0_11"] = r.ci_margin_at_0_11;
    j["cii_margin_at_0_10"] = r.cii_margin_at_0_10;
    j["lifespan"] = r.lifespan;
    j["scan"] = to_json(r.scan);
    Json ext = to_json(r.extended_scan);
    ext.erase("det_samples");
    j["extended_scan"] = ext;
    return j;
}

Json to_json(const MeanBvpSolution& s) {
    Json j;
    j["pbar0"] = vec_json(s.pbar0);
    j["determinant"] = s.determinant;
    return j;
}

} // namespace mfg
