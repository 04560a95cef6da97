// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "mfg/analysis.hpp"
#include "mfg/cli.hpp"
#include "mfg/lq_oracle.hpp"
#include "mfg/model_io.hpp"
#include "mfg/report_json.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace mfg;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass = true;
    std::vector<std::string> notes;

    void check(bool ok, const std::string& what) {
        pass = pass && ok;
        notes.push_back((ok ? "" : "!") + what);
    }
};

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

bool four_significant(double value, double ref) {
    const double unit = std::pow(10.0, std::floor(std::log10(std::abs(ref))) - 3.0);
    return std::abs(value - ref) <= 0.5 * unit;
}

LqModel scalar_model(const std::string& label, double Q, double R, double Qbar, double S, double QT, double T,
                     double eta) {
    LqModel m;
    m.dim = 1;
    m.horizon = T;
    m.label = label;
    m.eta = Mat::Constant(1, 1, eta);
    m.Q = Mat::Constant(1, 1, Q);
    m.R = Mat::Constant(1, 1, R);
    m.Qbar = Mat::Constant(1, 1, Qbar);
    m.S = Mat::Constant(1, 1, S);
    m.QT = Mat::Constant(1, 1, QT);
    return m;
}

// Declared convex model for the monotonicity criterion: both conditions hold.
LqModel monotone_model() { return scalar_model("monotone-1d", 1.0, 2.0, 0.1, -0.5, 1.0, 1.0, 0.5); }

// Declared horizon-free model for the Jacobian bound.
LqModel cii_star_model() { return scalar_model("strongly-convex-1d", 2.0, 1.0, 0.5, 0.5, 1.0, 1.0, 0.5); }

// P' = P^2 - 1 with P(1) = 0, so P(0) = tanh(1).
LqModel tanh_model() { return scalar_model("tanh", 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.5); }

SolverConfig benchmark_config(double dt, Eigen::Index n) {
    SolverConfig c;
    c.n_particles = n;
    c.dt = dt;
    c.seed = 20240611;
    return c;
}

struct BenchmarkErrors {
    double mean_sup = 0.0;
    double slope0 = 0.0;
    double slope_sup = 0.0;
    bool converged = false;
    double seconds = 0.0;
};

BenchmarkErrors run_benchmark(double dt, Eigen::Index n) {
    const LqModel model = convex_benchmark_model();
    const LqCostModel cost(model);
    const SolverConfig cfg = benchmark_config(dt, n);
    const ParticleEnsemble init = gaussian_ensemble(n, Vec::Constant(1, 1.0), 0.5, cfg.seed);
    const auto start = Clock::now();
    const SolveReport rep = solve_global(cost, init, 0.0, model.horizon, cfg);
    BenchmarkErrors out;
    out.seconds = seconds_since(start);
    out.converged = rep.converged;
    const MeanBvpSolution bvp = solve_mean_bvp(model, rep.flow.summaries.front().mean, rep.grid.times);
    const RiccatiSolution ric = riccati_solve(model, rep.grid.times);
    for (size_t k = 0; k < rep.grid.times.size(); ++k) {
        out.mean_sup = std::max(out.mean_sup, (rep.flow.summaries[k].mean - bvp.path[k].ybar).cwiseAbs().maxCoeff());
        const double e = (rep.field.slices[k].slope() - ric.P[k]).cwiseAbs().maxCoeff();
        out.slope_sup = std::max(out.slope_sup, e);
        if (k == 0) out.slope0 = e;
    }
    return out;
}

Outcome criterion_1() {
    Outcome o;
    const auto start = Clock::now();
    const CounterexampleReport r = counterexample_report();
    const double secs = seconds_since(start);
    const double e10 = std::abs(r.det_at_0_10 / 0.10336 - 1.0);
    const double e11 = std::abs(r.det_at_0_11 / -0.042878 - 1.0);
    o.check(e10 <= 1e-3, "det(0.10)=" + fmt(r.det_at_0_10) + " vs 0.10336");
    o.check(e11 <= 1e-3, "det(0.11)=" + fmt(r.det_at_0_11) + " vs -0.042878");
    const bool bracketed = r.scan.root && *r.scan.root > 0.1 && *r.scan.root < 0.11;
    std::string root = r.scan.root ? fmt(*r.scan.root)
                                   : (r.extended_scan.root ? "none in scan, first " + fmt(*r.extended_scan.root)
                                                           : "none");
    o.check(bracketed, "root " + root + " in (0.1, 0.11)");
    o.check(secs < 1.0, "runtime " + fmt(secs) + " s");
    return o;
}

Outcome criterion_2() {
    Outcome o;
    const AssumptionConstants c = assumption_constants(counterexample_model());
    o.check(four_significant(c.lambda_big, 0.010137), "lambda_R=" + fmt(c.lambda_big));
    o.check(four_significant(-c.lambda_g1, -0.41956), "lambda_Q=" + fmt(-c.lambda_g1));
    o.check(four_significant(-c.lambda_g2, -1.0916), "lambda_Qbar=" + fmt(-c.lambda_g2));
    o.check(four_significant(c.c_g2, 1.027), "c_g2=" + fmt(c.c_g2));
    return o;
}

Outcome criterion_3() {
    Outcome o;
    const AssumptionReport a = check_assumptions(counterexample_model(0.11), 0.11);
    const AssumptionReport b = check_assumptions(counterexample_model(0.10), 0.10);
    o.check(std::abs(a.ci_margin - 0.000994) <= 2e-5, "Ci(0.11)=" + fmt(a.ci_margin));
    o.check(std::abs(b.cii_margin + 0.00255) <= 2e-5, "Cii(0.10)=" + fmt(b.cii_margin));
    return o;
}

Outcome criterion_4() {
    Outcome o;
    const MonotonicityReport bad = monotonicity_check(counterexample_model());
    const MonotonicityReport good = monotonicity_check(monotone_model());
    o.check(!bad.llm_holds && !bad.dm_holds,
            "counterexample LLM " + fmt(bad.llm_min_eig) + ", DM " + fmt(bad.dm_min_eig));
    o.check(good.llm_holds && good.dm_holds,
            "monotone-1d LLM " + fmt(good.llm_min_eig) + ", DM " + fmt(good.dm_min_eig));
    o.check(bad.sampled_agree && good.sampled_agree, "sampled forms agree");
    return o;
}

Outcome criterion_5() {
    Outcome o;
    const BenchmarkErrors coarse = run_benchmark(1e-3, 10000);
    o.check(coarse.converged, "converged");
    o.check(coarse.mean_sup <= 0.02, "mean sup-error " + fmt(coarse.mean_sup));
    o.check(coarse.slope0 <= 0.02, "slope error at t=0 " + fmt(coarse.slope0));
    o.check(coarse.seconds < 60.0, "runtime " + fmt(coarse.seconds) + " s");
    const BenchmarkErrors fine = run_benchmark(5e-4, 40000);
    const double ratio = fine.mean_sup / coarse.mean_sup;
    o.check(fine.converged && ratio >= 0.4 && ratio <= 0.6,
            "mean sup-error " + fmt(coarse.mean_sup) + " -> " + fmt(fine.mean_sup) + ", ratio " + fmt(ratio));
    return o;
}

// Every sweep's local Picard records: ratios below one, distances strictly
// decreasing over the first five iterations.
bool ratios_contract(const SolveReport& rep, std::string& detail) {
    size_t checked = 0;
    for (const auto& sweep : rep.sweep_records)
        for (const auto& rec : sweep) {
            for (double r : rec.ratios)
                if (!(r < 1.0)) {
                    detail = "ratio " + fmt(r) + " at t=" + fmt(rec.t_begin);
                    return false;
                }
            const size_t n = std::min<size_t>(5, rec.distances.size());
            for (size_t i = 1; i < n; ++i)
                if (!(rec.distances[i] < rec.distances[i - 1])) {
                    detail = "distances not decreasing at t=" + fmt(rec.t_begin);
                    return false;
                }
            checked += rec.ratios.size();
        }
    detail = fmt(static_cast<double>(checked)) + " ratios";
    return checked > 0;
}

Outcome criterion_6() {
    Outcome o;
    const std::vector<LqModel> convex{convex_benchmark_model(), monotone_model(), cii_star_model()};
    for (const LqModel& base : convex) {
        LqModel m = base;
        m.horizon = 0.05;
        const LqCostModel cost(m);
        SolverConfig cfg = benchmark_config(1e-4, 2000);
        const double width = compute_delta_loc(cost.constants(), cost.constants().C_h1, cfg.gamma1);
        cfg.dt = std::min(1e-4, width / 4.0);
        const ParticleEnsemble init = gaussian_ensemble(cfg.n_particles, Vec::Constant(1, 1.0), 0.5, cfg.seed);
        const SolveReport rep = solve_global(cost, init, 0.0, m.horizon, cfg);
        double widest = 0.0;
        bool within = true;
        for (const auto& rec : rep.subintervals) {
            widest = std::max(widest, rec.t_end - rec.t_begin);
            within = within && rec.t_end - rec.t_begin <= rec.delta_loc * (1.0 + 1e-12);
        }
        std::string detail;
        const bool ok = rep.converged && within && ratios_contract(rep, detail);
        o.check(ok, m.label + " widths<=delta_loc " + (within ? "yes" : "no") + ", " + detail);
    }
    {
        const LqModel m = counterexample_model(0.12);
        const LqCostModel cost(m);
        SolverConfig cfg = benchmark_config(1e-3, 10000);
        cfg.delta_override = 0.12;
        const ParticleEnsemble init = gaussian_ensemble(cfg.n_particles, Vec::Constant(2, 1.0), 0.5, cfg.seed);
        const SolveReport rep = solve_global(cost, init, 0.0, m.horizon, cfg);
        std::string last = rep.subintervals.empty() || rep.subintervals.front().ratios.empty()
                               ? ""
                               : ", last ratio " + fmt(rep.subintervals.front().ratios.back());
        o.check(rep.status == SolveStatus::non_contraction,
                std::string("counterexample T=0.12 status ") + to_string(rep.status) + last);
    }
    return o;
}

Outcome criterion_7() {
    Outcome o;
    const LqModel model = convex_benchmark_model();
    const LqCostModel cost(model);
    const SolverConfig cfg = benchmark_config(1e-3, 10000);
    const ParticleEnsemble init = gaussian_ensemble(cfg.n_particles, Vec::Constant(1, 1.0), 0.5, cfg.seed);
    const SolveReport rep = solve_global(cost, init, 0.0, model.horizon, cfg);
    double worst = 0.0;
    int passed = 0;
    for (double t : {0.0, 0.5})
        for (double x : {0.0, 0.5, 1.0, 1.5, 2.0}) {
            const ValueEstimate v = value_function(cost, rep, Vec::Constant(1, x), t, 20000, 7, 1);
            const double field = rep.field.at(rep.grid.index_of(t)).value_at(Vec::Constant(1, x))(0);
            const double rel = std::abs(v.grad_fd(0) - field) / (1.0 + std::abs(field));
            worst = std::max(worst, rel);
            if (rel <= 1e-2) ++passed;
        }
    o.check(passed == 10, fmt(passed) + "/10 points, worst relative gap " + fmt(worst));
    return o;
}

Outcome criterion_8() {
    Outcome o;
    {
        const LqModel m = cii_star_model();
        const LqCostModel cost(m);
        const SolverConfig cfg = benchmark_config(1e-3, 10000);
        const ParticleEnsemble init = gaussian_ensemble(cfg.n_particles, Vec::Constant(1, 1.0), 0.5, cfg.seed);
        const SolveReport rep = solve_global(cost, init, 0.0, m.horizon, cfg);
        const JacobianFlowResult jac = jacobian_flow_solve(rep, cost, Vec::Constant(1, 1.0));
        double top = 0.0;
        for (double v : jac.dp_norms) top = std::max(top, v);
        const bool ok = jac.converged && jac.c2_bound && top <= *jac.c2_bound * (1.0 + 1e-2);
        o.check(ok, "max dp " + fmt(top) + " vs C2 " + (jac.c2_bound ? fmt(*jac.c2_bound) : "none"));
    }
    {
        const LqModel m = tanh_model();
        const LqCostModel cost(m);
        const SolverConfig cfg = benchmark_config(1e-3, 10000);
        const ParticleEnsemble init = gaussian_ensemble(cfg.n_particles, Vec::Constant(1, 1.0), 0.5, cfg.seed);
        const SolveReport rep = solve_global(cost, init, 0.0, m.horizon, cfg);
        const JacobianFlowResult jac = jacobian_flow_solve(rep, cost, Vec::Constant(1, 1.0));
        const double dp0 = jac.dp_norms.front();
        o.check(jac.converged && std::abs(dp0 - 0.761594) <= 0.01, "tanh |Dp(0)|=" + fmt(dp0));
    }
    return o;
}

Outcome criterion_9() {
    Outcome o;
    const CounterexampleReport r = counterexample_report();
    o.check(std::abs(r.lifespan - 0.0894) <= 1e-3, "lifespan " + fmt(r.lifespan));
    const bool bracketed = r.scan.root && *r.scan.root > 0.1 && *r.scan.root < 0.11;
    const auto root = r.scan.root ? r.scan.root : r.extended_scan.root;
    o.check(bracketed, "detected T0 " + (root ? fmt(*root) : std::string("none")) + " in (0.1, 0.11)");
    o.check(root && r.lifespan < *root, "lifespan below T0");
    return o;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome criterion_10() {
    Outcome o;
    const auto root = std::filesystem::temp_directory_path() / "mfg_acceptance_determinism";
    std::filesystem::remove_all(root);
    std::filesystem::create_directories(root);
    const std::string model_path = (root / "convex.model").string();
    write_model_file(model_path, convex_benchmark_model());
    std::ostringstream sink;
    int codes[2] = {0, 0};
    const char* threads[2] = {"1", "3"};
    for (int r = 0; r < 2; ++r) {
        const std::string out = (root / ("run" + std::to_string(r))).string();
        const char* argv[] = {"mfg_cli", "solve", "--model", model_path.c_str(), "--out", out.c_str(),
                              "--particles", "10000", "--dt", "1e-3", "--seed", "20240611", "--threads", threads[r]};
        codes[r] = run_cli(static_cast<int>(std::size(argv)), argv, sink, sink);
    }
    o.check(codes[0] == 0 && codes[1] == 0, "exit codes " + fmt(codes[0]) + ", " + fmt(codes[1]));
    for (const char* name : {"flow.csv", "field.csv"}) {
        const std::string a = slurp(root / "run0" / name), b = slurp(root / "run1" / name);
        o.check(!a.empty() && a == b, std::string(name) + (a == b ? " identical" : " differs"));
    }
    Json ja = Json::parse(slurp(root / "run0" / "report.json"));
    Json jb = Json::parse(slurp(root / "run1" / "report.json"));
    ja.erase("wall_time_ms");
    jb.erase("wall_time_ms");
    o.check(ja.dump() == jb.dump(), std::string("report.json ") + (ja == jb ? "identical" : "differs") +
                                        " apart from wall time");
    std::filesystem::remove_all(root);
    return o;
}

} // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"1 counterexample determinants", criterion_1}, {"2 structural constants", criterion_2},
        {"3 assumption margins", criterion_3},          {"4 monotonicity verdicts", criterion_4},
        {"5 oracle equivalence", criterion_5},          {"6 contraction property", criterion_6},
        {"7 gradient identity", criterion_7},           {"8 Jacobian bound", criterion_8},
        {"9 lifespan", criterion_9},                    {"10 determinism", criterion_10},
    };
    std::vector<std::string> only(argv + 1, argv + argc);
    int failures = 0;
    for (const auto& [name, run] : criteria) {
        const std::string id = name.substr(0, name.find(' '));
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o.check(false, std::string("exception: ") + e.what());
        }
        std::string notes;
        for (const auto& n : o.notes) notes += (notes.empty() ? "" : "; ") + n;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << name << "  [" << notes << "]" << std::endl;
        if (!o.pass) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
