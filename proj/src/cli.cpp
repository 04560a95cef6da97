#include "mfg/cli.hpp"

#include "mfg/analysis.hpp"
#include "mfg/errors.hpp"
#include "mfg/format.hpp"
#include "mfg/log.hpp"
#include "mfg/lq_oracle.hpp"
#include "mfg/model_io.hpp"
#include "mfg/report_json.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <optional>
#include <thread>

namespace mfg {

namespace {

struct Options {
    std::string model_path;
    std::string out_dir = ".";
    std::optional<double> horizon;
    long long particles = 10000;
    double dt = 1e-3;
    std::uint64_t seed = 0;
    int basis_degree = 1;
    int max_picard = 50;
    double tol = 1e-9;
    std::optional<double> delta_override;
    int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    std::vector<double> init_mean{1.0};
    double init_std = 0.5;
    std::vector<double> psi;
    long long paths = 20000;
    HjbLattice lattice;
};

/// Diagnostic outcome: the run finished but the problem did not resolve.
struct Diagnostic {
    std::string message;
};

std::filesystem::path out_path(const Options& o, const std::string& name) {
    std::filesystem::create_directories(o.out_dir);
    return std::filesystem::path(o.out_dir) / name;
}

std::ofstream open_out(const Options& o, const std::string& name) {
    const auto path = out_path(o, name);
    std::ofstream f(path);
    if (!f) throw InputError("cannot write '" + path.string() + "'");
    return f;
}

void write_json(const Options& o, const std::string& name, const Json& j) { open_out(o, name) << j.dump(2) << '\n'; }

LqModel load_model(const Options& o) {
    if (o.model_path.empty()) throw InputError("--model is required for this command");
    LqModel m = read_model_file(o.model_path);
    if (o.horizon) {
        if (!(*o.horizon > 0.0)) throw InputError("--horizon must be positive");
        m.horizon = *o.horizon;
    }
    return m;
}

Vec expand(const std::vector<double>& v, int d, const char* flag) {
    if (v.size() == 1) return Vec::Constant(d, v[0]);
    if (static_cast<int>(v.size()) != d)
        throw InputError(std::string(flag) + " needs 1 or " + std::to_string(d) + " values");
    return Eigen::Map<const Vec>(v.data(), d);
}

SolverConfig solver_config(const Options& o) {
    SolverConfig c;
    c.n_particles = o.particles;
    c.dt = o.dt;
    c.seed = o.seed;
    c.basis_degree = o.basis_degree;
    c.max_picard = o.max_picard;
    c.picard_tol = o.tol;
    c.delta_override = o.delta_override;
    c.threads = o.threads;
    c.validate();
    return c;
}

SolveReport solve_and_write(const Options& o, const LqModel& model, const LqCostModel& cost, std::ostream& out) {
    const SolverConfig cfg = solver_config(o);
    const ParticleEnsemble init =
        gaussian_ensemble(cfg.n_particles, expand(o.init_mean, model.dim, "--init-mean"), o.init_std, cfg.seed);
    const SolveReport report = solve_global(cost, init, 0.0, model.horizon, cfg);
    {
        auto f = open_out(o, "flow.csv");
        write_flow_csv(f, report.flow);
    }
    {
        auto f = open_out(o, "field.csv");
        write_field_csv(f, report.field);
    }
    write_json(o, "report.json", to_json(report));
    out << "solve: " << to_string(report.status) << ", " << report.subintervals.size() << " sub-intervals, "
        << report.sweep_distances.size() << " sweeps\n";
    return report;
}

int cmd_solve(const Options& o, std::ostream& out) {
    const LqModel model = load_model(o);
    const LqCostModel cost(model);
    const SolveReport report = solve_and_write(o, model, cost, out);
    if (!report.converged) throw Diagnostic{std::string("solver stopped with ") + to_string(report.status)};
    return 0;
}

int cmd_lq_oracle(const Options& o, std::ostream& out) {
    const LqModel model = load_model(o);
    const Vec ybar0 = expand(o.init_mean, model.dim, "--init-mean");
    const int d = model.dim;
    const BlowupReport scan = detect_blowup(model, 0.0, model.horizon, 201);
    {
        auto f = open_out(o, "det_scan.csv");
        f << "s,det\n";
        for (const auto& [s, det] : scan.det_samples) f << format_double(s) << ',' << format_double(det) << '\n';
    }
    Json j;
    j["model"] = serialize_model(model);
    j["blowup"] = to_json(scan);
    const auto grid = uniform_grid(0.0, model.horizon, 100);
    try {
        const MeanBvpSolution bvp = solve_mean_bvp(model, ybar0, grid);
        j["mean_bvp"] = to_json(bvp);
        auto f = open_out(o, "mean_path.csv");
        f << "s";
        for (int i = 1; i <= d; ++i) f << ",ybar_" << i;
        for (int i = 1; i <= d; ++i) f << ",pbar_" << i;
        f << '\n';
        for (const auto& pt : bvp.path) {
            f << format_double(pt.s);
            for (int i = 0; i < d; ++i) f << ',' << format_double(pt.ybar(i));
            for (int i = 0; i < d; ++i) f << ',' << format_double(pt.pbar(i));
            f << '\n';
        }
    } catch (const SingularSystem& e) {
        j["mean_bvp"] = {{"singular", true}, {"determinant", e.determinant()}, {"message", e.what()}};
        write_json(o, "oracle.json", j);
        throw Diagnostic{e.what()};
    }
    try {
        const RiccatiSolution ric = riccati_solve(model, uniform_grid(0.0, model.horizon, 1000));
        auto f = open_out(o, "riccati.csv");
        f << "s";
        for (int a = 1; a <= d; ++a)
            for (int b = 1; b <= d; ++b) f << ",P_" << a << '_' << b;
        f << '\n';
        for (size_t k = 0; k < ric.grid.size(); k += 10) {
            f << format_double(ric.grid[k]);
            for (int a = 0; a < d; ++a)
                for (int b = 0; b < d; ++b) f << ',' << format_double(ric.P[k](a, b));
            f << '\n';
        }
        j["riccati_P0"] = matrix_json(ric.P.front());
    } catch (const RiccatiBlowup& e) {
        j["riccati_blowup"] = e.time();
        write_json(o, "oracle.json", j);
        throw Diagnostic{e.what()};
    }
    write_json(o, "oracle.json", j);
    out << "lq-oracle: determinant " << format_double(j["mean_bvp"]["determinant"].get<double>()) << '\n';
    return 0;
}

int cmd_counterexample(const Options& o, std::ostream& out) {
    const CounterexampleReport rep = counterexample_report();
    write_json(o, "counterexample.json", to_json(rep));
    auto f = open_out(o, "det_scan.csv");
    f << "s,det\n";
    for (const auto& [s, det] : rep.scan.det_samples) f << format_double(s) << ',' << format_double(det) << '\n';
    out << "counterexample: det(0.10) = " << format_double(rep.det_at_0_10)
        << ", det(0.11) = " << format_double(rep.det_at_0_11);
    if (rep.scan.root)
        out << ", root " << format_double(*rep.scan.root) << '\n';
    else if (rep.extended_scan.root)
        out << ", no root in [0.05, 0.15]; first root " << format_double(*rep.extended_scan.root) << '\n';
    else
        out << ", no root found\n";
    return 0;
}

int cmd_check(const Options& o, std::ostream& out) {
    const LqModel model = load_model(o);
    const AssumptionReport a = check_assumptions(model, model.horizon);
    const MonotonicityReport m = monotonicity_check(model);
    Json j;
    j["assumptions"] = to_json(a);
    j["monotonicity"] = to_json(m);
    write_json(o, "check.json", j);
    out << "check: cii_margin " << format_double(a.cii_margin) << ", LLM " << (m.llm_holds ? "holds" : "fails")
        << ", DM " << (m.dm_holds ? "holds" : "fails") << '\n';
    return 0;
}

int cmd_jacobian(const Options& o, std::ostream& out) {
    const LqModel model = load_model(o);
    const LqCostModel cost(model);
    const SolveReport report = solve_and_write(o, model, cost, out);
    if (!report.converged) throw Diagnostic{std::string("base solve stopped with ") + to_string(report.status)};
    const Vec psi = expand(o.psi.empty() ? std::vector<double>{1.0} : o.psi, model.dim, "--psi");
    const JacobianFlowResult jac = jacobian_flow_solve(report, cost, psi);
    write_json(o, "jacobian.json", to_json(jac));
    auto f = open_out(o, "dp_norms.csv");
    f << "s,dp_norm,dy_norm\n";
    for (size_t k = 0; k < jac.times.size(); ++k)
        f << format_double(jac.times[k]) << ',' << format_double(jac.dp_norms[k]) << ','
          << format_double(jac.dy_norms[k]) << '\n';
    out << "jacobian: " << to_string(jac.status) << ", |Dp(0)| = " << format_double(jac.dp_norms.front()) << '\n';
    if (!jac.converged) throw Diagnostic{std::string("Jacobian flow stopped with ") + to_string(jac.status)};
    return 0;
}

int cmd_hjb(const Options& o, std::ostream& out) {
    const LqModel model = load_model(o);
    if (model.dim != 1) throw InputError("hjb needs a one-dimensional model");
    const LqCostModel cost(model);
    const SolveReport report = solve_and_write(o, model, cost, out);
    if (!report.converged) throw Diagnostic{std::string("solver stopped with ") + to_string(report.status)};
    HjbLattice lat = o.lattice;
    lat.n_paths = o.paths;
    lat.seed = o.seed;
    const HjbResidual res = hjb_residual(cost, report, lat, o.threads);
    auto f = open_out(o, "hjb.csv");
    write_hjb_csv(f, res);
    out << "hjb: max interior |residual| " << format_double(res.max_abs) << '\n';
    return 0;
}

void add_common(CLI::App* app, Options& o, bool needs_model) {
    auto* m = app->add_option("--model", o.model_path, "Model file");
    if (needs_model) m->required();
    app->add_option("--out", o.out_dir, "Output directory");
    app->add_option("--horizon", o.horizon, "Override the model horizon");
}

void add_solver(CLI::App* app, Options& o) {
    app->add_option("--particles", o.particles, "Number of particles");
    app->add_option("--dt", o.dt, "Time step");
    app->add_option("--seed", o.seed, "Random seed");
    app->add_option("--basis-degree", o.basis_degree, "Regression polynomial degree");
    app->add_option("--max-picard", o.max_picard, "Picard iteration cap");
    app->add_option("--tol", o.tol, "Picard sup-norm tolerance");
    app->add_option("--delta-override", o.delta_override, "Manual sub-interval width");
    app->add_option("--threads", o.threads, "Worker threads");
    app->add_option("--init-mean", o.init_mean, "Initial ensemble mean (1 or d values)");
    app->add_option("--init-std", o.init_std, "Initial ensemble standard deviation");
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Mean-field game FBSDE solver and linear-quadratic analyzer", "mfg_cli"};
    app.require_subcommand(1);
    Options o;

    auto* solve = app.add_subcommand("solve", "Solve the FBSDE by concatenated local Picard iteration");
    add_common(solve, o, true);
    add_solver(solve, o);

    auto* oracle = app.add_subcommand("lq-oracle", "Closed-form mean path, Riccati field and determinant scan");
    add_common(oracle, o, true);
    oracle->add_option("--init-mean,--ybar0", o.init_mean, "Initial mean (1 or d values)");

    auto* counter = app.add_subcommand("counterexample", "Blow-up analysis of the built-in non-monotone model");
    counter->add_option("--out", o.out_dir, "Output directory");

    auto* check = app.add_subcommand("check", "Structural assumptions and monotonicity of a model");
    add_common(check, o, true);

    auto* jac = app.add_subcommand("jacobian", "Jacobian flow along a solved equilibrium");
    add_common(jac, o, true);
    add_solver(jac, o);
    jac->add_option("--psi", o.psi, "Initial perturbation direction (1 or d values)");

    auto* hjb = app.add_subcommand("hjb", "HJB residual of the solved value function (d = 1)");
    add_common(hjb, o, true);
    add_solver(hjb, o);
    hjb->add_option("--paths", o.paths, "Monte Carlo paths per lattice node");
    hjb->add_option("--hjb-t-lo", o.lattice.t_lo, "Lattice start time");
    hjb->add_option("--hjb-t-hi", o.lattice.t_hi, "Lattice end time");
    hjb->add_option("--hjb-dt", o.lattice.dt, "Lattice time step");
    hjb->add_option("--hjb-x-lo", o.lattice.x_lo, "Lattice lower state");
    hjb->add_option("--hjb-x-hi", o.lattice.x_hi, "Lattice upper state");
    hjb->add_option("--hjb-dx", o.lattice.dx, "Lattice state step");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 1;
    }

    try {
        if (*solve) return cmd_solve(o, out);
        if (*oracle) return cmd_lq_oracle(o, out);
        if (*counter) return cmd_counterexample(o, out);
        if (*check) return cmd_check(o, out);
        if (*jac) return cmd_jacobian(o, out);
        if (*hjb) return cmd_hjb(o, out);
    } catch (const Diagnostic& d) {
        log_message(LogLevel::info, d.message);
        err << "diagnostic: " << d.message << '\n';
        return 2;
    } catch (const SingularSystem& e) {
        err << "diagnostic: " << e.what() << '\n';
        return 2;
    } catch (const RiccatiBlowup& e) {
        err << "diagnostic: " << e.what() << '\n';
        return 2;
    } catch (const ConvergenceError& e) {
        err << "diagnostic: " << e.what() << '\n';
        return 2;
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

} // namespace mfg
