#include "mfg/analysis.hpp"

#include "mfg/errors.hpp"
#include "mfg/format.hpp"
#include "mfg/parallel.hpp"

#include <cmath>
#include <tuple>

namespace mfg {

namespace {

constexpr double kFdStep = 1e-4;

Eigen::Index grid_step(const TimeGrid& grid, double t) {
    if (!(t >= grid.t0 - 1e-12) || !(t <= grid.T + 1e-12)) throw InputError("time lies outside the solved horizon");
    const Eigen::Index k = grid.index_of(t);
    if (std::abs(grid.times[static_cast<size_t>(k)] - t) > 1e-9 * (1.0 + std::abs(t)))
        throw InputError("time " + format_double(t) + " is not a node of the solver grid");
    return k;
}

/// Pathwise costs from step k0 for every start point; paths share their
/// Brownian increments across start points. costs[s](i) is path i from starts[s].
/// Martingale terms built from the field are subtracted, which leaves the mean
/// unchanged and removes most of the variance.
std::vector<Vec> simulate_costs(const CostModel& model, const SolveReport& sol, const std::vector<Vec>& starts,
                                Eigen::Index k0, Eigen::Index n_paths, std::uint64_t seed, int threads) {
    const TimeGrid& grid = sol.grid;
    const Eigen::Index steps = grid.n_steps();
    const int d = model.dim();
    const double dt = grid.dt();
    const BrownianDriver bm(seed, n_paths, steps, d, dt, Stream::value_paths);
    const Mat eta_t = model.diffusion().transpose();

    std::vector<Mat> X(starts.size());
    std::vector<Vec> cost(starts.size(), Vec::Zero(n_paths));
    for (size_t s = 0; s < starts.size(); ++s) X[s] = starts[s].transpose().replicate(n_paths, 1);

    for (Eigen::Index k = k0; k < steps; ++k) {
        const Mat dw = bm.step_increments(k, threads);
        const FieldSlice& F = sol.field.at(k);
        const MeasureSummary& m = sol.flow.summaries[static_cast<size_t>(k)];
        parallel_chunks(n_paths, threads, [&](std::ptrdiff_t, std::ptrdiff_t b, std::ptrdiff_t e) {
            const Mat noise = dw.middleRows(b, e - b) * eta_t;
            for (size_t s = 0; s < starts.size(); ++s) {
                const Mat Xc = X[s].middleRows(b, e - b);
                const Mat P = F.evaluate(Xc);
                Mat U;
                model.feedback(Xc, P, U);
                Vec c;
                model.running_cost(Xc, U, m, c);
                // Zero-mean control variates from the field: p.eta dW and the centered
                // second-order term 1/2 (eta dW).J(eta dW) - 1/2 dt tr(eta^T J eta).
                Vec quad = 0.5 * (F.directional(Xc, noise).cwiseProduct(noise)).rowwise().sum();
                for (int j = 0; j < d; ++j) {
                    const Mat col = eta_t.row(j).replicate(Xc.rows(), 1);
                    quad -= 0.5 * dt * (F.directional(Xc, col).cwiseProduct(col)).rowwise().sum();
                }
                cost[s].segment(b, e - b) += dt * c - P.cwiseProduct(noise).rowwise().sum() - quad;
                X[s].middleRows(b, e - b) = Xc + dt * U + noise;
            }
        });
    }
    const double h2 = model.eval_h2(sol.flow.summaries.back());
    parallel_chunks(n_paths, threads, [&](std::ptrdiff_t, std::ptrdiff_t b, std::ptrdiff_t e) {
        for (size_t s = 0; s < starts.size(); ++s) {
            Vec c;
            model.terminal_cost(X[s].middleRows(b, e - b), c);
            cost[s].segment(b, e - b).array() += c.array() + h2;
        }
    });
    return cost;
}

/// Mean and standard error with a chunked pairwise reduction.
std::pair<double, double> mean_and_error(const Vec& v, int threads) {
    const Eigen::Index n = v.size();
    std::vector<double> sums(static_cast<size_t>(chunk_count(n)), 0.0);
    parallel_chunks(n, threads, [&](std::ptrdiff_t c, std::ptrdiff_t b, std::ptrdiff_t e) {
        sums[static_cast<size_t>(c)] = v.segment(b, e - b).sum();
    });
    const double mean = pairwise_sum(sums) / static_cast<double>(n);
    parallel_chunks(n, threads, [&](std::ptrdiff_t c, std::ptrdiff_t b, std::ptrdiff_t e) {
        sums[static_cast<size_t>(c)] = (v.segment(b, e - b).array() - mean).square().sum();
    });
    const double var = pairwise_sum(sums) / static_cast<double>(n - 1);
    return {mean, std::sqrt(var / static_cast<double>(n))};
}

void check_solution(const CostModel& model, const SolveReport& sol) {
    if (static_cast<Eigen::Index>(sol.field.slices.size()) != sol.grid.n_steps() + 1 ||
        static_cast<Eigen::Index>(sol.flow.summaries.size()) != sol.grid.n_steps() + 1)
        throw InputError("solution does not cover its grid");
    if (sol.field.slices.front().coeffs.cols() != model.dim()) throw InputError("solution dimension does not match the model");
}

} // namespace

ValueEstimate value_function(const CostModel& model, const SolveReport& solution, const Vec& x, double t,
                             Eigen::Index n_paths, std::uint64_t seed, int threads) {
    if (n_paths < 100) throw InputError("value_function: at least 100 paths are required");
    if (x.size() != model.dim()) throw InputError("value_function: x dimension does not match the model");
    check_solution(model, solution);
    const Eigen::Index k0 = grid_step(solution.grid, t);
    const int d = model.dim();

    std::vector<Vec> starts{x};
    for (int j = 0; j < d; ++j) {
        Vec up = x, down = x;
        up(j) += kFdStep;
        down(j) -= kFdStep;
        starts.push_back(up);
        starts.push_back(down);
    }
    const std::vector<Vec> cost = simulate_costs(model, solution, starts, k0, n_paths, seed, threads);

    ValueEstimate out;
    out.n_paths = n_paths;
    std::tie(out.value, out.std_error) = mean_and_error(cost[0], threads);
    out.grad_fd.resize(d);
    out.grad_std_error.resize(d);
    for (int j = 0; j < d; ++j) {
        const Vec diff = (cost[static_cast<size_t>(1 + 2 * j)] - cost[static_cast<size_t>(2 + 2 * j)]) / (2.0 * kFdStep);
        std::tie(out.grad_fd(j), out.grad_std_error(j)) = mean_and_error(diff, threads);
    }
    return out;
}

double hamiltonian(const CostModel& model, const Vec& x, const MeasureSummary& m, const Vec& p) {
    const Vec u = solve_foc(x, p, model);
    return model.eval_g1(x, u).value + model.eval_g2(x, m).value + u.dot(p);
}

HjbResidual hjb_residual(const CostModel& model, const SolveReport& solution, const HjbLattice& lat, int threads) {
    if (model.dim() != 1) throw InputError("hjb_residual: only d = 1 is supported");
    check_solution(model, solution);
    if (!(lat.dt > 0.0) || !(lat.dx > 0.0)) throw InputError("hjb_residual: lattice steps must be positive");
    if (!(lat.t_hi > lat.t_lo) || !(lat.x_hi > lat.x_lo)) throw InputError("hjb_residual: empty lattice");
    const auto nt = static_cast<Eigen::Index>(std::llround((lat.t_hi - lat.t_lo) / lat.dt)) + 1;
    const auto nx = static_cast<Eigen::Index>(std::llround((lat.x_hi - lat.x_lo) / lat.dx)) + 1;
    if (nt < 3 || nx < 3) throw InputError("hjb_residual: lattice needs at least 3 nodes per axis");

    HjbResidual out;
    std::vector<Vec> starts;
    for (Eigen::Index j = 0; j < nx; ++j) {
        out.x.push_back(lat.x_lo + static_cast<double>(j) * lat.dx);
        starts.push_back(Vec::Constant(1, out.x.back()));
    }
    out.value.resize(nt, nx);
    std::vector<Eigen::Index> steps;
    for (Eigen::Index i = 0; i < nt; ++i) {
        const double t = lat.t_lo + static_cast<double>(i) * lat.dt;
        const Eigen::Index k = grid_step(solution.grid, t);
        out.t.push_back(solution.grid.times[static_cast<size_t>(k)]);
        steps.push_back(k);
        const std::vector<Vec> cost = simulate_costs(model, solution, starts, k, lat.n_paths, lat.seed, threads);
        for (Eigen::Index j = 0; j < nx; ++j) out.value(i, j) = mean_and_error(cost[static_cast<size_t>(j)], threads).first;
    }

    const double diffusion = (model.diffusion() * model.diffusion().transpose())(0, 0);
    for (Eigen::Index i = 1; i + 1 < nt; ++i) {
        const double ht = out.t[static_cast<size_t>(i + 1)] - out.t[static_cast<size_t>(i - 1)];
        const MeasureSummary& m = solution.flow.summaries[static_cast<size_t>(steps[static_cast<size_t>(i)])];
        for (Eigen::Index j = 1; j + 1 < nx; ++j) {
            const double vt = (out.value(i + 1, j) - out.value(i - 1, j)) / ht;
            const double vx = (out.value(i, j + 1) - out.value(i, j - 1)) / (2.0 * lat.dx);
            const double vxx = (out.value(i, j + 1) - 2.0 * out.value(i, j) + out.value(i, j - 1)) / (lat.dx * lat.dx);
            const Vec x = Vec::Constant(1, out.x[static_cast<size_t>(j)]);
            const double r = vt + 0.5 * diffusion * vxx + hamiltonian(model, x, m, Vec::Constant(1, vx));
            out.nodes.push_back({out.t[static_cast<size_t>(i)], x(0), r});
            out.max_abs = std::max(out.max_abs, std::abs(r));
        }
    }
    return out;
}

void write_hjb_csv(std::ostream& out, const HjbResidual& residual) {
    out << "t,x,residual\n";
    for (const auto& n : residual.nodes)
        out << format_double(n.t) << ',' << format_double(n.x) << ',' << format_double(n.residual) << '\n';
}

} // namespace mfg
