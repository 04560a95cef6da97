#include "mfg/solver.hpp"

#include "mfg/analysis.hpp"
#include "mfg/errors.hpp"
#include "mfg/format.hpp"
#include "mfg/log.hpp"
#include "mfg/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace mfg {

void SolverConfig::validate() const {
    if (n_particles < 2) throw InputError("n_particles must be at least 2");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw InputError("dt must be positive");
    if (basis_degree < 1) throw InputError("basis_degree must be at least 1");
    if (max_picard < 1) throw InputError("max_picard must be at least 1");
    if (!(picard_tol > 0.0)) throw InputError("picard_tol must be positive");
    if (!(gamma1 > 0.0)) throw InputError("gamma1 must be positive");
    if (delta_override && !(*delta_override > 0.0)) throw InputError("delta_override must be positive");
}

TimeGrid make_time_grid(double t0, double T, double dt) {
    if (!(T > t0)) throw InputError("time grid needs T > t0");
    if (!(dt > 0.0)) throw InputError("time grid needs dt > 0");
    const auto n = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::ceil((T - t0) / dt - 1e-9)));
    TimeGrid g;
    g.t0 = t0;
    g.T = T;
    g.times.resize(static_cast<size_t>(n + 1));
    for (Eigen::Index k = 0; k <= n; ++k)
        g.times[static_cast<size_t>(k)] = t0 + (T - t0) * static_cast<double>(k) / static_cast<double>(n);
    g.times.back() = T;
    g.boundaries = {0, n};
    return g;
}

Eigen::Index TimeGrid::index_of(double s) const {
    const auto k = static_cast<Eigen::Index>(std::llround((s - t0) / dt()));
    return std::clamp<Eigen::Index>(k, 0, n_steps());
}

const char* to_string(SolveStatus status) {
    switch (status) {
    case SolveStatus::converged: return "Converged";
    case SolveStatus::non_contraction: return "NonContraction";
    case SolveStatus::max_iterations: return "MaxIterations";
    }
    return "?";
}

double compute_delta_loc(const AssumptionConstants& c, double c_q, double gamma1) {
    c.validate();
    if (!(c_q >= 0.0) || !std::isfinite(c_q)) throw InputError("delta_loc: c_q must be finite and non-negative");
    if (!(gamma1 > 0.0)) throw InputError("delta_loc: gamma1 must be positive");
    constexpr double sqrt2 = std::numbers::sqrt2;
    const double C = c.C_g1;
    const double L = c.lambda_big;
    const double theta = 4.0 * sqrt2 * C / L;
    const double K = C + c.c_g2 + c.C_g2 + sqrt2 * C * C / L;
    const double vartheta = 4.0 * (sqrt2 * C / L + gamma1 * K);
    const double first = 1.0 / vartheta;
    const double second = std::log1p(C * C) / theta;
    const double third = std::log1p(C * C / (264.0 * std::numbers::e) / (c_q + K / (2.0 * gamma1 * vartheta))) / theta;
    const double width = std::min({first, second, third});
    if (!std::isfinite(width) || !(width > 0.0))
        throw InputError("delta_loc: degenerate constants give a non-finite width (C_g1 must be positive)");
    return width;
}

Vec solve_foc(const Vec& y, const Vec& p, const CostModel& model) {
    if (y.size() != model.dim() || p.size() != model.dim()) throw InputError("solve_foc: dimension mismatch");
    return model.solve_foc(y, p);
}

double estimate_lipschitz(const FieldSlice& slice, const Mat& states) {
    const Eigen::Index n = states.rows();
    if (n < 2) return 0.0;
    const Eigen::Index stride = std::max<Eigen::Index>(1, (n + 255) / 256);
    std::vector<Eigen::Index> pick;
    for (Eigen::Index i = 0; i < n && pick.size() < 256; i += stride) pick.push_back(i);
    Mat Y(static_cast<Eigen::Index>(pick.size()), states.cols());
    for (size_t i = 0; i < pick.size(); ++i) Y.row(static_cast<Eigen::Index>(i)) = states.row(pick[i]);
    const Mat P = slice.evaluate(Y);
    double lip = 0.0;
    for (Eigen::Index i = 0; i < Y.rows(); ++i)
        for (Eigen::Index j = i + 1; j < Y.rows(); ++j) {
            const double dy = (Y.row(i) - Y.row(j)).norm();
            if (dy < 1e-12) continue;
            lip = std::max(lip, (P.row(i) - P.row(j)).norm() / dy);
        }
    return lip;
}

namespace {

constexpr double kDivergence = 1e100;

FieldSlice zero_slice(int d) {
    FieldSlice s;
    s.basis = PolynomialBasis(d, 0);
    s.coeffs = Mat::Zero(1, d);
    return s;
}

double chunk_max(std::vector<double> parts) {
    double m = 0.0;
    for (double v : parts) {
        if (std::isnan(v)) return std::numeric_limits<double>::quiet_NaN();
        m = std::max(m, v);
    }
    return m;
}

} // namespace

std::vector<Mat> diffusion_increments(const CostModel& model, const SolverConfig& config, Eigen::Index n,
                                      Eigen::Index steps, double dt) {
    const int d = model.dim();
    const int threads = config.threads;
    const BrownianDriver bm(config.seed, n, steps, d, dt);
    const Mat eta_t = model.diffusion().transpose();
    std::vector<Mat> out(static_cast<size_t>(steps));
    std::vector<Vec> sums(static_cast<size_t>(chunk_count(n)));
    for (Eigen::Index k = 0; k < steps; ++k) {
        Mat dw = bm.step_increments(k, threads);
        if (config.center_increments && n > 1) {
            parallel_chunks(n, threads, [&](std::ptrdiff_t c, std::ptrdiff_t b, std::ptrdiff_t f) {
                sums[static_cast<size_t>(c)] = dw.middleRows(b, f - b).colwise().sum().transpose();
            });
            const Vec mean = pairwise_sum(sums) / static_cast<double>(n);
            parallel_chunks(n, threads, [&](std::ptrdiff_t, std::ptrdiff_t b, std::ptrdiff_t f) {
                dw.middleRows(b, f - b).rowwise() -= mean.transpose();
            });
        }
        Mat& e = out[static_cast<size_t>(k)];
        e.resize(n, d);
        parallel_chunks(n, threads, [&](std::ptrdiff_t, std::ptrdiff_t b, std::ptrdiff_t f) {
            e.middleRows(b, f - b) = dw.middleRows(b, f - b) * eta_t;
        });
    }
    return out;
}

namespace {

class Engine {
public:
    Engine(const CostModel& model, const SolverConfig& cfg, const TimeGrid& grid, const Mat& init,
           std::vector<Mat> noise)
        : model_(model), cfg_(cfg), grid_(grid), n_(init.rows()), steps_(grid.n_steps()), d_(model.dim()),
          dt_(grid.dt()), noise_(std::move(noise)), init_(init) {
        ropts_.degree = cfg.basis_degree;
        ropts_.threads = cfg.threads;
    }

    /// P = F(Y), U = u(Y, P), Ynext = Y + U dt + eta dW_k.
    void forward_step(Eigen::Index k, const FieldSlice& F, const Mat& Y, Mat& P, Mat& U, Mat& Ynext) const {
        P.resize(n_, d_);
        U.resize(n_, d_);
        Ynext.resize(n_, d_);
        const Mat& dw = noise_[static_cast<size_t>(k)];
        parallel_chunks(n_, cfg_.threads, [&](std::ptrdiff_t, std::ptrdiff_t b, std::ptrdiff_t e) {
            const Mat Yc = Y.middleRows(b, e - b);
            const Mat Pc = F.evaluate(Yc);
            Mat Uc;
            model_.feedback(Yc, Pc, Uc);
            P.middleRows(b, e - b) = Pc;
            U.middleRows(b, e - b) = Uc;
            Ynext.middleRows(b, e - b) = Yc + dt_ * Uc + dw.middleRows(b, e - b);
        });
    }

    /// Regression target for step k: the next field along the path minus its
    /// martingale increment, plus the driver. `next == nullptr` is grad h1.
    Mat backward_target(Eigen::Index k, const FieldSlice* next, const Mat& Y, const Mat& U, const Mat& Ynext,
                        const MeasureSummary& m) const {
        Mat T(n_, d_);
        const Mat& dw = noise_[static_cast<size_t>(k)];
        parallel_chunks(n_, cfg_.threads, [&](std::ptrdiff_t, std::ptrdiff_t b, std::ptrdiff_t e) {
            const Mat Yc = Y.middleRows(b, e - b);
            const Mat Uc = U.middleRows(b, e - b);
            const Mat Yn = Ynext.middleRows(b, e - b);
            const Mat noise = dw.middleRows(b, e - b);
            const Mat predicted = Yc + dt_ * Uc;
            Mat value, correction, drift;
            if (next != nullptr) {
                value = next->evaluate(Yn);
                correction = next->directional(predicted, noise);
            } else {
                model_.terminal_gradient(Yn, value);
                model_.terminal_hessian_apply(predicted, noise, correction);
            }
            model_.driver(Yc, Uc, m, drift);
            T.middleRows(b, e - b) = value - correction + dt_ * drift;
        });
        return T;
    }

    /// sup over particles of |F(Y) - P|.
    double field_change(const FieldSlice& F, const Mat& Y, const Mat& P) const {
        std::vector<double> parts(static_cast<size_t>(chunk_count(n_)), 0.0);
        parallel_chunks(n_, cfg_.threads, [&](std::ptrdiff_t c, std::ptrdiff_t b, std::ptrdiff_t e) {
            const Mat diff = F.evaluate(Y.middleRows(b, e - b)) - P.middleRows(b, e - b);
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
        return chunk_max(std::move(parts));
    }

    Mat terminal_values(const Mat& Y) const {
        Mat G(n_, d_);
        parallel_chunks(n_, cfg_.threads, [&](std::ptrdiff_t, std::ptrdiff_t b, std::ptrdiff_t e) {
            Mat g;
            model_.terminal_gradient(Y.middleRows(b, e - b), g);
            G.middleRows(b, e - b) = g;
        });
        return G;
    }

    /// Global forward pass under the current slices (zero field where unset).
    void forward_pass(bool record) {
        states_.resize(static_cast<size_t>(steps_ + 1));
        states_[0] = init_;
        const FieldSlice zero = zero_slice(d_);
        Mat P, U;
        if (record) {
            summaries_.assign(static_cast<size_t>(steps_ + 1), MeasureSummary{});
            foc_residual_ = 0.0;
        }
        double worst = 0.0, pmax = 0.0;
        for (Eigen::Index k = 0; k < steps_; ++k) {
            const auto& slot = slices_.empty() ? std::nullopt : slices_[static_cast<size_t>(k)];
            const FieldSlice& F = slot ? *slot : zero;
            forward_step(k, F, states_[static_cast<size_t>(k)], P, U, states_[static_cast<size_t>(k + 1)]);
            if (record) {
                summaries_[static_cast<size_t>(k)] = empirical_moments(states_[static_cast<size_t>(k)], cfg_.threads);
                const auto [r, p] = foc_check(states_[static_cast<size_t>(k)], P, U);
                worst = std::max(worst, r);
                pmax = std::max(pmax, p);
            }
        }
        if (record) {
            summaries_.back() = empirical_moments(states_.back(), cfg_.threads);
            foc_residual_ = worst / (1.0 + pmax);
        }
    }

    std::pair<double, double> foc_check(const Mat& Y, const Mat& P, const Mat& U) const {
        const auto chunks = static_cast<size_t>(chunk_count(n_));
        std::vector<double> res(chunks, 0.0), pn(chunks, 0.0);
        parallel_chunks(n_, cfg_.threads, [&](std::ptrdiff_t c, std::ptrdiff_t b, std::ptrdiff_t e) {
            Mat G;
            model_.control_gradient(Y.middleRows(b, e - b), U.middleRows(b, e - b), G);
            const Mat Pc = P.middleRows(b, e - b);
            res[static_cast<size_t>(c)] = (Pc + G).rowwise().norm().maxCoeff();
            pn[static_cast<size_t>(c)] = Pc.rowwise().norm().maxCoeff();
        });
        return {chunk_max(std::move(res)), chunk_max(std::move(pn))};
    }

    /// Local Picard iteration on steps [s, e). Returns the sup-change of the
    /// field against the previous sweep (infinity where none existed).
    double local_solve(Eigen::Index s, Eigen::Index e, SubintervalRecord& rec) {
        const Eigen::Index w = e - s;
        const FieldSlice* proxy = (e == steps_) ? nullptr : &*slices_[static_cast<size_t>(e)];
        std::vector<FieldSlice> cur(static_cast<size_t>(w));
        for (Eigen::Index j = 0; j < w; ++j) {
            const auto& prev = slices_[static_cast<size_t>(s + j)];
            cur[static_cast<size_t>(j)] = prev ? *prev : *slices_[static_cast<size_t>(e)];
        }
        std::vector<Mat> Y(static_cast<size_t>(w + 1)), P(static_cast<size_t>(w)), U(static_cast<size_t>(w));
        std::vector<MeasureSummary> m(static_cast<size_t>(w));
        Y[0] = states_[static_cast<size_t>(s)];

        rec.distances.clear();
        rec.ratios.clear();
        rec.converged = false;
        bool diverged = false;
        for (int it = 0; it < cfg_.max_picard; ++it) {
            for (Eigen::Index j = 0; j < w; ++j) {
                const auto sj = static_cast<size_t>(j);
                forward_step(s + j, cur[sj], Y[sj], P[sj], U[sj], Y[sj + 1]);
                m[sj] = empirical_moments(Y[sj], cfg_.threads);
            }
            std::vector<FieldSlice> fresh(static_cast<size_t>(w));
            for (Eigen::Index j = w - 1; j >= 0; --j) {
                const auto sj = static_cast<size_t>(j);
                const FieldSlice* next = (j == w - 1) ? proxy : &fresh[sj + 1];
                const Mat target = backward_target(s + j, next, Y[sj], U[sj], Y[sj + 1], m[sj]);
                fresh[sj] = regress_field(Y[sj], target, ropts_);
            }
            double dist = 0.0;
            for (Eigen::Index j = 0; j < w; ++j) {
                const auto sj = static_cast<size_t>(j);
                const double c = field_change(fresh[sj], Y[sj], P[sj]);
                dist = std::isnan(c) ? c : std::max(dist, c);
                if (std::isnan(dist)) break;
            }
            if (!rec.distances.empty()) rec.ratios.push_back(dist / rec.distances.back());
            rec.distances.push_back(dist);
            cur = std::move(fresh);
            if (!std::isfinite(dist) || dist > kDivergence) {
                diverged = true;
                break;
            }
            if (dist <= cfg_.picard_tol) {
                rec.converged = true;
                break;
            }
        }
        rec.iterations = static_cast<int>(rec.distances.size());
        if (diverged || (!rec.converged && !rec.ratios.empty() && !(rec.ratios.back() < 1.0))) {
            status_ = SolveStatus::non_contraction;
            return std::numeric_limits<double>::infinity();
        }
        if (!rec.converged) {
            status_ = SolveStatus::max_iterations;
            return std::numeric_limits<double>::infinity();
        }

        double change = 0.0;
        for (Eigen::Index j = 0; j < w; ++j) {
            const auto sj = static_cast<size_t>(j);
            auto& slot = slices_[static_cast<size_t>(s + j)];
            if (slot) {
                const Mat old = slot->evaluate(Y[sj]);
                change = std::max(change, field_change(cur[sj], Y[sj], old));
            } else {
                change = std::numeric_limits<double>::infinity();
            }
            slot = std::move(cur[sj]);
        }
        return change;
    }

    void fit_terminal_slice() {
        const Mat& YT = states_.back();
        slices_[static_cast<size_t>(steps_)] = regress_field(YT, terminal_values(YT), ropts_);
    }

    SolveReport run() {
        const AssumptionConstants& constants = model_.constants();
        SolveReport report;
        report.config = cfg_;
        report.grid = grid_;

        if (!(cii_margin(constants, grid_.T - grid_.t0) > 0.0)) {
            std::ostringstream msg;
            msg << "small mean-field condition fails on this horizon (margin "
                << format_double(cii_margin(constants, grid_.T - grid_.t0)) << "); convergence is not guaranteed";
            report.warnings.push_back(msg.str());
        }

        slices_.assign(static_cast<size_t>(steps_ + 1), std::nullopt);
        forward_pass(false);

        std::vector<std::pair<Eigen::Index, Eigen::Index>> partition;  // backward order
        std::vector<double> c_q, delta;
        bool override_warned = false;
        bool coarse_warned = false;
        status_ = SolveStatus::converged;
        bool converged = false;

        for (int sweep = 0; sweep < cfg_.max_picard; ++sweep) {
            fit_terminal_slice();
            std::vector<SubintervalRecord> records;
            double sweep_change = 0.0;
            Eigen::Index end = steps_;
            size_t idx = 0;
            while (end > 0) {
                SubintervalRecord rec;
                if (sweep == 0) {
                    const double cq = (end == steps_) ? constants.C_h1
                                                      : estimate_lipschitz(*slices_[static_cast<size_t>(end)],
                                                                           states_[static_cast<size_t>(end)]);
                    const double dl = compute_delta_loc(constants, cq, cfg_.gamma1);
                    double width = dl;
                    if (cfg_.delta_override) {
                        width = *cfg_.delta_override;
                        if (width > dl && !override_warned) {
                            report.warnings.push_back("delta_override " + format_double(width) +
                                                      " exceeds the contraction width " + format_double(dl) +
                                                      " at t=" + format_double(grid_.times[static_cast<size_t>(end)]));
                            override_warned = true;
                        }
                    }
                    auto steps = static_cast<Eigen::Index>(std::floor(width / dt_ + 1e-9));
                    if (steps < 1) {
                        steps = 1;
                        if (!cfg_.delta_override && !coarse_warned) {
                            report.warnings.push_back("time step " + format_double(dt_) +
                                                      " exceeds the contraction width " + format_double(dl) +
                                                      "; using single-step sub-intervals");
                            coarse_warned = true;
                        }
                    }
                    partition.emplace_back(std::max<Eigen::Index>(0, end - steps), end);
                    c_q.push_back(cq);
                    delta.push_back(dl);
                }
                const auto [s, e] = partition[idx];
                rec.step_begin = s;
                rec.step_end = e;
                rec.t_begin = grid_.times[static_cast<size_t>(s)];
                rec.t_end = grid_.times[static_cast<size_t>(e)];
                rec.c_q = c_q[idx];
                rec.delta_loc = delta[idx];
                const double change = local_solve(s, e, rec);
                records.push_back(rec);
                if (status_ != SolveStatus::converged) break;
                sweep_change = std::max(sweep_change, change);
                end = s;
                ++idx;
            }
            std::reverse(records.begin(), records.end());
            report.sweep_records.push_back(records);
            if (status_ != SolveStatus::converged) {
                report.failed_interval = 0;
                log_message(LogLevel::info, std::string("local Picard stopped: ") + to_string(status_) + " on [" +
                                                format_double(records.front().t_begin) + ", " +
                                                format_double(records.front().t_end) + "]");
                break;
            }
            forward_pass(false);
            report.sweep_distances.push_back(sweep_change);
            log_message(LogLevel::debug, "sweep " + std::to_string(sweep) + " field change " + format_double(sweep_change));
            if (sweep_change <= cfg_.picard_tol) {
                converged = true;
                break;
            }
            if (std::isnan(sweep_change) || (std::isfinite(sweep_change) && sweep_change > kDivergence)) {
                status_ = SolveStatus::non_contraction;
                break;
            }
        }
        if (status_ == SolveStatus::converged && !converged) {
            const auto& sd = report.sweep_distances;
            const bool growing = sd.size() >= 2 && std::isfinite(sd[sd.size() - 2]) && !(sd.back() < sd[sd.size() - 2]);
            status_ = growing ? SolveStatus::non_contraction : SolveStatus::max_iterations;
        }

        // Final pass: flow, residual and the terminal slice on the final paths.
        for (auto& slot : slices_)
            if (!slot) slot = zero_slice(d_);
        forward_pass(true);
        fit_terminal_slice();

        report.status = status_;
        report.converged = status_ == SolveStatus::converged;
        report.subintervals = report.sweep_records.empty() ? std::vector<SubintervalRecord>{} : report.sweep_records.back();
        std::vector<Eigen::Index> bounds{0};
        for (auto it = partition.rbegin(); it != partition.rend(); ++it) bounds.push_back(it->second);
        if (!partition.empty() && partition.back().first == 0) report.grid.boundaries = bounds;
        report.flow.grid = grid_.times;
        report.flow.summaries = summaries_;
        report.flow.checkpoints[0] = ParticleEnsemble{init_, "initial"};
        report.flow.checkpoints[static_cast<size_t>(steps_)] = ParticleEnsemble{states_.back(), "terminal"};
        report.field.times = grid_.times;
        for (auto& slot : slices_) report.field.slices.push_back(std::move(*slot));
        report.foc_residual = foc_residual_;
        for (const auto& w : report.warnings) log_message(LogLevel::info, w);
        return report;
    }

private:
    const CostModel& model_;
    const SolverConfig& cfg_;
    const TimeGrid& grid_;
    Eigen::Index n_, steps_;
    int d_;
    double dt_;
    std::vector<Mat> noise_;
    Mat init_;
    RegressionOptions ropts_;
    std::vector<Mat> states_;
    std::vector<std::optional<FieldSlice>> slices_;
    std::vector<MeasureSummary> summaries_;
    double foc_residual_ = 0.0;
    SolveStatus status_ = SolveStatus::converged;
};

} // namespace

SolveReport solve_global(const CostModel& model, const ParticleEnsemble& init, double t0, double T,
                         const SolverConfig& config) {
    const auto start = std::chrono::steady_clock::now();
    config.validate();
    init.validate();
    if (init.dim() != model.dim()) throw InputError("solve_global: ensemble dimension does not match the model");
    SolverConfig cfg = config;
    cfg.n_particles = init.size();
    if (cfg.n_particles < 2) throw InputError("solve_global: need at least 2 particles");
    const TimeGrid grid = make_time_grid(t0, T, cfg.dt);
    Engine engine(model, cfg, grid, init.states,
                  diffusion_increments(model, cfg, init.size(), grid.n_steps(), grid.dt()));
    SolveReport report = engine.run();
    report.wall_time_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return report;
}

std::vector<Mat> simulate_paths(const CostModel& model, const Mat& init, const TimeGrid& grid,
                                const DecouplingField& field, const SolverConfig& config) {
    if (static_cast<Eigen::Index>(field.slices.size()) != grid.n_steps() + 1)
        throw InputError("simulate_paths: field does not match the grid");
    const Eigen::Index n = init.rows();
    const double dt = grid.dt();
    const std::vector<Mat> noise = diffusion_increments(model, config, n, grid.n_steps(), dt);
    std::vector<Mat> states(static_cast<size_t>(grid.n_steps() + 1));
    states[0] = init;
    for (Eigen::Index k = 0; k < grid.n_steps(); ++k) {
        const Mat& Y = states[static_cast<size_t>(k)];
        Mat& Yn = states[static_cast<size_t>(k + 1)];
        Yn.resize(n, init.cols());
        const FieldSlice& F = field.at(k);
        parallel_chunks(n, config.threads, [&](std::ptrdiff_t, std::ptrdiff_t b, std::ptrdiff_t e) {
            const Mat Yc = Y.middleRows(b, e - b);
            const Mat Pc = F.evaluate(Yc);
            Mat Uc;
            model.feedback(Yc, Pc, Uc);
            Yn.middleRows(b, e - b) = Yc + dt * Uc + noise[static_cast<size_t>(k)].middleRows(b, e - b);
        });
    }
    return states;
}

void write_field_csv(std::ostream& out, const DecouplingField& field) {
    out << "t,coeff_index,value\n";
    for (size_t k = 0; k < field.slices.size(); ++k) {
        const Mat& c = field.slices[k].coeffs;
        for (Eigen::Index b = 0; b < c.rows(); ++b)
            for (Eigen::Index j = 0; j < c.cols(); ++j)
                out << format_double(field.times[k]) << ',' << b * c.cols() + j << ',' << format_double(c(b, j)) << '\n';
    }
}

} // namespace mfg
