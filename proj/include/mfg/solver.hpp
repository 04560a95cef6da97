#pragma once

#include "mfg/measure.hpp"
#include "mfg/model.hpp"
#include "mfg/regression.hpp"

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace mfg {

struct SolverConfig {
    Eigen::Index n_particles = 10000;
    double dt = 1e-3;
    int basis_degree = 1;
    int max_picard = 50;     // cap for local Picard iterations and for outer sweeps
    double picard_tol = 1e-9;
    double gamma1 = 1.0;
    std::optional<double> delta_override;
    std::uint64_t seed = 0;
    int threads = 1;
    bool center_increments = true;  // subtract the ensemble mean of each Brownian step

    void validate() const;
};

/// Uniform step grid on [t0, T] with sub-interval boundaries on step indices.
struct TimeGrid {
    double t0 = 0.0, T = 0.0;
    std::vector<double> times;               // n_steps + 1 points
    std::vector<Eigen::Index> boundaries;    // ascending step indices, first 0, last n_steps

    Eigen::Index n_steps() const { return static_cast<Eigen::Index>(times.size()) - 1; }
    double dt() const { return (T - t0) / static_cast<double>(n_steps()); }
    /// Index of the grid time nearest to s.
    Eigen::Index index_of(double s) const;
};

TimeGrid make_time_grid(double t0, double T, double dt);

/// Regression representation of y -> p at every grid time.
struct DecouplingField {
    std::vector<double> times;
    std::vector<FieldSlice> slices;

    const FieldSlice& at(Eigen::Index step) const { return slices.at(static_cast<size_t>(step)); }
};

enum class SolveStatus { converged, non_contraction, max_iterations };

const char* to_string(SolveStatus status);

struct SubintervalRecord {
    Eigen::Index step_begin = 0, step_end = 0;
    double t_begin = 0.0, t_end = 0.0;
    double c_q = 0.0;        // Lipschitz estimate of the terminal proxy
    double delta_loc = 0.0;  // admissible width for that proxy
    int iterations = 0;
    std::vector<double> distances;  // sup-change of the field per Picard iteration
    std::vector<double> ratios;     // distances[k+1] / distances[k]
    bool converged = false;
};

struct SolveReport {
    SolveStatus status = SolveStatus::max_iterations;
    bool converged = false;
    std::optional<size_t> failed_interval;  // index into subintervals
    SolverConfig config;
    TimeGrid grid;
    std::vector<SubintervalRecord> subintervals;               // final sweep, in time order
    std::vector<std::vector<SubintervalRecord>> sweep_records;  // every sweep
    std::vector<double> sweep_distances;
    MeasureFlow flow;  // checkpoints hold the initial and terminal ensembles
    DecouplingField field;
    double foc_residual = 0.0;  // max |p + grad_v g1(y, u)| / (1 + max |p|) along the final paths
    double wall_time_ms = 0.0;
    std::vector<std::string> warnings;
};

/// Admissible local width for a terminal proxy with Lipschitz constant c_q.
/// Throws InputError when the formula degenerates (non-finite or non-positive).
double compute_delta_loc(const AssumptionConstants& constants, double c_q, double gamma1 = 1.0);

/// Feedback control u(y, p).
Vec solve_foc(const Vec& y, const Vec& p, const CostModel& model);

/// Lipschitz estimate of a field slice over up to 256 deterministically chosen particles.
double estimate_lipschitz(const FieldSlice& slice, const Mat& states);

/// Concatenated local-contraction solve on [t0, T] starting from `init`.
SolveReport solve_global(const CostModel& model, const ParticleEnsemble& init, double t0, double T,
                         const SolverConfig& config);

/// eta dW_k for every particle and step, as used by the solver for
/// config.seed. With config.center_increments the per-step increments are
/// shifted to zero ensemble mean.
std::vector<Mat> diffusion_increments(const CostModel& model, const SolverConfig& config, Eigen::Index n,
                                      Eigen::Index steps, double dt);

/// Forward Euler-Maruyama pass under a fixed field; states[k] for every grid
/// step. Uses the same Brownian increments as the solver for config.seed.
std::vector<Mat> simulate_paths(const CostModel& model, const Mat& init, const TimeGrid& grid,
                                const DecouplingField& field, const SolverConfig& config);

/// CSV `t,coeff_index,value`; coeff_index = basis_index * d + component.
void write_field_csv(std::ostream& out, const DecouplingField& field);

} // namespace mfg
