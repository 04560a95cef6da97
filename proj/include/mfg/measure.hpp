#pragma once

#include "mfg/model.hpp"
#include "mfg/rng.hpp"

#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace mfg {

/// Equal-weight particle approximation of a law on R^d; one particle per row.
struct ParticleEnsemble {
    Mat states;
    std::string seed_tag;

    Eigen::Index size() const { return states.rows(); }
    int dim() const { return static_cast<int>(states.cols()); }

    /// Throws InputError if empty or non-finite.
    void validate() const;
};

/// N(mean, std^2 I) ensemble drawn from the counter-based stream.
ParticleEnsemble gaussian_ensemble(Eigen::Index n, const Vec& mean, double stddev, std::uint64_t seed);

/// Moments with population (1/N) normalization; sums are reduced in a fixed
/// chunked pairwise order so the result does not depend on `threads`.
MeasureSummary empirical_moments(const Mat& states, int threads = 1);
MeasureSummary empirical_moments(const ParticleEnsemble& ensemble, int threads = 1);

/// Population law along a time grid: summaries at every grid time, full
/// ensembles only at checkpoints.
struct MeasureFlow {
    std::vector<double> grid;
    std::vector<MeasureSummary> summaries;
    std::map<size_t, ParticleEnsemble> checkpoints;  // grid index -> ensemble

    /// Summary at the grid point nearest to s.
    const MeasureSummary& at(double s) const;
};

/// Counter-based Brownian increments: increment(particle, step) is a pure
/// function of (seed, particle, step).
class BrownianDriver {
public:
    BrownianDriver(std::uint64_t seed, Eigen::Index n_particles, Eigen::Index n_steps, int dim, double dt,
                   Stream stream = Stream::brownian);

    std::uint64_t seed() const { return seed_; }
    Eigen::Index n_particles() const { return n_particles_; }
    Eigen::Index n_steps() const { return n_steps_; }
    int dim() const { return dim_; }
    double dt() const { return dt_; }

    /// Writes the d-vector increment (variance dt per component) into out.
    void increment(Eigen::Index particle, Eigen::Index step, double* out) const;
    Vec increment(Eigen::Index particle, Eigen::Index step) const;

    /// Increments for all particles of one step, rows = particles.
    Mat step_increments(Eigen::Index step, int threads = 1) const;

private:
    std::uint64_t seed_;
    Eigen::Index n_particles_, n_steps_;
    int dim_;
    double dt_, sqrt_dt_;
    Stream stream_;
};

struct W2Result {
    double distance = 0.0;
    bool approximate = false;
};

/// 2-Wasserstein distance between equal-size uniform empirical measures.
/// d = 1: sorted matching. d > 1, N <= 512: Hungarian assignment.
/// d > 1, N > 512: sliced estimate over 64 seeded directions (approximate).
W2Result w2_distance(const ParticleEnsemble& a, const ParticleEnsemble& b, std::uint64_t seed = 0);

/// Minimum-cost perfect matching on a square cost matrix; returns column of each row.
std::vector<int> hungarian_assignment(const Mat& cost);

void write_ensemble_csv(std::ostream& out, const ParticleEnsemble& ensemble);
void write_flow_csv(std::ostream& out, const MeasureFlow& flow);

} // namespace mfg
