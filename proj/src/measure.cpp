#include "mfg/measure.hpp"

#include "mfg/errors.hpp"
#include "mfg/format.hpp"
#include "mfg/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mfg {

void ParticleEnsemble::validate() const {
    if (states.rows() < 1 || states.cols() < 1) throw InputError("ensemble is empty");
    if (!states.allFinite()) throw InputError("ensemble has non-finite entries");
}

ParticleEnsemble gaussian_ensemble(Eigen::Index n, const Vec& mean, double stddev, std::uint64_t seed) {
    if (n < 1) throw InputError("gaussian_ensemble: need at least one particle");
    ParticleEnsemble e;
    e.states.resize(n, mean.size());
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < mean.size(); ++j)
            e.states(i, j) = mean(j) + stddev * counter_normal(seed, Stream::initial_ensemble,
                                                               static_cast<std::uint32_t>(i), 0u,
                                                               static_cast<std::uint32_t>(j));
    e.seed_tag = "gaussian(seed=" + std::to_string(seed) + ",std=" + format_double(stddev) + ")";
    return e;
}

MeasureSummary empirical_moments(const Mat& states, int threads) {
    const Eigen::Index n = states.rows();
    const Eigen::Index d = states.cols();
    if (n < 1) throw InputError("empirical_moments: empty ensemble");
    const auto chunks = static_cast<size_t>(chunk_count(n));

    std::vector<Vec> sums(chunks);
    parallel_chunks(n, threads, [&](std::ptrdiff_t c, std::ptrdiff_t b, std::ptrdiff_t e) {
        sums[static_cast<size_t>(c)] = states.middleRows(b, e - b).colwise().sum().transpose();
    });
    MeasureSummary m;
    m.mean = pairwise_sum(std::move(sums)) / static_cast<double>(n);

    std::vector<Mat> cov(chunks);
    std::vector<double> sq(chunks);
    parallel_chunks(n, threads, [&](std::ptrdiff_t c, std::ptrdiff_t b, std::ptrdiff_t e) {
        const Mat centered = states.middleRows(b, e - b).rowwise() - m.mean.transpose();
        cov[static_cast<size_t>(c)] = centered.transpose() * centered;
        sq[static_cast<size_t>(c)] = states.middleRows(b, e - b).squaredNorm();
    });
    m.covariance = symmetrize(pairwise_sum(std::move(cov)) / static_cast<double>(n));
    m.second_moment = pairwise_sum(std::move(sq)) / static_cast<double>(n);
    (void)d;
    return m;
}

MeasureSummary empirical_moments(const ParticleEnsemble& ensemble, int threads) {
    return empirical_moments(ensemble.states, threads);
}

const MeasureSummary& MeasureFlow::at(double s) const {
    if (grid.empty()) throw InputError("MeasureFlow::at: empty flow");
    const auto it = std::lower_bound(grid.begin(), grid.end(), s);
    size_t k = static_cast<size_t>(it - grid.begin());
    if (k == grid.size()) k = grid.size() - 1;
    if (k > 0 && std::abs(grid[k - 1] - s) <= std::abs(grid[k] - s)) --k;
    return summaries[k];
}

// ---------------------------------------------------------------------------

BrownianDriver::BrownianDriver(std::uint64_t seed, Eigen::Index n_particles, Eigen::Index n_steps, int dim,
                               double dt, Stream stream)
    : seed_(seed), n_particles_(n_particles), n_steps_(n_steps), dim_(dim), dt_(dt), sqrt_dt_(std::sqrt(dt)),
      stream_(stream) {
    if (n_particles < 1 || n_steps < 1 || dim < 1 || !(dt > 0.0)) throw InputError("BrownianDriver: bad sizes");
    if (n_particles > std::numeric_limits<std::uint32_t>::max() || n_steps > std::numeric_limits<std::uint32_t>::max())
        throw InputError("BrownianDriver: too many particles or steps");
}

void BrownianDriver::increment(Eigen::Index particle, Eigen::Index step, double* out) const {
    for (int j = 0; j < dim_; ++j)
        out[j] = sqrt_dt_ * counter_normal(seed_, stream_, static_cast<std::uint32_t>(particle),
                                           static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(j));
}

Vec BrownianDriver::increment(Eigen::Index particle, Eigen::Index step) const {
    Vec v(dim_);
    increment(particle, step, v.data());
    return v;
}

Mat BrownianDriver::step_increments(Eigen::Index step, int threads) const {
    Mat out(n_particles_, dim_);
    parallel_chunks(n_particles_, threads, [&](std::ptrdiff_t, std::ptrdiff_t b, std::ptrdiff_t e) {
        double buf[64];
        Vec big;
        double* dst = buf;
        if (dim_ > 64) {
            big.resize(dim_);
            dst = big.data();
        }
        for (std::ptrdiff_t i = b; i < e; ++i) {
            increment(i, step, dst);
            for (int j = 0; j < dim_; ++j) out(i, j) = dst[j];
        }
    });
    return out;
}

// ---------------------------------------------------------------------------

std::vector<int> hungarian_assignment(const Mat& cost) {
    // Shortest augmenting path with potentials, O(n^3).
    const int n = static_cast<int>(cost.rows());
    if (cost.cols() != n) throw InputError("hungarian_assignment: cost matrix must be square");
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(static_cast<size_t>(n) + 1, 0.0), v(static_cast<size_t>(n) + 1, 0.0);
    std::vector<int> p(static_cast<size_t>(n) + 1, 0), way(static_cast<size_t>(n) + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<size_t>(n) + 1, inf);
        std::vector<char> used(static_cast<size_t>(n) + 1, 0);
        do {
            used[static_cast<size_t>(j0)] = 1;
            const int i0 = p[static_cast<size_t>(j0)];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[static_cast<size_t>(j)]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[static_cast<size_t>(i0)] - v[static_cast<size_t>(j)];
                if (cur < minv[static_cast<size_t>(j)]) {
                    minv[static_cast<size_t>(j)] = cur;
                    way[static_cast<size_t>(j)] = j0;
                }
                if (minv[static_cast<size_t>(j)] < delta) {
                    delta = minv[static_cast<size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[static_cast<size_t>(j)]) {
                    u[static_cast<size_t>(p[static_cast<size_t>(j)])] += delta;
                    v[static_cast<size_t>(j)] -= delta;
                } else {
                    minv[static_cast<size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<size_t>(j0)];
            p[static_cast<size_t>(j0)] = p[static_cast<size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> row_to_col(static_cast<size_t>(n));
    for (int j = 1; j <= n; ++j) row_to_col[static_cast<size_t>(p[static_cast<size_t>(j)] - 1)] = j - 1;
    return row_to_col;
}

namespace {

double sorted_w2_squared(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s / static_cast<double>(a.size());
}

} // namespace

W2Result w2_distance(const ParticleEnsemble& a, const ParticleEnsemble& b, std::uint64_t seed) {
    a.validate();
    b.validate();
    if (a.size() != b.size()) throw InputError("w2_distance: ensembles have different particle counts");
    if (a.dim() != b.dim()) throw InputError("w2_distance: ensembles have different dimensions");
    const Eigen::Index n = a.size();
    const int d = a.dim();

    W2Result r;
    if (d == 1) {
        std::vector<double> xa(a.states.data(), a.states.data() + n);
        std::vector<double> xb(b.states.data(), b.states.data() + n);
        r.distance = std::sqrt(sorted_w2_squared(std::move(xa), std::move(xb)));
        return r;
    }
    if (n <= 512) {
        Mat cost(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) cost(i, j) = (a.states.row(i) - b.states.row(j)).squaredNorm();
        const auto match = hungarian_assignment(cost);
        double s = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) s += cost(i, match[static_cast<size_t>(i)]);
        r.distance = std::sqrt(s / static_cast<double>(n));
        return r;
    }
    constexpr int kDirections = 64;
    double total = 0.0;
    for (int k = 0; k < kDirections; ++k) {
        Vec dir(d);
        for (int j = 0; j < d; ++j)
            dir(j) = counter_normal(seed, Stream::projection, static_cast<std::uint32_t>(k), 0u,
                                    static_cast<std::uint32_t>(j));
        dir.normalize();
        const Vec pa = a.states * dir;
        const Vec pb = b.states * dir;
        total += sorted_w2_squared(std::vector<double>(pa.data(), pa.data() + n),
                                   std::vector<double>(pb.data(), pb.data() + n));
    }
    r.distance = std::sqrt(total / kDirections);
    r.approximate = true;
    return r;
}

void write_ensemble_csv(std::ostream& out, const ParticleEnsemble& ensemble) {
    out << "particle";
    for (int j = 1; j <= ensemble.dim(); ++j) out << ",x" << j;
    out << "\n";
    for (Eigen::Index i = 0; i < ensemble.size(); ++i) {
        out << i;
        for (int j = 0; j < ensemble.dim(); ++j) out << ',' << format_double(ensemble.states(i, j));
        out << "\n";
    }
}

void write_flow_csv(std::ostream& out, const MeasureFlow& flow) {
    const Eigen::Index d = flow.summaries.empty() ? 0 : flow.summaries.front().mean.size();
    out << "s";
    for (Eigen::Index j = 1; j <= d; ++j) out << ",mean_" << j;
    out << ",second_moment\n";
    for (size_t k = 0; k < flow.grid.size(); ++k) {
        out << format_double(flow.grid[k]);
        for (Eigen::Index j = 0; j < d; ++j) out << ',' << format_double(flow.summaries[k].mean(j));
        out << ',' << format_double(flow.summaries[k].second_moment) << "\n";
    }
}

} // namespace mfg
