#include "dhsim/kmeans.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <random>
#include <thread>

namespace dhsim {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1p-53;
}

int uniform_index(std::mt19937_64& rng, int n) {
    return static_cast<int>(static_cast<__uint128_t>(rng()) * n >> 64);
}

struct SingleRun {
    std::vector<int> assignment;
    Matrix centroids;
    double inertia = std::numeric_limits<double>::infinity();
    int iterations = 0;
};

// k-means++: each next centre drawn proportionally to the squared
// distance from the nearest chosen one.
Matrix seed_centroids(const Matrix& points, int k, std::mt19937_64& rng) {
    const int n = static_cast<int>(points.rows());
    Matrix centroids(k, points.cols());
    centroids.row(0) = points.row(uniform_index(rng, n));
    Vector d2 = (points.rowwise() - centroids.row(0)).rowwise().squaredNorm();
    for (int c = 1; c < k; ++c) {
        double total = d2.sum();
        int pick;
        if (total > 0.0) {
            double target = uniform01(rng) * total;
            double acc = 0.0;
            pick = n - 1;
            for (int i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc >= target) { pick = i; break; }
            }
        } else {
            pick = uniform_index(rng, n);  // all remaining points coincide
        }
        centroids.row(c) = points.row(pick);
        d2 = d2.cwiseMin((points.rowwise() - centroids.row(c)).rowwise().squaredNorm());
    }
    return centroids;
}

SingleRun run_once(const Matrix& points, int k, int max_iterations, std::uint64_t seed) {
    const int n = static_cast<int>(points.rows());
    std::mt19937_64 rng(seed);

    SingleRun run;
    run.centroids = seed_centroids(points, k, rng);
    run.assignment.assign(n, -1);

    Vector point_sq = points.rowwise().squaredNorm();
    Vector best_d2(n);
    Matrix gram;  // n x k cross terms, the hot loop

    for (int iter = 0; iter < max_iterations; ++iter) {
        gram.noalias() = points * run.centroids.transpose();
        Vector centroid_sq = run.centroids.rowwise().squaredNorm();

        bool changed = false;
        for (int i = 0; i < n; ++i) {
            int best = 0;
            double best_val = centroid_sq[0] - 2.0 * gram(i, 0);
            for (int c = 1; c < k; ++c) {
                double val = centroid_sq[c] - 2.0 * gram(i, c);
                if (val < best_val) { best_val = val; best = c; }
            }
            best_d2[i] = std::max(0.0, best_val + point_sq[i]);
            if (run.assignment[i] != best) { run.assignment[i] = best; changed = true; }
        }
        run.iterations = iter + 1;
        if (!changed && iter > 0) break;

        Matrix sums = Matrix::Zero(k, points.cols());
        std::vector<int> counts(k, 0);
        for (int i = 0; i < n; ++i) {
            sums.row(run.assignment[i]) += points.row(i);
            ++counts[run.assignment[i]];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[c] > 0) {
                run.centroids.row(c) = sums.row(c) / counts[c];
                continue;
            }
            // Empty cluster: adopt the point currently worst represented.
            int far = 0;
            best_d2.maxCoeff(&far);
            run.centroids.row(c) = points.row(far);
            best_d2[far] = 0.0;
        }
    }

    run.inertia = best_d2.sum();
    return run;
}

}  // namespace

KMeansResult kmeans(const Matrix& points, int k, const KMeansOptions& opts) {
    const int n = static_cast<int>(points.rows());
    if (k < 1 || k > n) throw ValidationError("k-means cluster count must be in [1, n]");
    if (opts.restarts < 1) throw ValidationError("k-means needs at least one restart");

    const int restarts = opts.restarts;
    std::vector<SingleRun> runs(restarts);

    int threads = opts.threads > 0 ? opts.threads
                                   : static_cast<int>(std::thread::hardware_concurrency());
    threads = std::max(1, std::min(threads, restarts));

    std::atomic<int> next{0};
    auto worker = [&] {
        for (int r = next.fetch_add(1); r < restarts; r = next.fetch_add(1)) {
            runs[r] = run_once(points, k, opts.max_iterations,
                               splitmix64(opts.seed + static_cast<std::uint64_t>(r)));
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    int best = 0;
    for (int r = 1; r < restarts; ++r) {
        if (runs[r].inertia < runs[best].inertia) best = r;
    }

    KMeansResult out;
    out.assignment = std::move(runs[best].assignment);
    out.centroids = std::move(runs[best].centroids);
    out.inertia = runs[best].inertia;
    out.iterations = runs[best].iterations;
    return out;
}

}  // namespace dhsim
