#ifndef DHSIM_KMEANS_HPP
#define DHSIM_KMEANS_HPP

#include "dhsim/common.hpp"

#include <cstdint>
#include <vector>

namespace dhsim {

struct KMeansOptions {
    int restarts = 50;
    int max_iterations = 100;
    std::uint64_t seed = 1;
    int threads = 0;  // 0 = hardware concurrency
};

struct KMeansResult {
    std::vector<int> assignment;  // point -> cluster
    Matrix centroids;             // k x d
    double inertia = 0.0;
    int iterations = 0;
};

/// Lloyd's algorithm with k-means++ seeding. Fully deterministic for a
/// given seed: each restart draws from its own derived RNG stream,
/// assignment ties break toward the lowest cluster index, and the winner
/// is selected by (inertia, restart index) regardless of thread timing.
KMeansResult kmeans(const Matrix& points, int k, const KMeansOptions& opts = {});

}  // namespace dhsim

#endif
