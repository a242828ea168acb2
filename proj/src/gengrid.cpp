#include "dhsim/gengrid.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace dhsim {

namespace {

double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1p-53;
}

int uniform_index(std::mt19937_64& rng, int n) {
    return static_cast<int>(static_cast<__uint128_t>(rng()) * n >> 64);
}

double quantize(double x, double grid) {
    return std::max(grid, std::round(x / grid) * grid);
}

}  // namespace

Network gen_grid(const GridGenParams& p) {
    if (p.nodes < 2) throw ValidationError("grid needs at least two nodes");
    std::mt19937_64 rng(p.seed);
    const int n = p.nodes;

    // Random tree: mostly extend the last tip (long mains), sometimes
    // branch off an arbitrary earlier node.
    std::vector<int> parent(n, -1);
    std::vector<int> degree(n, 0);
    for (int i = 1; i < n; ++i) {
        int par = (i > 1 && uniform01(rng) < p.chain_bias) ? i - 1 : uniform_index(rng, i);
        parent[i] = par;
        ++degree[par];
        ++degree[i];
    }

    std::vector<double> length(n, 0.0);
    for (int i = 1; i < n; ++i) {
        double l = p.length_median * std::exp(p.length_sigma * (2.0 * uniform01(rng) - 1.0) *
                                              1.7320508075688772);  // uniform log spread
        length[i] = quantize(std::clamp(l, p.length_min, p.length_max), 0.01);
    }

    // Consumers: every leaf, plus some interior nodes.
    std::vector<double> peak(n, 0.0);
    std::vector<Attachment> consumers;
    int consumer_count = 0;
    for (int i = 1; i < n; ++i) {
        bool leaf = degree[i] == 1;
        if (leaf || uniform01(rng) < p.internal_consumer_prob) {
            double d = p.peak_demand_mean *
                       (1.0 + p.peak_spread * (2.0 * uniform01(rng) - 1.0));
            peak[i] = quantize(d, 0x1p-20);
            consumers.push_back({i, "d" + std::to_string(consumer_count++)});
        }
    }

    // Design flow per pipe = downstream peak demand (children have larger
    // indices, so one reverse sweep accumulates subtrees).
    std::vector<double> subtree = peak;
    for (int i = n - 1; i >= 1; --i) subtree[parent[i]] += subtree[i];

    std::vector<Node> nodes(n);
    std::vector<Pipe> pipes;
    pipes.reserve(n - 1);
    for (int i = 0; i < n; ++i) {
        nodes[i].id = "n" + std::to_string(i);
        nodes[i].mass = 0.0;
        nodes[i].ambient_temp = p.ambient_temp;
    }
    for (int i = 1; i < n; ++i) {
        Pipe pipe;
        pipe.id = "p" + std::to_string(i);
        pipe.source = parent[i];
        pipe.target = i;
        pipe.max_flow = quantize(p.capacity_margin * subtree[i], 0x1p-20);
        pipe.length = length[i];
        pipe.area = subtree[i] / (kWaterDensity * p.design_velocity);
        pipe.water_mass = quantize(kWaterDensity * pipe.area * pipe.length, 0x1p-10);
        // Keep the declared geometry consistent with the quantized mass.
        pipe.area = pipe.water_mass / (kWaterDensity * pipe.length);
        pipes.push_back(std::move(pipe));

        double h = p.loss_per_meter * 0.5 * length[i];
        nodes[parent[i]].heat_loss_coeff += h;
        nodes[i].heat_loss_coeff += h;
    }

    std::vector<Attachment> producers{{0, "supply"}};
    return Network(std::move(nodes), std::move(pipes), std::move(consumers),
                   std::move(producers));
}

}  // namespace dhsim
