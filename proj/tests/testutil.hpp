#ifndef DHSIM_TESTS_TESTUTIL_HPP
#define DHSIM_TESTS_TESTUTIL_HPP

#include "dhsim/advection.hpp"
#include "dhsim/network.hpp"

#include <random>
#include <utility>
#include <vector>

namespace dhsim::test {

/// The five-node example grid: producer at n1, consumers at n3/n4/n5,
/// explicit node masses (3, 3, 3, 6, 1), pipe capacities
/// (e1, e2, e3, e4) = (0.5, 0.2, 0.3, 0.1).
inline Network example_grid() {
    std::vector<Node> nodes{{"n1", 3.0, 0.0, 0.0},
                            {"n2", 3.0, 0.0, 0.0},
                            {"n3", 3.0, 0.0, 0.0},
                            {"n4", 6.0, 0.0, 0.0},
                            {"n5", 1.0, 0.0, 0.0}};
    std::vector<Pipe> pipes{{"e1", 0, 1, 0.5, 0.0, 0.0, 0.0},
                            {"e2", 1, 2, 0.2, 0.0, 0.0, 0.0},
                            {"e3", 1, 3, 0.3, 0.0, 0.0, 0.0},
                            {"e4", 3, 4, 0.1, 0.0, 0.0, 0.0}};
    std::vector<Attachment> consumers{{2, "c3"}, {3, "c4"}, {4, "c5"}};
    std::vector<Attachment> producers{{0, "supply"}};
    return Network(nodes, pipes, consumers, producers);
}

/// Uniformly discretized single pipe: `segments` nodes of equal mass in a
/// chain, producer at the head, consumer at the tail, capacity `flow`.
inline Network single_pipe(int segments, double node_mass, double flow) {
    std::vector<Node> nodes;
    std::vector<Pipe> pipes;
    for (int i = 0; i < segments; ++i) {
        nodes.push_back({"s" + std::to_string(i), node_mass, 0.0, 0.0});
        if (i > 0) {
            pipes.push_back({"q" + std::to_string(i), i - 1, i, flow, 0.0, 0.0, 0.0});
        }
    }
    return Network(nodes, pipes, {{segments - 1, "c"}}, {{0, "supply"}});
}

/// Random connected graph with explicit node masses: a random tree plus
/// `extra_edges` chords. Masses and capacities stay in friendly ranges.
inline Network random_graph(std::mt19937_64& rng, int n, int extra_edges) {
    auto uniform = [&rng](double lo, double hi) {
        return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1p-53);
    };
    std::vector<Node> nodes;
    for (int i = 0; i < n; ++i) {
        nodes.push_back({"g" + std::to_string(i), uniform(0.5, 8.0), 0.0, 0.0});
    }
    std::vector<Pipe> pipes;
    int edge_id = 0;
    for (int i = 1; i < n; ++i) {
        int parent = static_cast<int>(rng() % static_cast<std::uint64_t>(i));
        pipes.push_back({"ge" + std::to_string(edge_id++), parent, i,
                         uniform(0.05, 1.0), 0.0, 0.0, 0.0});
    }
    for (int e = 0; e < extra_edges; ++e) {
        int a = static_cast<int>(rng() % static_cast<std::uint64_t>(n));
        int b = static_cast<int>(rng() % static_cast<std::uint64_t>(n));
        if (a == b) continue;
        pipes.push_back({"gx" + std::to_string(edge_id++), a, b,
                         uniform(0.05, 1.0), 0.0, 0.0, 0.0});
    }
    return Network(nodes, pipes, {}, {});
}

/// Cut capacity and part masses of a bisection given by `in_first`.
struct BisectionSummary {
    double cut_flow = 0.0;
    double mass_a = 0.0;
    double mass_b = 0.0;
    bool valid = false;  // both sides non-empty

    double courant_sum() const { return cut_flow / mass_a + cut_flow / mass_b; }
};

inline BisectionSummary summarize_bisection(const Network& net, const Vector& masses,
                                            unsigned mask) {
    BisectionSummary s;
    for (int i = 0; i < net.node_count(); ++i) {
        if (mask & (1u << i)) s.mass_a += masses[i]; else s.mass_b += masses[i];
    }
    if (s.mass_a == 0.0 || s.mass_b == 0.0) return s;
    s.valid = true;
    for (const auto& p : net.pipes()) {
        bool sa = (mask >> p.source) & 1u;
        bool sb = (mask >> p.target) & 1u;
        if (sa != sb) s.cut_flow += p.max_flow;
    }
    return s;
}

/// Exhaustive best bisection by Courant sum (cut/m_a + cut/m_b).
inline std::pair<unsigned, double> brute_force_bisection(const Network& net,
                                                         const Vector& masses) {
    unsigned best_mask = 0;
    double best = std::numeric_limits<double>::infinity();
    const unsigned all = (1u << net.node_count()) - 1;
    for (unsigned mask = 1; mask < all; ++mask) {
        BisectionSummary s = summarize_bisection(net, masses, mask);
        if (s.valid && s.courant_sum() < best) {
            best = s.courant_sum();
            best_mask = mask;
        }
    }
    return {best_mask, best};
}

}  // namespace dhsim::test

#endif
