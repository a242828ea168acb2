#ifndef DHSIM_REDUCTION_HPP
#define DHSIM_REDUCTION_HPP

#include "dhsim/advection.hpp"
#include "dhsim/common.hpp"
#include "dhsim/network.hpp"

#include <cstdint>
#include <vector>

namespace dhsim {

/// Node-to-cluster map. Every cluster is non-empty, connected in the
/// graph, and carries the summed lumped mass of its members.
struct Clustering {
    std::vector<int> assignment;  // node -> cluster
    Vector cluster_mass;          // kg per cluster
    int k = 0;
};

/// Contraction operators derived from a Clustering: the node indicator
/// map (one 1 per column) and the signed edge aggregation map that sums
/// parallel cut pipes into one reduced pipe and drops internal ones.
struct Reducers {
    SparseMatrix node_map;        // k x n
    SparseMatrix edge_map;        // l x m, entries +-1
    std::vector<int> assignment;  // node -> cluster (copy for fast paths)
    int k = 0;
    int l = 0;
};

/// Contracted grid plus everything needed to run it: cluster masses are
/// carried exactly (not rederived from the contracted pipes).
struct ReducedModel {
    Network network;  // cluster graph with aggregated capacities
    Vector mass;      // contracted lumped masses, kg
    Reducers reducers;
    double dt = 0.0;          // step size the reduction targets, s
    double courant_max = 0.0; // at dt
};

struct ClusterStats {
    double eig_seconds = 0.0;
    double kmeans_seconds = 0.0;
    int k_requested = 0;
    int k_effective = 0;
};

struct ClusterOptions {
    std::uint64_t seed = 1;
    int kmeans_restarts = 50;
};

/// Spectral clustering on the (flow Laplacian, lumped mass) pencil: embed
/// nodes as rows of the first k eigenvectors, k-means them, then split
/// any cluster that is disconnected in the graph (so k may grow).
Clustering spectral_cluster(const Network& net, double dt, int k,
                            const ClusterOptions& opts = {},
                            ClusterStats* stats = nullptr);

/// Identity clustering (every node its own cluster).
Clustering identity_clustering(const Network& net);

Reducers build_reducers(const Clustering& clustering, const Network& net);

ReducedModel reduce_model(const Network& net, const Reducers& reducers, double dt);

/// Mass-weighted cluster averages: x~ = (Pn Md Pn^T)^{-1} Pn Md x.
/// Preserves total enthalpy 1^T Md x.
Vector reduce_state(const Vector& x, const Vector& masses, const Reducers& reducers);

/// Broadcast cluster temperatures back to the original nodes (Pn^T x~).
Vector lift_state(const Vector& x_reduced, const Reducers& reducers);

/// Aggregate a full-grid flow field onto the reduced grid: cut-pipe flows
/// sum with orientation signs, boundary flows sum per cluster, inlet
/// temperatures mix flow-weighted.
FlowField reduce_flow_field(const FlowField& full, const Network& net,
                            const ReducedModel& rm);

/// max(diag(0.5 dt M~^{-1} L~_f)) with L~_f from aggregated max flows.
double reduced_courant_max(const ReducedModel& rm, double dt);

/// Sum over connected cluster pairs of cut_flow/mass_i + cut_flow/mass_j
/// (per unit time step), the quantity the balanced cut minimizes.
double courant_sum(const Network& net, const Clustering& clustering);

struct ChooseKResult {
    int k = 0;
    Clustering clustering;
    ReducedModel model;
    bool dt_too_large = false;  // even the coarsest clustering misses the target
    int evaluations = 0;
};

/// Search for the finest cluster count whose reduced Courant number stays
/// at or below c_target, by bracketed bisection over [2, n] starting from
/// k0 (at most ceil(log2 n) + 5 clustering evaluations). Returns the
/// identity clustering when the full grid already meets the target, and
/// the identity with `dt_too_large` set when no cluster count can.
ChooseKResult choose_k(const Network& net, double dt, double c_target, int k0,
                       const ClusterOptions& opts = {});

}  // namespace dhsim

#endif
