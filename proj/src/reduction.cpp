#include "dhsim/reduction.hpp"

#include "dhsim/eigs.hpp"
#include "dhsim/kmeans.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

namespace dhsim {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// Relabels an arbitrary assignment so cluster indices appear in order of
/// their smallest member node, and splits graph-disconnected clusters
/// into their connected components first.
std::vector<int> canonicalize(const Network& net, std::vector<int> labels) {
    const int n = net.node_count();
    // Union nodes joined by an edge internal to a label.
    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int a) {
        while (parent[a] != a) { parent[a] = parent[parent[a]]; a = parent[a]; }
        return a;
    };
    for (const auto& p : net.pipes()) {
        if (labels[p.source] == labels[p.target]) {
            int a = find(p.source), b = find(p.target);
            if (a != b) parent[std::max(a, b)] = std::min(a, b);
        }
    }
    // Each union-find root becomes one cluster, numbered by first appearance.
    std::vector<int> out(n, -1);
    int next = 0;
    std::vector<int> root_label(n, -1);
    for (int i = 0; i < n; ++i) {
        int r = find(i);
        if (root_label[r] < 0) root_label[r] = next++;
        out[i] = root_label[r];
    }
    return out;
}

Clustering from_assignment(const Network& net, std::vector<int> assignment) {
    Clustering c;
    c.assignment = std::move(assignment);
    c.k = *std::max_element(c.assignment.begin(), c.assignment.end()) + 1;
    Vector md = node_masses(net);
    c.cluster_mass = Vector::Zero(c.k);
    for (int i = 0; i < net.node_count(); ++i) {
        c.cluster_mass[c.assignment[i]] += md[i];
    }
    return c;
}

}  // namespace

Clustering identity_clustering(const Network& net) {
    std::vector<int> assignment(net.node_count());
    std::iota(assignment.begin(), assignment.end(), 0);
    return from_assignment(net, std::move(assignment));
}

Clustering spectral_cluster(const Network& net, double dt, int k,
                            const ClusterOptions& opts, ClusterStats* stats) {
    (void)dt;  // the embedding uses capacities; dt only enters the Courant check
    const int n = net.node_count();
    if (k < 2 || k > n) throw ValidationError("cluster count must be in [2, n]");
    if (stats) { *stats = {}; stats->k_requested = k; }
    if (k == n) {
        Clustering c = identity_clustering(net);
        if (stats) stats->k_effective = c.k;
        return c;
    }

    SparseMatrix lf = laplacian(incidence(net, Weighting::flow));
    Vector md = node_masses(net);

    auto t0 = Clock::now();
    EigenPairs pairs = generalized_eigs(lf, md, k);
    if (stats) stats->eig_seconds = seconds_since(t0);

    t0 = Clock::now();
    KMeansOptions ko;
    ko.seed = opts.seed;
    ko.restarts = opts.kmeans_restarts;
    KMeansResult km = kmeans(pairs.vectors, k, ko);
    if (stats) stats->kmeans_seconds = seconds_since(t0);

    Clustering c = from_assignment(net, canonicalize(net, std::move(km.assignment)));
    if (stats) stats->k_effective = c.k;
    return c;
}

Reducers build_reducers(const Clustering& clustering, const Network& net) {
    const int n = net.node_count();
    const int m = net.pipe_count();
    if (static_cast<int>(clustering.assignment.size()) != n) {
        throw ValidationError("clustering does not match network");
    }

    Reducers r;
    r.assignment = clustering.assignment;
    r.k = clustering.k;

    std::vector<Triplet> node_entries;
    node_entries.reserve(n);
    for (int i = 0; i < n; ++i) node_entries.emplace_back(r.assignment[i], i, 1.0);
    r.node_map.resize(r.k, n);
    r.node_map.setFromTriplets(node_entries.begin(), node_entries.end());

    // One reduced pipe per unordered cluster pair; orientation follows the
    // first cut pipe encountered, later parallel pipes enter signed.
    std::map<std::pair<int, int>, int> pair_to_edge;
    std::vector<std::pair<int, int>> orientation;  // source, target cluster
    std::vector<Triplet> edge_entries;
    for (int e = 0; e < m; ++e) {
        int cs = r.assignment[net.pipes()[e].source];
        int ct = r.assignment[net.pipes()[e].target];
        if (cs == ct) continue;
        auto key = std::minmax(cs, ct);
        auto [it, inserted] = pair_to_edge.try_emplace(key, static_cast<int>(orientation.size()));
        if (inserted) orientation.emplace_back(cs, ct);
        double sign = (orientation[it->second].first == cs) ? 1.0 : -1.0;
        edge_entries.emplace_back(it->second, e, sign);
    }
    r.l = static_cast<int>(orientation.size());
    r.edge_map.resize(r.l, m);
    r.edge_map.setFromTriplets(edge_entries.begin(), edge_entries.end());
    return r;
}

ReducedModel reduce_model(const Network& net, const Reducers& reducers, double dt) {
    const int k = reducers.k;
    Vector md = node_masses(net);

    Vector cluster_mass = Vector::Zero(k);
    for (int i = 0; i < net.node_count(); ++i) {
        cluster_mass[reducers.assignment[i]] += md[i];
    }

    std::vector<Node> nodes(k);
    for (int c = 0; c < k; ++c) {
        nodes[c].id = "c" + std::to_string(c);
    }
    Vector ambient_weight = Vector::Zero(k);
    for (int i = 0; i < net.node_count(); ++i) {
        const Node& src = net.nodes()[i];
        Node& dst = nodes[reducers.assignment[i]];
        dst.heat_loss_coeff += src.heat_loss_coeff;
        dst.ambient_temp += md[i] * src.ambient_temp;
        ambient_weight[reducers.assignment[i]] += md[i];
    }
    for (int c = 0; c < k; ++c) nodes[c].ambient_temp /= ambient_weight[c];

    // Aggregate cut pipes; capacities and water masses sum.
    std::vector<Pipe> pipes(reducers.l);
    for (int re = 0; re < reducers.l; ++re) {
        pipes[re].id = "r" + std::to_string(re);
        pipes[re].source = -1;
    }
    for (int e = 0; e < net.pipe_count(); ++e) {
        for (SparseMatrix::InnerIterator it(reducers.edge_map, e); it; ++it) {
            Pipe& rp = pipes[it.row()];
            const Pipe& p = net.pipes()[e];
            if (rp.source < 0) {
                int cs = reducers.assignment[p.source];
                int ct = reducers.assignment[p.target];
                if (it.value() > 0.0) { rp.source = cs; rp.target = ct; }
                else { rp.source = ct; rp.target = cs; }
            }
            rp.max_flow += p.max_flow;
            rp.water_mass += p.water_mass;
        }
    }
    // Own mass = cluster mass minus the half-shares of incident cut pipes,
    // so the contracted network is self-consistent under node_masses.
    Vector own = cluster_mass;
    for (const auto& p : pipes) {
        own[p.source] -= 0.5 * p.water_mass;
        own[p.target] -= 0.5 * p.water_mass;
    }
    for (int c = 0; c < k; ++c) nodes[c].mass = std::max(0.0, own[c]);

    std::vector<Attachment> consumers, producers;
    for (auto a : net.consumers()) {
        a.node = reducers.assignment[a.node];
        consumers.push_back(a);
    }
    for (auto a : net.producers()) {
        a.node = reducers.assignment[a.node];
        producers.push_back(a);
    }

    ReducedModel rm;
    rm.network = Network(std::move(nodes), std::move(pipes), std::move(consumers),
                         std::move(producers));
    rm.mass = std::move(cluster_mass);
    rm.reducers = reducers;
    rm.dt = dt;
    rm.courant_max = reduced_courant_max(rm, dt);
    return rm;
}

Vector reduce_state(const Vector& x, const Vector& masses, const Reducers& reducers) {
    if (x.size() != static_cast<Eigen::Index>(reducers.assignment.size()) ||
        masses.size() != x.size()) {
        throw ValidationError("state/mass size does not match reducers");
    }
    Vector num = Vector::Zero(reducers.k);
    Vector den = Vector::Zero(reducers.k);
    for (int i = 0; i < x.size(); ++i) {
        num[reducers.assignment[i]] += masses[i] * x[i];
        den[reducers.assignment[i]] += masses[i];
    }
    return num.cwiseQuotient(den);
}

Vector lift_state(const Vector& x_reduced, const Reducers& reducers) {
    if (x_reduced.size() != reducers.k) {
        throw ValidationError("reduced state size does not match reducers");
    }
    Vector y(reducers.assignment.size());
    for (size_t i = 0; i < reducers.assignment.size(); ++i) {
        y[static_cast<Eigen::Index>(i)] = x_reduced[reducers.assignment[i]];
    }
    return y;
}

FlowField reduce_flow_field(const FlowField& full, const Network& net,
                            const ReducedModel& rm) {
    const Reducers& r = rm.reducers;
    FlowField ff = FlowField::zero(rm.network);
    ff.edge_flow = r.edge_map * full.edge_flow;

    Vector energy = Vector::Zero(r.k);  // inflow-weighted inlet temperature
    for (int i = 0; i < net.node_count(); ++i) {
        int c = r.assignment[i];
        ff.node_outflow[c] += full.node_outflow[i];
        ff.node_inflow[c] += full.node_inflow[i];
        energy[c] += full.node_inflow[i] * full.inlet_temp[i];
    }
    for (int c = 0; c < r.k; ++c) {
        ff.inlet_temp[c] = ff.node_inflow[c] > 0.0 ? energy[c] / ff.node_inflow[c] : 0.0;
    }
    return ff;
}

double reduced_courant_max(const ReducedModel& rm, double dt) {
    if (rm.network.pipe_count() == 0) return 0.0;
    Vector incident = Vector::Zero(rm.reducers.k);
    for (const auto& p : rm.network.pipes()) {
        incident[p.source] += p.max_flow;
        incident[p.target] += p.max_flow;
    }
    return (0.5 * dt * incident.cwiseQuotient(rm.mass)).maxCoeff();
}

double courant_sum(const Network& net, const Clustering& clustering) {
    std::map<std::pair<int, int>, double> cut;
    for (const auto& p : net.pipes()) {
        int a = clustering.assignment[p.source];
        int b = clustering.assignment[p.target];
        if (a != b) cut[std::minmax(a, b)] += p.max_flow;
    }
    double sum = 0.0;
    for (const auto& [pair, flow] : cut) {
        sum += flow / clustering.cluster_mass[pair.first] +
               flow / clustering.cluster_mass[pair.second];
    }
    return sum;
}

ChooseKResult choose_k(const Network& net, double dt, double c_target, int k0,
                       const ClusterOptions& opts) {
    if (!(c_target > 0.0 && c_target <= 1.0)) {
        throw ValidationError("Courant target must be in (0, 1]");
    }
    const int n = net.node_count();
    ChooseKResult result;

    auto evaluate = [&](int k) {
        Clustering c = spectral_cluster(net, dt, k, opts);
        Reducers r = build_reducers(c, net);
        ReducedModel rm = reduce_model(net, r, dt);
        ++result.evaluations;
        return std::pair<Clustering, ReducedModel>(std::move(c), std::move(rm));
    };
    auto finish_identity = [&](bool warn) {
        result.k = n;
        result.clustering = identity_clustering(net);
        result.model = reduce_model(net, build_reducers(result.clustering, net), dt);
        result.dt_too_large = warn;
    };

    // The un-clustered grid already meeting the target means no reduction
    // is needed at all.
    if (courant(net, dt).maxCoeff() <= c_target) {
        finish_identity(false);
        return result;
    }
    if (n <= 2) {
        finish_identity(true);
        return result;
    }

    const int budget =
        static_cast<int>(std::ceil(std::log2(static_cast<double>(n)))) + 5;
    int low = 2, high = n;  // high always violates the target
    bool have_low = false;
    bool first = true;

    while (result.evaluations < budget) {
        int k;
        if (first) {
            k = std::clamp(k0, 2, n - 1);
            first = false;
        } else if (!have_low) {
            k = std::max(2, (2 + high) / 2);  // walk down until something satisfies
            if (k >= high) k = high - 1;
        } else {
            if (high - low <= 1) break;
            k = (low + high) / 2;
        }
        auto [c, rm] = evaluate(k);
        const double cmax = rm.courant_max;
        if (cmax <= c_target) {
            have_low = true;
            low = std::max(k, c.k);  // contiguity splits can raise the effective k
            result.k = c.k;
            result.clustering = std::move(c);
            result.model = std::move(rm);
            if (cmax >= 0.9 * c_target) break;  // inside the target band
        } else {
            high = k;
            if (k <= 2) break;  // even the coarsest cut violates
        }
    }

    if (!have_low) {
        // No cluster count reaches the target: the requested step size is
        // too large for this grid; fall back to the identity and say so.
        finish_identity(true);
    }
    return result;
}

}  // namespace dhsim
