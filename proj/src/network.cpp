#include "dhsim/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace dhsim {

namespace {

// Union-find over node indices.
class DisjointSets {
public:
    explicit DisjointSets(int n) : parent_(n) {
        std::iota(parent_.begin(), parent_.end(), 0);
    }
    int find(int a) {
        while (parent_[a] != a) {
            parent_[a] = parent_[parent_[a]];
            a = parent_[a];
        }
        return a;
    }
    void merge(int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) parent_[std::max(a, b)] = std::min(a, b);
    }

private:
    std::vector<int> parent_;
};

std::vector<Pipe> merge_parallel_pipes(std::vector<Pipe> pipes) {
    // Duplicate pipes between the same ordered node pair collapse into
    // one, with flows and masses summed and length mass-averaged.
    std::unordered_map<long long, int> seen;
    std::vector<Pipe> out;
    out.reserve(pipes.size());
    for (auto& p : pipes) {
        long long key = static_cast<long long>(p.source) * (1LL << 31) + p.target;
        auto it = seen.find(key);
        if (it == seen.end()) {
            seen.emplace(key, static_cast<int>(out.size()));
            out.push_back(std::move(p));
            continue;
        }
        Pipe& q = out[it->second];
        double total_mass = q.water_mass + p.water_mass;
        if (total_mass > 0.0) {
            q.length = (q.length * q.water_mass + p.length * p.water_mass) / total_mass;
        } else {
            q.length = 0.5 * (q.length + p.length);
        }
        q.max_flow += p.max_flow;
        q.water_mass = total_mass;
        q.area += p.area;
    }
    return out;
}

}  // namespace

Network::Network(std::vector<Node> nodes, std::vector<Pipe> pipes,
                 std::vector<Attachment> consumers, std::vector<Attachment> producers)
    : nodes_(std::move(nodes)),
      pipes_(merge_parallel_pipes(std::move(pipes))),
      consumers_(std::move(consumers)),
      producers_(std::move(producers)) {
    index_.reserve(nodes_.size());
    for (int i = 0; i < node_count(); ++i) {
        if (!index_.emplace(nodes_[i].id, i).second) {
            throw ValidationError("duplicate node id '" + nodes_[i].id + "'");
        }
    }
    validate();
    incident_.resize(nodes_.size());
    for (int e = 0; e < pipe_count(); ++e) {
        incident_[pipes_[e].source].push_back(e);
        incident_[pipes_[e].target].push_back(e);
    }
}

int Network::node_index(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw ValidationError("unknown node id '" + id + "'");
    return it->second;
}

double Network::total_water_mass() const {
    double total = 0.0;
    for (const auto& n : nodes_) total += n.mass;
    for (const auto& p : pipes_) total += p.water_mass;
    return total;
}

bool Network::is_tree() const {
    return pipe_count() == node_count() - 1;  // connectedness already validated
}

void Network::validate() const {
    if (nodes_.empty()) throw ValidationError("network has no nodes");
    for (const auto& n : nodes_) {
        if (n.mass < 0.0) {
            throw ValidationError("node '" + n.id + "' has negative mass");
        }
    }
    for (const auto& p : pipes_) {
        if (p.source < 0 || p.source >= node_count() || p.target < 0 ||
            p.target >= node_count()) {
            throw ValidationError("pipe '" + p.id + "' references a node out of range");
        }
        if (p.source == p.target) {
            throw ValidationError("pipe '" + p.id + "' is a self loop");
        }
        if (p.max_flow < 0.0) {
            throw ValidationError("pipe '" + p.id + "' has negative max_flow");
        }
        if (p.water_mass < 0.0) {
            throw ValidationError("pipe '" + p.id + "' has negative water_mass");
        }
        if (p.water_mass > 0.0 && p.length > 0.0 && p.area > 0.0) {
            double geometric = kWaterDensity * p.area * p.length;
            if (std::abs(p.water_mass - geometric) > kPipeMassTolerance * geometric) {
                std::ostringstream oss;
                oss << "pipe '" << p.id << "' water_mass " << p.water_mass
                    << " inconsistent with rho*area*length = " << geometric;
                throw ValidationError(oss.str());
            }
        }
    }
    for (const auto& c : consumers_) {
        if (c.node < 0 || c.node >= node_count()) {
            throw ValidationError("consumer references missing node");
        }
    }
    for (const auto& p : producers_) {
        if (p.node < 0 || p.node >= node_count()) {
            throw ValidationError("producer references missing node");
        }
    }

    // Single weakly connected component.
    DisjointSets sets(node_count());
    for (const auto& p : pipes_) sets.merge(p.source, p.target);
    int root = sets.find(0);
    for (int i = 1; i < node_count(); ++i) {
        if (sets.find(i) != root) {
            throw ValidationError("network is disconnected: node '" + nodes_[i].id +
                                  "' is not reachable from '" + nodes_[0].id + "'");
        }
    }
}

Network merge_short_pipes(const Network& net, double threshold) {
    if (threshold < 0.0) throw ValidationError("merge threshold must be >= 0");
    if (threshold == 0.0) return net;

    const int n = net.node_count();
    DisjointSets sets(n);
    for (const auto& p : net.pipes()) {
        if (p.length < threshold) sets.merge(p.source, p.target);
    }

    // Representative = smallest member index; merged node keeps its id.
    std::vector<int> rep(n), remap(n, -1);
    for (int i = 0; i < n; ++i) rep[i] = sets.find(i);
    std::vector<Node> nodes;
    for (int i = 0; i < n; ++i) {
        if (rep[i] == i) {
            remap[i] = static_cast<int>(nodes.size());
            nodes.push_back(net.nodes()[i]);
        }
    }
    for (int i = 0; i < n; ++i) {
        if (rep[i] != i) {
            Node& m = nodes[remap[rep[i]]];
            m.mass += net.nodes()[i].mass;
            m.heat_loss_coeff += net.nodes()[i].heat_loss_coeff;
        }
    }

    std::vector<Pipe> pipes;
    for (const auto& p : net.pipes()) {
        int s = remap[rep[p.source]];
        int t = remap[rep[p.target]];
        if (s == t) {
            // Contracted (or collapsed parallel) pipe: its water stays
            // with the merged node.
            nodes[s].mass += p.water_mass;
            continue;
        }
        Pipe q = p;
        q.source = s;
        q.target = t;
        pipes.push_back(std::move(q));
    }

    std::vector<Attachment> consumers, producers;
    for (auto a : net.consumers()) {
        a.node = remap[rep[a.node]];
        consumers.push_back(a);
    }
    for (auto a : net.producers()) {
        a.node = remap[rep[a.node]];
        producers.push_back(a);
    }
    return Network(std::move(nodes), std::move(pipes), std::move(consumers),
                   std::move(producers));
}

Network oversample(const Network& net, double dz) {
    if (dz <= 0.0) throw ValidationError("segment length dz must be > 0");

    std::vector<Node> nodes = net.nodes();
    std::vector<Pipe> pipes;
    for (const auto& p : net.pipes()) {
        if (p.length <= dz) {
            pipes.push_back(p);
            continue;
        }
        int segments = static_cast<int>(std::ceil(p.length / dz));
        double seg_mass = p.water_mass / segments;
        double seg_length = p.length / segments;

        int prev = p.source;
        double assigned = 0.0;
        for (int s = 0; s < segments; ++s) {
            int next;
            if (s < segments - 1) {
                next = static_cast<int>(nodes.size());
                Node mid;
                mid.id = p.id + "#" + std::to_string(s + 1);
                mid.mass = 0.0;  // carried by the adjacent segment halves
                mid.ambient_temp = 0.5 * (nodes[p.source].ambient_temp +
                                          nodes[p.target].ambient_temp);
                nodes.push_back(std::move(mid));
            } else {
                next = p.target;
            }
            Pipe seg = p;
            seg.id = p.id + (segments > 1 ? "." + std::to_string(s + 1) : "");
            seg.source = prev;
            seg.target = next;
            seg.length = seg_length;
            // Last segment takes the remainder so the masses sum back
            // to p.water_mass exactly.
            seg.water_mass = (s < segments - 1) ? seg_mass : p.water_mass - assigned;
            assigned += seg_mass;
            pipes.push_back(std::move(seg));
            prev = next;
        }
    }
    return Network(std::move(nodes), std::move(pipes), net.consumers(), net.producers());
}

SparseMatrix incidence(const Network& net, Weighting weighting) {
    std::vector<Triplet> entries;
    entries.reserve(2 * net.pipe_count());
    for (int e = 0; e < net.pipe_count(); ++e) {
        const Pipe& p = net.pipes()[e];
        double w = 1.0;
        if (weighting == Weighting::flow) w = p.max_flow;
        else if (weighting == Weighting::mass) w = p.water_mass;
        double r = std::sqrt(w);
        entries.emplace_back(p.target, e, r);
        entries.emplace_back(p.source, e, -r);
    }
    SparseMatrix m(net.node_count(), net.pipe_count());
    m.setFromTriplets(entries.begin(), entries.end());
    return m;
}

SparseMatrix laplacian(const SparseMatrix& weighted_incidence) {
    SparseMatrix l = weighted_incidence * SparseMatrix(weighted_incidence.transpose());
    l.makeCompressed();
    return l;
}

Vector node_masses(const Network& net) {
    Vector m(net.node_count());
    for (int i = 0; i < net.node_count(); ++i) m[i] = net.nodes()[i].mass;
    for (const auto& p : net.pipes()) {
        m[p.source] += 0.5 * p.water_mass;
        m[p.target] += 0.5 * p.water_mass;
    }
    for (int i = 0; i < net.node_count(); ++i) {
        if (m[i] <= 0.0) {
            throw ValidationError("node '" + net.nodes()[i].id +
                                  "' has zero total water mass");
        }
    }
    return m;
}

Vector propagate_flows(const Network& net, const Vector& consumer_demands) {
    if (consumer_demands.size() != static_cast<Eigen::Index>(net.consumers().size())) {
        throw ValidationError("demand vector size does not match consumer count");
    }
    if (net.producers().size() != 1) {
        throw ValidationError(
            "flow propagation requires exactly one producer; supply edge flows "
            "explicitly for multi-producer grids");
    }
    if (!net.is_tree()) {
        throw ValidationError(
            "flow propagation requires a tree topology; supply edge flows "
            "explicitly for looped grids");
    }
    for (int c = 0; c < consumer_demands.size(); ++c) {
        if (consumer_demands[c] < 0.0) {
            throw ValidationError("negative demand for consumer at node '" +
                                  net.nodes()[net.consumers()[c].node].id + "'");
        }
    }

    Vector withdrawal = Vector::Zero(net.node_count());
    for (size_t c = 0; c < net.consumers().size(); ++c) {
        withdrawal[net.consumers()[c].node] += consumer_demands[static_cast<int>(c)];
    }

    // Root the tree at the producer, then accumulate subtree demand
    // leaf-to-root.
    const int root = net.producers()[0].node;
    const int n = net.node_count();
    std::vector<int> parent_edge(n, -1), order;
    std::vector<char> seen(n, 0);
    order.reserve(n);
    order.push_back(root);
    seen[root] = 1;
    for (size_t head = 0; head < order.size(); ++head) {
        int u = order[head];
        for (int e : net.incident_pipes()[u]) {
            const Pipe& p = net.pipes()[e];
            int v = (p.source == u) ? p.target : p.source;
            if (seen[v]) continue;
            seen[v] = 1;
            parent_edge[v] = e;
            order.push_back(v);
        }
    }

    Vector subtree = withdrawal;
    Vector flows = Vector::Zero(net.pipe_count());
    for (size_t i = order.size(); i-- > 1;) {
        int u = order[i];
        int e = parent_edge[u];
        const Pipe& p = net.pipes()[e];
        int par = (p.source == u) ? p.target : p.source;
        // Positive when the nominal orientation points away from the root.
        flows[e] = (p.source == par) ? subtree[u] : -subtree[u];
        subtree[par] += subtree[u];
    }
    return flows;
}

}  // namespace dhsim
