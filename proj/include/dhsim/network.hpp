#ifndef DHSIM_NETWORK_HPP
#define DHSIM_NETWORK_HPP

#include "dhsim/common.hpp"

#include <string>
#include <unordered_map>
#include <vector>

namespace dhsim {

/// A junction of the grid. `mass` is the node's own water mass; the
/// effective lumped mass also collects half of every incident pipe's
/// water mass (see node_masses).
struct Node {
    std::string id;
    double mass = 0.0;             // kg
    double heat_loss_coeff = 0.0;  // W/K
    double ambient_temp = 0.0;     // degC
};

/// A pipe between two junctions. Orientation source -> target is the
/// nominal positive-flow direction; negative flows mean reversed flow.
struct Pipe {
    std::string id;
    int source = -1;
    int target = -1;
    double max_flow = 0.0;    // kg/s, capacity used as clustering weight
    double water_mass = 0.0;  // kg
    double length = 0.0;      // m, 0 = unspecified
    double area = 0.0;        // m^2, 0 = unspecified
};

/// Consumer or producer attachment: node index plus the id of the
/// schedule that drives it.
struct Attachment {
    int node = -1;
    std::string schedule;
};

/// Immutable pipe-network graph. Construction validates all structural
/// invariants (unique ids, connectedness, positive masses, no duplicate
/// pipe between the same ordered node pair) and merges parallel pipes.
class Network {
public:
    /// Empty placeholder; every usable Network comes from the validating
    /// constructor.
    Network() = default;

    Network(std::vector<Node> nodes, std::vector<Pipe> pipes,
            std::vector<Attachment> consumers = {},
            std::vector<Attachment> producers = {});

    const std::vector<Node>& nodes() const { return nodes_; }
    const std::vector<Pipe>& pipes() const { return pipes_; }
    const std::vector<Attachment>& consumers() const { return consumers_; }
    const std::vector<Attachment>& producers() const { return producers_; }

    int node_count() const { return static_cast<int>(nodes_.size()); }
    int pipe_count() const { return static_cast<int>(pipes_.size()); }

    /// Index of the node with the given id; throws ValidationError if absent.
    int node_index(const std::string& id) const;

    /// Pipe indices incident to each node.
    const std::vector<std::vector<int>>& incident_pipes() const { return incident_; }

    /// Own node masses plus all pipe water masses.
    double total_water_mass() const;

    /// True when the graph is a tree (connected with m = n - 1 edges).
    bool is_tree() const;

private:
    void validate() const;

    std::vector<Node> nodes_;
    std::vector<Pipe> pipes_;
    std::vector<Attachment> consumers_;
    std::vector<Attachment> producers_;
    std::vector<std::vector<int>> incident_;
    std::unordered_map<std::string, int> index_;
};

enum class Weighting { unweighted, flow, mass };

/// Contract every pipe shorter than `threshold` meters. The endpoints
/// merge into one node carrying both node masses plus the contracted
/// pipe's water mass; attachments follow their node. Total water mass
/// is conserved.
Network merge_short_pipes(const Network& net, double threshold);

/// Split every pipe longer than `dz` into ceil(length/dz) uniform
/// segments joined by intermediate zero-mass nodes. Segment water
/// masses sum exactly to the original pipe mass.
Network oversample(const Network& net, double dz);

/// Node-by-edge incidence matrix with +sqrt(w) at the target row and
/// -sqrt(w) at the source row of each column. Weights are 1, max_flow,
/// or water_mass depending on `weighting`.
SparseMatrix incidence(const Network& net, Weighting weighting);

/// Weighted graph Laplacian L = Mw Mw^T (symmetric positive semidefinite,
/// zero row sums).
SparseMatrix laplacian(const SparseMatrix& weighted_incidence);

/// Lumped node masses: own mass plus half the water mass of each
/// incident pipe. Throws ValidationError when a node ends up massless.
Vector node_masses(const Network& net);

/// Steady mass-balance flows for a tree network with a single producer:
/// each pipe carries the total demand downstream of it, signed relative
/// to the pipe's nominal orientation. `consumer_demands` is aligned with
/// net.consumers(). Throws ValidationError for non-tree topologies or
/// multiple producers.
Vector propagate_flows(const Network& net, const Vector& consumer_demands);

}  // namespace dhsim

#endif
