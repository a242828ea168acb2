#ifndef DHSIM_ADVECTION_HPP
#define DHSIM_ADVECTION_HPP

#include "dhsim/common.hpp"
#include "dhsim/network.hpp"

namespace dhsim {

/// All flows of the grid at one time instant: signed per-pipe flow plus
/// per-node boundary flows (producer injections entering, consumer
/// withdrawals leaving) and the temperature of entering flows.
struct FlowField {
    Vector edge_flow;     // kg/s, signed relative to pipe orientation
    Vector node_outflow;  // kg/s, >= 0
    Vector node_inflow;   // kg/s, >= 0
    Vector inlet_temp;    // degC of entering flows

    static FlowField zero(const Network& net);

    /// Checks sizes, sign constraints, and per-node mass balance
    /// (inflows = outflows within kFlowBalanceTolerance).
    void validate(const Network& net) const;
};

/// Builds the FlowField of a single-producer tree grid from per-consumer
/// demands: pipe flows by mass balance, withdrawals at consumer nodes,
/// the total injected at the producer at `supply_temp`.
FlowField tree_flow_field(const Network& net, const Vector& consumer_demands,
                          double supply_temp);

/// State-space operators of dx/dt = A x + B (u_in o x_in) + loss o ambient.
/// A couples each node to its upstream neighbour and is Metzler (nonnegative
/// off-diagonal); B is the inverse lumped-mass diagonal.
struct AdvectionModel {
    Vector mass;        // lumped node masses, kg
    Vector inv_mass;    // B diagonal, 1/kg
    SparseMatrix sys;   // A, 1/s (advection + withdrawals + losses)
    Vector loss_coeff;  // h_i / (c_p m_i), 1/s
    Vector ambient;     // degC
    Vector inflow;      // u_in, kg/s
    Vector outflow;     // u_do, kg/s (kept for flux bookkeeping)
    Vector inlet_temp;  // x_in, degC

    int size() const { return static_cast<int>(mass.size()); }

    /// Right-hand side A x + B (u_in o x_in) + loss o ambient.
    Vector deriv(const Vector& x) const;
};

/// Assembles advection models over a fixed network. The sparsity pattern
/// (diagonal plus both orientations of every pipe) is computed once, so
/// refreshing for new flows only rewrites values; flow-sign changes just
/// move weight between the two prebuilt orientation slots.
class Assembler {
public:
    /// `masses` overrides node_masses(net); used for reduced models whose
    /// cluster masses are carried exactly.
    explicit Assembler(const Network& net);
    Assembler(const Network& net, Vector masses);

    const Network& network() const { return *net_; }
    const Vector& masses() const { return mass_; }

    AdvectionModel assemble(const FlowField& ff) const;

    /// Rewrites the value array of a model previously produced by this
    /// assembler. The model must share the pattern.
    void update(AdvectionModel& model, const FlowField& ff) const;

private:
    void refresh_values(AdvectionModel& model, const FlowField& ff) const;

    const Network* net_;
    Vector mass_;
    Vector loss_coeff_;
    Vector ambient_;
    SparseMatrix pattern_;
    std::vector<int> diag_slot_;      // value index of A(i,i)
    std::vector<int> forward_slot_;   // value index of A(target, source) per pipe
    std::vector<int> backward_slot_;  // value index of A(source, target) per pipe
};

/// One-shot assembly (validates the flow field).
AdvectionModel assemble(const Network& net, const FlowField& ff);

/// Upwind selector: entry (node, pipe) is 1 when the node feeds the pipe
/// under the current flow sign. Zero-flow pipes contribute nothing.
SparseMatrix upwind_incidence(const SparseMatrix& unweighted_incidence,
                              const Vector& edge_flows);

/// Per-node Courant numbers 0.5 * dt * (sum of incident |flow|) / mass.
/// The max-flow overload bounds any admissible flow field.
Vector courant(const Network& net, double dt);
Vector courant(const Network& net, const Vector& edge_flows, double dt);

/// Leading upwind truncation-error coefficient (v dz / 2)(1 - v dt / dz),
/// m^2/s. Vanishes at Courant number 1.
double numerical_diffusion(double velocity, double dz, double dt);

}  // namespace dhsim

#endif
