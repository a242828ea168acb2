#include "dhsim/advection.hpp"

#include <cmath>
#include <sstream>

namespace dhsim {

FlowField FlowField::zero(const Network& net) {
    FlowField ff;
    ff.edge_flow = Vector::Zero(net.pipe_count());
    ff.node_outflow = Vector::Zero(net.node_count());
    ff.node_inflow = Vector::Zero(net.node_count());
    ff.inlet_temp = Vector::Zero(net.node_count());
    return ff;
}

void FlowField::validate(const Network& net) const {
    if (edge_flow.size() != net.pipe_count() || node_outflow.size() != net.node_count() ||
        node_inflow.size() != net.node_count() || inlet_temp.size() != net.node_count()) {
        throw ValidationError("flow field does not match network dimensions");
    }
    Vector balance = node_inflow - node_outflow;
    for (int e = 0; e < net.pipe_count(); ++e) {
        const Pipe& p = net.pipes()[e];
        balance[p.target] += edge_flow[e];
        balance[p.source] -= edge_flow[e];
    }
    for (int i = 0; i < net.node_count(); ++i) {
        if (node_inflow[i] < 0.0 || node_outflow[i] < 0.0) {
            throw ValidationError("negative boundary flow at node '" +
                                  net.nodes()[i].id + "'");
        }
        if (std::abs(balance[i]) > kFlowBalanceTolerance) {
            std::ostringstream oss;
            oss << "flow imbalance of " << balance[i] << " kg/s at node '"
                << net.nodes()[i].id << "'";
            throw ValidationError(oss.str());
        }
    }
}

FlowField tree_flow_field(const Network& net, const Vector& consumer_demands,
                          double supply_temp) {
    FlowField ff = FlowField::zero(net);
    ff.edge_flow = propagate_flows(net, consumer_demands);
    double total = 0.0;
    for (size_t c = 0; c < net.consumers().size(); ++c) {
        ff.node_outflow[net.consumers()[c].node] += consumer_demands[static_cast<int>(c)];
        total += consumer_demands[static_cast<int>(c)];
    }
    const int root = net.producers()[0].node;
    ff.node_inflow[root] = total;
    ff.inlet_temp[root] = supply_temp;
    return ff;
}

Vector AdvectionModel::deriv(const Vector& x) const {
    Vector d = sys * x;
    d += inv_mass.cwiseProduct(inflow.cwiseProduct(inlet_temp));
    d += loss_coeff.cwiseProduct(ambient);
    return d;
}

Assembler::Assembler(const Network& net) : Assembler(net, node_masses(net)) {}

Assembler::Assembler(const Network& net, Vector masses) : net_(&net), mass_(std::move(masses)) {
    const int n = net.node_count();
    const int m = net.pipe_count();
    if (mass_.size() != n) throw ValidationError("mass vector does not match network");

    loss_coeff_.resize(n);
    ambient_.resize(n);
    for (int i = 0; i < n; ++i) {
        loss_coeff_[i] = net.nodes()[i].heat_loss_coeff / (kWaterHeatCapacity * mass_[i]);
        ambient_[i] = net.nodes()[i].ambient_temp;
    }

    // Fixed pattern: every diagonal plus both orientations of every pipe.
    std::vector<Triplet> entries;
    entries.reserve(n + 2 * m);
    for (int i = 0; i < n; ++i) entries.emplace_back(i, i, 0.0);
    for (const auto& p : net.pipes()) {
        entries.emplace_back(p.target, p.source, 0.0);
        entries.emplace_back(p.source, p.target, 0.0);
    }
    pattern_.resize(n, n);
    pattern_.setFromTriplets(entries.begin(), entries.end());
    pattern_.makeCompressed();

    auto slot = [this](int row, int col) {
        for (int idx = pattern_.outerIndexPtr()[col]; idx < pattern_.outerIndexPtr()[col + 1];
             ++idx) {
            if (pattern_.innerIndexPtr()[idx] == row) return idx;
        }
        throw NumericalError("internal: missing pattern slot");
    };
    diag_slot_.resize(n);
    for (int i = 0; i < n; ++i) diag_slot_[i] = slot(i, i);
    forward_slot_.resize(m);
    backward_slot_.resize(m);
    for (int e = 0; e < m; ++e) {
        forward_slot_[e] = slot(net.pipes()[e].target, net.pipes()[e].source);
        backward_slot_[e] = slot(net.pipes()[e].source, net.pipes()[e].target);
    }
}

AdvectionModel Assembler::assemble(const FlowField& ff) const {
    AdvectionModel model;
    model.mass = mass_;
    model.inv_mass = mass_.cwiseInverse();
    model.sys = pattern_;
    model.loss_coeff = loss_coeff_;
    model.ambient = ambient_;
    refresh_values(model, ff);
    return model;
}

void Assembler::update(AdvectionModel& model, const FlowField& ff) const {
    if (model.sys.nonZeros() != pattern_.nonZeros() || model.size() != mass_.size()) {
        throw ValidationError("model was not produced by this assembler");
    }
    refresh_values(model, ff);
}

void Assembler::refresh_values(AdvectionModel& model, const FlowField& ff) const {
    const Network& net = *net_;
    if (ff.edge_flow.size() != net.pipe_count() ||
        ff.node_inflow.size() != net.node_count()) {
        throw ValidationError("flow field does not match network dimensions");
    }
    double* val = model.sys.valuePtr();
    for (int i = 0; i < net.node_count(); ++i) {
        val[diag_slot_[i]] = -(ff.node_outflow[i] * model.inv_mass[i] + loss_coeff_[i]);
    }
    for (int e = 0; e < net.pipe_count(); ++e) {
        const Pipe& p = net.pipes()[e];
        double u = ff.edge_flow[e];
        if (u >= 0.0) {
            // Upstream is the nominal source: heat moves source -> target.
            val[forward_slot_[e]] = u * model.inv_mass[p.target];
            val[backward_slot_[e]] = 0.0;
            val[diag_slot_[p.source]] -= u * model.inv_mass[p.source];
        } else {
            val[backward_slot_[e]] = -u * model.inv_mass[p.source];
            val[forward_slot_[e]] = 0.0;
            val[diag_slot_[p.target]] -= -u * model.inv_mass[p.target];
        }
    }
    model.inflow = ff.node_inflow;
    model.outflow = ff.node_outflow;
    model.inlet_temp = ff.inlet_temp;
}

AdvectionModel assemble(const Network& net, const FlowField& ff) {
    ff.validate(net);
    return Assembler(net).assemble(ff);
}

SparseMatrix upwind_incidence(const SparseMatrix& unweighted_incidence,
                              const Vector& edge_flows) {
    const int n = static_cast<int>(unweighted_incidence.rows());
    const int m = static_cast<int>(unweighted_incidence.cols());
    if (edge_flows.size() != m) {
        throw ValidationError("edge flow vector does not match incidence width");
    }
    std::vector<Triplet> entries;
    entries.reserve(m);
    for (int e = 0; e < m; ++e) {
        if (edge_flows[e] == 0.0) continue;
        for (SparseMatrix::InnerIterator it(unweighted_incidence, e); it; ++it) {
            // The node feeding the pipe: the source entry (-1) for positive
            // flow, the target entry (+1) for reversed flow.
            if ((edge_flows[e] > 0.0) == (it.value() < 0.0)) {
                entries.emplace_back(static_cast<int>(it.row()), e, 1.0);
            }
        }
    }
    SparseMatrix mo(n, m);
    mo.setFromTriplets(entries.begin(), entries.end());
    return mo;
}

namespace {

Vector courant_from_incident(const Network& net, const Vector& per_edge_weight, double dt) {
    Vector m = node_masses(net);
    Vector c = Vector::Zero(net.node_count());
    for (int e = 0; e < net.pipe_count(); ++e) {
        double w = std::abs(per_edge_weight[e]);
        c[net.pipes()[e].source] += w;
        c[net.pipes()[e].target] += w;
    }
    return 0.5 * dt * c.cwiseQuotient(m);
}

}  // namespace

Vector courant(const Network& net, double dt) {
    Vector w(net.pipe_count());
    for (int e = 0; e < net.pipe_count(); ++e) w[e] = net.pipes()[e].max_flow;
    return courant_from_incident(net, w, dt);
}

Vector courant(const Network& net, const Vector& edge_flows, double dt) {
    if (edge_flows.size() != net.pipe_count()) {
        throw ValidationError("edge flow vector does not match network");
    }
    return courant_from_incident(net, edge_flows, dt);
}

double numerical_diffusion(double velocity, double dz, double dt) {
    return 0.5 * velocity * dz * (1.0 - velocity * dt / dz);
}

}  // namespace dhsim
