#include "dhsim/simulate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace dhsim {

namespace {

using Clock = std::chrono::steady_clock;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1p-53;
}

double gaussian(std::mt19937_64& rng) {
    double u1 = std::max(uniform01(rng), 1e-300);
    double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace

double Schedule::at(double t) const {
    if (values.empty()) return 0.0;
    if (values.size() == 1 || period <= 0.0) return values.front();
    double pos = t / period;
    if (pos <= 0.0) return values.front();
    auto last = static_cast<double>(values.size() - 1);
    if (pos >= last) return values.back();
    auto lo = static_cast<size_t>(pos);
    double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[lo + 1] - values[lo]);
}

std::vector<Schedule> gen_demands(int consumers, double horizon, double period,
                                  std::uint64_t seed, const DemandParams& p) {
    if (horizon <= 0.0 || period <= 0.0) {
        throw ValidationError("demand generation needs positive horizon and period");
    }
    const int samples = static_cast<int>(std::ceil(horizon / period)) + 1;
    std::vector<Schedule> out(consumers);
    for (int c = 0; c < consumers; ++c) {
        std::mt19937_64 rng(splitmix64(seed ^ (0xC0115D00ULL + c)));
        double scale = p.scale_min + (p.scale_max - p.scale_min) * uniform01(rng);
        double morning = p.morning_amp * (0.8 + 0.4 * uniform01(rng));
        double afternoon = p.afternoon_amp * (0.8 + 0.4 * uniform01(rng));
        double t_morning = 7.0 * 3600.0 + 1800.0 * (2.0 * uniform01(rng) - 1.0);
        double t_afternoon = 17.0 * 3600.0 + 1800.0 * (2.0 * uniform01(rng) - 1.0);

        Schedule s;
        s.period = period;
        s.values.resize(samples);
        for (int i = 0; i < samples; ++i) {
            double tod = std::fmod(i * period, 86400.0);
            double dm = tod - t_morning;
            double da = tod - t_afternoon;
            double v = p.base + morning * std::exp(-0.5 * dm * dm / (p.bump_sigma * p.bump_sigma)) +
                       afternoon * std::exp(-0.5 * da * da / (p.bump_sigma * p.bump_sigma)) +
                       p.noise_amp * gaussian(rng);
            s.values[i] = std::max(0.0, scale * v);
        }
        out[c] = std::move(s);
    }
    return out;
}

Schedule ramp_schedule(double horizon, double period, double start, double end) {
    Schedule s;
    s.period = period;
    const int samples = static_cast<int>(std::ceil(horizon / period)) + 1;
    s.values.resize(samples);
    for (int i = 0; i < samples; ++i) {
        double f = std::min(1.0, i * period / horizon);
        s.values[i] = start + f * (end - start);
    }
    return s;
}

Scenario make_scenario(const Network& net, double horizon, double period,
                       std::uint64_t seed, const DemandParams& params,
                       double supply_start, double supply_end) {
    Scenario sc;
    sc.horizon = horizon;
    sc.seed = seed;
    sc.demands = gen_demands(static_cast<int>(net.consumers().size()), horizon, period,
                             seed, params);
    sc.supply_temp.assign(net.producers().size(),
                          ramp_schedule(horizon, period, supply_start, supply_end));
    return sc;
}

Vector step_explicit(const AdvectionModel& model, const Vector& x, double dt) {
    // Stability requires every node to keep part of its own water over the
    // step: dt * (exit flow + loss rate) / mass <= 1, i.e. 1 + dt A_ii >= 0.
    for (int i = 0; i < model.size(); ++i) {
        double c = -dt * model.sys.coeff(i, i);
        if (c > 1.0 + 1e-9) {
            std::ostringstream oss;
            oss << "Courant violation at node " << i << ": C = " << c;
            throw NumericalError(oss.str());
        }
    }
    return x + dt * model.deriv(x);
}

SimulationTrace integrate(const Assembler& assembler, const ModelRefresh& refresh,
                          Vector x0, const IntegrateOptions& opts) {
    if (opts.dt_out <= 0.0 || opts.horizon <= 0.0) {
        throw ValidationError("integration needs positive dt_out and horizon");
    }
    const Network& net = assembler.network();

    // Worst-case Courant from pipe capacities fixes the sub-step count.
    Vector capacity = Vector::Zero(net.node_count());
    for (const auto& p : net.pipes()) {
        capacity[p.source] += p.max_flow;
        capacity[p.target] += p.max_flow;
    }
    double c_max = (0.5 * opts.dt_out * capacity.cwiseQuotient(assembler.masses())).maxCoeff();
    int substeps = std::max(1, static_cast<int>(std::ceil(c_max / opts.c_safe)));
    double dt_int = opts.dt_out / substeps;

    const int outputs = static_cast<int>(std::round(opts.horizon / opts.dt_out));
    SimulationTrace trace;
    trace.times.resize(outputs + 1);
    trace.states.resize(x0.size(), outputs + 1);
    trace.states.col(0) = x0;
    trace.times[0] = 0.0;

    AdvectionModel model = assembler.assemble(FlowField::zero(net));
    Vector x = std::move(x0);
    Vector mass_loss = model.loss_coeff.cwiseProduct(model.mass);

    auto t_start = Clock::now();
    for (int out = 1; out <= outputs; ++out) {
        double t_base = (out - 1) * opts.dt_out;
        for (int s = 0; s < substeps; ++s) {
            double t = t_base + s * dt_int;
            refresh(t, model);
            // Refine locally when unbalanced withdrawals push the true exit
            // rate past the capacity-based bound.
            int refine = 1;
            double worst = -dt_int * Vector(model.sys.diagonal()).minCoeff();
            while (worst / refine > 1.0 && refine < (1 << 20)) refine *= 2;
            if (worst / refine > 1.0 + 1e-9) {
                throw NumericalError("flow field exceeds any stable sub-step size");
            }
            double dt_sub = dt_int / refine;
            for (int r = 0; r < refine; ++r) {
                if (r > 0) refresh(t + r * dt_sub, model);
                trace.inflow_enthalpy += dt_sub * model.inflow.dot(model.inlet_temp);
                trace.outflow_enthalpy += dt_sub * model.outflow.dot(x);
                trace.loss_enthalpy += dt_sub * mass_loss.dot(x - model.ambient);
                if (opts.method == StepMethod::euler) {
                    x += dt_sub * model.deriv(x);
                } else {
                    Vector k1 = model.deriv(x);
                    Vector k2 = model.deriv(x + dt_sub * k1);
                    x += 0.5 * dt_sub * (k1 + k2);
                }
                ++trace.steps_taken;
            }
        }
        if (!x.allFinite()) {
            std::ostringstream oss;
            int bad = 0;
            for (int i = 0; i < x.size(); ++i) {
                if (!std::isfinite(x[i])) { bad = i; break; }
            }
            oss << "non-finite state at t = " << out * opts.dt_out << " s, node " << bad;
            throw NumericalError(oss.str());
        }
        trace.times[out] = out * opts.dt_out;
        trace.states.col(out) = x;
    }
    trace.wall_seconds = std::chrono::duration<double>(Clock::now() - t_start).count();
    return trace;
}

namespace {

Network strip_losses(const Network& net) {
    std::vector<Node> nodes = net.nodes();
    for (auto& n : nodes) n.heat_loss_coeff = 0.0;
    return Network(std::move(nodes), net.pipes(), net.consumers(), net.producers());
}

ReducedModel strip_losses(const ReducedModel& rm) {
    ReducedModel out = rm;
    out.network = strip_losses(rm.network);
    return out;
}

Vector demands_at(const Scenario& sc, double t) {
    Vector d(static_cast<Eigen::Index>(sc.demands.size()));
    for (size_t c = 0; c < sc.demands.size(); ++c) {
        d[static_cast<Eigen::Index>(c)] = sc.demands[c].at(t);
    }
    return d;
}

}  // namespace

FullDriver::FullDriver(const Network& net, const Scenario& scenario, bool with_losses)
    : net_(with_losses ? net : strip_losses(net)),
      scenario_(&scenario),
      assembler_(net_) {
    if (net_.producers().size() != 1) {
        throw ValidationError("scenario driving requires exactly one producer");
    }
    if (scenario.demands.size() != net_.consumers().size()) {
        throw ValidationError("scenario demand count does not match consumers");
    }
}

FlowField FullDriver::flow_at(double t) const {
    return tree_flow_field(net_, demands_at(*scenario_, t), scenario_->supply_temp[0].at(t));
}

ModelRefresh FullDriver::refresher() const {
    return [this](double t, AdvectionModel& model) {
        assembler_.update(model, flow_at(t));
    };
}

SimulationTrace FullDriver::run(Vector x0, double dt_out, double horizon,
                                StepMethod method) const {
    IntegrateOptions opts;
    opts.dt_out = dt_out;
    opts.horizon = horizon;
    opts.method = method;
    return integrate(assembler_, refresher(), std::move(x0), opts);
}

ReducedDriver::ReducedDriver(const Network& full_net, const ReducedModel& rm,
                             const Scenario& scenario, bool with_losses)
    : full_net_(with_losses ? full_net : strip_losses(full_net)),
      rm_(with_losses ? rm : strip_losses(rm)),
      scenario_(&scenario),
      assembler_(rm_.network, rm_.mass) {
    if (full_net_.producers().size() != 1) {
        throw ValidationError("scenario driving requires exactly one producer");
    }
    if (scenario.demands.size() != full_net_.consumers().size()) {
        throw ValidationError("scenario demand count does not match consumers");
    }
}

ModelRefresh ReducedDriver::refresher() const {
    return [this](double t, AdvectionModel& model) {
        FlowField full = tree_flow_field(full_net_, demands_at(*scenario_, t),
                                         scenario_->supply_temp[0].at(t));
        assembler_.update(model, reduce_flow_field(full, full_net_, rm_));
    };
}

SimulationTrace ReducedDriver::run(Vector x0_reduced, double dt_out, double horizon,
                                   StepMethod method) const {
    IntegrateOptions opts;
    opts.dt_out = dt_out;
    opts.horizon = horizon;
    opts.method = method;
    return integrate(assembler_, refresher(), std::move(x0_reduced), opts);
}

SimulationTrace lift_trace(const SimulationTrace& reduced, const Reducers& reducers) {
    SimulationTrace out;
    out.times = reduced.times;
    out.steps_taken = reduced.steps_taken;
    out.wall_seconds = reduced.wall_seconds;
    out.states.resize(reducers.assignment.size(), reduced.states.cols());
    for (size_t i = 0; i < reducers.assignment.size(); ++i) {
        out.states.row(static_cast<Eigen::Index>(i)) =
            reduced.states.row(reducers.assignment[i]);
    }
    return out;
}

double rrmse(const SimulationTrace& reference, const SimulationTrace& test) {
    if (reference.states.rows() != test.states.rows()) {
        throw ValidationError("traces have different state dimensions");
    }
    // Match every test instant to a reference instant.
    std::vector<int> ref_col(test.times.size(), -1);
    size_t j = 0;
    for (size_t i = 0; i < test.times.size(); ++i) {
        while (j < reference.times.size() &&
               reference.times[j] < test.times[i] - 1e-9) {
            ++j;
        }
        if (j >= reference.times.size() ||
            std::abs(reference.times[j] - test.times[i]) > 1e-9) {
            throw ValidationError("comparison grids do not nest");
        }
        ref_col[i] = static_cast<int>(j);
    }

    double sq_sum = 0.0, ref_sum = 0.0;
    const auto n = reference.states.rows();
    for (size_t i = 0; i < test.times.size(); ++i) {
        Vector diff = test.states.col(static_cast<Eigen::Index>(i)) -
                      reference.states.col(ref_col[i]);
        sq_sum += diff.squaredNorm();
        ref_sum += reference.states.col(ref_col[i]).sum();
    }
    const double count = static_cast<double>(n) * static_cast<double>(test.times.size());
    double mean_ref = ref_sum / count;
    if (mean_ref == 0.0) throw ValidationError("reference trace has zero mean");
    return 100.0 / mean_ref * std::sqrt(sq_sum / count);
}

CompareReport compare(const Network& net, const Scenario& scenario,
                      const CompareOptions& opts) {
    CompareReport report;

    ClusterOptions copts;
    copts.seed = opts.seed;
    ReducedModel rm;
    if (opts.k > 0) {
        Clustering c = spectral_cluster(net, opts.dt_coarse, opts.k, copts);
        rm = reduce_model(net, build_reducers(c, net), opts.dt_coarse);
    } else {
        ChooseKResult chosen = choose_k(net, opts.dt_coarse, opts.c_target,
                                        std::max(2, net.node_count() / 8), copts);
        rm = std::move(chosen.model);
        report.dt_too_large = chosen.dt_too_large;
    }
    report.k = rm.reducers.k;
    report.courant_max = rm.courant_max;

    double t0_temp = opts.initial_temp >= 0.0 ? opts.initial_temp
                                              : scenario.supply_temp[0].at(0.0);
    Vector x0 = Vector::Constant(net.node_count(), t0_temp);

    FullDriver full(net, scenario, opts.with_losses);
    SimulationTrace full_trace = full.run(x0, opts.dt_fine, scenario.horizon);

    ReducedDriver reduced(net, rm, scenario, opts.with_losses);
    Vector x0_red = reduce_state(x0, node_masses(net), rm.reducers);
    SimulationTrace red_trace = reduced.run(x0_red, opts.dt_coarse, scenario.horizon);
    SimulationTrace lifted = lift_trace(red_trace, rm.reducers);

    report.rrmse_percent = rrmse(full_trace, lifted);
    report.full_wall = full_trace.wall_seconds;
    report.reduced_wall = red_trace.wall_seconds;
    report.speedup = red_trace.wall_seconds > 0.0
                         ? full_trace.wall_seconds / red_trace.wall_seconds
                         : std::numeric_limits<double>::infinity();
    report.full_steps = full_trace.steps_taken;
    report.reduced_steps = red_trace.steps_taken;

    // Per-node absolute error at every coarse instant (heat-map data).
    report.times = lifted.times;
    report.abs_error.resize(net.node_count(), lifted.states.cols());
    const int stride = static_cast<int>(std::round(opts.dt_coarse / opts.dt_fine));
    if (std::abs(stride * opts.dt_fine - opts.dt_coarse) > 1e-9) {
        throw ValidationError("dt_coarse must be a multiple of dt_fine");
    }
    for (Eigen::Index c = 0; c < lifted.states.cols(); ++c) {
        report.abs_error.col(c) =
            (lifted.states.col(c) - full_trace.states.col(c * stride)).cwiseAbs();
    }
    return report;
}

}  // namespace dhsim
