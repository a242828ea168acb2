#ifndef DHSIM_SIMULATE_HPP
#define DHSIM_SIMULATE_HPP

#include "dhsim/advection.hpp"
#include "dhsim/common.hpp"
#include "dhsim/network.hpp"
#include "dhsim/reduction.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace dhsim {

/// Uniformly sampled time series with linear interpolation, clamped to
/// its end values outside the sampled range.
struct Schedule {
    double period = 0.0;         // s between samples
    std::vector<double> values;

    double at(double t) const;
};

/// One simulation case: per-consumer demand schedules (aligned with
/// Network::consumers()), per-producer supply temperatures, horizon.
struct Scenario {
    double horizon = 86400.0;
    std::uint64_t seed = 1;
    std::vector<Schedule> demands;
    std::vector<Schedule> supply_temp;
};

struct DemandParams {
    double base = 0.12;           // kg/s
    double morning_amp = 0.22;    // kg/s, bump centred 07:00
    double afternoon_amp = 0.20;  // kg/s, bump centred 17:00
    double bump_sigma = 7200.0;   // s
    double noise_amp = 0.01;      // kg/s
    double scale_min = 0.6;       // per-consumer size factor range
    double scale_max = 1.4;
};

/// Seeded double-peak demand profiles: base load plus morning and
/// afternoon bumps with per-consumer scale/jitter and clipped noise.
std::vector<Schedule> gen_demands(int consumers, double horizon, double period,
                                  std::uint64_t seed, const DemandParams& params = {});

/// Linear ramp from `start` to `end` over the horizon.
Schedule ramp_schedule(double horizon, double period, double start, double end);

Scenario make_scenario(const Network& net, double horizon, double period,
                       std::uint64_t seed, const DemandParams& params = {},
                       double supply_start = 85.0, double supply_end = 95.0);

struct SimulationTrace {
    std::vector<double> times;  // output instants, s
    Matrix states;              // node (or cluster) x instant, degC
    long steps_taken = 0;
    double wall_seconds = 0.0;
    // Boundary bookkeeping in kg*degC for the enthalpy audit.
    double inflow_enthalpy = 0.0;
    double outflow_enthalpy = 0.0;
    double loss_enthalpy = 0.0;
};

enum class StepMethod { euler, heun };

struct IntegrateOptions {
    double dt_out = 0.0;
    double horizon = 0.0;
    double c_safe = 0.9;
    StepMethod method = StepMethod::euler;
};

/// One forward-Euler step x + dt (A x + B u + losses). Throws
/// NumericalError when any node's Courant number for this dt exceeds 1.
Vector step_explicit(const AdvectionModel& model, const Vector& x, double dt);

using ModelRefresh = std::function<void(double t, AdvectionModel& model)>;

/// Explicit integration with CFL sub-stepping: the output step splits into
/// ceil(Cmax(dt_out)/c_safe) internal steps sized from the grid's max
/// flows, with a local refinement guard where actual exit flows run ahead
/// of the half-incident-sum bound. Flows are re-evaluated every sub-step
/// through `refresh`.
SimulationTrace integrate(const Assembler& assembler, const ModelRefresh& refresh,
                          Vector x0, const IntegrateOptions& opts);

/// Drives a full grid model from a scenario (tree mass-balance flows).
class FullDriver {
public:
    FullDriver(const Network& net, const Scenario& scenario, bool with_losses = true);
    FullDriver(const FullDriver&) = delete;
    FullDriver& operator=(const FullDriver&) = delete;

    const Assembler& assembler() const { return assembler_; }
    FlowField flow_at(double t) const;
    ModelRefresh refresher() const;
    SimulationTrace run(Vector x0, double dt_out, double horizon,
                        StepMethod method = StepMethod::euler) const;

private:
    Network net_;  // loss coefficients zeroed when running adiabatically
    const Scenario* scenario_;
    Assembler assembler_;
};

/// Drives a reduced model: full-grid flows are aggregated through the
/// reduction operators every sub-step.
class ReducedDriver {
public:
    ReducedDriver(const Network& full_net, const ReducedModel& rm,
                  const Scenario& scenario, bool with_losses = true);
    ReducedDriver(const ReducedDriver&) = delete;
    ReducedDriver& operator=(const ReducedDriver&) = delete;

    const Assembler& assembler() const { return assembler_; }
    ModelRefresh refresher() const;
    SimulationTrace run(Vector x0_reduced, double dt_out, double horizon,
                        StepMethod method = StepMethod::euler) const;

private:
    Network full_net_;
    ReducedModel rm_;
    const Scenario* scenario_;
    Assembler assembler_;
};

/// Broadcast a cluster trace back to original nodes.
SimulationTrace lift_trace(const SimulationTrace& reduced, const Reducers& reducers);

/// Relative root mean square error, percent: the test trace against the
/// reference subsampled at the test instants, normalized by the mean
/// reference state. Throws when the grids do not nest.
double rrmse(const SimulationTrace& reference, const SimulationTrace& test);

struct CompareReport {
    double rrmse_percent = 0.0;
    Matrix abs_error;            // node x coarse instant
    std::vector<double> times;   // coarse instants
    double full_wall = 0.0, reduced_wall = 0.0, speedup = 0.0;
    long full_steps = 0, reduced_steps = 0;
    int k = 0;
    double courant_max = 0.0;
    bool dt_too_large = false;
};

struct CompareOptions {
    double dt_fine = 5.0;
    double dt_coarse = 600.0;
    int k = 0;                // > 0: fixed cluster count
    double c_target = 0.9;    // used when k == 0
    std::uint64_t seed = 1;
    bool with_losses = true;
    double initial_temp = -1.0;  // < 0: supply temperature at t = 0
};

/// Full-vs-reduced comparison: clusters the grid, runs both models, and
/// reports rRMSE, the per-node absolute-error matrix, and timings.
CompareReport compare(const Network& net, const Scenario& scenario,
                      const CompareOptions& opts);

}  // namespace dhsim

#endif
