#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dhsim/gengrid.hpp"
#include "dhsim/simulate.hpp"
#include "testutil.hpp"

#include <cmath>
#include <random>

using namespace dhsim;

namespace {

Scenario constant_scenario(const Network& net, double horizon, double demand,
                           double supply) {
    Scenario sc;
    sc.horizon = horizon;
    Schedule d{horizon, {demand, demand}};
    Schedule s{horizon, {supply, supply}};
    sc.demands.assign(net.consumers().size(), d);
    sc.supply_temp.assign(net.producers().size(), s);
    return sc;
}

}  // namespace

TEST_CASE("schedule interpolation clamps and interpolates") {
    Schedule s{10.0, {0.0, 10.0, 20.0}};
    CHECK(s.at(-5.0) == 0.0);
    CHECK(s.at(0.0) == 0.0);
    CHECK(s.at(5.0) == doctest::Approx(5.0));
    CHECK(s.at(15.0) == doctest::Approx(15.0));
    CHECK(s.at(100.0) == 20.0);
}

TEST_CASE("demand generation is deterministic and double-peaked") {
    std::vector<Schedule> a = gen_demands(40, 86400.0, 600.0, 77);
    std::vector<Schedule> b = gen_demands(40, 86400.0, 600.0, 77);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i].values == b[i].values);

    double mean7 = 0.0, mean12 = 0.0;
    for (const auto& s : a) {
        mean7 += s.at(7.0 * 3600.0);
        mean12 += s.at(12.0 * 3600.0);
        for (double v : s.values) CHECK(v >= 0.0);
    }
    CHECK(mean7 > mean12);

    SUBCASE("zero noise gives a smooth profile") {
        DemandParams p;
        p.noise_amp = 0.0;
        p.scale_min = p.scale_max = 1.0;
        std::vector<Schedule> smooth = gen_demands(1, 86400.0, 600.0, 1, p);
        const auto& v = smooth[0].values;
        for (size_t i = 2; i < v.size(); ++i) {
            // bounded curvature everywhere: no jumps
            CHECK(std::abs(v[i] - 2 * v[i - 1] + v[i - 2]) < 0.01);
        }
    }
}

TEST_CASE("explicit step at C = 1 is an exact shift") {
    const int n = 50;
    Network net = test::single_pipe(n, 128.0, 1.0);
    FlowField ff = tree_flow_field(net, Vector::Constant(1, 1.0), 90.0);
    AdvectionModel model = assemble(net, ff);

    Vector x = Vector::Constant(n, 10.0);
    x.head(7).setConstant(90.0);
    Vector expected = x;
    double dt = 128.0;
    for (int step = 0; step < 100; ++step) {
        x = step_explicit(model, x, dt);
        // exact plug: contents shift one cell, inlet enters at 90
        for (int i = n - 1; i > 0; --i) expected[i] = expected[i - 1];
        expected[0] = 90.0;
        CHECK((x - expected).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("explicit step at C = 0.5 blends neighbours") {
    Network net = test::single_pipe(3, 128.0, 1.0);
    FlowField ff = tree_flow_field(net, Vector::Constant(1, 1.0), 50.0);
    AdvectionModel model = assemble(net, ff);
    Vector x(3);
    x << 50.0, 30.0, 10.0;
    Vector next = step_explicit(model, x, 64.0);
    CHECK(next[1] == doctest::Approx(0.5 * 30.0 + 0.5 * 50.0));
    CHECK(next[2] == doctest::Approx(0.5 * 10.0 + 0.5 * 30.0));
}

TEST_CASE("explicit step with zero flow and loss is the identity") {
    Network net = test::example_grid();
    AdvectionModel model = assemble(net, FlowField::zero(net));
    Vector x(5);
    x << 1, 2, 3, 4, 5;
    CHECK((step_explicit(model, x, 100.0) - x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("explicit step rejects a Courant violation naming the node") {
    Network net = test::single_pipe(4, 10.0, 1.0);
    FlowField ff = tree_flow_field(net, Vector::Constant(1, 1.0), 50.0);
    AdvectionModel model = assemble(net, ff);
    CHECK_THROWS_WITH_AS(step_explicit(model, Vector::Constant(4, 20.0), 25.0),
                         doctest::Contains("Courant"), NumericalError);
}

TEST_CASE("integration reaches the uniform fixed point") {
    Network net = test::single_pipe(10, 20.0, 1.0);
    Scenario sc = constant_scenario(net, 40000.0, 0.5, 95.0);
    FullDriver driver(net, sc, false);
    SimulationTrace trace = driver.run(Vector::Constant(10, 60.0), 200.0, sc.horizon);
    Vector terminal = trace.states.col(trace.states.cols() - 1);
    CHECK((terminal.array() - 95.0).abs().maxCoeff() < 1e-6);
}

TEST_CASE("no sub-stepping below the CFL limit") {
    Network net = test::single_pipe(10, 20.0, 1.0);
    Scenario sc = constant_scenario(net, 1000.0, 0.5, 95.0);
    FullDriver driver(net, sc, false);
    // capacity-based C(dt=10) = 0.5*10*2/20 = 0.5 < 0.9
    SimulationTrace trace = driver.run(Vector::Constant(10, 60.0), 10.0, 1000.0);
    CHECK(trace.steps_taken == 100);
}

TEST_CASE("identity reduction reproduces the full trace") {
    GridGenParams params;
    params.nodes = 40;
    params.seed = 11;
    Network net = gen_grid(params);
    Scenario sc = make_scenario(net, 7200.0, 600.0, 3);

    FullDriver full(net, sc, true);
    SimulationTrace ft = full.run(Vector::Constant(net.node_count(), 85.0), 600.0, 7200.0);

    ReducedModel rm = reduce_model(net, build_reducers(identity_clustering(net), net), 600.0);
    ReducedDriver red(net, rm, sc, true);
    SimulationTrace rt = red.run(Vector::Constant(net.node_count(), 85.0), 600.0, 7200.0);
    SimulationTrace lifted = lift_trace(rt, rm.reducers);

    CHECK((lifted.states - ft.states).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("first-order convergence toward plug flow at fixed Courant number") {
    // refine dz and dt together at C = 0.5 with a smooth advected profile;
    // the max error against the exact plug solution should halve per level
    const double residence = 1024.0;  // s through the whole pipe
    auto exact = [&](double pos_fraction, double t) {
        return 65.0 + 25.0 * std::sin(2.0 * M_PI * (pos_fraction - t / residence));
    };
    auto max_error = [&](int segments) {
        double node_mass = residence / segments;  // unit flow
        Network net = test::single_pipe(segments, node_mass, 1.0);
        FlowField ff = tree_flow_field(net, Vector::Constant(1, 1.0), exact(0.0, 0.0));
        AdvectionModel model = assemble(net, ff);
        double dt = 0.5 * node_mass;  // C = 0.5
        int steps = static_cast<int>(std::round(512.0 / dt));

        Vector x(segments);
        for (int i = 0; i < segments; ++i) x[i] = exact((i + 0.5) / segments, 0.0);
        for (int s = 0; s < steps; ++s) {
            model.inlet_temp[0] = exact(0.5 / segments, s * dt);
            x = step_explicit(model, x, dt);
        }
        double err = 0.0;
        for (int i = 0; i < segments; ++i) {
            err = std::max(err, std::abs(x[i] - exact((i + 0.5) / segments, 512.0)));
        }
        return err;
    };
    double ratio = max_error(64) / max_error(128);
    CHECK(ratio > 1.7);
    CHECK(ratio < 2.3);
}

TEST_CASE("temperatures stay within inlet and initial bounds without losses") {
    GridGenParams params;
    params.nodes = 30;
    params.seed = 21;
    Network net = gen_grid(params);
    Scenario sc = make_scenario(net, 7200.0, 300.0, 9);
    FullDriver driver(net, sc, false);
    SimulationTrace trace = driver.run(Vector::Constant(net.node_count(), 70.0), 300.0, 7200.0);
    // inlet ramps 85 -> 95 within the horizon fraction reached
    CHECK(trace.states.minCoeff() >= 70.0 - 1e-9);
    CHECK(trace.states.maxCoeff() <= 95.0 + 1e-9);
}

TEST_CASE("traces are bit-identical across runs") {
    GridGenParams params;
    params.nodes = 25;
    params.seed = 31;
    Network net = gen_grid(params);
    Scenario sc = make_scenario(net, 3600.0, 300.0, 4);
    FullDriver driver(net, sc, true);
    SimulationTrace a = driver.run(Vector::Constant(net.node_count(), 85.0), 300.0, 3600.0);
    SimulationTrace b = driver.run(Vector::Constant(net.node_count(), 85.0), 300.0, 3600.0);
    CHECK((a.states - b.states).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.steps_taken == b.steps_taken);
}

TEST_CASE("enthalpy audit closes over the run") {
    GridGenParams params;
    params.nodes = 30;
    params.seed = 41;
    Network net = gen_grid(params);
    Scenario sc = make_scenario(net, 14400.0, 600.0, 8);
    FullDriver driver(net, sc, true);
    Vector md = node_masses(net);
    Vector x0 = Vector::Constant(net.node_count(), 85.0);
    SimulationTrace trace = driver.run(x0, 600.0, 14400.0);

    double change = md.dot(Vector(trace.states.col(trace.states.cols() - 1))) - md.dot(x0);
    double boundary = trace.inflow_enthalpy - trace.outflow_enthalpy - trace.loss_enthalpy;
    CHECK(change == doctest::Approx(boundary).epsilon(1e-3));
}

TEST_CASE("heun stepping reaches the same fixed point") {
    Network net = test::single_pipe(8, 20.0, 1.0);
    Scenario sc = constant_scenario(net, 20000.0, 0.5, 92.0);
    FullDriver driver(net, sc, false);
    SimulationTrace trace = driver.run(Vector::Constant(8, 60.0), 100.0, 20000.0,
                                       StepMethod::heun);
    CHECK((Vector(trace.states.col(trace.states.cols() - 1)).array() - 92.0)
              .abs()
              .maxCoeff() < 1e-6);
}

TEST_CASE("non-finite states abort with a time stamp") {
    Network net = test::single_pipe(4, 20.0, 1.0);
    Scenario sc;
    sc.horizon = 1000.0;
    sc.demands.assign(1, Schedule{1000.0, {0.5, 0.5}});
    double bad = std::numeric_limits<double>::quiet_NaN();
    sc.supply_temp.assign(1, Schedule{1000.0, {bad, bad}});
    FullDriver driver(net, sc, false);
    CHECK_THROWS_WITH_AS(driver.run(Vector::Constant(4, 80.0), 100.0, 1000.0),
                         doctest::Contains("non-finite"), NumericalError);
}

TEST_CASE("rrmse of identical traces is zero, closed form for constant offset") {
    SimulationTrace ref;
    ref.times = {0.0, 600.0, 1200.0};
    ref.states = Matrix::Constant(4, 3, 100.0);
    SimulationTrace same = ref;
    CHECK(rrmse(ref, same) == doctest::Approx(0.0));

    SimulationTrace off = ref;
    off.states.setConstant(99.0);
    CHECK(rrmse(ref, off) == doctest::Approx(1.0));

    SUBCASE("subsampled comparison grid is accepted") {
        SimulationTrace coarse;
        coarse.times = {0.0, 1200.0};
        coarse.states = Matrix::Constant(4, 2, 98.0);
        CHECK(rrmse(ref, coarse) == doctest::Approx(2.0));
    }
    SUBCASE("mismatched grids are rejected") {
        SimulationTrace bad;
        bad.times = {0.0, 500.0};
        bad.states = Matrix::Constant(4, 2, 98.0);
        CHECK_THROWS_AS(rrmse(ref, bad), ValidationError);
    }
}

TEST_CASE("compare produces a consistent report on a small grid") {
    GridGenParams params;
    params.nodes = 60;
    params.seed = 51;
    Network net = gen_grid(params);
    Scenario sc = make_scenario(net, 14400.0, 600.0, 6);

    CompareOptions opts;
    opts.dt_fine = 60.0;
    opts.dt_coarse = 600.0;
    opts.c_target = 0.9;
    opts.seed = 6;
    CompareReport report = compare(net, sc, opts);

    CHECK(report.k >= 2);
    CHECK(report.rrmse_percent >= 0.0);
    CHECK(report.abs_error.rows() == net.node_count());
    CHECK(report.abs_error.cols() == static_cast<int>(report.times.size()));
    CHECK(report.full_steps > report.reduced_steps);

    SUBCASE("identity reduction at matching dt gives near-zero error") {
        CompareOptions same;
        same.dt_fine = 600.0;
        same.dt_coarse = 600.0;
        same.k = net.node_count();
        same.seed = 6;
        CompareReport r2 = compare(net, sc, same);
        CHECK(r2.rrmse_percent < 1e-10);
    }
}
