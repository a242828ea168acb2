// dhsim command line: cluster / simulate / compare / gen-grid.
//
// Result files are byte-reproducible for a given seed; wall-clock figures
// go to separate metadata files.

#include "dhsim/gengrid.hpp"
#include "dhsim/io.hpp"
#include "dhsim/reduction.hpp"
#include "dhsim/simulate.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

using namespace dhsim;

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write '" + path + "'");
    out << content;
}

Network load_preprocessed(const std::string& path, double merge_threshold, double dz) {
    Network net = load_network(path);
    if (merge_threshold > 0.0) net = merge_short_pipes(net, merge_threshold);
    if (dz > 0.0) net = oversample(net, dz);
    return net;
}

Scenario scenario_for(const Network& net, const std::string& scenario_path,
                      double horizon, double period, std::uint64_t seed) {
    if (!scenario_path.empty()) {
        return realize_scenario(load_scenario(scenario_path), net);
    }
    ScenarioSpec spec;
    spec.horizon = horizon;
    spec.period = period;
    spec.seed = seed;
    return realize_scenario(spec, net);
}

struct ClusterArgs {
    std::string network_path, out_path, courant_csv;
    double dt = 600.0;
    int k = 0;
    double c_target = 0.0;
    std::uint64_t seed = 1;
    double merge_threshold = 0.0, dz = 0.0;
};

int cmd_cluster(const ClusterArgs& args) {
    Network net = load_preprocessed(args.network_path, args.merge_threshold, args.dz);

    if (!args.courant_csv.empty()) {
        Vector c = courant(net, args.dt);
        std::ostringstream oss;
        oss << "node,courant\n";
        for (int i = 0; i < net.node_count(); ++i) {
            oss << net.nodes()[i].id << "," << format_double(c[i]) << "\n";
        }
        write_file(args.courant_csv, oss.str());
    }

    ClusterOptions opts;
    opts.seed = args.seed;
    ClusterStats stats;
    Clustering clustering;
    ReducedModel rm;
    if (args.k > 0) {
        clustering = spectral_cluster(net, args.dt, args.k, opts, &stats);
        rm = reduce_model(net, build_reducers(clustering, net), args.dt);
    } else {
        ChooseKResult chosen = choose_k(net, args.dt, args.c_target,
                                        std::max(2, net.node_count() / 8), opts);
        clustering = std::move(chosen.clustering);
        rm = std::move(chosen.model);
        stats.k_requested = stats.k_effective = clustering.k;
        if (chosen.dt_too_large) {
            std::cerr << "warning: no clustering reaches C_target = " << args.c_target
                      << " at dt = " << args.dt << " s; dt itself is too large\n";
        }
    }

    std::ofstream out(args.out_path, std::ios::binary);
    if (!out) throw ValidationError("cannot write '" + args.out_path + "'");
    ClusteringHeader header{clustering.k, args.dt, args.c_target, args.seed};
    write_clustering(out, net, clustering, header);

    std::cout << "n=" << net.node_count() << " m=" << net.pipe_count()
              << " k=" << clustering.k << " C_max=" << format_double(rm.courant_max)
              << " eig_s=" << format_double(stats.eig_seconds)
              << " kmeans_s=" << format_double(stats.kmeans_seconds) << "\n";
    return 0;
}

struct SimulateArgs {
    std::string network_path, scenario_path, out_path, meta_path;
    double dt_out = 5.0;
    double horizon = 86400.0, period = 600.0;
    std::uint64_t seed = 1;
    double merge_threshold = 0.0, dz = 0.0;
    bool no_losses = false;
    double initial_temp = -1.0;
};

int cmd_simulate(const SimulateArgs& args) {
    Network net = load_preprocessed(args.network_path, args.merge_threshold, args.dz);

    ScenarioSpec spec;
    if (!args.scenario_path.empty()) {
        spec = load_scenario(args.scenario_path);
    } else {
        spec.horizon = args.horizon;
        spec.period = args.period;
        spec.seed = args.seed;
    }

    std::ofstream out(args.out_path, std::ios::binary);
    if (!out) throw ValidationError("cannot write '" + args.out_path + "'");

    if (spec.horizon <= 0.0) {
        out << "time";
        for (const auto& id : node_ids(net)) out << "," << id;
        out << "\n";
        return 0;
    }
    Scenario sc = realize_scenario(spec, net);

    double t0 = args.initial_temp >= 0.0 ? args.initial_temp : sc.supply_temp[0].at(0.0);
    FullDriver driver(net, sc, !args.no_losses);
    SimulationTrace trace =
        driver.run(Vector::Constant(net.node_count(), t0), args.dt_out, sc.horizon);
    write_trace_csv(out, trace, node_ids(net));

    if (!args.meta_path.empty()) {
        nlohmann::json meta{{"seed", args.seed},
                            {"dt_out", args.dt_out},
                            {"horizon", sc.horizon},
                            {"steps_taken", trace.steps_taken},
                            {"wall_seconds", trace.wall_seconds},
                            {"nodes", net.node_count()},
                            {"losses", !args.no_losses}};
        write_file(args.meta_path, meta.dump(2) + "\n");
    }
    return 0;
}

struct CompareArgs {
    std::string network_path, scenario_path, out_dir;
    double dt_fine = 5.0, dt_coarse = 600.0;
    int k = 0;
    double c_target = 0.9;
    std::uint64_t seed = 1;
    double horizon = 86400.0, period = 600.0;
    double merge_threshold = 0.0, dz = 0.0;
    bool no_losses = false;
};

int cmd_compare(const CompareArgs& args) {
    Network net = load_preprocessed(args.network_path, args.merge_threshold, args.dz);
    Scenario sc = scenario_for(net, args.scenario_path, args.horizon, args.period,
                               args.seed);

    CompareOptions opts;
    opts.dt_fine = args.dt_fine;
    opts.dt_coarse = args.dt_coarse;
    opts.k = args.k;
    opts.c_target = args.c_target;
    opts.seed = args.seed;
    opts.with_losses = !args.no_losses;
    CompareReport report = compare(net, sc, opts);

    std::filesystem::create_directories(args.out_dir);
    auto path = [&](const char* name) {
        return (std::filesystem::path(args.out_dir) / name).string();
    };

    {
        std::ostringstream oss;
        oss << "k,step_size,rrmse_percent,courant_max\n"
            << report.k << "," << format_double(args.dt_coarse) << ","
            << format_double(report.rrmse_percent) << ","
            << format_double(report.courant_max) << "\n";
        write_file(path("rrmse_summary.csv"), oss.str());
    }
    {
        std::ostringstream oss;
        write_matrix_csv(oss, report.abs_error, node_ids(net), report.times);
        write_file(path("abs_error.csv"), oss.str());
    }
    {
        // step counts and per-step costs separate the two speedup factors
        // (coarser stepping vs fewer states)
        nlohmann::json meta{{"seed", args.seed},
                            {"k", report.k},
                            {"dt_fine", args.dt_fine},
                            {"dt_coarse", args.dt_coarse},
                            {"rrmse_percent", report.rrmse_percent},
                            {"courant_max", report.courant_max},
                            {"full_wall_seconds", report.full_wall},
                            {"reduced_wall_seconds", report.reduced_wall},
                            {"speedup", report.speedup},
                            {"full_steps", report.full_steps},
                            {"reduced_steps", report.reduced_steps},
                            {"full_seconds_per_step",
                             report.full_steps > 0 ? report.full_wall / report.full_steps : 0.0},
                            {"reduced_seconds_per_step",
                             report.reduced_steps > 0
                                 ? report.reduced_wall / report.reduced_steps
                                 : 0.0},
                            {"dt_too_large", report.dt_too_large}};
        write_file(path("timings.json"), meta.dump(2) + "\n");
    }

    std::cout << "k=" << report.k << " rRMSE=" << format_double(report.rrmse_percent)
              << "% speedup=" << format_double(report.speedup) << "x\n";
    return 0;
}

struct GenGridArgs {
    std::string out_path, scenario_out;
    GridGenParams params;
    double horizon = 86400.0, period = 600.0;
};

int cmd_gen_grid(const GenGridArgs& args) {
    Network net = gen_grid(args.params);
    write_file(args.out_path, serialize_network(net));
    if (!args.scenario_out.empty()) {
        ScenarioSpec spec;
        spec.horizon = args.horizon;
        spec.period = args.period;
        spec.seed = args.params.seed;
        write_file(args.scenario_out, serialize_scenario(spec));
    }
    std::cout << "n=" << net.node_count() << " m=" << net.pipe_count()
              << " consumers=" << net.consumers().size() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"District-energy thermal simulation and mass/flow-weighted "
                 "spectral model reduction"};
    app.require_subcommand(1);

    ClusterArgs cluster_args;
    auto* cluster = app.add_subcommand("cluster", "Cluster a grid and write the table");
    cluster->add_option("--network", cluster_args.network_path, "Network JSON file")
        ->required();
    cluster->add_option("--out", cluster_args.out_path, "Clustering table path")
        ->required();
    cluster->add_option("--dt", cluster_args.dt, "Target step size, s");
    auto* copt_k = cluster->add_option("--k", cluster_args.k, "Cluster count");
    auto* copt_c = cluster->add_option("--c-target", cluster_args.c_target,
                                       "Max reduced Courant number");
    copt_k->excludes(copt_c);
    copt_c->excludes(copt_k);
    cluster->add_option("--seed", cluster_args.seed, "Clustering seed");
    cluster->add_option("--merge-threshold", cluster_args.merge_threshold,
                        "Contract pipes shorter than this, m");
    cluster->add_option("--dz", cluster_args.dz, "Oversampling segment length, m");
    cluster->add_option("--courant-csv", cluster_args.courant_csv,
                        "Also export per-node Courant numbers at --dt");

    SimulateArgs sim_args;
    auto* simulate = app.add_subcommand("simulate", "Run the full model, write a trace CSV");
    simulate->add_option("--network", sim_args.network_path, "Network JSON file")
        ->required();
    simulate->add_option("--out", sim_args.out_path, "Trace CSV path")->required();
    simulate->add_option("--scenario", sim_args.scenario_path, "Scenario JSON file");
    simulate->add_option("--meta", sim_args.meta_path, "Run metadata JSON path");
    simulate->add_option("--dt-out", sim_args.dt_out, "Output step, s");
    simulate->add_option("--horizon", sim_args.horizon, "Horizon when generating, s");
    simulate->add_option("--period", sim_args.period, "Schedule period when generating, s");
    simulate->add_option("--seed", sim_args.seed, "Scenario seed when generating");
    simulate->add_option("--merge-threshold", sim_args.merge_threshold,
                         "Contract pipes shorter than this, m");
    simulate->add_option("--dz", sim_args.dz, "Oversampling segment length, m");
    simulate->add_flag("--no-losses", sim_args.no_losses, "Disable heat losses");
    simulate->add_option("--initial-temp", sim_args.initial_temp,
                         "Initial temperature, degC (default: supply at t=0)");

    CompareArgs cmp_args;
    auto* cmp = app.add_subcommand("compare", "Full vs reduced comparison report");
    cmp->add_option("--network", cmp_args.network_path, "Network JSON file")->required();
    cmp->add_option("--out-dir", cmp_args.out_dir, "Report directory")->required();
    cmp->add_option("--scenario", cmp_args.scenario_path, "Scenario JSON file");
    cmp->add_option("--dt-fine", cmp_args.dt_fine, "Reference step, s");
    cmp->add_option("--dt-coarse", cmp_args.dt_coarse, "Reduced step, s");
    auto* mopt_k = cmp->add_option("--k", cmp_args.k, "Cluster count");
    auto* mopt_c = cmp->add_option("--c-target", cmp_args.c_target,
                                   "Max reduced Courant number");
    mopt_k->excludes(mopt_c);
    mopt_c->excludes(mopt_k);
    cmp->add_option("--seed", cmp_args.seed, "Seed");
    cmp->add_option("--horizon", cmp_args.horizon, "Horizon when generating, s");
    cmp->add_option("--period", cmp_args.period, "Schedule period when generating, s");
    cmp->add_option("--merge-threshold", cmp_args.merge_threshold,
                    "Contract pipes shorter than this, m");
    cmp->add_option("--dz", cmp_args.dz, "Oversampling segment length, m");
    cmp->add_flag("--no-losses", cmp_args.no_losses, "Disable heat losses");

    GenGridArgs gen_args;
    auto* gen = app.add_subcommand("gen-grid", "Generate a seeded synthetic tree grid");
    gen->add_option("--out", gen_args.out_path, "Network JSON path")->required();
    gen->add_option("--nodes", gen_args.params.nodes, "Node count");
    gen->add_option("--seed", gen_args.params.seed, "Generator seed");
    gen->add_option("--chain-bias", gen_args.params.chain_bias,
                    "Probability of extending the latest branch");
    gen->add_option("--consumer-prob", gen_args.params.internal_consumer_prob,
                    "Interior consumer probability");
    gen->add_option("--peak-demand", gen_args.params.peak_demand_mean,
                    "Mean consumer peak demand, kg/s");
    gen->add_option("--length-median", gen_args.params.length_median,
                    "Median pipe length, m");
    gen->add_option("--loss-per-meter", gen_args.params.loss_per_meter,
                    "Heat loss coefficient per pipe meter, W/(m K)");
    gen->add_option("--scenario-out", gen_args.scenario_out,
                    "Also write a matching scenario JSON");
    gen->add_option("--horizon", gen_args.horizon, "Scenario horizon, s");
    gen->add_option("--period", gen_args.period, "Scenario period, s");

    try {
        app.parse(argc, argv);
        if (app.got_subcommand(cluster)) return cmd_cluster(cluster_args);
        if (app.got_subcommand(simulate)) return cmd_simulate(sim_args);
        if (app.got_subcommand(cmp)) return cmd_compare(cmp_args);
        if (app.got_subcommand(gen)) return cmd_gen_grid(gen_args);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
    return 0;
}
