#ifndef DHSIM_IO_HPP
#define DHSIM_IO_HPP

#include "dhsim/network.hpp"
#include "dhsim/reduction.hpp"
#include "dhsim/simulate.hpp"

#include <iosfwd>
#include <map>
#include <string>

namespace dhsim {

/// Parse the JSON network document (sections nodes/pipes/consumers/
/// producers, see docs/formats in the README). Unknown fields are
/// rejected; structural problems raise ValidationError with the
/// offending entity named.
Network parse_network(const std::string& text);
Network load_network(const std::string& path);
std::string serialize_network(const Network& net);

/// Scenario document: horizon/period/seed plus either generator
/// parameters or explicit per-schedule series.
struct ScenarioSpec {
    double horizon = 86400.0;
    double period = 600.0;
    std::uint64_t seed = 1;
    bool generate = true;
    DemandParams demand_params;
    double supply_start = 85.0;
    double supply_end = 95.0;
    std::map<std::string, std::vector<double>> demand_series;  // by schedule id
    std::map<std::string, std::vector<double>> supply_series;
};

ScenarioSpec parse_scenario(const std::string& text);
ScenarioSpec load_scenario(const std::string& path);
std::string serialize_scenario(const ScenarioSpec& spec);

/// Bind a scenario spec to a network: explicit series are matched by
/// schedule id, everything else comes from the seeded generator.
Scenario realize_scenario(const ScenarioSpec& spec, const Network& net);

struct ClusteringHeader {
    int k = 0;
    double dt = 0.0;
    double c_target = 0.0;
    std::uint64_t seed = 0;
};

/// Text table "node_id cluster_index" with a comment header recording
/// k, dt, c_target, and seed.
void write_clustering(std::ostream& out, const Network& net, const Clustering& clustering,
                      const ClusteringHeader& header);
Clustering read_clustering(std::istream& in, const Network& net,
                           ClusteringHeader* header = nullptr);

/// Trace CSV: header "time,<node ids...>", one row per output instant.
void write_trace_csv(std::ostream& out, const SimulationTrace& trace,
                     const std::vector<std::string>& column_ids);

/// Matrix CSV with row labels (heat-map export).
void write_matrix_csv(std::ostream& out, const Matrix& values,
                      const std::vector<std::string>& row_ids,
                      const std::vector<double>& column_times);

/// Shortest round-trip decimal formatting, locale independent.
std::string format_double(double v);

std::vector<std::string> node_ids(const Network& net);

}  // namespace dhsim

#endif
