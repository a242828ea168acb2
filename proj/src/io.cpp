#include "dhsim/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <ostream>
#include <sstream>

namespace dhsim {

using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open '" + path + "'");
    std::ostringstream oss;
    oss << in.rdbuf();
    return oss.str();
}

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed,
                    const std::string& where) {
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* a : allowed) {
            if (item.key() == a) { known = true; break; }
        }
        if (!known) {
            throw ParseError("unknown field '" + item.key() + "' in " + where);
        }
    }
}

double number_at(const json& obj, const char* key, const std::string& where,
                 double fallback, bool required = false) {
    if (!obj.contains(key)) {
        if (required) throw ParseError("missing field '" + std::string(key) + "' in " + where);
        return fallback;
    }
    if (!obj[key].is_number()) {
        throw ParseError("field '" + std::string(key) + "' in " + where + " must be a number");
    }
    return obj[key].get<double>();
}

std::string string_at(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key) || !obj[key].is_string()) {
        throw ParseError("missing string field '" + std::string(key) + "' in " + where);
    }
    return obj[key].get<std::string>();
}

json parse_json(const std::string& text) {
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded()) throw ParseError("malformed JSON document");
    return doc;
}

}  // namespace

Network parse_network(const std::string& text) {
    json doc = parse_json(text);
    if (!doc.is_object()) throw ParseError("network document must be a JSON object");
    reject_unknown(doc, {"nodes", "pipes", "consumers", "producers"}, "network document");
    if (!doc.contains("nodes") || !doc["nodes"].is_array()) {
        throw ParseError("network document needs a 'nodes' array");
    }
    if (!doc.contains("pipes") || !doc["pipes"].is_array()) {
        throw ParseError("network document needs a 'pipes' array");
    }

    std::vector<Node> nodes;
    std::unordered_map<std::string, int> index;
    int i = 0;
    for (const auto& jn : doc["nodes"]) {
        std::string where = "nodes[" + std::to_string(i++) + "]";
        reject_unknown(jn, {"id", "mass", "heat_loss_coeff", "ambient_temp"}, where);
        Node n;
        n.id = string_at(jn, "id", where);
        n.mass = number_at(jn, "mass", where, 0.0);
        n.heat_loss_coeff = number_at(jn, "heat_loss_coeff", where, 0.0);
        n.ambient_temp = number_at(jn, "ambient_temp", where, 0.0);
        index.emplace(n.id, static_cast<int>(nodes.size()));
        nodes.push_back(std::move(n));
    }
    auto resolve = [&](const std::string& id, const std::string& where) {
        auto it = index.find(id);
        if (it == index.end()) {
            throw ValidationError(where + " references missing node '" + id + "'");
        }
        return it->second;
    };

    std::vector<Pipe> pipes;
    i = 0;
    for (const auto& jp : doc["pipes"]) {
        std::string where = "pipes[" + std::to_string(i++) + "]";
        reject_unknown(jp, {"id", "source", "target", "max_flow", "water_mass",
                            "length", "area"}, where);
        Pipe p;
        p.id = string_at(jp, "id", where);
        p.source = resolve(string_at(jp, "source", where), "pipe '" + p.id + "'");
        p.target = resolve(string_at(jp, "target", where), "pipe '" + p.id + "'");
        p.max_flow = number_at(jp, "max_flow", where, 0.0, true);
        p.length = number_at(jp, "length", where, 0.0);
        p.area = number_at(jp, "area", where, 0.0);
        double geometric = kWaterDensity * p.area * p.length;
        p.water_mass = number_at(jp, "water_mass", where, geometric);
        pipes.push_back(std::move(p));
    }

    auto attachments = [&](const char* section) {
        std::vector<Attachment> out;
        if (!doc.contains(section)) return out;
        int j = 0;
        for (const auto& ja : doc[section]) {
            std::string where = std::string(section) + "[" + std::to_string(j++) + "]";
            reject_unknown(ja, {"node", "schedule"}, where);
            Attachment a;
            a.node = resolve(string_at(ja, "node", where), where);
            a.schedule = string_at(ja, "schedule", where);
            out.push_back(std::move(a));
        }
        return out;
    };

    return Network(std::move(nodes), std::move(pipes), attachments("consumers"),
                   attachments("producers"));
}

Network load_network(const std::string& path) { return parse_network(read_file(path)); }

std::string serialize_network(const Network& net) {
    json doc;
    doc["nodes"] = json::array();
    for (const auto& n : net.nodes()) {
        json jn{{"id", n.id}};
        if (n.mass != 0.0) jn["mass"] = n.mass;
        if (n.heat_loss_coeff != 0.0) jn["heat_loss_coeff"] = n.heat_loss_coeff;
        if (n.ambient_temp != 0.0) jn["ambient_temp"] = n.ambient_temp;
        doc["nodes"].push_back(std::move(jn));
    }
    doc["pipes"] = json::array();
    for (const auto& p : net.pipes()) {
        json jp{{"id", p.id},
                {"source", net.nodes()[p.source].id},
                {"target", net.nodes()[p.target].id},
                {"max_flow", p.max_flow},
                {"water_mass", p.water_mass}};
        if (p.length > 0.0) jp["length"] = p.length;
        if (p.area > 0.0) jp["area"] = p.area;
        doc["pipes"].push_back(std::move(jp));
    }
    doc["consumers"] = json::array();
    for (const auto& a : net.consumers()) {
        doc["consumers"].push_back({{"node", net.nodes()[a.node].id},
                                    {"schedule", a.schedule}});
    }
    doc["producers"] = json::array();
    for (const auto& a : net.producers()) {
        doc["producers"].push_back({{"node", net.nodes()[a.node].id},
                                    {"schedule", a.schedule}});
    }
    return doc.dump(2) + "\n";
}

ScenarioSpec parse_scenario(const std::string& text) {
    json doc = parse_json(text);
    if (!doc.is_object()) throw ParseError("scenario document must be a JSON object");
    reject_unknown(doc, {"horizon", "period", "seed", "demands", "supply",
                         "demand_series", "supply_series"}, "scenario document");
    ScenarioSpec spec;
    spec.horizon = number_at(doc, "horizon", "scenario", spec.horizon);
    spec.period = number_at(doc, "period", "scenario", spec.period);
    spec.seed = static_cast<std::uint64_t>(number_at(doc, "seed", "scenario", 1.0));

    if (doc.contains("demands")) {
        const json& jd = doc["demands"];
        reject_unknown(jd, {"base", "morning_amp", "afternoon_amp", "bump_sigma",
                            "noise_amp", "scale_min", "scale_max"}, "demands");
        DemandParams& p = spec.demand_params;
        p.base = number_at(jd, "base", "demands", p.base);
        p.morning_amp = number_at(jd, "morning_amp", "demands", p.morning_amp);
        p.afternoon_amp = number_at(jd, "afternoon_amp", "demands", p.afternoon_amp);
        p.bump_sigma = number_at(jd, "bump_sigma", "demands", p.bump_sigma);
        p.noise_amp = number_at(jd, "noise_amp", "demands", p.noise_amp);
        p.scale_min = number_at(jd, "scale_min", "demands", p.scale_min);
        p.scale_max = number_at(jd, "scale_max", "demands", p.scale_max);
    }
    if (doc.contains("supply")) {
        const json& js = doc["supply"];
        reject_unknown(js, {"start", "end"}, "supply");
        spec.supply_start = number_at(js, "start", "supply", spec.supply_start);
        spec.supply_end = number_at(js, "end", "supply", spec.supply_end);
    }
    auto series = [&](const char* key, std::map<std::string, std::vector<double>>& into) {
        if (!doc.contains(key)) return;
        for (const auto& item : doc[key].items()) {
            if (!item.value().is_array()) {
                throw ParseError("series '" + item.key() + "' must be an array");
            }
            std::vector<double> vals;
            for (const auto& v : item.value()) {
                if (!v.is_number()) {
                    throw ParseError("series '" + item.key() + "' must contain numbers");
                }
                vals.push_back(v.get<double>());
            }
            into.emplace(item.key(), std::move(vals));
        }
    };
    series("demand_series", spec.demand_series);
    series("supply_series", spec.supply_series);
    return spec;
}

ScenarioSpec load_scenario(const std::string& path) {
    return parse_scenario(read_file(path));
}

std::string serialize_scenario(const ScenarioSpec& spec) {
    json doc;
    doc["horizon"] = spec.horizon;
    doc["period"] = spec.period;
    doc["seed"] = spec.seed;
    doc["demands"] = {{"base", spec.demand_params.base},
                      {"morning_amp", spec.demand_params.morning_amp},
                      {"afternoon_amp", spec.demand_params.afternoon_amp},
                      {"bump_sigma", spec.demand_params.bump_sigma},
                      {"noise_amp", spec.demand_params.noise_amp},
                      {"scale_min", spec.demand_params.scale_min},
                      {"scale_max", spec.demand_params.scale_max}};
    doc["supply"] = {{"start", spec.supply_start}, {"end", spec.supply_end}};
    if (!spec.demand_series.empty()) doc["demand_series"] = spec.demand_series;
    if (!spec.supply_series.empty()) doc["supply_series"] = spec.supply_series;
    return doc.dump(2) + "\n";
}

Scenario realize_scenario(const ScenarioSpec& spec, const Network& net) {
    Scenario sc;
    sc.horizon = spec.horizon;
    sc.seed = spec.seed;

    auto checked = [&](const std::vector<double>& values, const std::string& id,
                       bool nonnegative) {
        if (static_cast<double>(values.size() - 1) * spec.period < spec.horizon) {
            throw ValidationError("series '" + id + "' does not cover the horizon");
        }
        if (nonnegative) {
            for (double v : values) {
                if (v < 0.0) throw ValidationError("series '" + id + "' has a negative value");
            }
        }
        return Schedule{spec.period, values};
    };

    std::vector<Schedule> generated;
    if (spec.generate) {
        generated = gen_demands(static_cast<int>(net.consumers().size()), spec.horizon,
                                spec.period, spec.seed, spec.demand_params);
    }
    sc.demands.resize(net.consumers().size());
    for (size_t c = 0; c < net.consumers().size(); ++c) {
        auto it = spec.demand_series.find(net.consumers()[c].schedule);
        if (it != spec.demand_series.end()) {
            sc.demands[c] = checked(it->second, it->first, true);
        } else if (spec.generate) {
            sc.demands[c] = generated[c];
        } else {
            throw ValidationError("no demand series for schedule '" +
                                  net.consumers()[c].schedule + "'");
        }
    }
    sc.supply_temp.resize(net.producers().size());
    for (size_t p = 0; p < net.producers().size(); ++p) {
        auto it = spec.supply_series.find(net.producers()[p].schedule);
        if (it != spec.supply_series.end()) {
            sc.supply_temp[p] = checked(it->second, it->first, false);
        } else {
            sc.supply_temp[p] = ramp_schedule(spec.horizon, spec.period,
                                              spec.supply_start, spec.supply_end);
        }
    }
    return sc;
}

void write_clustering(std::ostream& out, const Network& net, const Clustering& clustering,
                      const ClusteringHeader& header) {
    out << "# dhsim clustering k=" << clustering.k << " dt=" << format_double(header.dt)
        << " c_target=" << format_double(header.c_target) << " seed=" << header.seed
        << "\n";
    for (int i = 0; i < net.node_count(); ++i) {
        out << net.nodes()[i].id << " " << clustering.assignment[i] << "\n";
    }
}

Clustering read_clustering(std::istream& in, const Network& net, ClusteringHeader* header) {
    std::vector<int> assignment(net.node_count(), -1);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (header) {
                std::istringstream hs(line);
                std::string tok;
                while (hs >> tok) {
                    auto eq = tok.find('=');
                    if (eq == std::string::npos) continue;
                    std::string key = tok.substr(0, eq);
                    std::string val = tok.substr(eq + 1);
                    if (key == "k") header->k = std::stoi(val);
                    else if (key == "dt") header->dt = std::stod(val);
                    else if (key == "c_target") header->c_target = std::stod(val);
                    else if (key == "seed") header->seed = std::stoull(val);
                }
            }
            continue;
        }
        std::istringstream ls(line);
        std::string id;
        int cluster;
        if (!(ls >> id >> cluster)) throw ParseError("malformed clustering row: " + line);
        assignment[net.node_index(id)] = cluster;
    }
    for (int i = 0; i < net.node_count(); ++i) {
        if (assignment[i] < 0) {
            throw ValidationError("clustering file omits node '" + net.nodes()[i].id + "'");
        }
    }
    Clustering c;
    c.k = *std::max_element(assignment.begin(), assignment.end()) + 1;
    c.assignment = std::move(assignment);
    c.cluster_mass = Vector::Zero(c.k);
    Vector md = node_masses(net);
    for (int i = 0; i < net.node_count(); ++i) c.cluster_mass[c.assignment[i]] += md[i];
    for (int j = 0; j < c.k; ++j) {
        if (c.cluster_mass[j] <= 0.0) {
            throw ValidationError("clustering file leaves cluster " + std::to_string(j) +
                                  " empty");
        }
    }
    return c;
}

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

std::vector<std::string> node_ids(const Network& net) {
    std::vector<std::string> ids;
    ids.reserve(net.node_count());
    for (const auto& n : net.nodes()) ids.push_back(n.id);
    return ids;
}

void write_trace_csv(std::ostream& out, const SimulationTrace& trace,
                     const std::vector<std::string>& column_ids) {
    out << "time";
    for (const auto& id : column_ids) out << "," << id;
    out << "\n";
    for (size_t t = 0; t < trace.times.size(); ++t) {
        out << format_double(trace.times[t]);
        for (Eigen::Index i = 0; i < trace.states.rows(); ++i) {
            out << "," << format_double(trace.states(i, static_cast<Eigen::Index>(t)));
        }
        out << "\n";
    }
}

void write_matrix_csv(std::ostream& out, const Matrix& values,
                      const std::vector<std::string>& row_ids,
                      const std::vector<double>& column_times) {
    out << "node";
    for (double t : column_times) out << "," << format_double(t);
    out << "\n";
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
        out << row_ids[static_cast<size_t>(r)];
        for (Eigen::Index c = 0; c < values.cols(); ++c) {
            out << "," << format_double(values(r, c));
        }
        out << "\n";
    }
}

}  // namespace dhsim
