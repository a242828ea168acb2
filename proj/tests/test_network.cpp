#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dhsim/io.hpp"
#include "dhsim/network.hpp"
#include "testutil.hpp"

#include <random>

using namespace dhsim;

namespace {

const char* kExampleJson = R"({
  "nodes": [
    {"id": "n1", "mass": 3.0}, {"id": "n2", "mass": 3.0}, {"id": "n3", "mass": 3.0},
    {"id": "n4", "mass": 6.0}, {"id": "n5", "mass": 1.0}
  ],
  "pipes": [
    {"id": "e1", "source": "n1", "target": "n2", "max_flow": 0.5},
    {"id": "e2", "source": "n2", "target": "n3", "max_flow": 0.2},
    {"id": "e3", "source": "n2", "target": "n4", "max_flow": 0.3},
    {"id": "e4", "source": "n4", "target": "n5", "max_flow": 0.1}
  ],
  "consumers": [
    {"node": "n3", "schedule": "c3"}, {"node": "n4", "schedule": "c4"},
    {"node": "n5", "schedule": "c5"}
  ],
  "producers": [{"node": "n1", "schedule": "supply"}]
})";

}  // namespace

TEST_CASE("parse_network reads the example grid") {
    Network net = parse_network(kExampleJson);
    CHECK(net.node_count() == 5);
    CHECK(net.pipe_count() == 4);
    CHECK(net.consumers().size() == 3);
    CHECK(net.node_index("n4") == 3);
}

TEST_CASE("parse_network minimal two-node grid") {
    Network net = parse_network(R"({
      "nodes": [{"id": "a", "mass": 1}, {"id": "b", "mass": 1}],
      "pipes": [{"id": "p", "source": "a", "target": "b", "max_flow": 1, "water_mass": 2}]
    })");
    CHECK(net.node_count() == 2);
    CHECK(net.pipe_count() == 1);
}

TEST_CASE("parse_network names a dangling node reference") {
    const char* doc = R"({
      "nodes": [{"id": "a", "mass": 1}, {"id": "b", "mass": 1}],
      "pipes": [{"id": "p", "source": "a", "target": "n9", "max_flow": 1}]
    })";
    CHECK_THROWS_WITH_AS(parse_network(doc), doctest::Contains("n9"), ValidationError);
}

TEST_CASE("parse_network rejects unknown fields and bad syntax") {
    CHECK_THROWS_AS(parse_network("{"), ParseError);
    CHECK_THROWS_WITH_AS(parse_network(R"({
      "nodes": [{"id": "a", "mass": 1, "color": "red"}, {"id": "b", "mass": 1}],
      "pipes": [{"id": "p", "source": "a", "target": "b", "max_flow": 1}]
    })"), doctest::Contains("color"), ParseError);
}

TEST_CASE("parse_network rejects disconnected documents") {
    const char* doc = R"({
      "nodes": [{"id": "a", "mass": 1}, {"id": "b", "mass": 1},
                {"id": "c", "mass": 1}, {"id": "d", "mass": 1}],
      "pipes": [{"id": "p1", "source": "a", "target": "b", "max_flow": 1},
                {"id": "p2", "source": "c", "target": "d", "max_flow": 1}]
    })";
    CHECK_THROWS_AS(parse_network(doc), ValidationError);
}

TEST_CASE("pipe mass consistent with geometry is accepted, inconsistent rejected") {
    // 0.002 m^2 * 50 m * 1000 kg/m^3 = 100 kg
    CHECK_NOTHROW(parse_network(R"({
      "nodes": [{"id": "a"}, {"id": "b"}],
      "pipes": [{"id": "p", "source": "a", "target": "b", "max_flow": 1,
                 "water_mass": 100.0, "length": 50.0, "area": 0.002}]
    })"));
    CHECK_THROWS_AS(parse_network(R"({
      "nodes": [{"id": "a"}, {"id": "b"}],
      "pipes": [{"id": "p", "source": "a", "target": "b", "max_flow": 1,
                 "water_mass": 140.0, "length": 50.0, "area": 0.002}]
    })"), ValidationError);
}

TEST_CASE("parallel pipes between the same ordered pair merge at construction") {
    std::vector<Node> nodes{{"a", 1.0, 0, 0}, {"b", 1.0, 0, 0}};
    std::vector<Pipe> pipes{{"p1", 0, 1, 0.1, 2.0, 10.0, 0}, {"p2", 0, 1, 0.2, 4.0, 30.0, 0}};
    Network net(nodes, pipes);
    REQUIRE(net.pipe_count() == 1);
    CHECK(net.pipes()[0].max_flow == doctest::Approx(0.3));
    CHECK(net.pipes()[0].water_mass == doctest::Approx(6.0));
    // mass-weighted length: (10*2 + 30*4)/6
    CHECK(net.pipes()[0].length == doctest::Approx(140.0 / 6.0));
}

TEST_CASE("merge_short_pipes with zero threshold is the identity") {
    Network net = test::example_grid();
    Network merged = merge_short_pipes(net, 0.0);
    CHECK(merged.node_count() == net.node_count());
    CHECK(merged.pipe_count() == net.pipe_count());
}

TEST_CASE("merge_short_pipes contracts a 3-node path") {
    std::vector<Node> nodes{{"a", 1.0, 0, 0}, {"b", 2.0, 0, 0}, {"c", 4.0, 0, 0}};
    std::vector<Pipe> pipes{{"ab", 0, 1, 0.5, 8.0, 2.0, 0},
                            {"bc", 1, 2, 0.5, 16.0, 50.0, 0}};
    Network net(nodes, pipes, {{2, "c"}}, {{0, "s"}});
    Network merged = merge_short_pipes(net, 10.0);
    REQUIRE(merged.node_count() == 2);
    REQUIRE(merged.pipe_count() == 1);
    // merged node mass = mass(a) + mass(b) + water(ab)
    CHECK(merged.nodes()[merged.node_index("a")].mass == doctest::Approx(11.0));
    CHECK(merged.total_water_mass() == doctest::Approx(net.total_water_mass()));
    // attachments follow their nodes
    CHECK(merged.producers()[0].node == merged.node_index("a"));
    CHECK(merged.consumers()[0].node == merged.node_index("c"));
}

TEST_CASE("merge_short_pipes conserves mass and connectivity on random grids") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        Network net = test::random_graph(rng, 24, 4);
        std::vector<Pipe> pipes = net.pipes();
        for (size_t e = 0; e < pipes.size(); ++e) {
            pipes[e].length = (e % 3 == 0) ? 5.0 : 60.0;
            pipes[e].water_mass = 0.25 * (1 + static_cast<double>(e % 7));
        }
        Network withlen(net.nodes(), pipes, {}, {});
        Network merged = merge_short_pipes(withlen, 10.0);  // validates connectivity
        CHECK(merged.total_water_mass() ==
              doctest::Approx(withlen.total_water_mass()).epsilon(1e-14));
        for (const auto& p : merged.pipes()) CHECK(p.length >= 10.0);
    }
}

TEST_CASE("oversample splits long pipes into uniform segments") {
    std::vector<Node> nodes{{"a", 1.0, 0, 0}, {"b", 1.0, 0, 0}};
    std::vector<Pipe> pipes{{"p", 0, 1, 0.5, 75.0, 25.0, 0.003}};
    Network net(nodes, pipes, {{1, "c"}}, {{0, "s"}});

    Network fine = oversample(net, 10.0);
    CHECK(fine.node_count() == 4);  // 2 intermediate nodes
    CHECK(fine.pipe_count() == 3);
    for (const auto& p : fine.pipes()) {
        CHECK(p.length == doctest::Approx(25.0 / 3.0));
        CHECK(p.max_flow == 0.5);
    }
    CHECK(fine.total_water_mass() == net.total_water_mass());  // exact by construction

    SUBCASE("short pipes stay untouched") {
        Network same = oversample(net, 30.0);
        CHECK(same.node_count() == 2);
        CHECK(same.pipe_count() == 1);
    }
}

TEST_CASE("oversample conserves water mass exactly for awkward masses") {
    std::vector<Node> nodes{{"a", 0.5, 0, 0}, {"b", 0.5, 0, 0}};
    std::vector<Pipe> pipes{{"p", 0, 1, 0.5, 0.1 + 0.2, 107.0, 0}};
    Network net(nodes, pipes);
    Network fine = oversample(net, 9.0);  // 12 segments
    CHECK(fine.pipe_count() == 12);
    double total = 0.0;
    for (const auto& p : fine.pipes()) total += p.water_mass;
    CHECK(total == 0.1 + 0.2);  // bitwise
}

TEST_CASE("incidence of the example grid matches the reference matrix") {
    Network net = test::example_grid();
    Matrix m = Matrix(incidence(net, Weighting::unweighted));
    Matrix expected(5, 4);
    expected << -1, 0, 0, 0,
                 1, -1, -1, 0,
                 0, 1, 0, 0,
                 0, 0, 1, -1,
                 0, 0, 0, 1;
    CHECK((m - expected).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("flow-weighted incidence carries sqrt weights") {
    std::vector<Node> nodes{{"a", 1.0, 0, 0}, {"b", 1.0, 0, 0}};
    std::vector<Pipe> pipes{{"p", 0, 1, 4.0, 0.0, 0, 0}};
    Network net(nodes, pipes);
    Matrix m = Matrix(incidence(net, Weighting::flow));
    CHECK(m(0, 0) == -2.0);
    CHECK(m(1, 0) == 2.0);
}

TEST_CASE("unweighted incidence columns sum to zero") {
    std::mt19937_64 rng(3);
    Network net = test::random_graph(rng, 17, 5);
    Matrix m = Matrix(incidence(net, Weighting::unweighted));
    CHECK(m.colwise().sum().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("laplacian of a single weighted edge") {
    std::vector<Node> nodes{{"a", 1.0, 0, 0}, {"b", 1.0, 0, 0}};
    std::vector<Pipe> pipes{{"p", 0, 1, 3.0, 0.0, 0, 0}};
    Matrix l = Matrix(laplacian(incidence(Network(nodes, pipes), Weighting::flow)));
    Matrix expected(2, 2);
    expected << 3, -3, -3, 3;
    CHECK((l - expected).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("laplacian diagonal sums incident weights on the example grid") {
    Network net = test::example_grid();
    Vector diag = Vector(laplacian(incidence(net, Weighting::flow)).diagonal());
    Vector expected(5);
    expected << 0.5, 1.0, 0.2, 0.4, 0.1;
    CHECK((diag - expected).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("laplacian properties: null vector, quadratic form, degree/adjacency split") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 8; ++trial) {
        Network net = test::random_graph(rng, 13, 6);
        SparseMatrix l = laplacian(incidence(net, Weighting::flow));
        Vector ones = Vector::Ones(net.node_count());
        CHECK((l * ones).cwiseAbs().maxCoeff() < 1e-12);

        // x^T L x equals the direct edge sum and stays nonnegative.
        Vector x(net.node_count());
        for (int i = 0; i < x.size(); ++i) {
            x[i] = static_cast<double>(rng() >> 11) * 0x1p-53 - 0.5;
        }
        double via_edges = 0.0;
        for (const auto& p : net.pipes()) {
            double d = x[p.source] - x[p.target];
            via_edges += p.max_flow * d * d;
        }
        double quad = x.dot(l * x);
        CHECK(quad == doctest::Approx(via_edges).epsilon(1e-10));
        CHECK(quad >= 0.0);

        // W = L - D has an off-diagonal entry exactly where an edge is.
        Matrix dense = Matrix(l);
        for (int i = 0; i < net.node_count(); ++i) {
            for (int j = i + 1; j < net.node_count(); ++j) {
                bool connected = false;
                for (const auto& p : net.pipes()) {
                    if ((p.source == i && p.target == j) ||
                        (p.source == j && p.target == i)) {
                        connected = true;
                    }
                }
                CHECK((dense(i, j) != 0.0) == connected);
            }
        }
    }
}

TEST_CASE("node_masses combines own and half-pipe masses") {
    std::vector<Node> nodes{{"a", 0.0, 0, 0}, {"b", 0.0, 0, 0}, {"c", 0.0, 0, 0}};
    std::vector<Pipe> pipes{{"ab", 0, 1, 1.0, 4.0, 0, 0}, {"bc", 1, 2, 1.0, 6.0, 0, 0}};
    Network net(nodes, pipes);
    Vector md = node_masses(net);
    CHECK(md[1] == 5.0);  // half of 4 + half of 6
    CHECK(md.sum() == doctest::Approx(net.total_water_mass()));
}

TEST_CASE("node_masses uses explicit node masses directly") {
    Vector md = node_masses(test::example_grid());
    Vector expected(5);
    expected << 3, 3, 3, 6, 1;
    CHECK((md - expected).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("node_masses rejects a massless node") {
    std::vector<Node> nodes{{"a", 1.0, 0, 0}, {"ghost", 0.0, 0, 0}, {"c", 1.0, 0, 0}};
    std::vector<Pipe> pipes{{"ab", 0, 1, 1.0, 0.0, 0, 0}, {"bc", 1, 2, 1.0, 0.0, 0, 0}};
    CHECK_THROWS_WITH_AS(node_masses(Network(nodes, pipes)),
                         doctest::Contains("ghost"), ValidationError);
}

TEST_CASE("propagate_flows on a star") {
    std::vector<Node> nodes{{"root", 1.0, 0, 0}, {"l1", 1.0, 0, 0}, {"l2", 1.0, 0, 0}};
    std::vector<Pipe> pipes{{"a", 0, 1, 1.0, 0.0, 0, 0}, {"b", 0, 2, 1.0, 0.0, 0, 0}};
    Network net(nodes, pipes, {{1, "c1"}, {2, "c2"}}, {{0, "s"}});
    Vector d(2);
    d << 0.1, 0.2;
    Vector flows = propagate_flows(net, d);
    CHECK(flows[0] == doctest::Approx(0.1));
    CHECK(flows[1] == doctest::Approx(0.2));
}

TEST_CASE("propagate_flows reproduces the example grid weights") {
    Network net = test::example_grid();
    Vector d(3);
    d << 0.2, 0.2, 0.1;  // n3, n4, n5
    Vector flows = propagate_flows(net, d);
    Vector expected(4);
    expected << 0.5, 0.2, 0.3, 0.1;
    CHECK((flows - expected).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("propagate_flows zero demands give zero flows") {
    Network net = test::example_grid();
    CHECK(propagate_flows(net, Vector::Zero(3)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("propagate_flows satisfies per-node mass balance") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 10; ++trial) {
        Network tree = test::random_graph(rng, 20, 0);
        // attach consumers at every leaf, producer at node 0
        std::vector<Attachment> consumers;
        for (int i = 1; i < tree.node_count(); ++i) {
            if (tree.incident_pipes()[i].size() == 1) {
                consumers.push_back({i, "c" + std::to_string(i)});
            }
        }
        Network net(tree.nodes(), tree.pipes(), consumers, {{0, "s"}});
        Vector d(consumers.size());
        for (int c = 0; c < d.size(); ++c) {
            d[c] = static_cast<double>(rng() >> 11) * 0x1p-53;
        }
        Vector flows = propagate_flows(net, d);

        Vector balance = Vector::Zero(net.node_count());
        for (int e = 0; e < net.pipe_count(); ++e) {
            balance[net.pipes()[e].target] += flows[e];
            balance[net.pipes()[e].source] -= flows[e];
        }
        for (size_t c = 0; c < consumers.size(); ++c) {
            balance[consumers[c].node] -= d[static_cast<int>(c)];
        }
        balance[0] += d.sum();
        CHECK(balance.cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("propagate_flows rejects loops and multiple producers") {
    std::vector<Node> nodes{{"a", 1, 0, 0}, {"b", 1, 0, 0}, {"c", 1, 0, 0}};
    std::vector<Pipe> loop{{"ab", 0, 1, 1, 0, 0, 0}, {"bc", 1, 2, 1, 0, 0, 0},
                           {"ca", 2, 0, 1, 0, 0, 0}};
    Network cyclic(nodes, loop, {{1, "c"}}, {{0, "s"}});
    CHECK_THROWS_WITH_AS(propagate_flows(cyclic, Vector::Zero(1)),
                         doctest::Contains("explicitly"), ValidationError);

    std::vector<Pipe> path{{"ab", 0, 1, 1, 0, 0, 0}, {"bc", 1, 2, 1, 0, 0, 0}};
    Network two_prod(nodes, path, {{1, "c"}}, {{0, "s1"}, {2, "s2"}});
    CHECK_THROWS_AS(propagate_flows(two_prod, Vector::Zero(1)), ValidationError);
}
