#include "helpers.hpp"

#include "mcot/error.hpp"
#include "mcot/transport_graph.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

using namespace mcot;

namespace {

MassTensor tensor(std::size_t w, std::size_t h, std::vector<double> intensities, std::size_t channels = 1) {
    RawImage img(w, h, channels);
    img.intensities = std::move(intensities);
    return flatten_to_tensor(img);
}

std::size_t count_kind(const TransportGraph& g, EdgeKind kind) {
    return static_cast<std::size_t>(
        std::count_if(g.edges().begin(), g.edges().end(), [&](const Edge& e) { return e.kind == kind; }));
}

} // namespace

TEST_SUITE("transport_graph") {

TEST_CASE("ground_cost: coincident pixels get the safety distance at theta 0") {
    const MassTensor g = tensor(2, 2, {10, 20, 30, 40});
    const MassTensor h = tensor(2, 2, {40, 30, 20, 10});
    const Eigen::MatrixXd c = ground_cost(g, h, 0.0);
    for (Eigen::Index i = 0; i < 4; ++i) CHECK(c(i, i) == kSafetyDistance);
    // The farthest pair (diagonal corners) is rescaled to 1.
    CHECK(c(0, 3) == doctest::Approx(1.0));
    CHECK(c(0, 1) == doctest::Approx(1.0 / std::sqrt(2.0)));
}

TEST_CASE("ground_cost: theta 0 is symmetric under swapping same-shape images") {
    std::mt19937_64 rng(2);
    const MassTensor g = flatten_to_tensor(test::random_image(rng, 3, 4, 3));
    const MassTensor h = flatten_to_tensor(test::random_image(rng, 3, 4, 3));
    const Eigen::MatrixXd a = ground_cost(g, h, 0.0);
    const Eigen::MatrixXd b = ground_cost(h, g, 0.0);
    CHECK((a - b.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("ground_cost: theta 1 with equal colors is zero at any distance") {
    const MassTensor g = tensor(3, 1, {5, 5, 5, 9, 9, 9, 1, 2, 3}, 3);
    const MassTensor h = tensor(3, 1, {1, 2, 3, 5, 5, 5, 7, 7, 7}, 3);
    const Eigen::MatrixXd c = ground_cost(g, h, 1.0);
    CHECK(c(0, 1) == 0.0);
    CHECK(c(2, 0) == 0.0);
    CHECK(c(1, 2) > 0.0);
}

TEST_CASE("ground_cost: convex combination of rescaled parts") {
    std::mt19937_64 rng(3);
    const MassTensor g = flatten_to_tensor(test::random_image(rng, 3, 3, 3));
    const MassTensor h = flatten_to_tensor(test::random_image(rng, 3, 3, 3));
    const Eigen::MatrixXd y = ground_cost(g, h, 0.0);
    const Eigen::MatrixXd x = ground_cost(g, h, 1.0);
    const Eigen::MatrixXd mix = ground_cost(g, h, 0.3);
    CHECK((0.7 * y + 0.3 * x - mix).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK(y.maxCoeff() == doctest::Approx(1.0));
    CHECK(x.maxCoeff() == doctest::Approx(1.0));
}

TEST_CASE("ground_cost rejects bad input") {
    const MassTensor g = tensor(1, 1, {1});
    const MassTensor h = tensor(1, 1, {1, 2, 3}, 3);
    CHECK_THROWS_AS(ground_cost(g, h, 0.5), ConfigError);
    CHECK_THROWS_AS(ground_cost(g, g, 1.5), ConfigError);
}

TEST_CASE("build_graph: 3x3 with every cost under tau") {
    const MassTensor g = tensor(3, 1, {10, 20, 30});
    const MassTensor h = tensor(3, 1, {30, 20, 10});
    const TransportGraph graph = build_graph(g, h, 0.5, 2.0);
    CHECK(graph.edge_count() == 18);
    CHECK(graph.node_count() == 8);
    CHECK(count_kind(graph, EdgeKind::Bipartite) == 9);
    CHECK(count_kind(graph, EdgeKind::Transshipment) == 6);
    CHECK(count_kind(graph, EdgeKind::Relax) == 3);
    CHECK(graph.ground_node() == 6);
}

TEST_CASE("build_graph: balanced masses leave u2 without a source") {
    const MassTensor g = tensor(2, 1, {100, 50, 7, 1, 2, 3}, 3);
    const MassTensor h = tensor(2, 1, {50, 45, 5, 51, 7, 5}, 3);
    const TransportGraph graph = build_graph(g, h, 0.25, 0.5);
    const auto& info = *graph.pixel_info();
    const auto u2 = static_cast<Eigen::Index>(info.relax_node());
    for (Eigen::Index a = 0; a < 3; ++a) CHECK(std::abs(graph.sources()(u2, a)) <= 1e-15);
    for (double m : info.excess) CHECK(std::abs(m) <= 1e-15);
}

TEST_CASE("build_graph: unbalanced masses put the excess on u2 and columns sum to zero") {
    std::mt19937_64 rng(6);
    const MassTensor g = flatten_to_tensor(test::random_image(rng, 3, 3, 3));
    const MassTensor h = flatten_to_tensor(test::random_image(rng, 3, 3, 3));
    const TransportGraph graph = build_graph(g, h, 0.25, 0.3);
    const auto& info = *graph.pixel_info();
    for (std::size_t a = 0; a < 3; ++a) {
        const auto col = graph.sources().col(static_cast<Eigen::Index>(a));
        CHECK(std::abs(col.sum()) <= 1e-14);
        CHECK(info.excess[a] == doctest::Approx(h.total(a) - g.total(a)).epsilon(1e-12));
        CHECK(col(static_cast<Eigen::Index>(info.transshipment_node())) == 0.0);
    }
}

TEST_CASE("build_graph: tau below every cost routes through u1 only") {
    const MassTensor g = tensor(2, 2, {1, 2, 3, 4});
    const MassTensor h = tensor(2, 2, {4, 3, 2, 1});
    const TransportGraph graph = build_graph(g, h, 0.0, 1e-6);
    CHECK(count_kind(graph, EdgeKind::Bipartite) == 0);
    CHECK(graph.edge_count() == 8 + 4);
    for (const Edge& e : graph.edges()) {
        if (e.kind == EdgeKind::Transshipment) CHECK(e.cost == 0.5e-6);
        if (e.kind == EdgeKind::Relax) CHECK(e.cost == 0.5e-6);
    }
}

TEST_CASE("build_graph: relaxation cost is half the largest kept bipartite cost") {
    std::mt19937_64 rng(8);
    const MassTensor g = flatten_to_tensor(test::random_image(rng, 3, 3, 1));
    const MassTensor h = flatten_to_tensor(test::random_image(rng, 3, 3, 1));
    const Eigen::MatrixXd c = ground_cost(g, h, 0.4);
    const double tau = 0.6;
    double kept = 0.0;
    for (Eigen::Index k = 0; k < c.size(); ++k)
        if (c.data()[k] <= tau) kept = std::max(kept, c.data()[k]);
    const TransportGraph graph = build_graph(g, h, 0.4, tau);
    CHECK(graph.pixel_info()->relax_cost == kept / 2.0);
    for (const Edge& e : graph.edges()) {
        if (e.kind != EdgeKind::Bipartite) continue;
        CHECK(e.cost <= tau);
        CHECK(e.cost == c(static_cast<Eigen::Index>(e.tail), static_cast<Eigen::Index>(e.head - 9)));
    }
}

TEST_CASE("build_graph: zero combined cost is floored") {
    const MassTensor g = tensor(2, 1, {5, 5, 5, 1, 1, 1}, 3);
    const MassTensor h = tensor(2, 1, {1, 1, 1, 5, 5, 5}, 3);
    const TransportGraph graph = build_graph(g, h, 1.0, 0.5);
    for (const Edge& e : graph.edges()) CHECK(e.cost > 0.0);
}

TEST_CASE("build_graph: bipartite edge count grows with tau") {
    std::mt19937_64 rng(12);
    const MassTensor g = flatten_to_tensor(test::random_image(rng, 4, 4, 3));
    const MassTensor h = flatten_to_tensor(test::random_image(rng, 4, 4, 3));
    std::size_t previous = 0;
    for (double tau : {0.05, 0.1, 0.2, 0.3, 0.5, 0.8, 1.0, 1.5}) {
        const TransportGraph graph = build_graph(g, h, 0.5, tau);
        const std::size_t e12 = graph.pixel_info()->bipartite_edges;
        CHECK(e12 >= previous);
        CHECK(graph.edge_count() == e12 + 16 + 16 + 16);
        previous = e12;
    }
    CHECK(previous == 256);
}

TEST_CASE("incidence is +1 at the tail and -1 at the head") {
    const MassTensor g = tensor(2, 1, {1, 2});
    const MassTensor h = tensor(2, 1, {2, 1});
    const TransportGraph graph = build_graph(g, h, 0.0, 2.0);
    const Eigen::MatrixXd b = graph.incidence_matrix();
    for (std::size_t e = 0; e < graph.edge_count(); ++e) {
        const Edge& edge = graph.edge(e);
        CHECK(b(static_cast<Eigen::Index>(edge.tail), static_cast<Eigen::Index>(e)) == 1.0);
        CHECK(b(static_cast<Eigen::Index>(edge.head), static_cast<Eigen::Index>(e)) == -1.0);
        CHECK(b.col(static_cast<Eigen::Index>(e)).cwiseAbs().sum() == 2.0);
        CHECK(graph.incidence(edge.tail, e) == 1);
        CHECK(graph.incidence(edge.head, e) == -1);
    }
}

TEST_CASE("TransportGraph validation") {
    Eigen::MatrixXd s(2, 1);
    s << 1, -1;
    CHECK_NOTHROW(TransportGraph(2, {{0, 1, 1.0}}, s));
    CHECK_THROWS_AS(TransportGraph(2, {{0, 1, 0.0}}, s), ConfigError);
    CHECK_THROWS_AS(TransportGraph(2, {{0, 2, 1.0}}, s), ConfigError);
    CHECK_THROWS_AS(TransportGraph(3, {{0, 1, 1.0}}, s), ConfigError);
    CHECK_THROWS_AS(TransportGraph(2, {{0, 1, 1.0}}, s, 5), ConfigError);
}

TEST_CASE("with_scaled_sources") {
    Eigen::MatrixXd s(3, 2);
    s << 1, 2, 0, -1, -1, -1;
    const TransportGraph graph(3, {{0, 1, 1.0}, {1, 2, 2.0}}, s);
    const TransportGraph scaled = graph.with_scaled_sources(2.5);
    CHECK((scaled.sources() - 2.5 * s).cwiseAbs().maxCoeff() == 0.0);
    CHECK(scaled.edge_count() == 2);
}

TEST_CASE("write_graph_csv") {
    test::TempDir dir;
    const MassTensor g = tensor(2, 1, {255, 0});
    const MassTensor h = tensor(2, 1, {0, 255});
    const TransportGraph graph = build_graph(g, h, 0.0, 2.0);
    write_graph_csv(graph, dir / "g");
    std::ifstream edges(dir / "g_edges.csv");
    std::string header;
    std::getline(edges, header);
    CHECK(header == "src,dst,cost,kind");
    std::size_t rows = 0;
    for (std::string line; std::getline(edges, line);) ++rows;
    CHECK(rows == graph.edge_count());

    std::ifstream nodes(dir / "g_nodes.csv");
    std::getline(nodes, header);
    CHECK(header == "id,role,S_1");
    std::string first;
    std::getline(nodes, first);
    CHECK(first == "0,image1,1");
}

} // TEST_SUITE
