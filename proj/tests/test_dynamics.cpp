#include "helpers.hpp"

#include "mcot/dynamics.hpp"
#include "mcot/error.hpp"
#include "mcot/oracle.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>

using namespace mcot;

namespace {

Eigen::MatrixXd column(std::initializer_list<double> v) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(v.size()), 1);
    Eigen::Index i = 0;
    for (double x : v) m(i++, 0) = x;
    return m;
}

TransportGraph path_graph(std::size_t nodes, Eigen::MatrixXd sources, std::size_t ground = 0) {
    std::vector<Edge> edges;
    for (std::size_t v = 0; v + 1 < nodes; ++v) edges.push_back({v, v + 1, 1.0});
    return TransportGraph(nodes, std::move(edges), std::move(sources), ground);
}

// Potentials from the dense pseudo-inverse of the weighted Laplacian.
Eigen::MatrixXd pinv_potentials(const TransportGraph& graph, const std::vector<double>& x) {
    const Eigen::MatrixXd b = graph.incidence_matrix();
    Eigen::VectorXd w(static_cast<Eigen::Index>(x.size()));
    for (std::size_t e = 0; e < x.size(); ++e) w(static_cast<Eigen::Index>(e)) = x[e] / graph.edge(e).cost;
    const Eigen::MatrixXd lap = b * w.asDiagonal() * b.transpose();
    return lap.completeOrthogonalDecomposition().pseudoInverse() * graph.sources();
}

TransportGraph random_pixel_graph(std::uint64_t seed, std::size_t side, std::size_t channels, double theta,
                                  double tau) {
    std::mt19937_64 rng(seed);
    const MassTensor g = flatten_to_tensor(test::random_image(rng, side, side, channels));
    const MassTensor h = flatten_to_tensor(test::random_image(rng, side, side, channels));
    return build_graph(g, h, theta, tau);
}

DynamicsConfig tight(double beta, double dt = 0.5) {
    DynamicsConfig c;
    c.beta = beta;
    c.dt = dt;
    c.min_dt = std::min(1e-3, dt);
    c.tol_cost = 1e-6;
    c.max_iter = 100000;
    return c;
}

} // namespace

TEST_SUITE("mc_dynamics") {

TEST_CASE("gamma_from_beta") {
    const Exponents one = gamma_from_beta(1.0);
    CHECK(one.gamma == 1.0);
    CHECK(one.Gamma == 1.0);
    const Exponents half = gamma_from_beta(0.5);
    CHECK(half.gamma == 1.5);
    CHECK(half.Gamma == doctest::Approx(1.2).epsilon(1e-15));
    CHECK(gamma_from_beta(2.0 - 1e-9).Gamma < 1e-8);
    CHECK(gamma_from_beta(2.0 - 1e-9).Gamma > 0.0);
    // Gamma = 2(2 - beta)/(3 - beta) for every beta.
    for (double beta : {0.1, 0.75, 1.25, 1.9})
        CHECK(gamma_from_beta(beta).Gamma == doctest::Approx(2.0 * (2.0 - beta) / (3.0 - beta)).epsilon(1e-14));
    CHECK_THROWS_AS(gamma_from_beta(0.0), ConfigError);
    CHECK_THROWS_AS(gamma_from_beta(2.0), ConfigError);
    CHECK_THROWS_AS(gamma_from_beta(3.0), ConfigError);
}

TEST_CASE("solve_potentials: two nodes, one unit edge") {
    const TransportGraph graph(2, {{0, 1, 1.0}}, column({1, -1}));
    const std::vector<double> x{1.0};
    const Potentials phi = solve_potentials(graph, x);
    CHECK(phi(0, 0) - phi(1, 0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(phi(0, 0) == 0.0); // node 0 is the ground
    const Fluxes p = compute_fluxes(graph, x, phi);
    CHECK(p(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("solve_potentials: zero sources give zero potentials") {
    const TransportGraph graph = path_graph(4, Eigen::MatrixXd::Zero(4, 2));
    const Potentials phi = solve_potentials(graph, std::vector<double>(3, 1.0));
    CHECK(phi.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("solve_potentials: 4-node path drops by one per edge") {
    const TransportGraph graph = path_graph(4, column({1, 0, 0, -1}));
    const std::vector<double> x(3, 1.0);
    const Potentials phi = solve_potentials(graph, x);
    const Eigen::MatrixXd oracle = pinv_potentials(graph, x);
    for (Eigen::Index v = 0; v + 1 < 4; ++v) {
        CHECK(phi(v, 0) - phi(v + 1, 0) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(phi(v, 0) - phi(v + 1, 0) == doctest::Approx(oracle(v, 0) - oracle(v + 1, 0)).epsilon(1e-12));
    }
}

TEST_CASE("solve_potentials agrees with the dense pseudo-inverse on a pixel network") {
    const TransportGraph graph = random_pixel_graph(31, 2, 3, 0.5, 0.4);
    std::mt19937_64 rng(32);
    std::uniform_real_distribution<double> u(0.1, 3.0);
    std::vector<double> x(graph.edge_count());
    for (double& v : x) v = u(rng);
    const Potentials phi = solve_potentials(graph, x);
    const Eigen::MatrixXd oracle = pinv_potentials(graph, x);
    const Fluxes p = compute_fluxes(graph, x, phi);
    const Fluxes q = compute_fluxes(graph, x, oracle);
    CHECK((p - q).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(kirchhoff_residual(graph, p) <= 1e-12);
}

TEST_CASE("fluxes do not depend on the grounded node") {
    const Eigen::MatrixXd s = column({0.5, 0.25, -0.5, -0.25, 0});
    std::vector<Edge> edges{{0, 1, 1.0}, {1, 2, 2.0}, {2, 3, 0.5}, {3, 4, 1.5}, {4, 0, 1.0}, {1, 3, 3.0}};
    const std::vector<double> x{1.0, 0.3, 2.0, 0.7, 1.1, 0.9};
    Fluxes reference;
    for (std::size_t ground = 0; ground < 5; ++ground) {
        const TransportGraph graph(5, edges, s, ground);
        const Potentials phi = solve_potentials(graph, x);
        CHECK(phi(static_cast<Eigen::Index>(ground), 0) == 0.0);
        const Fluxes p = compute_fluxes(graph, x, phi);
        if (ground == 0) reference = p;
        else CHECK((p - reference).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("solve_potentials handles disconnected active components") {
    // Two balanced islands once edge 1 is switched off.
    const TransportGraph graph(4, {{0, 1, 1.0}, {1, 2, 1.0}, {2, 3, 1.0}}, column({1, -1, 2, -2}));
    const std::vector<double> x{1.0, 0.0, 0.5};
    const Potentials phi = solve_potentials(graph, x);
    const Fluxes p = compute_fluxes(graph, x, phi);
    CHECK(p(0, 0) == doctest::Approx(1.0));
    CHECK(p(1, 0) == 0.0);
    CHECK(p(2, 0) == doctest::Approx(2.0));
    CHECK(kirchhoff_residual(graph, p) <= 1e-12);
}

TEST_CASE("compute_fluxes: zero conductivity carries nothing") {
    const TransportGraph graph(3, {{0, 1, 1.0}, {0, 1, 1.0}, {1, 2, 1.0}}, column({1, 0, -1}));
    const std::vector<double> x{0.0, 1.0, 1.0};
    const Fluxes p = compute_fluxes(graph, x, solve_potentials(graph, x));
    CHECK(p(0, 0) == 0.0);
    CHECK(p(1, 0) == doctest::Approx(1.0));
}

TEST_CASE("euler_step: a stationary state is unchanged") {
    // Two parallel unit edges carrying 1/2 each: x = |P| is a fixed point at beta 1.
    const TransportGraph graph(2, {{0, 1, 1.0}, {0, 1, 1.0}}, column({1, -1}));
    const std::vector<double> x{0.5, 0.5};
    const Potentials phi = solve_potentials(graph, x);
    const std::vector<double> next = euler_step(graph, x, phi, 1.0, 0.3);
    CHECK(next[0] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(next[1] == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("euler_step: no potential drop means pure decay") {
    const TransportGraph graph(3, {{0, 1, 1.0}, {1, 2, 1.0}}, column({0, 0, 0}));
    const std::vector<double> x{2.0, 0.5};
    const Potentials phi = solve_potentials(graph, x);
    const std::vector<double> next = euler_step(graph, x, phi, 0.5, 0.1);
    CHECK(next[0] == doctest::Approx(2.0 * 0.9).epsilon(1e-15));
    CHECK(next[1] == doctest::Approx(0.5 * 0.9).epsilon(1e-15));
}

TEST_CASE("euler_step: values below the floor become zero") {
    const TransportGraph graph(2, {{0, 1, 1.0}}, column({0, 0}));
    const std::vector<double> x{1e-12};
    const std::vector<double> next = euler_step(graph, x, solve_potentials(graph, x), 1.0, 0.5);
    CHECK(next[0] == 0.0);
}

TEST_CASE("euler_step at dt 0.05 does not raise the Lyapunov functional") {
    for (std::uint64_t seed : {41u, 42u, 43u}) {
        const TransportGraph graph = random_pixel_graph(seed, 2, 3, 0.5, 0.5);
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(0.2, 2.0);
        for (double beta : {0.5, 1.0, 1.5}) {
            const double gamma = gamma_from_beta(beta).gamma;
            std::vector<double> x(graph.edge_count());
            for (double& v : x) v = u(rng);
            const Potentials phi = solve_potentials(graph, x);
            const std::vector<double> next = euler_step(graph, x, phi, beta, 0.05);
            CHECK(lyapunov(graph, next, solve_potentials(graph, next), gamma) <= lyapunov(graph, x, phi, gamma) + 1e-12);
        }
    }
}

TEST_CASE("shared_cost") {
    const TransportGraph graph(2, {{0, 1, 2.0}}, Eigen::MatrixXd::Zero(2, 3));
    Fluxes p(1, 3);
    p << 3, 4, 0;
    CHECK(shared_cost(graph, p, 1.0) == 10.0);
    CHECK(shared_cost(graph, p, 2.0) == doctest::Approx(50.0));
    CHECK(shared_cost(graph, Fluxes::Zero(1, 3), 1.2) == 0.0);

    const TransportGraph uni(3, {{0, 1, 2.0}, {1, 2, 0.5}}, Eigen::MatrixXd::Zero(3, 1));
    Fluxes q(2, 1);
    q << -1.5, 4;
    CHECK(shared_cost(uni, q, 1.0) == doctest::Approx(2.0 * 1.5 + 0.5 * 4));
}

TEST_CASE("lyapunov with zero sources is the infrastructure term") {
    const TransportGraph graph(3, {{0, 1, 2.0}, {1, 2, 0.5}, {0, 2, 1.5}}, Eigen::MatrixXd::Zero(3, 1));
    const std::vector<double> x(3, 1.0);
    for (double gamma : {0.5, 1.0, 1.5})
        CHECK(lyapunov(graph, x, solve_potentials(graph, x), gamma) == doctest::Approx(4.0 / (2.0 * gamma)));
}

TEST_CASE("lyapunov_gradient matches central differences") {
    const TransportGraph graph = random_pixel_graph(51, 2, 3, 0.5, 0.5);
    std::mt19937_64 rng(52);
    std::uniform_real_distribution<double> u(0.3, 2.0);
    for (double beta : {0.5, 1.0, 1.4}) {
        const double gamma = gamma_from_beta(beta).gamma;
        std::vector<double> x(graph.edge_count());
        for (double& v : x) v = u(rng);
        const Potentials phi = solve_potentials(graph, x);
        const std::vector<double> grad = lyapunov_gradient(graph, x, phi, gamma);
        for (std::size_t e = 0; e < x.size(); ++e) {
            const double h = 1e-5;
            std::vector<double> xp = x, xm = x;
            xp[e] += h;
            xm[e] -= h;
            const double fd = (lyapunov(graph, xp, solve_potentials(graph, xp), gamma) -
                               lyapunov(graph, xm, solve_potentials(graph, xm), gamma)) /
                              (2.0 * h);
            CHECK(grad[e] == doctest::Approx(fd).epsilon(1e-6).scale(graph.edge(e).cost));
        }
    }
}

TEST_CASE("stationarity_residual") {
    Fluxes p(2, 1);
    p << 0.5, 0.25;
    CHECK(stationarity_residual(std::vector<double>{0.5, 0.25}, p, 1.0) == 0.0);
    // gamma = 1.5: x = |P|^(2/2.5) = |P|^0.8
    const std::vector<double> x{std::pow(0.5, 0.8), std::pow(0.25, 0.8)};
    CHECK(stationarity_residual(x, p, 1.5) <= 1e-15);
    CHECK(stationarity_residual(std::vector<double>{1.0, 1.0}, Fluxes::Zero(2, 1), 1.0) == 1.0);
}

TEST_CASE("run_dynamics: converged 3x3 run is stationary") {
    const TransportGraph graph = random_pixel_graph(61, 3, 1, 0.5, 0.5);
    const OTSolution sol = run_dynamics(graph, tight(1.0, 0.05));
    CHECK(sol.converged);
    CHECK(sol.stationarity_residual <= 1e-3);
    CHECK(sol.max_kirchhoff_residual <= 1e-8);
}

TEST_CASE("run_dynamics: unicommodity 3x3 pair matches min-cost flow") {
    for (std::uint64_t seed : {71u, 72u, 73u}) {
        const TransportGraph graph = random_pixel_graph(seed, 3, 1, seed % 2 ? 0.0 : 0.5, 0.5);
        const OTSolution sol = run_dynamics(graph, tight(1.0));
        REQUIRE(sol.converged);
        const OracleSolution exact = mincostflow_ot(make_flow_problem(graph, 0));
        CHECK(sol.cost == doctest::Approx(exact.cost).epsilon(1e-3));
    }
}

TEST_CASE("run_dynamics: 4-pixel RGB pair at beta 0.5 matches convex descent") {
    const TransportGraph graph = random_pixel_graph(81, 2, 3, 0.5, 0.5);
    DynamicsConfig c = tight(0.5);
    c.tol_cost = 1e-8;
    const OTSolution sol = run_dynamics(graph, c);
    REQUIRE(sol.converged);
    const OracleSolution ref = convex_descent(graph, 1.2);
    CHECK(sol.cost == doctest::Approx(ref.cost).epsilon(1e-3));
}

TEST_CASE("run_dynamics: identical images give the diagonal plan cost") {
    std::mt19937_64 rng(91);
    const RawImage img = test::random_image(rng, 3, 3, 3);
    const MassTensor g = flatten_to_tensor(img);
    const TransportGraph graph = build_graph(g, g, 0.0, 0.5);
    for (double beta : {1.0, 0.5}) {
        const double Gamma = gamma_from_beta(beta).Gamma;
        double closed_form = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            double norm2 = 0.0;
            for (double v : g.pixel(i)) norm2 += v * v;
            closed_form += kSafetyDistance * std::pow(std::sqrt(norm2), Gamma);
        }
        DynamicsConfig c = tight(beta);
        c.tol_cost = 1e-9;
        const OTSolution sol = run_dynamics(graph, c);
        REQUIRE(sol.converged);
        CHECK(std::abs(sol.cost - closed_form) <= 1e-6 * closed_form);
    }
}

TEST_CASE("run_dynamics: Lyapunov trace is monotone and the identity holds") {
    const TransportGraph graph = random_pixel_graph(101, 2, 3, 0.25, 0.4);
    const OTSolution sol = run_dynamics(graph, tight(0.5, 0.05));
    REQUIRE(sol.converged);
    for (std::size_t k = 1; k < sol.lyapunov_trace.size(); ++k)
        CHECK(sol.lyapunov_trace[k] <= sol.lyapunov_trace[k - 1] + 1e-8);
    CHECK(sol.lyapunov == doctest::Approx(sol.cost / 1.2).epsilon(1e-4));
    CHECK(sol.trace.size() == sol.iterations + 1);
}

TEST_CASE("run_dynamics: homogeneous of degree Gamma in the sources") {
    const TransportGraph graph = random_pixel_graph(111, 2, 3, 0.5, 0.5);
    DynamicsConfig c = tight(0.5);
    c.tol_cost = 1e-9;
    const OTSolution base = run_dynamics(graph, c);
    const OTSolution scaled = run_dynamics(graph.with_scaled_sources(3.0), c);
    CHECK(scaled.cost == doctest::Approx(std::pow(3.0, 1.2) * base.cost).epsilon(1e-5));
}

TEST_CASE("run_dynamics is deterministic") {
    const TransportGraph graph = random_pixel_graph(121, 3, 3, 0.5, 0.3);
    DynamicsConfig c;
    c.init = InitMode::Uniform;
    c.seed = 5;
    const OTSolution a = run_dynamics(graph, c);
    const OTSolution b = run_dynamics(graph, c);
    CHECK(a.cost == b.cost);
    CHECK(a.conductivities == b.conductivities);
    c.seed = 6;
    const OTSolution other = run_dynamics(graph, c);
    CHECK(other.cost == doctest::Approx(a.cost).epsilon(1e-2));
}

TEST_CASE("run_dynamics reports non-convergence") {
    const TransportGraph graph = random_pixel_graph(131, 3, 1, 0.5, 0.5);
    DynamicsConfig c;
    c.max_iter = 2;
    const OTSolution sol = run_dynamics(graph, c);
    CHECK_FALSE(sol.converged);
    CHECK(sol.status == DynamicsStatus::MaxIterations);
    CHECK(sol.iterations == 2);
}

TEST_CASE("run_dynamics with relative and absolute stopping") {
    const TransportGraph graph = random_pixel_graph(141, 3, 1, 0.5, 0.5);
    DynamicsConfig c;
    c.stopping = StoppingRule::Absolute;
    c.tol_cost = 1e-6;
    const OTSolution sol = run_dynamics(graph, c);
    CHECK(sol.converged);
    const double last = sol.trace[sol.trace.size() - 1].cost;
    const double before = sol.trace[sol.trace.size() - 2].cost;
    CHECK(std::abs(last - before) / sol.trace.back().dt < 1e-6);
}

TEST_CASE("DynamicsConfig validation") {
    const TransportGraph graph(2, {{0, 1, 1.0}}, column({1, -1}));
    DynamicsConfig c;
    c.beta = 3.0;
    CHECK_THROWS_AS(run_dynamics(graph, c), ConfigError);
    c = {};
    c.dt = 0.0;
    CHECK_THROWS_AS(run_dynamics(graph, c), ConfigError);
    c = {};
    c.x_init = {1.0, 2.0};
    CHECK_THROWS_AS(run_dynamics(graph, c), ConfigError);
    c = {};
    c.x_init = {-1.0};
    CHECK_THROWS_AS(run_dynamics(graph, c), ConfigError);
}

TEST_CASE("write_trace_csv") {
    test::TempDir dir;
    const TransportGraph graph = random_pixel_graph(151, 2, 1, 0.5, 0.5);
    const OTSolution sol = run_dynamics(graph, DynamicsConfig{});
    write_trace_csv(sol, dir / "trace.csv");
    std::ifstream in(dir / "trace.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "iter,t,J_Gamma,Lyapunov,kirchhoff_residual,active_edges");
    std::size_t rows = 0;
    for (std::string line; std::getline(in, line);) ++rows;
    CHECK(rows == sol.trace.size());
}

} // TEST_SUITE
