#include "mcot/oracle.hpp"

#include "mcot/error.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <queue>

namespace mcot {

namespace {

struct Arc {
    std::size_t to;
    std::size_t rev; // index of the reverse arc in adjacency[to]
    std::int64_t cap;
    double cost;
    std::size_t edge; // originating undirected edge, or npos
    bool forward;     // along the edge's tail -> head orientation
};

constexpr std::size_t npos = static_cast<std::size_t>(-1);

void add_arc(std::vector<std::vector<Arc>>& adj, std::size_t u, std::size_t v, std::int64_t cap,
             double cost, std::size_t edge, bool forward) {
    adj[u].push_back({v, adj[v].size(), cap, cost, edge, forward});
    adj[v].push_back({u, adj[u].size() - 1, 0, -cost, npos, false});
}

} // namespace

FlowResult min_cost_flow(const FlowNetwork& network) {
    if (network.supply.size() != network.nodes) throw DataError("min_cost_flow: supply size mismatch");
    const std::int64_t balance = std::accumulate(network.supply.begin(), network.supply.end(), std::int64_t{0});
    if (balance != 0) throw DataError("min_cost_flow: supplies do not sum to zero");

    std::int64_t total = 0;
    for (std::int64_t s : network.supply)
        if (s > 0) total += s;

    const std::size_t source = network.nodes;
    const std::size_t sink = network.nodes + 1;
    std::vector<std::vector<Arc>> adj(network.nodes + 2);
    for (std::size_t e = 0; e < network.edges.size(); ++e) {
        const Edge& edge = network.edges[e];
        add_arc(adj, edge.tail, edge.head, total, edge.cost, e, true);
        add_arc(adj, edge.head, edge.tail, total, edge.cost, e, false);
    }
    for (std::size_t v = 0; v < network.nodes; ++v) {
        if (network.supply[v] > 0) add_arc(adj, source, v, network.supply[v], 0.0, npos, true);
        if (network.supply[v] < 0) add_arc(adj, v, sink, -network.supply[v], 0.0, npos, true);
    }

    const std::size_t count = adj.size();
    std::vector<double> potential(count, 0.0);
    std::vector<double> dist(count);
    std::vector<std::size_t> prev_node(count), prev_arc(count);
    constexpr double inf = std::numeric_limits<double>::infinity();

    std::int64_t shipped = 0;
    while (shipped < total) {
        std::fill(dist.begin(), dist.end(), inf);
        dist[source] = 0.0;
        using Entry = std::pair<double, std::size_t>;
        std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
        heap.push({0.0, source});
        while (!heap.empty()) {
            const auto [d, u] = heap.top();
            heap.pop();
            if (d > dist[u]) continue;
            for (std::size_t k = 0; k < adj[u].size(); ++k) {
                const Arc& arc = adj[u][k];
                if (arc.cap <= 0) continue;
                // Reduced costs are non-negative up to rounding.
                const double reduced = std::max(0.0, arc.cost + potential[u] - potential[arc.to]);
                if (dist[u] + reduced < dist[arc.to]) {
                    dist[arc.to] = dist[u] + reduced;
                    prev_node[arc.to] = u;
                    prev_arc[arc.to] = k;
                    heap.push({dist[arc.to], arc.to});
                }
            }
        }
        if (dist[sink] == inf) throw DataError("min_cost_flow: infeasible supplies");
        for (std::size_t v = 0; v < count; ++v)
            if (dist[v] < inf) potential[v] += dist[v];

        std::int64_t push = total - shipped;
        for (std::size_t v = sink; v != source; v = prev_node[v])
            push = std::min(push, adj[prev_node[v]][prev_arc[v]].cap);
        for (std::size_t v = sink; v != source; v = prev_node[v]) {
            Arc& arc = adj[prev_node[v]][prev_arc[v]];
            arc.cap -= push;
            adj[v][arc.rev].cap += push;
        }
        shipped += push;
    }

    FlowResult result;
    result.flow.assign(network.edges.size(), 0);
    for (std::size_t u = 0; u < network.nodes; ++u)
        for (const Arc& arc : adj[u]) {
            if (arc.edge == npos) continue;
            const std::int64_t used = adj[arc.to][arc.rev].cap; // residual of the reverse arc
            result.flow[arc.edge] += arc.forward ? used : -used;
        }
    for (std::size_t e = 0; e < network.edges.size(); ++e)
        result.cost += network.edges[e].cost * static_cast<double>(std::llabs(result.flow[e]));
    return result;
}

FlowProblem make_flow_problem(const TransportGraph& graph, std::size_t commodity, double scale) {
    if (commodity >= graph.commodities()) throw ConfigError("make_flow_problem: commodity out of range");
    FlowProblem problem;
    problem.graph = &graph;
    problem.commodity = commodity;
    problem.scale = scale;
    problem.supply.resize(graph.node_count());
    for (std::size_t v = 0; v < graph.node_count(); ++v) {
        const double s = graph.sources()(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(commodity)) * scale;
        const double r = std::round(s);
        if (std::abs(s - r) > 1e-6) throw DataError("make_flow_problem: supplies are not integral after scaling");
        problem.supply[v] = static_cast<std::int64_t>(r);
    }
    return problem;
}

OracleSolution mincostflow_ot(const FlowProblem& problem) {
    if (problem.graph == nullptr) throw ConfigError("mincostflow_ot: missing graph");
    const TransportGraph& graph = *problem.graph;
    if (const auto& info = graph.pixel_info(); info && info->m + info->n > 64)
        throw ConfigError("mincostflow_ot: limited to m + n <= 64");

    FlowNetwork network{graph.node_count(), graph.edges(), problem.supply};
    const FlowResult flow = min_cost_flow(network);

    OracleSolution out;
    out.fluxes = Fluxes::Zero(static_cast<Eigen::Index>(graph.edge_count()), static_cast<Eigen::Index>(graph.commodities()));
    for (std::size_t e = 0; e < graph.edge_count(); ++e)
        out.fluxes(static_cast<Eigen::Index>(e), static_cast<Eigen::Index>(problem.commodity)) =
            static_cast<double>(flow.flow[e]) / problem.scale;
    out.cost = flow.cost / problem.scale;
    return out;
}

FeasibleParameterization feasible_parameterization(const TransportGraph& graph) {
    const Eigen::MatrixXd b = graph.incidence_matrix();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(b, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sigma = svd.singularValues();
    const double threshold = 1e-10 * std::max(1.0, sigma.size() > 0 ? sigma(0) : 0.0);
    Eigen::Index rank = 0;
    while (rank < sigma.size() && sigma(rank) > threshold) ++rank;

    FeasibleParameterization fp;
    const Eigen::Index edges = b.cols();
    fp.cycles = svd.matrixV().rightCols(edges - rank);
    const Eigen::MatrixXd ur = svd.matrixU().leftCols(rank);
    const Eigen::MatrixXd vr = svd.matrixV().leftCols(rank);
    const Eigen::VectorXd inv = sigma.head(rank).cwiseInverse();
    fp.particular = vr * inv.asDiagonal() * (ur.transpose() * graph.sources());
    return fp;
}

namespace {

// f(P) = sum_e C_e (||P_e||^2 + delta^2)^(Gamma/2) and its gradient in P.
double smoothed_cost(const TransportGraph& graph, const Eigen::MatrixXd& p, double gamma_exp, double delta2,
                     Eigen::MatrixXd* grad) {
    double f = 0.0;
    if (grad) grad->setZero(p.rows(), p.cols());
    for (Eigen::Index e = 0; e < p.rows(); ++e) {
        const double c = graph.edge(static_cast<std::size_t>(e)).cost;
        const double s = p.row(e).squaredNorm() + delta2;
        if (s == 0.0) continue;
        const double powered = std::pow(s, 0.5 * gamma_exp);
        f += c * powered;
        if (grad) grad->row(e) = (gamma_exp * c * powered / s) * p.row(e);
    }
    return f;
}

} // namespace

OracleSolution convex_descent(const TransportGraph& graph, double Gamma, const ConvexDescentOptions& options) {
    if (!(Gamma > 1.0)) throw ConfigError("convex_descent requires Gamma > 1");
    if (graph.edge_count() > 200) throw ConfigError("convex_descent: limited to |E| <= 200");

    const FeasibleParameterization fp = feasible_parameterization(graph);
    const Eigen::MatrixXd& basis = fp.cycles;
    const Eigen::Index dim = basis.cols();
    const Eigen::Index commodities = static_cast<Eigen::Index>(graph.commodities());

    Eigen::MatrixXd z = Eigen::MatrixXd::Zero(dim, commodities);
    OracleSolution out;
    auto fluxes_of = [&](const Eigen::MatrixXd& zz) -> Eigen::MatrixXd { return fp.particular + basis * zz; };

    if (dim > 0) {
        const std::vector<double> stages{1e-2, 1e-4, 1e-6, 1e-8, 1e-10, 1e-12, 1e-14, 1e-16, 0.0};
        Eigen::MatrixXd grad_p;
        for (std::size_t stage = 0; stage < stages.size(); ++stage) {
            const double delta2 = stages[stage];
            const bool last = stage + 1 == stages.size();
            auto objective = [&](const Eigen::MatrixXd& zz, Eigen::MatrixXd& g) {
                const double f = smoothed_cost(graph, fluxes_of(zz), Gamma, delta2, &grad_p);
                g = basis.transpose() * grad_p;
                return f;
            };

            std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> history; // (s, y)
            Eigen::MatrixXd g;
            double f = objective(z, g);
            std::size_t stalled = 0;
            for (std::size_t it = 0; it < options.max_iter; ++it) {
                ++out.iterations;
                const double gnorm = g.norm();
                if (gnorm <= options.tol * std::max(1.0, std::abs(f))) break;

                // Two-loop recursion on the flattened gradient.
                Eigen::VectorXd q = Eigen::Map<const Eigen::VectorXd>(g.data(), g.size());
                std::vector<double> alpha(history.size());
                for (std::size_t k = history.size(); k-- > 0;) {
                    const auto& [s, y] = history[k];
                    alpha[k] = s.dot(q) / y.dot(s);
                    q -= alpha[k] * y;
                }
                if (!history.empty()) {
                    const auto& [s, y] = history.back();
                    q *= s.dot(y) / y.squaredNorm();
                }
                for (std::size_t k = 0; k < history.size(); ++k) {
                    const auto& [s, y] = history[k];
                    const double beta = y.dot(q) / y.dot(s);
                    q += (alpha[k] - beta) * s;
                }
                Eigen::MatrixXd dir = -Eigen::Map<Eigen::MatrixXd>(q.data(), dim, commodities);
                double slope = (dir.array() * g.array()).sum();
                if (!(slope < 0.0)) {
                    dir = -g;
                    slope = -g.squaredNorm();
                    history.clear();
                }

                double step = 1.0;
                Eigen::MatrixXd z_new, g_new;
                double f_new = f;
                bool moved = false;
                for (int ls = 0; ls < 60; ++ls) {
                    z_new = z + step * dir;
                    f_new = objective(z_new, g_new);
                    if (f_new <= f + 1e-4 * step * slope) {
                        moved = true;
                        break;
                    }
                    step *= 0.5;
                }
                if (!moved) {
                    if (history.empty()) break;
                    history.clear();
                    continue;
                }
                const Eigen::MatrixXd sm = z_new - z;
                const Eigen::MatrixXd ym = g_new - g;
                const Eigen::VectorXd s = Eigen::Map<const Eigen::VectorXd>(sm.data(), sm.size());
                const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(ym.data(), ym.size());
                if (s.dot(y) > 1e-300) {
                    history.emplace_back(s, y);
                    if (history.size() > options.memory) history.pop_front();
                }
                stalled = (f - f_new) <= 1e-16 * std::abs(f) ? stalled + 1 : 0;
                z = z_new;
                g = g_new;
                f = f_new;
                if (stalled >= 20) break;
            }
            if (last) {
                out.gradient_norm = g.norm();
                out.converged = out.gradient_norm <= options.tol * std::max(1.0, std::abs(f)) || stalled >= 20;
            }
        }
    }

    out.fluxes = fluxes_of(z);
    out.cost = smoothed_cost(graph, out.fluxes, Gamma, 0.0, nullptr);
    return out;
}

} // namespace mcot
