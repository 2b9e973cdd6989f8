#include "mcot/transport_graph.hpp"

#include "mcot/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

namespace mcot {

const char* to_string(EdgeKind kind) {
    switch (kind) {
    case EdgeKind::Bipartite: return "bipartite";
    case EdgeKind::Transshipment: return "transshipment";
    case EdgeKind::Relax: return "relax";
    case EdgeKind::Generic: return "generic";
    }
    return "generic";
}

TransportGraph::TransportGraph(std::size_t nodes, std::vector<Edge> edges, Eigen::MatrixXd sources,
                               std::size_t ground)
    : nodes_(nodes), edges_(std::move(edges)), sources_(std::move(sources)), ground_(ground) {
    validate();
}

TransportGraph::TransportGraph(std::size_t nodes, std::vector<Edge> edges, Eigen::MatrixXd sources,
                               std::size_t ground, PixelNetworkInfo info)
    : nodes_(nodes), edges_(std::move(edges)), sources_(std::move(sources)), ground_(ground),
      info_(std::move(info)) {
    validate();
}

void TransportGraph::validate() const {
    if (static_cast<std::size_t>(sources_.rows()) != nodes_)
        throw ConfigError("TransportGraph: source rows must equal node count");
    if (ground_ >= nodes_) throw ConfigError("TransportGraph: ground node out of range");
    for (const Edge& e : edges_) {
        if (e.tail >= nodes_ || e.head >= nodes_ || e.tail == e.head)
            throw ConfigError("TransportGraph: invalid edge endpoints");
        if (!(e.cost > 0.0) || !std::isfinite(e.cost))
            throw ConfigError("TransportGraph: edge costs must be positive and finite");
    }
}

int TransportGraph::incidence(std::size_t node, std::size_t e) const {
    const Edge& edge = edges_[e];
    if (edge.tail == node) return 1;
    if (edge.head == node) return -1;
    return 0;
}

Eigen::MatrixXd TransportGraph::incidence_matrix() const {
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nodes_),
                                              static_cast<Eigen::Index>(edges_.size()));
    for (std::size_t e = 0; e < edges_.size(); ++e) {
        b(static_cast<Eigen::Index>(edges_[e].tail), static_cast<Eigen::Index>(e)) = 1.0;
        b(static_cast<Eigen::Index>(edges_[e].head), static_cast<Eigen::Index>(e)) = -1.0;
    }
    return b;
}

TransportGraph TransportGraph::with_scaled_sources(double lambda) const {
    TransportGraph copy = *this;
    copy.sources_ *= lambda;
    if (copy.info_) {
        for (double& v : copy.info_->excess) v *= lambda;
    }
    return copy;
}

namespace {

void check_pair(const MassTensor& g, const MassTensor& h, double theta) {
    if (g.commodities != h.commodities)
        throw ConfigError("commodity-count mismatch: " + std::to_string(g.commodities) + " vs " +
                          std::to_string(h.commodities));
    if (!(theta >= 0.0 && theta <= 1.0)) throw ConfigError("theta must lie in [0,1]");
    if (g.size() == 0 || h.size() == 0) throw DataError("empty mass tensor");
}

double pixel_distance(const MassTensor& g, std::size_t i, const MassTensor& h, std::size_t j) {
    return std::hypot(g.coords[i][0] - h.coords[j][0], g.coords[i][1] - h.coords[j][1]);
}

double color_distance(const MassTensor& g, std::size_t i, const MassTensor& h, std::size_t j) {
    const auto gi = g.pixel(i);
    const auto hj = h.pixel(j);
    double d = 0.0;
    for (std::size_t a = 0; a < gi.size(); ++a) d += std::abs(gi[a] - hj[a]);
    return d;
}

// Streams the rescaled convex combination over all pixel pairs.
class PairCost {
public:
    PairCost(const MassTensor& g, const MassTensor& h, double theta) : g_(g), h_(h), theta_(theta) {
        for (std::size_t i = 0; i < g.size(); ++i)
            for (std::size_t j = 0; j < h.size(); ++j) {
                y_max_ = std::max(y_max_, pixel_distance(g, i, h, j));
                x_max_ = std::max(x_max_, color_distance(g, i, h, j));
            }
    }

    double operator()(std::size_t i, std::size_t j) const {
        double y = y_max_ > 0.0 ? pixel_distance(g_, i, h_, j) / y_max_ : 0.0;
        if (y == 0.0) y = kSafetyDistance;
        const double x = x_max_ > 0.0 ? color_distance(g_, i, h_, j) / x_max_ : 0.0;
        return (1.0 - theta_) * y + theta_ * x;
    }

private:
    const MassTensor& g_;
    const MassTensor& h_;
    double theta_;
    double y_max_ = 0.0;
    double x_max_ = 0.0;
};

} // namespace

Eigen::MatrixXd ground_cost(const MassTensor& g, const MassTensor& h, double theta) {
    check_pair(g, h, theta);
    if (g.size() * h.size() > kDenseCostLimit)
        throw ConfigError("ground_cost: dense matrix of " + std::to_string(g.size() * h.size()) +
                          " entries exceeds the materialization limit");
    const PairCost cost(g, h, theta);
    Eigen::MatrixXd c(static_cast<Eigen::Index>(g.size()), static_cast<Eigen::Index>(h.size()));
    for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t j = 0; j < h.size(); ++j)
            c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cost(i, j);
    return c;
}

TransportGraph build_graph(const MassTensor& g, const MassTensor& h, double theta, double tau) {
    check_pair(g, h, theta);
    if (!(tau > 0.0)) throw ConfigError("tau must be > 0");

    const std::size_t m = g.size();
    const std::size_t n = h.size();
    const std::size_t commodities = g.commodities;
    const std::size_t u1 = m + n;
    const std::size_t u2 = m + n + 1;

    const PairCost cost(g, h, theta);
    std::vector<Edge> edges;
    double max_kept = 0.0;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double c = cost(i, j);
            if (c > tau) continue;
            // theta = 1 with equal colors gives a zero combined cost.
            if (c <= 0.0) c = kSafetyDistance;
            max_kept = std::max(max_kept, c);
            edges.push_back({i, m + j, c, EdgeKind::Bipartite});
        }
    const std::size_t bipartite = edges.size();

    for (std::size_t i = 0; i < m; ++i) edges.push_back({i, u1, tau / 2.0, EdgeKind::Transshipment});
    for (std::size_t j = 0; j < n; ++j) edges.push_back({u1, m + j, tau / 2.0, EdgeKind::Transshipment});

    // With no surviving bipartite edge the thresholded maximum is tau itself.
    const double relax_cost = (bipartite > 0 ? max_kept : tau) / 2.0;
    for (std::size_t j = 0; j < n; ++j) edges.push_back({u2, m + j, relax_cost, EdgeKind::Relax});

    Eigen::MatrixXd sources = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m + n + 2),
                                                    static_cast<Eigen::Index>(commodities));
    PixelNetworkInfo info;
    info.m = m;
    info.n = n;
    info.bipartite_edges = bipartite;
    info.theta = theta;
    info.tau = tau;
    info.relax_cost = relax_cost;
    info.mean_degree = 2.0 * static_cast<double>(bipartite) / static_cast<double>(m + n);
    info.excess.assign(commodities, 0.0);
    for (std::size_t a = 0; a < commodities; ++a) {
        const auto col = static_cast<Eigen::Index>(a);
        for (std::size_t i = 0; i < m; ++i) sources(static_cast<Eigen::Index>(i), col) = g.mass[i * commodities + a];
        for (std::size_t j = 0; j < n; ++j)
            sources(static_cast<Eigen::Index>(m + j), col) = -h.mass[j * commodities + a];
        // The excess is the negated sum of the very entries above, so the
        // column adds to zero up to a single rounding.
        double pixel_sum = 0.0;
        for (std::size_t k = 0; k < m + n; ++k) pixel_sum += sources(static_cast<Eigen::Index>(k), col);
        info.excess[a] = -pixel_sum;
        sources(static_cast<Eigen::Index>(u2), col) = -pixel_sum;
    }
    return TransportGraph(m + n + 2, std::move(edges), std::move(sources), u1, std::move(info));
}

void write_graph_csv(const TransportGraph& graph, const std::filesystem::path& prefix) {
    std::ofstream edges(prefix.string() + "_edges.csv");
    std::ofstream nodes(prefix.string() + "_nodes.csv");
    if (!edges || !nodes) throw DataError("cannot write graph CSV at " + prefix.string());
    edges.precision(17);
    nodes.precision(17);
    edges << "src,dst,cost,kind\n";
    for (const Edge& e : graph.edges()) edges << e.tail << ',' << e.head << ',' << e.cost << ',' << to_string(e.kind) << '\n';

    nodes << "id,role";
    for (std::size_t a = 0; a < graph.commodities(); ++a) nodes << ",S_" << (a + 1);
    nodes << '\n';
    const auto& info = graph.pixel_info();
    for (std::size_t v = 0; v < graph.node_count(); ++v) {
        const char* role = "node";
        if (info) {
            if (v < info->m) role = "image1";
            else if (v < info->m + info->n) role = "image2";
            else if (v == info->transshipment_node()) role = "u1";
            else role = "u2";
        }
        nodes << v << ',' << role;
        for (std::size_t a = 0; a < graph.commodities(); ++a)
            nodes << ',' << graph.sources()(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(a));
        nodes << '\n';
    }
}

} // namespace mcot
