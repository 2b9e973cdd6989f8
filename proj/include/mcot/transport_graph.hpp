#pragma once

#include "mcot/image.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <filesystem>
#include <optional>
#include <vector>

namespace mcot {

/// Replacement for a zero Euclidean pixel distance after rescaling.
inline constexpr double kSafetyDistance = 1e-5;

/// Largest m*n for which a dense ground-cost matrix is materialized.
inline constexpr std::size_t kDenseCostLimit = 10'000'000;

enum class EdgeKind { Bipartite, Transshipment, Relax, Generic };

const char* to_string(EdgeKind kind);

/// Undirected edge with a fixed orientation: the signed incidence is +1 at
/// `tail` and -1 at `head`.
struct Edge {
    std::size_t tail;
    std::size_t head;
    double cost;
    EdgeKind kind = EdgeKind::Generic;
};

/// Construction metadata of a pixel network; absent for hand-built graphs.
struct PixelNetworkInfo {
    std::size_t m = 0;              // pixels of image 1 (nodes 0..m-1)
    std::size_t n = 0;              // pixels of image 2 (nodes m..m+n-1)
    std::size_t bipartite_edges = 0;
    double theta = 0.0;
    double tau = 0.0;
    double relax_cost = 0.0;        // cost c of every u2 link
    std::vector<double> excess;     // m^a = sum_j H_ja - sum_i G_ia
    double mean_degree = 0.0;       // mean untrimmed bipartite degree <K>

    [[nodiscard]] std::size_t transshipment_node() const { return m + n; }
    [[nodiscard]] std::size_t relax_node() const { return m + n + 1; }
};

/// Immutable multicommodity network: edges with positive costs and a
/// per-node, per-commodity source matrix whose columns sum to zero.
class TransportGraph {
public:
    /// Generic network. `sources` is nodes x commodities. `ground` is the node
    /// whose potential is pinned to zero in Kirchhoff solves.
    TransportGraph(std::size_t nodes, std::vector<Edge> edges, Eigen::MatrixXd sources,
                   std::size_t ground = 0);

    TransportGraph(std::size_t nodes, std::vector<Edge> edges, Eigen::MatrixXd sources,
                   std::size_t ground, PixelNetworkInfo info);

    [[nodiscard]] std::size_t node_count() const { return nodes_; }
    [[nodiscard]] std::size_t edge_count() const { return edges_.size(); }
    [[nodiscard]] std::size_t commodities() const { return static_cast<std::size_t>(sources_.cols()); }
    [[nodiscard]] const std::vector<Edge>& edges() const { return edges_; }
    [[nodiscard]] const Edge& edge(std::size_t e) const { return edges_[e]; }
    [[nodiscard]] const Eigen::MatrixXd& sources() const { return sources_; }
    [[nodiscard]] std::size_t ground_node() const { return ground_; }
    [[nodiscard]] const std::optional<PixelNetworkInfo>& pixel_info() const { return info_; }

    /// Signed incidence entry B_{node, e}.
    [[nodiscard]] int incidence(std::size_t node, std::size_t e) const;

    /// Dense signed incidence matrix (nodes x edges); intended for small graphs.
    [[nodiscard]] Eigen::MatrixXd incidence_matrix() const;

    /// Copy with every source entry multiplied by `lambda`.
    [[nodiscard]] TransportGraph with_scaled_sources(double lambda) const;

private:
    void validate() const;

    std::size_t nodes_;
    std::vector<Edge> edges_;
    Eigen::MatrixXd sources_;
    std::size_t ground_;
    std::optional<PixelNetworkInfo> info_;
};

/// Untrimmed ground cost as a dense m x n matrix: (1-theta) Y + theta X where
/// Y is the pixel distance and X the color 1-norm, each rescaled by its
/// observed maximum over all pairs; Y = 0 entries become kSafetyDistance.
Eigen::MatrixXd ground_cost(const MassTensor& g, const MassTensor& h, double theta);

/// Builds the trimmed network: bipartite edges with cost <= tau, a
/// transshipment node u1 linked to every pixel at cost tau/2, and a relaxation
/// node u2 linked to every pixel of the second image at cost max(E12)/2.
TransportGraph build_graph(const MassTensor& g, const MassTensor& h, double theta, double tau);

/// Writes `<prefix>_edges.csv` (src,dst,cost,kind) and `<prefix>_nodes.csv`
/// (id,role,S_1..S_M).
void write_graph_csv(const TransportGraph& graph, const std::filesystem::path& prefix);

} // namespace mcot
