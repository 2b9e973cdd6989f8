#pragma once

#include "mcot/dynamics.hpp"
#include "mcot/transport_graph.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace mcot {

// Exact reference solvers for desk-size instances.

/// Undirected network with integer supplies (positive = injected).
struct FlowNetwork {
    std::size_t nodes = 0;
    std::vector<Edge> edges;
    std::vector<std::int64_t> supply;
};

struct FlowResult {
    std::vector<std::int64_t> flow; // signed, positive along tail -> head
    double cost = 0.0;              // sum_e C_e |flow_e|
};

/// Uncapacitated min-cost flow by successive shortest paths with Johnson
/// potentials. Throws DataError when supplies do not sum to zero or a supply
/// cannot reach a demand.
FlowResult min_cost_flow(const FlowNetwork& network);

/// One commodity of a transport graph with supplies scaled to exact integers.
struct FlowProblem {
    const TransportGraph* graph = nullptr;
    std::size_t commodity = 0;
    std::vector<std::int64_t> supply;
    double scale = 255.0; // supply = round(S * scale)
};

/// Multiplies the commodity's sources by `scale` and checks they are integers.
FlowProblem make_flow_problem(const TransportGraph& graph, std::size_t commodity, double scale = 255.0);

struct OracleSolution {
    Fluxes fluxes; // edges x commodities
    double cost = 0.0;
    bool converged = true;
    std::size_t iterations = 0;
    double gradient_norm = 0.0;
};

/// Exact optimum of sum_e C_e |P_e| for one commodity, reported on the
/// original (unscaled) mass scale. Requires m + n <= 64 on pixel networks.
OracleSolution mincostflow_ot(const FlowProblem& problem);

struct ConvexDescentOptions {
    double tol = 1e-10;             // gradient-norm tolerance at the last smoothing stage
    std::size_t max_iter = 20000;   // per smoothing stage
    std::size_t memory = 12;        // L-BFGS history
};

/// Minimizes J_Gamma (Gamma > 1) over all feasible fluxes P^a = P0^a + N z^a,
/// where N is an orthonormal basis of the cycle space of the incidence
/// matrix. The norm is smoothed by a vanishing parameter and each stage is
/// solved with L-BFGS plus Armijo backtracking. Requires |E| <= 200.
OracleSolution convex_descent(const TransportGraph& graph, double Gamma,
                              const ConvexDescentOptions& options = {});

/// Cycle-space basis (edges x dim) and minimum-norm particular solution
/// (edges x commodities) of B P = S.
struct FeasibleParameterization {
    Eigen::MatrixXd cycles;
    Eigen::MatrixXd particular;
};

FeasibleParameterization feasible_parameterization(const TransportGraph& graph);

} // namespace mcot
