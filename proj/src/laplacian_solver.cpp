#include "mcot/dynamics.hpp"
#include "mcot/error.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

#include <numeric>

namespace mcot {

namespace {

struct DisjointSets {
    std::vector<std::size_t> parent;
    explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t find(std::size_t v) {
        while (parent[v] != v) {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        return v;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

} // namespace

LaplacianSolver::LaplacianSolver(const TransportGraph& graph, double tol_linear)
    : graph_(graph), tol_linear_(tol_linear) {}

Potentials LaplacianSolver::solve(std::span<const double> x) {
    const std::size_t nodes = graph_.node_count();
    const std::size_t commodities = graph_.commodities();
    if (x.size() != graph_.edge_count())
        throw ConfigError("solve_potentials: conductivity vector has wrong length");

    DisjointSets sets(nodes);
    for (std::size_t e = 0; e < x.size(); ++e)
        if (x[e] > 0.0) sets.unite(graph_.edge(e).tail, graph_.edge(e).head);

    // Pinned node of every component: the graph ground where present, else the root.
    std::vector<bool> pinned(nodes, false);
    const std::size_t ground_root = sets.find(graph_.ground_node());
    pinned[graph_.ground_node()] = true;
    for (std::size_t v = 0; v < nodes; ++v) {
        const std::size_t r = sets.find(v);
        if (r == v && r != ground_root) pinned[v] = true;
    }

    constexpr std::size_t kNone = static_cast<std::size_t>(-1);
    std::vector<std::size_t> index(nodes, kNone);
    std::size_t unknowns = 0;
    for (std::size_t v = 0; v < nodes; ++v)
        if (!pinned[v]) index[v] = unknowns++;

    Potentials phi = Potentials::Zero(static_cast<Eigen::Index>(nodes), static_cast<Eigen::Index>(commodities));
    used_fallback_ = false;
    if (unknowns > 0) {
        std::vector<Eigen::Triplet<double>> triplets;
        triplets.reserve(4 * x.size());
        for (std::size_t e = 0; e < x.size(); ++e) {
            if (!(x[e] > 0.0)) continue;
            const Edge& edge = graph_.edge(e);
            const double w = x[e] / edge.cost;
            const std::size_t a = index[edge.tail];
            const std::size_t b = index[edge.head];
            if (a != kNone) triplets.emplace_back(static_cast<int>(a), static_cast<int>(a), w);
            if (b != kNone) triplets.emplace_back(static_cast<int>(b), static_cast<int>(b), w);
            if (a != kNone && b != kNone) {
                triplets.emplace_back(static_cast<int>(a), static_cast<int>(b), -w);
                triplets.emplace_back(static_cast<int>(b), static_cast<int>(a), -w);
            }
        }
        Eigen::SparseMatrix<double> lap(static_cast<Eigen::Index>(unknowns), static_cast<Eigen::Index>(unknowns));
        lap.setFromTriplets(triplets.begin(), triplets.end());

        Eigen::MatrixXd rhs(static_cast<Eigen::Index>(unknowns), static_cast<Eigen::Index>(commodities));
        for (std::size_t v = 0; v < nodes; ++v)
            if (index[v] != kNone) rhs.row(static_cast<Eigen::Index>(index[v])) = graph_.sources().row(static_cast<Eigen::Index>(v));

        Eigen::MatrixXd sol;
        bool ok = false;
        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(lap);
        if (ldlt.info() == Eigen::Success) {
            sol = ldlt.solve(rhs);
            ok = ldlt.info() == Eigen::Success && sol.allFinite();
            if (ok) {
                for (Eigen::Index a = 0; a < rhs.cols(); ++a) {
                    const double scale = std::max(rhs.col(a).norm(), 1e-300);
                    if ((lap * sol.col(a) - rhs.col(a)).norm() / scale > tol_linear_) ok = false;
                }
            }
        }
        if (!ok) {
            used_fallback_ = true;
            Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                                     Eigen::DiagonalPreconditioner<double>> cg(lap);
            cg.setTolerance(tol_linear_ * 0.1);
            cg.setMaxIterations(static_cast<Eigen::Index>(std::max<std::size_t>(10 * unknowns, 1000)));
            Eigen::MatrixXd guess = sol.size() == rhs.size() && sol.allFinite()
                                        ? sol
                                        : Eigen::MatrixXd::Zero(rhs.rows(), rhs.cols());
            sol = Eigen::MatrixXd(rhs.rows(), rhs.cols());
            for (Eigen::Index a = 0; a < rhs.cols(); ++a) {
                sol.col(a) = cg.solveWithGuess(rhs.col(a), guess.col(a));
                if (cg.info() != Eigen::Success || !sol.col(a).allFinite())
                    throw SolverError("Kirchhoff solve failed after conjugate-gradient fallback");
            }
        }
        for (std::size_t v = 0; v < nodes; ++v)
            if (index[v] != kNone) phi.row(static_cast<Eigen::Index>(v)) = sol.row(static_cast<Eigen::Index>(index[v]));
    }

    last_residual_ = kirchhoff_residual(graph_, compute_fluxes(graph_, x, phi));
    return phi;
}

Potentials solve_potentials(const TransportGraph& graph, std::span<const double> x, double tol_linear) {
    LaplacianSolver solver(graph, tol_linear);
    return solver.solve(x);
}

} // namespace mcot
