#pragma once

#include "mcot/transport_graph.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace mcot {

/// Conductivities below this value are zeroed and the edge leaves the network for good.
inline constexpr double kConductivityFloor = 1e-12;

struct Exponents {
    double gamma; // 2 - beta
    double Gamma; // 2 gamma / (1 + gamma)
};

/// Cost exponents derived from beta in (0, 2).
Exponents gamma_from_beta(double beta);

enum class StoppingRule {
    Relative, // |dJ| / (dt * max(J, 1e-12)) < tol
    Absolute, // |dJ| / dt < tol
};

enum class InitMode {
    Ones,
    Uniform, // x_e ~ U(0,1) from `seed`
};

struct DynamicsConfig {
    double beta = 1.0;
    double dt = 0.5;
    double min_dt = 1e-3;
    double tol_cost = 1e-3;
    double tol_linear = 1e-10;
    std::size_t max_iter = 10000;
    StoppingRule stopping = StoppingRule::Relative;
    InitMode init = InitMode::Ones;
    std::uint64_t seed = 0;
    std::vector<double> x_init;   // overrides `init` when non-empty
    double lyapunov_slack = 1e-8; // allowed increase per accepted step
    bool record_trace = true;

    [[nodiscard]] double gamma() const { return gamma_from_beta(beta).gamma; }
    [[nodiscard]] double Gamma() const { return gamma_from_beta(beta).Gamma; }
    void validate() const;
};

using Potentials = Eigen::MatrixXd; // nodes x commodities
using Fluxes = Eigen::MatrixXd;     // edges x commodities

/// Sparse grounded Laplacian solver for L[x] phi^a = S^a.
///
/// Nodes are grouped into connected components of the active (x_e > 0)
/// subgraph. The graph's ground node pins its component; every other
/// component is pinned at its lowest-index node. The factorization is a
/// sparse LDL^T with a preconditioned conjugate-gradient fallback.
class LaplacianSolver {
public:
    explicit LaplacianSolver(const TransportGraph& graph, double tol_linear = 1e-10);

    [[nodiscard]] Potentials solve(std::span<const double> x);

    /// Relative residual max_a ||B P^a - S^a|| / ||S^a|| of the last solve.
    [[nodiscard]] double last_residual() const { return last_residual_; }
    [[nodiscard]] bool used_fallback() const { return used_fallback_; }

private:
    const TransportGraph& graph_;
    double tol_linear_;
    double last_residual_ = 0.0;
    bool used_fallback_ = false;
};

/// One-shot form of LaplacianSolver::solve.
Potentials solve_potentials(const TransportGraph& graph, std::span<const double> x,
                            double tol_linear = 1e-10);

/// P_e^a = x_e (phi_tail^a - phi_head^a) / C_e.
Fluxes compute_fluxes(const TransportGraph& graph, std::span<const double> x, const Potentials& phi);

/// Per-commodity relative Kirchhoff residual, maximized over commodities.
/// Commodities with zero sources use the absolute norm.
double kirchhoff_residual(const TransportGraph& graph, const Fluxes& fluxes);

/// Forward-Euler update x + dt (x^beta ||dphi||^2 / C^2 - x); entries
/// dropping below kConductivityFloor become zero. Throws SolverError on a
/// non-finite result.
std::vector<double> euler_step(const TransportGraph& graph, std::span<const double> x,
                               const Potentials& phi, double beta, double dt);

/// J_Gamma = sum_e C_e ||P_e||_2^Gamma.
double shared_cost(const TransportGraph& graph, const Fluxes& fluxes, double Gamma);

/// L_gamma = 1/2 sum phi S + 1/(2 gamma) sum C x^gamma.
double lyapunov(const TransportGraph& graph, std::span<const double> x, const Potentials& phi,
                double gamma);

/// dL_gamma/dx_e = (C_e/2) (x_e^(gamma-1) - ||dphi_e||^2 / C_e^2).
std::vector<double> lyapunov_gradient(const TransportGraph& graph, std::span<const double> x,
                                      const Potentials& phi, double gamma);

/// max_e |x_e - ||P_e||^(2/(1+gamma))| relative to the largest conductivity.
double stationarity_residual(std::span<const double> x, const Fluxes& fluxes, double gamma);

struct TraceRow {
    std::size_t iter;
    double t;
    double cost;
    double lyapunov;
    double kirchhoff_residual;
    std::size_t active_edges;
    double dt;
};

enum class DynamicsStatus {
    Converged,
    MaxIterations,
    StepUnderflow, // dt halved below min_dt
};

const char* to_string(DynamicsStatus status);

struct OTSolution {
    Fluxes fluxes;
    std::vector<double> conductivities;
    Potentials potentials;
    double cost = 0.0;
    double lyapunov = 0.0;
    std::vector<double> lyapunov_trace;
    double kirchhoff_residual = 0.0;     // final iterate
    double max_kirchhoff_residual = 0.0; // over all accepted iterates
    double stationarity_residual = 0.0;
    bool converged = false;
    DynamicsStatus status = DynamicsStatus::MaxIterations;
    std::size_t iterations = 0;
    std::size_t rejected_steps = 0;
    std::size_t active_edges = 0;
    double final_dt = 0.0;
    double time = 0.0;
    std::vector<TraceRow> trace;
};

/// Integrates the conductivity dynamics until the cost stopping rule holds.
///
/// Each accepted step must not raise the Lyapunov functional by more than
/// `lyapunov_slack`; a violating or non-finite step is rejected and dt is
/// halved. Non-convergence is reported through `converged`/`status`.
OTSolution run_dynamics(const TransportGraph& graph, const DynamicsConfig& config);

/// CSV columns: iter,t,J_Gamma,Lyapunov,kirchhoff_residual,active_edges.
void write_trace_csv(const OTSolution& solution, const std::filesystem::path& path);

} // namespace mcot
