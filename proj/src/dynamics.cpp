#include "mcot/dynamics.hpp"

#include "mcot/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <string>

namespace mcot {

Exponents gamma_from_beta(double beta) {
    if (!(beta > 0.0 && beta < 2.0))
        throw ConfigError("beta must lie in the open interval (0,2), got " + std::to_string(beta));
    const double gamma = 2.0 - beta;
    return {gamma, 2.0 * gamma / (1.0 + gamma)};
}

void DynamicsConfig::validate() const {
    gamma_from_beta(beta);
    if (!(dt > 0.0)) throw ConfigError("dt must be > 0");
    if (!(min_dt > 0.0) || min_dt > dt) throw ConfigError("min_dt must lie in (0, dt]");
    if (!(tol_cost > 0.0)) throw ConfigError("tol_cost must be > 0");
    if (!(tol_linear > 0.0)) throw ConfigError("tol_linear must be > 0");
    if (max_iter == 0) throw ConfigError("max_iter must be >= 1");
    if (!(lyapunov_slack >= 0.0)) throw ConfigError("lyapunov_slack must be >= 0");
    for (double v : x_init)
        if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("x_init entries must be positive");
}

const char* to_string(DynamicsStatus status) {
    switch (status) {
    case DynamicsStatus::Converged: return "converged";
    case DynamicsStatus::MaxIterations: return "max_iterations";
    case DynamicsStatus::StepUnderflow: return "step_underflow";
    }
    return "unknown";
}

Fluxes compute_fluxes(const TransportGraph& graph, std::span<const double> x, const Potentials& phi) {
    const auto commodities = static_cast<Eigen::Index>(graph.commodities());
    Fluxes p = Fluxes::Zero(static_cast<Eigen::Index>(graph.edge_count()), commodities);
    for (std::size_t e = 0; e < graph.edge_count(); ++e) {
        if (x[e] == 0.0) continue;
        const Edge& edge = graph.edge(e);
        const double w = x[e] / edge.cost;
        p.row(static_cast<Eigen::Index>(e)) =
            w * (phi.row(static_cast<Eigen::Index>(edge.tail)) - phi.row(static_cast<Eigen::Index>(edge.head)));
    }
    return p;
}

double kirchhoff_residual(const TransportGraph& graph, const Fluxes& fluxes) {
    Eigen::MatrixXd divergence = -graph.sources();
    for (std::size_t e = 0; e < graph.edge_count(); ++e) {
        const Edge& edge = graph.edge(e);
        divergence.row(static_cast<Eigen::Index>(edge.tail)) += fluxes.row(static_cast<Eigen::Index>(e));
        divergence.row(static_cast<Eigen::Index>(edge.head)) -= fluxes.row(static_cast<Eigen::Index>(e));
    }
    double worst = 0.0;
    for (Eigen::Index a = 0; a < divergence.cols(); ++a) {
        const double scale = graph.sources().col(a).norm();
        const double r = divergence.col(a).norm();
        worst = std::max(worst, scale > 0.0 ? r / scale : r);
    }
    return worst;
}

namespace {

double squared_drop(const TransportGraph& graph, const Potentials& phi, std::size_t e) {
    const Edge& edge = graph.edge(e);
    return (phi.row(static_cast<Eigen::Index>(edge.tail)) - phi.row(static_cast<Eigen::Index>(edge.head))).squaredNorm();
}

} // namespace

std::vector<double> euler_step(const TransportGraph& graph, std::span<const double> x,
                               const Potentials& phi, double beta, double dt) {
    std::vector<double> next(x.size());
    for (std::size_t e = 0; e < x.size(); ++e) {
        if (x[e] == 0.0) {
            next[e] = 0.0;
            continue;
        }
        const double c = graph.edge(e).cost;
        const double drive = std::pow(x[e], beta) * squared_drop(graph, phi, e) / (c * c);
        double v = x[e] + dt * (drive - x[e]);
        if (!std::isfinite(v)) throw SolverError("non-finite conductivity update");
        if (v < kConductivityFloor) v = 0.0;
        next[e] = v;
    }
    return next;
}

double shared_cost(const TransportGraph& graph, const Fluxes& fluxes, double Gamma) {
    double j = 0.0;
    for (std::size_t e = 0; e < graph.edge_count(); ++e) {
        const double norm = fluxes.row(static_cast<Eigen::Index>(e)).norm();
        if (norm > 0.0) j += graph.edge(e).cost * std::pow(norm, Gamma);
    }
    return j;
}

double lyapunov(const TransportGraph& graph, std::span<const double> x, const Potentials& phi, double gamma) {
    const double dissipation = 0.5 * (phi.array() * graph.sources().array()).sum();
    double infrastructure = 0.0;
    for (std::size_t e = 0; e < graph.edge_count(); ++e)
        if (x[e] > 0.0) infrastructure += graph.edge(e).cost * std::pow(x[e], gamma);
    return dissipation + infrastructure / (2.0 * gamma);
}

std::vector<double> lyapunov_gradient(const TransportGraph& graph, std::span<const double> x,
                                      const Potentials& phi, double gamma) {
    std::vector<double> grad(x.size());
    for (std::size_t e = 0; e < x.size(); ++e) {
        const double c = graph.edge(e).cost;
        grad[e] = 0.5 * c * (std::pow(x[e], gamma - 1.0) - squared_drop(graph, phi, e) / (c * c));
    }
    return grad;
}

double stationarity_residual(std::span<const double> x, const Fluxes& fluxes, double gamma) {
    const double exponent = 2.0 / (1.0 + gamma);
    double worst = 0.0;
    double scale = kConductivityFloor;
    for (std::size_t e = 0; e < x.size(); ++e) {
        if (!(x[e] > 0.0)) continue;
        const double target = std::pow(fluxes.row(static_cast<Eigen::Index>(e)).norm(), exponent);
        worst = std::max(worst, std::abs(x[e] - target));
        scale = std::max(scale, x[e]);
    }
    return worst / scale;
}

namespace {

std::vector<double> initial_conductivities(const TransportGraph& graph, const DynamicsConfig& config) {
    if (!config.x_init.empty()) {
        if (config.x_init.size() == 1) return std::vector<double>(graph.edge_count(), config.x_init.front());
        if (config.x_init.size() != graph.edge_count())
            throw ConfigError("x_init must have one entry or one per edge");
        return config.x_init;
    }
    std::vector<double> x(graph.edge_count(), 1.0);
    if (config.init == InitMode::Uniform) {
        std::mt19937_64 rng(config.seed);
        // Open interval (0,1): a zero draw would switch the edge off from the start.
        for (double& v : x) {
            do {
                v = static_cast<double>(rng() >> 11) * 0x1.0p-53;
            } while (v == 0.0);
        }
    }
    return x;
}

std::size_t count_active(std::span<const double> x) {
    return static_cast<std::size_t>(std::count_if(x.begin(), x.end(), [](double v) { return v > 0.0; }));
}

} // namespace

OTSolution run_dynamics(const TransportGraph& graph, const DynamicsConfig& config) {
    config.validate();
    const auto [gamma, Gamma] = gamma_from_beta(config.beta);

    LaplacianSolver solver(graph, config.tol_linear);
    std::vector<double> x = initial_conductivities(graph, config);
    Potentials phi = solver.solve(x);
    Fluxes p = compute_fluxes(graph, x, phi);
    double cost = shared_cost(graph, p, Gamma);
    double lyap = lyapunov(graph, x, phi, gamma);
    double residual = solver.last_residual();

    OTSolution out;
    out.max_kirchhoff_residual = residual;
    out.lyapunov_trace.push_back(lyap);
    double dt = config.dt;
    double t = 0.0;
    if (config.record_trace) out.trace.push_back({0, 0.0, cost, lyap, residual, count_active(x), dt});

    std::size_t iter = 0;
    out.status = DynamicsStatus::MaxIterations;
    while (iter < config.max_iter) {
        std::vector<double> x_next;
        Potentials phi_next;
        bool accepted = false;
        try {
            x_next = euler_step(graph, x, phi, config.beta, dt);
            phi_next = solver.solve(x_next);
            accepted = lyapunov(graph, x_next, phi_next, gamma) <= lyap + config.lyapunov_slack;
        } catch (const SolverError&) {
            accepted = false;
        }
        if (!accepted) {
            ++out.rejected_steps;
            dt *= 0.5;
            if (dt < config.min_dt) {
                out.status = DynamicsStatus::StepUnderflow;
                break;
            }
            continue;
        }

        ++iter;
        t += dt;
        x = std::move(x_next);
        phi = std::move(phi_next);
        p = compute_fluxes(graph, x, phi);
        const double next_cost = shared_cost(graph, p, Gamma);
        lyap = lyapunov(graph, x, phi, gamma);
        residual = solver.last_residual();
        out.max_kirchhoff_residual = std::max(out.max_kirchhoff_residual, residual);
        out.lyapunov_trace.push_back(lyap);
        if (config.record_trace) out.trace.push_back({iter, t, next_cost, lyap, residual, count_active(x), dt});

        const double change = std::abs(next_cost - cost) / dt;
        cost = next_cost;
        const double criterion =
            config.stopping == StoppingRule::Relative ? change / std::max(cost, 1e-12) : change;
        if (criterion < config.tol_cost) {
            out.status = DynamicsStatus::Converged;
            break;
        }
    }

    out.converged = out.status == DynamicsStatus::Converged;
    out.iterations = iter;
    out.final_dt = dt;
    out.time = t;
    out.cost = cost;
    out.lyapunov = lyap;
    out.kirchhoff_residual = residual;
    out.stationarity_residual = stationarity_residual(x, p, gamma);
    out.active_edges = count_active(x);
    out.fluxes = std::move(p);
    out.potentials = std::move(phi);
    out.conductivities = std::move(x);
    return out;
}

void write_trace_csv(const OTSolution& solution, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write trace " + path.string());
    out.precision(17);
    out << "iter,t,J_Gamma,Lyapunov,kirchhoff_residual,active_edges\n";
    for (const TraceRow& row : solution.trace)
        out << row.iter << ',' << row.t << ',' << row.cost << ',' << row.lyapunov << ','
            << row.kirchhoff_residual << ',' << row.active_edges << '\n';
}

} // namespace mcot
