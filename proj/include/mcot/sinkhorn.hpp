#pragma once

#include "mcot/image.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace mcot {

/// Entropic weight `epsilon` lives on the rescaled cost scale (costs in [0,1]).
struct SinkhornConfig {
    double epsilon = 0.01;
    double tol_marginal = 1e-6;
    std::size_t max_iter = 100000;
    double tau = 0.125;
    double theta = 0.25;
    bool log_domain = true;
    bool record_objective = false;

    void validate() const;
};

struct SinkhornResult {
    Eigen::MatrixXd coupling;
    double transport = 0.0; // sum P C
    double entropy = 0.0;   // h(P) = -sum P log P
    double cost = 0.0;      // transport - epsilon * entropy
    double marginal_violation = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    std::vector<double> objective_trace; // cost of the coupling after each full iteration
};

/// Balanced entropic OT between marginals `g` and `h` with equal totals.
/// Stops when the larger of the row/column marginal violations drops to
/// tol_marginal. Throws DataError on a zero or mismatched marginal.
SinkhornResult sinkhorn_channel(const Eigen::MatrixXd& cost, const Eigen::VectorXd& g,
                                const Eigen::VectorXd& h, const SinkhornConfig& config);

/// min(C, tau) for the rescaled ground cost of the pair.
Eigen::MatrixXd saturated_cost(const MassTensor& g, const MassTensor& h, double theta, double tau);

struct SinkhornRgbResult {
    double cost = 0.0;                 // mean of the per-channel costs
    std::vector<SinkhornResult> channels;
    bool converged = false;
};

/// Per-channel Sinkhorn on the shared saturated cost, channels normalized to
/// unit mass, averaged over the three channels.
SinkhornRgbResult sinkhorn_rgb(const MassTensor& g, const MassTensor& h, const SinkhornConfig& config);

/// Single-channel variant for grayscale tensors.
SinkhornResult sinkhorn_grayscale(const MassTensor& g, const MassTensor& h, const SinkhornConfig& config);

} // namespace mcot
