#include "mcot/sinkhorn.hpp"

#include "mcot/error.hpp"
#include "mcot/transport_graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mcot {

void SinkhornConfig::validate() const {
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
    if (!(tol_marginal > 0.0)) throw ConfigError("tol_marginal must be > 0");
    if (max_iter == 0) throw ConfigError("sinkhorn max_iter must be >= 1");
    if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
    if (!(theta >= 0.0 && theta <= 1.0)) throw ConfigError("theta must lie in [0,1]");
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_marginals(const Eigen::MatrixXd& cost, const Eigen::VectorXd& g, const Eigen::VectorXd& h) {
    if (cost.rows() != g.size() || cost.cols() != h.size())
        throw DataError("sinkhorn: cost and marginal dimensions differ");
    if ((g.array() < 0.0).any() || (h.array() < 0.0).any())
        throw DataError("sinkhorn: marginals must be non-negative");
    const double sg = g.sum();
    const double sh = h.sum();
    if (!(sg > 0.0) || !(sh > 0.0)) throw DataError("sinkhorn: zero marginal vector");
    if (std::abs(sg - sh) > 1e-9 * std::max(sg, sh)) throw DataError("sinkhorn: marginals have different totals");
    if (!cost.allFinite()) throw DataError("sinkhorn: cost entries must be finite");
}

double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v) {
    const double top = v.maxCoeff();
    if (top == kNegInf) return kNegInf;
    return top + std::log((v.array() - top).exp().sum());
}

void finalize(SinkhornResult& r, const Eigen::MatrixXd& cost, const Eigen::VectorXd& g,
              const Eigen::VectorXd& h, double epsilon) {
    const Eigen::MatrixXd& p = r.coupling;
    r.transport = (p.array() * cost.array()).sum();
    r.entropy = 0.0;
    for (Eigen::Index k = 0; k < p.size(); ++k) {
        const double v = p.data()[k];
        if (v > 0.0) r.entropy -= v * std::log(v);
    }
    r.cost = r.transport - epsilon * r.entropy;
    const double rows = (p.rowwise().sum() - g).cwiseAbs().maxCoeff();
    const double cols = (p.colwise().sum().transpose() - h).cwiseAbs().maxCoeff();
    r.marginal_violation = std::max(rows, cols);
}

double coupling_cost(const Eigen::MatrixXd& p, const Eigen::MatrixXd& cost, double epsilon) {
    double value = (p.array() * cost.array()).sum();
    for (Eigen::Index k = 0; k < p.size(); ++k) {
        const double v = p.data()[k];
        if (v > 0.0) value += epsilon * v * std::log(v);
    }
    return value;
}

SinkhornResult run_log_domain(const Eigen::MatrixXd& cost, const Eigen::VectorXd& g, const Eigen::VectorXd& h,
                              const SinkhornConfig& config) {
    const double eps = config.epsilon;
    const Eigen::Index m = cost.rows();
    const Eigen::Index n = cost.cols();
    Eigen::VectorXd log_g = g.array().log(); // log 0 = -inf masks empty rows
    Eigen::VectorXd log_h = h.array().log();
    Eigen::VectorXd f = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd k = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd scratch_n(n), scratch_m(m);

    auto coupling = [&]() {
        Eigen::MatrixXd p(m, n);
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index i = 0; i < m; ++i) {
                const double v = f(i) + k(j) - cost(i, j);
                p(i, j) = (f(i) == kNegInf || k(j) == kNegInf) ? 0.0 : std::exp(v / eps);
            }
        return p;
    };

    SinkhornResult r;
    for (std::size_t it = 0; it < config.max_iter; ++it) {
        for (Eigen::Index i = 0; i < m; ++i) {
            if (log_g(i) == kNegInf) {
                f(i) = kNegInf;
                continue;
            }
            for (Eigen::Index j = 0; j < n; ++j) scratch_n(j) = (k(j) - cost(i, j)) / eps;
            f(i) = eps * (log_g(i) - log_sum_exp(scratch_n));
        }
        for (Eigen::Index j = 0; j < n; ++j) {
            if (log_h(j) == kNegInf) {
                k(j) = kNegInf;
                continue;
            }
            for (Eigen::Index i = 0; i < m; ++i) scratch_m(i) = (f(i) - cost(i, j)) / eps;
            k(j) = eps * (log_h(j) - log_sum_exp(scratch_m));
        }
        r.iterations = it + 1;
        r.coupling = coupling();
        if (config.record_objective) r.objective_trace.push_back(coupling_cost(r.coupling, cost, eps));
        const double rows = (r.coupling.rowwise().sum() - g).cwiseAbs().maxCoeff();
        const double cols = (r.coupling.colwise().sum().transpose() - h).cwiseAbs().maxCoeff();
        if (std::max(rows, cols) <= config.tol_marginal) {
            r.converged = true;
            break;
        }
    }
    finalize(r, cost, g, h, eps);
    return r;
}

SinkhornResult run_plain_domain(const Eigen::MatrixXd& cost, const Eigen::VectorXd& g, const Eigen::VectorXd& h,
                                const SinkhornConfig& config) {
    const Eigen::MatrixXd kernel = (-cost.array() / config.epsilon).exp().matrix();
    Eigen::VectorXd u = Eigen::VectorXd::Ones(cost.rows());
    Eigen::VectorXd v = Eigen::VectorXd::Ones(cost.cols());
    SinkhornResult r;
    for (std::size_t it = 0; it < config.max_iter; ++it) {
        const Eigen::VectorXd kv = kernel * v;
        u = (g.array() > 0.0).select(g.array() / kv.array(), 0.0);
        const Eigen::VectorXd ku = kernel.transpose() * u;
        v = (h.array() > 0.0).select(h.array() / ku.array(), 0.0);
        if (!u.allFinite() || !v.allFinite()) throw SolverError("sinkhorn: plain-domain scaling underflowed");
        r.iterations = it + 1;
        r.coupling = u.asDiagonal() * kernel * v.asDiagonal();
        if (config.record_objective) r.objective_trace.push_back(coupling_cost(r.coupling, cost, config.epsilon));
        const double rows = (r.coupling.rowwise().sum() - g).cwiseAbs().maxCoeff();
        const double cols = (r.coupling.colwise().sum().transpose() - h).cwiseAbs().maxCoeff();
        if (std::max(rows, cols) <= config.tol_marginal) {
            r.converged = true;
            break;
        }
    }
    finalize(r, cost, g, h, config.epsilon);
    return r;
}

Eigen::VectorXd normalized_channel(const MassTensor& t, std::size_t a) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(t.size()));
    for (std::size_t i = 0; i < t.size(); ++i) v(static_cast<Eigen::Index>(i)) = t.mass[i * t.commodities + a];
    const double total = v.sum();
    if (!(total > 0.0)) throw DataError("sinkhorn: zero marginal vector");
    return v / total;
}

} // namespace

SinkhornResult sinkhorn_channel(const Eigen::MatrixXd& cost, const Eigen::VectorXd& g, const Eigen::VectorXd& h,
                                const SinkhornConfig& config) {
    if (!(config.epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
    if (!(config.tol_marginal > 0.0)) throw ConfigError("tol_marginal must be > 0");
    check_marginals(cost, g, h);
    return config.log_domain ? run_log_domain(cost, g, h, config) : run_plain_domain(cost, g, h, config);
}

Eigen::MatrixXd saturated_cost(const MassTensor& g, const MassTensor& h, double theta, double tau) {
    if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
    return ground_cost(g, h, theta).cwiseMin(tau);
}

SinkhornRgbResult sinkhorn_rgb(const MassTensor& g, const MassTensor& h, const SinkhornConfig& config) {
    config.validate();
    if (g.commodities != 3 || h.commodities != 3) throw DataError("sinkhorn_rgb requires 3 channels");
    const Eigen::MatrixXd cost = saturated_cost(g, h, config.theta, config.tau);
    SinkhornRgbResult out;
    out.converged = true;
    for (std::size_t a = 0; a < 3; ++a) {
        out.channels.push_back(sinkhorn_channel(cost, normalized_channel(g, a), normalized_channel(h, a), config));
        out.converged = out.converged && out.channels.back().converged;
    }
    out.cost = (out.channels[0].cost + out.channels[1].cost + out.channels[2].cost) / 3.0;
    return out;
}

SinkhornResult sinkhorn_grayscale(const MassTensor& g, const MassTensor& h, const SinkhornConfig& config) {
    config.validate();
    if (g.commodities != 1 || h.commodities != 1) throw DataError("sinkhorn_grayscale requires 1 channel");
    const Eigen::MatrixXd cost = saturated_cost(g, h, config.theta, config.tau);
    return sinkhorn_channel(cost, normalized_channel(g, 0), normalized_channel(h, 0), config);
}

} // namespace mcot
