#include "mcot/verification.hpp"

#include "mcot/classifier.hpp"
#include "mcot/commands.hpp"
#include "mcot/dynamics.hpp"
#include "mcot/error.hpp"
#include "mcot/oracle.hpp"
#include "mcot/sinkhorn.hpp"
#include "mcot/transport_graph.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <unistd.h>

namespace mcot {

namespace {

// Tolerances and budgets of the acceptance criteria.
constexpr double kOracleGap = 1e-3;
constexpr double kUnicommodityBudget = 30.0;
constexpr double kConvexBudget = 60.0;
constexpr double kLyapunovSlack = 1e-8;
constexpr double kGradientError = 1e-5;
constexpr double kKirchhoffTol = 1e-8;
constexpr double kStationarityTol = 1e-3;
constexpr double kIdentityTol = 1e-4;
constexpr double kMarginalTol = 1e-6;
constexpr double kSinkhornGap = 1e-2;
constexpr double kHomogeneityTol = 1e-4;
constexpr double kMultiAccuracy = 0.95;
constexpr double kUniAccuracy = 0.45;
constexpr double kColorBudget = 300.0;

// Solver settings used to reach "convergence" in the checks.
constexpr double kTightTol = 1e-6;
constexpr double kFineDt = 0.05;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2e", v);
    return buf;
}

RawImage random_image(std::mt19937_64& rng, std::size_t w, std::size_t h, std::size_t channels) {
    RawImage img(w, h, channels);
    for (double& v : img.intensities) v = static_cast<double>(rng() % 256);
    return img;
}

struct Instance {
    TransportGraph graph;
    double theta;
};

std::vector<Instance> unicommodity_instances() {
    std::mt19937_64 rng(20240601);
    std::vector<Instance> out;
    for (int i = 0; i < 20; ++i) {
        const double theta = i % 2 == 0 ? 0.0 : 0.5;
        const MassTensor g = flatten_to_tensor(random_image(rng, 4, 4, 1));
        const MassTensor h = flatten_to_tensor(random_image(rng, 4, 4, 1));
        out.push_back({build_graph(g, h, theta, 0.5), theta});
    }
    return out;
}

std::vector<Instance> multicommodity_instances() {
    std::mt19937_64 rng(20240602);
    std::vector<Instance> out;
    for (int i = 0; i < 10; ++i) {
        const MassTensor g = flatten_to_tensor(random_image(rng, 2, 2, 3));
        const MassTensor h = flatten_to_tensor(random_image(rng, 2, 2, 3));
        out.push_back({build_graph(g, h, 0.5, 0.5), 0.5});
    }
    return out;
}

constexpr double kUnicommodityBeta = 1.0;
constexpr double kMulticommodityBeta = 0.5;

DynamicsConfig tight_config(double beta, double dt) {
    DynamicsConfig c;
    c.beta = beta;
    c.dt = dt;
    c.min_dt = std::min(c.min_dt, dt);
    c.tol_cost = kTightTol;
    c.max_iter = 200000;
    c.record_trace = true;
    return c;
}

double relative_gap(double a, double b) { return std::abs(a - b) / std::abs(b); }

CheckResult unicommodity_oracle() {
    CheckResult r;
    const auto start = Clock::now();
    double worst = 0.0;
    bool all_converged = true;
    for (const Instance& inst : unicommodity_instances()) {
        const OTSolution sol = run_dynamics(inst.graph, tight_config(kUnicommodityBeta, 0.5));
        const OracleSolution exact = mincostflow_ot(make_flow_problem(inst.graph, 0));
        all_converged = all_converged && sol.converged;
        worst = std::max(worst, relative_gap(sol.cost, exact.cost));
    }
    r.seconds = seconds_since(start);
    r.passed = all_converged && worst <= kOracleGap && r.seconds <= kUnicommodityBudget;
    r.detail = "max gap " + sci(worst) + " <= " + sci(kOracleGap) + ", budget 30s";
    if (!all_converged) r.detail += ", a run did not converge";
    return r;
}

CheckResult convex_oracle() {
    CheckResult r;
    const auto start = Clock::now();
    double worst = 0.0;
    bool all_converged = true;
    const double Gamma = gamma_from_beta(kMulticommodityBeta).Gamma;
    for (const Instance& inst : multicommodity_instances()) {
        DynamicsConfig c = tight_config(kMulticommodityBeta, 0.5);
        c.tol_cost = 1e-8;
        const OTSolution sol = run_dynamics(inst.graph, c);
        const OracleSolution ref = convex_descent(inst.graph, Gamma);
        all_converged = all_converged && sol.converged && ref.converged;
        worst = std::max(worst, relative_gap(sol.cost, ref.cost));
    }
    r.seconds = seconds_since(start);
    r.passed = all_converged && worst <= kOracleGap && r.seconds <= kConvexBudget;
    r.detail = "Gamma 1.2, max gap " + sci(worst) + " <= " + sci(kOracleGap) + ", budget 60s";
    if (!all_converged) r.detail += ", a run did not converge";
    return r;
}

// Runs both instance families at the fine step with the Lyapunov guard
// disabled, so that every step is taken as integrated.
struct FineRun {
    OTSolution solution;
    double beta;
};

std::vector<FineRun> fine_runs(bool unicommodity_only) {
    std::vector<FineRun> out;
    for (const Instance& inst : unicommodity_instances()) {
        DynamicsConfig c = tight_config(kUnicommodityBeta, kFineDt);
        c.lyapunov_slack = std::numeric_limits<double>::infinity();
        out.push_back({run_dynamics(inst.graph, c), kUnicommodityBeta});
    }
    if (unicommodity_only) return out;
    for (const Instance& inst : multicommodity_instances()) {
        DynamicsConfig c = tight_config(kMulticommodityBeta, kFineDt);
        c.lyapunov_slack = std::numeric_limits<double>::infinity();
        out.push_back({run_dynamics(inst.graph, c), kMulticommodityBeta});
    }
    return out;
}

CheckResult lyapunov_descent() {
    CheckResult r;
    const auto start = Clock::now();
    double worst = -std::numeric_limits<double>::infinity();
    std::size_t steps = 0;
    for (const FineRun& run : fine_runs(false)) {
        const auto& trace = run.solution.lyapunov_trace;
        for (std::size_t k = 1; k < trace.size(); ++k) worst = std::max(worst, trace[k] - trace[k - 1]);
        steps += trace.size() - 1;
    }
    r.seconds = seconds_since(start);
    r.passed = steps > 0 && worst <= kLyapunovSlack;
    r.detail = std::to_string(steps) + " steps at dt 0.05, max increase " + sci(worst);
    return r;
}

CheckResult gradient_identity() {
    CheckResult r;
    const auto start = Clock::now();
    std::mt19937_64 rng(20240604);
    std::uniform_real_distribution<double> conductivity(0.2, 2.0);
    const std::vector<Instance> instances = multicommodity_instances();
    double worst = 0.0;
    std::size_t edges = 0;
    for (int s = 0; s < 5; ++s) {
        const TransportGraph& graph = instances[static_cast<std::size_t>(s)].graph;
        const double gamma = gamma_from_beta(s % 2 == 0 ? kMulticommodityBeta : kUnicommodityBeta).gamma;
        std::vector<double> x(graph.edge_count());
        for (double& v : x) v = conductivity(rng);
        const Potentials phi = solve_potentials(graph, x, 1e-14);
        const std::vector<double> grad = lyapunov_gradient(graph, x, phi, gamma);
        for (std::size_t e = 0; e < x.size(); ++e) {
            const double h = 1e-4 * x[e];
            std::vector<double> xp = x, xm = x;
            xp[e] += h;
            xm[e] -= h;
            const double lp = lyapunov(graph, xp, solve_potentials(graph, xp, 1e-14), gamma);
            const double lm = lyapunov(graph, xm, solve_potentials(graph, xm, 1e-14), gamma);
            const double fd = (lp - lm) / (2.0 * h);
            // Scale of the two terms of the derivative, so that components
            // where they cancel are not judged relative to zero.
            const Edge& edge = graph.edge(e);
            const double drop = (phi.row(static_cast<Eigen::Index>(edge.tail)) -
                                 phi.row(static_cast<Eigen::Index>(edge.head))).squaredNorm();
            const double scale = 0.5 * edge.cost * (std::pow(x[e], gamma - 1.0) + drop / (edge.cost * edge.cost));
            worst = std::max(worst, std::abs(grad[e] - fd) / scale);
            ++edges;
        }
    }
    r.seconds = seconds_since(start);
    r.passed = worst <= kGradientError;
    r.detail = std::to_string(edges) + " components, max relative error " + sci(worst);
    return r;
}

CheckResult conservation() {
    CheckResult r;
    const auto start = Clock::now();
    double worst = 0.0;
    std::size_t iterations = 0;
    for (const FineRun& run : fine_runs(false)) {
        for (const TraceRow& row : run.solution.trace) worst = std::max(worst, row.kirchhoff_residual);
        iterations += run.solution.trace.size();
    }
    for (const Instance& inst : unicommodity_instances()) {
        const OTSolution sol = run_dynamics(inst.graph, tight_config(kUnicommodityBeta, 0.5));
        for (const TraceRow& row : sol.trace) worst = std::max(worst, row.kirchhoff_residual);
        iterations += sol.trace.size();
    }
    r.seconds = seconds_since(start);
    r.passed = worst <= kKirchhoffTol;
    r.detail = std::to_string(iterations) + " iterates, max relative residual " + sci(worst);
    return r;
}

CheckResult stationarity() {
    CheckResult r;
    const auto start = Clock::now();
    double worst = 0.0;
    bool all_converged = true;
    for (const Instance& inst : unicommodity_instances()) {
        const OTSolution sol = run_dynamics(inst.graph, tight_config(kUnicommodityBeta, kFineDt));
        all_converged = all_converged && sol.converged;
        worst = std::max(worst, sol.stationarity_residual);
    }
    r.seconds = seconds_since(start);
    r.passed = all_converged && worst <= kStationarityTol;
    r.detail = "max residual " + sci(worst) + " <= " + sci(kStationarityTol);
    return r;
}

CheckResult cost_identity() {
    CheckResult r;
    const auto start = Clock::now();
    double worst = 0.0;
    bool all_converged = true;
    auto check = [&](const TransportGraph& graph, double beta) {
        const OTSolution sol = run_dynamics(graph, tight_config(beta, kFineDt));
        all_converged = all_converged && sol.converged;
        const double target = sol.cost / gamma_from_beta(beta).Gamma;
        worst = std::max(worst, relative_gap(sol.lyapunov, target));
    };
    for (const Instance& inst : unicommodity_instances()) check(inst.graph, kUnicommodityBeta);
    for (const Instance& inst : multicommodity_instances()) check(inst.graph, kMulticommodityBeta);
    r.seconds = seconds_since(start);
    r.passed = all_converged && worst <= kIdentityTol;
    r.detail = "max |L - J/Gamma| relative " + sci(worst);
    return r;
}

// Ground cost recomputed from pixel coordinates and raw intensities.
std::vector<double> brute_force_costs(const RawImage& a, const RawImage& b, double theta) {
    const std::size_t m = a.pixel_count();
    const std::size_t n = b.pixel_count();
    std::vector<double> y(m * n), x(m * n);
    double ymax = 0.0, xmax = 0.0;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double dx = static_cast<double>(i % a.width) - static_cast<double>(j % b.width);
            const double dy = static_cast<double>(i / a.width) - static_cast<double>(j / b.width);
            double color = 0.0;
            for (std::size_t c = 0; c < a.channels; ++c)
                color += std::abs(a.intensities[i * a.channels + c] - b.intensities[j * b.channels + c]) / 255.0;
            y[i * n + j] = std::sqrt(dx * dx + dy * dy);
            x[i * n + j] = color;
            ymax = std::max(ymax, y[i * n + j]);
            xmax = std::max(xmax, color);
        }
    std::vector<double> cost(m * n);
    for (std::size_t k = 0; k < m * n; ++k) {
        const double yr = ymax > 0.0 ? y[k] / ymax : 0.0;
        const double xr = xmax > 0.0 ? x[k] / xmax : 0.0;
        cost[k] = (1.0 - theta) * (yr == 0.0 ? kSafetyDistance : yr) + theta * xr;
    }
    return cost;
}

CheckResult graph_construction() {
    CheckResult r;
    const auto start = Clock::now();
    std::mt19937_64 rng(20240608);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::size_t identity_failures = 0;
    std::size_t monotone_failures = 0;
    std::size_t skipped = 0;
    for (int d = 0; d < 50; ++d) {
        const RawImage a = random_image(rng, 4, 4, 3);
        const RawImage b = random_image(rng, 4, 4, 3);
        const MassTensor g = flatten_to_tensor(a);
        const MassTensor h = flatten_to_tensor(b);
        const double theta = unit(rng);
        const double tau = 0.05 + unit(rng);
        const std::vector<double> cost = brute_force_costs(a, b, theta);
        const auto boundary = std::any_of(cost.begin(), cost.end(), [&](double c) { return std::abs(c - tau) < 1e-9; });
        if (boundary) { // cannot separate from rounding; draws are continuous so this is rare
            ++skipped;
            continue;
        }
        const auto e12 = static_cast<std::size_t>(std::count_if(cost.begin(), cost.end(), [&](double c) { return c <= tau; }));
        const TransportGraph graph = build_graph(g, h, theta, tau);
        const std::size_t m = g.size(), n = h.size();
        if (graph.edge_count() != e12 + (m + n) + n || graph.pixel_info()->bipartite_edges != e12) ++identity_failures;

        // Nested bipartite edge sets over increasing tau.
        std::vector<std::pair<std::size_t, std::size_t>> previous;
        for (double t : {0.1, 0.2, 0.4, 0.8, 1.6}) {
            std::vector<std::pair<std::size_t, std::size_t>> current;
            const TransportGraph trimmed = build_graph(g, h, theta, t);
            for (const Edge& e : trimmed.edges())
                if (e.kind == EdgeKind::Bipartite) current.emplace_back(e.tail, e.head);
            std::sort(current.begin(), current.end());
            if (!std::includes(current.begin(), current.end(), previous.begin(), previous.end())) ++monotone_failures;
            previous = std::move(current);
        }
    }
    r.seconds = seconds_since(start);
    r.passed = identity_failures == 0 && monotone_failures == 0;
    r.detail = std::to_string(identity_failures) + " edge-count mismatches, " + std::to_string(monotone_failures) +
               " non-nested trims, " + std::to_string(skipped) + " boundary draws skipped";
    return r;
}

Eigen::VectorXd unit_channel(const MassTensor& t, std::size_t a) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(t.size()));
    for (std::size_t i = 0; i < t.size(); ++i) v(static_cast<Eigen::Index>(i)) = t.mass[i * t.commodities + a];
    return v / v.sum();
}

CheckResult sinkhorn_checks() {
    CheckResult r;
    const auto start = Clock::now();
    std::mt19937_64 rng(20240609);
    double worst_violation = 0.0;
    double worst_gap = 0.0;
    bool all_converged = true;
    bool mean_exact = true;
    for (int i = 0; i < 10; ++i) {
        // Integer histograms with equal totals so the exact optimum is an integral flow.
        const RawImage a = random_image(rng, 4, 4, 1);
        long total = 0;
        for (double v : a.intensities) total += static_cast<long>(v);
        RawImage b(4, 4, 1);
        for (long k = 0; k < total; ++k) b.intensities[rng() % 16] += 1.0;
        const MassTensor g = flatten_to_tensor(a);
        const MassTensor h = flatten_to_tensor(b);

        SinkhornConfig config;
        config.epsilon = 1e-3;
        config.theta = 0.5;
        config.tau = 0.5;
        config.tol_marginal = kMarginalTol;
        const SinkhornResult s = sinkhorn_grayscale(g, h, config);
        all_converged = all_converged && s.converged;
        worst_violation = std::max(worst_violation, s.marginal_violation);

        const Eigen::MatrixXd cost = saturated_cost(g, h, config.theta, config.tau);
        FlowNetwork net;
        net.nodes = 32;
        for (double v : a.intensities) net.supply.push_back(static_cast<std::int64_t>(v));
        for (double v : b.intensities) net.supply.push_back(-static_cast<std::int64_t>(v));
        for (std::size_t p = 0; p < 16; ++p)
            for (std::size_t q = 0; q < 16; ++q)
                net.edges.push_back({p, 16 + q, cost(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(q)),
                                     EdgeKind::Bipartite});
        const double optimum = min_cost_flow(net).cost / static_cast<double>(total);
        worst_gap = std::max(worst_gap, relative_gap(s.transport, optimum));

        SinkhornConfig rgb_config = config;
        rgb_config.epsilon = 1e-2;
        const MassTensor gc = flatten_to_tensor(random_image(rng, 4, 4, 3));
        const MassTensor hc = flatten_to_tensor(random_image(rng, 4, 4, 3));
        const SinkhornRgbResult rgb = sinkhorn_rgb(gc, hc, rgb_config);
        const Eigen::MatrixXd rgb_cost = saturated_cost(gc, hc, rgb_config.theta, rgb_config.tau);
        double sum = 0.0;
        for (std::size_t c = 0; c < 3; ++c)
            sum += sinkhorn_channel(rgb_cost, unit_channel(gc, c), unit_channel(hc, c), rgb_config).cost;
        mean_exact = mean_exact && rgb.cost == sum / 3.0;
        all_converged = all_converged && rgb.converged;
        for (const SinkhornResult& ch : rgb.channels) worst_violation = std::max(worst_violation, ch.marginal_violation);
    }
    r.seconds = seconds_since(start);
    r.passed = all_converged && worst_violation <= kMarginalTol && worst_gap <= kSinkhornGap && mean_exact;
    r.detail = "violation " + sci(worst_violation) + ", transport gap " + sci(worst_gap) +
               (mean_exact ? ", RGB mean exact" : ", RGB mean differs");
    return r;
}

CheckResult homogeneity() {
    CheckResult r;
    const auto start = Clock::now();
    double worst = 0.0;
    bool all_converged = true;
    for (const Instance& inst : multicommodity_instances()) {
        DynamicsConfig c = tight_config(kMulticommodityBeta, 0.5);
        c.tol_cost = 1e-8;
        const OTSolution base = run_dynamics(inst.graph, c);
        const OTSolution scaled = run_dynamics(inst.graph.with_scaled_sources(2.0), c);
        all_converged = all_converged && base.converged && scaled.converged;
        const double expected = std::pow(2.0, c.Gamma()) * base.cost;
        worst = std::max(worst, relative_gap(scaled.cost, expected));
    }
    r.seconds = seconds_since(start);
    r.passed = all_converged && worst <= kHomogeneityTol;
    r.detail = "lambda 2, Gamma 1.2, max deviation " + sci(worst);
    return r;
}

// Three hue families whose members all map to the same grayscale value
// (bitwise) under the 0.2125/0.7154/0.0721 weights.
constexpr double kHueFamilies[3][3][3] = {
    {{190, 117, 72}, {218, 98, 178}, {253, 100, 55}}, // red
    {{1, 168, 123}, {36, 170, 0}, {64, 151, 106}},    // green
    {{29, 149, 229}, {92, 132, 212}, {155, 115, 195}}, // blue
};

LabeledDataset color_dataset(std::size_t per_class, std::size_t size, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const char* names[3] = {"red", "green", "blue"};
    LabeledDataset ds;
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < per_class; ++i) {
            RawImage img(size, size, 3, 0.0);
            for (std::size_t y = 1; y + 1 < size; ++y)
                for (std::size_t x = size / 4; x < size - size / 4; ++x) {
                    const auto& rgb = kHueFamilies[c][rng() % 3];
                    for (std::size_t a = 0; a < 3; ++a) img.at(x, y, a) = rgb[a];
                }
            char id[32];
            std::snprintf(id, sizeof(id), "%s/%02zu", names[c], i);
            ds.items.push_back({id, names[c], std::move(img)});
        }
    return ds;
}

CheckResult color_discrimination() {
    CheckResult r;
    const auto start = Clock::now();
    const LabeledDataset ds = color_dataset(10, 8, 20240611);
    const RawImage reference = to_grayscale(ds.items.front().image);
    bool gray_identical = true;
    for (const LabeledItem& item : ds.items)
        gray_identical = gray_identical && to_grayscale(item.image).intensities == reference.intensities;

    RunConfig config;
    config.theta = 0.5;
    config.tau = 0.25;
    config.k = 1;
    config.sigma = 0.0;
    PairwiseOptions options;
    options.skip_identical_ids = true;
    double acc[2] = {0.0, 0.0};
    std::size_t invalid = 0;
    const Method methods[2] = {Method::Multicommodity, Method::Unicommodity};
    for (int k = 0; k < 2; ++k) {
        config.method = methods[k];
        const CostMatrix costs = pairwise_costs(ds, ds, config, options);
        for (std::size_t i = 0; i < costs.rows(); ++i)
            for (std::size_t j = 0; j < costs.cols(); ++j) invalid += i != j && !costs.is_valid(i, j);
        acc[k] = accuracy(knn_leave_one_out(costs, ds.labels(), 1), ds.labels());
    }
    r.seconds = seconds_since(start);
    r.passed = gray_identical && invalid == 0 && acc[0] >= kMultiAccuracy && acc[1] <= kUniAccuracy &&
               r.seconds <= kColorBudget;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "multicommodity %.3f >= 0.95, unicommodity %.3f <= 0.45, %zu invalid%s", acc[0],
                  acc[1], invalid, gray_identical ? "" : ", grayscale images differ");
    r.detail = buf;
    return r;
}

std::string read_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

CheckResult determinism() {
    CheckResult r;
    const auto start = Clock::now();
    namespace fs = std::filesystem;
    std::string pattern = (fs::temp_directory_path() / "mcot-verify-XXXXXX").string();
    if (mkdtemp(pattern.data()) == nullptr) throw DataError("cannot create a temporary directory");
    const fs::path root(pattern);

    const LabeledDataset ds = color_dataset(4, 6, 20240612);
    for (const LabeledItem& item : ds.items) {
        fs::create_directories(root / "data" / item.label);
        write_pnm(item.image, root / "data" / (item.id + ".ppm"));
    }
    {
        std::ofstream grid(root / "grid.txt");
        grid << "theta = 0.25, 0.5\nsigma = 0\n";
    }
    std::ostringstream sink;
    std::string reports[2];
    int codes[2];
    for (int run = 0; run < 2; ++run) {
        CommandContext ctx;
        ctx.jobs = run == 0 ? 1 : 2;
        ctx.out = root / ("run" + std::to_string(run));
        codes[run] = cmd_crossval(root / "data", root / "grid.txt", 2, 7, ctx, sink);
        reports[run] = read_bytes(*ctx.out / "crossval.json");
    }
    std::error_code ec;
    fs::remove_all(root, ec);
    r.seconds = seconds_since(start);
    r.passed = codes[0] == kExitOk && codes[1] == kExitOk && !reports[0].empty() && reports[0] == reports[1];
    r.detail = std::to_string(reports[0].size()) + " byte report, " + (reports[0] == reports[1] ? "identical" : "differs");
    return r;
}

} // namespace

std::vector<AcceptanceCheck> acceptance_checks() {
    return {
        {1, "unicommodity oracle equivalence", unicommodity_oracle},
        {2, "convex multicommodity oracle equivalence", convex_oracle},
        {3, "Lyapunov descent", lyapunov_descent},
        {4, "gradient identity", gradient_identity},
        {5, "conservation", conservation},
        {6, "stationarity scaling", stationarity},
        {7, "cost identity at convergence", cost_identity},
        {8, "graph construction", graph_construction},
        {9, "Sinkhorn baseline", sinkhorn_checks},
        {10, "homogeneity", homogeneity},
        {11, "synthetic color discrimination", color_discrimination},
        {12, "crossval determinism", determinism},
    };
}

std::vector<CheckResult> run_acceptance(const std::vector<int>& only,
                                        const std::function<void(const CheckResult&)>& on_result) {
    std::vector<CheckResult> results;
    for (const AcceptanceCheck& check : acceptance_checks()) {
        if (!only.empty() && std::find(only.begin(), only.end(), check.id) == only.end()) continue;
        CheckResult res;
        const auto start = Clock::now();
        try {
            res = check.run();
        } catch (const std::exception& ex) {
            res.passed = false;
            res.detail = std::string("exception: ") + ex.what();
            res.seconds = seconds_since(start);
        }
        res.id = check.id;
        res.name = check.name;
        if (on_result) on_result(res);
        results.push_back(std::move(res));
    }
    return results;
}

std::string format_check(const CheckResult& result) {
    char time[32];
    std::snprintf(time, sizeof(time), "%.2fs", result.seconds);
    return std::string(result.passed ? "[PASS] " : "[FAIL] ") + std::to_string(result.id) + " " + result.name + " (" +
           result.detail + ") " + time;
}

} // namespace mcot
