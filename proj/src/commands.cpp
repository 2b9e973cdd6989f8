#include "mcot/commands.hpp"

#include "mcot/classifier.hpp"
#include "mcot/dynamics.hpp"
#include "mcot/error.hpp"
#include "mcot/sinkhorn.hpp"
#include "mcot/transport_graph.hpp"
#include "mcot/verification.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

namespace mcot {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

void note(const CommandContext& ctx, const std::string& message) {
    if (ctx.log) *ctx.log << message << '\n';
}

std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    return out;
}

void write_json(const fs::path& path, const nlohmann::ordered_json& j) {
    open_output(path) << j.dump(2) << '\n';
}

bool is_dynamics(Method m) { return m == Method::Multicommodity || m == Method::Unicommodity; }

nlohmann::ordered_json distance_report(const MassTensor& g, const MassTensor& h, const RunConfig& config,
                                       std::optional<OTSolution>& solution) {
    nlohmann::ordered_json j;
    j["method"] = to_string(config.method);
    if (is_dynamics(config.method)) {
        const TransportGraph graph = build_graph(g, h, config.theta, config.tau);
        DynamicsConfig dyn = config.dynamics();
        dyn.record_trace = true;
        solution = run_dynamics(graph, dyn);
        const OTSolution& s = *solution;
        j["cost"] = s.cost;
        j["converged"] = s.converged;
        j["status"] = to_string(s.status);
        j["iterations"] = s.iterations;
        j["rejected_steps"] = s.rejected_steps;
        j["lyapunov"] = s.lyapunov;
        j["kirchhoff_residual"] = s.kirchhoff_residual;
        j["max_kirchhoff_residual"] = s.max_kirchhoff_residual;
        j["stationarity_residual"] = s.stationarity_residual;
        j["nodes"] = graph.node_count();
        j["edges"] = graph.edge_count();
        j["bipartite_edges"] = graph.pixel_info()->bipartite_edges;
        j["active_edges"] = s.active_edges;
    } else if (config.method == Method::SinkhornRgb) {
        const SinkhornRgbResult s = sinkhorn_rgb(g, h, config.sinkhorn());
        j["cost"] = s.cost;
        j["converged"] = s.converged;
        nlohmann::ordered_json channels = nlohmann::ordered_json::array();
        for (const SinkhornResult& c : s.channels)
            channels.push_back({{"cost", c.cost},
                                {"transport", c.transport},
                                {"entropy", c.entropy},
                                {"marginal_violation", c.marginal_violation},
                                {"iterations", c.iterations}});
        j["channels"] = channels;
    } else {
        const SinkhornResult s = sinkhorn_grayscale(g, h, config.sinkhorn());
        j["cost"] = s.cost;
        j["converged"] = s.converged;
        j["transport"] = s.transport;
        j["entropy"] = s.entropy;
        j["marginal_violation"] = s.marginal_violation;
        j["iterations"] = s.iterations;
    }
    return j;
}

std::pair<MassTensor, MassTensor> load_pair(const fs::path& a, const fs::path& b, const RunConfig& config) {
    MassTensor g = preprocess(load_image(a), config);
    MassTensor h = preprocess(load_image(b), config);
    if (g.commodities != h.commodities) throw DataError("images have different channel counts");
    return {std::move(g), std::move(h)};
}

} // namespace

void write_sidecar(const fs::path& path, const std::string& command, const RunConfig& config,
                   const nlohmann::ordered_json& inputs) {
    nlohmann::ordered_json j;
    j["command"] = command;
    j["inputs"] = inputs;
    j["config"] = to_json(config);
    write_json(path.string() + ".json", j);
}

int cmd_distance(const fs::path& a, const fs::path& b, const CommandContext& ctx, std::ostream& stdout_stream) {
    ctx.config.validate();
    const auto [g, h] = load_pair(a, b, ctx.config);
    std::optional<OTSolution> solution;
    nlohmann::ordered_json report;
    report["image_a"] = a.string();
    report["image_b"] = b.string();
    report.update(distance_report(g, h, ctx.config, solution));
    report["config"] = to_json(ctx.config);
    stdout_stream << report.dump(2) << '\n';
    if (ctx.out) {
        fs::create_directories(*ctx.out);
        write_json(*ctx.out / "distance.json", report);
        if (solution) {
            write_trace_csv(*solution, *ctx.out / "trace.csv");
            write_sidecar(*ctx.out / "trace.csv", "distance", ctx.config,
                          {{"image_a", a.string()}, {"image_b", b.string()}});
        }
    }
    return report["converged"].get<bool>() ? kExitOk : kExitNonConvergence;
}

int cmd_classify(const fs::path& train_dir, const fs::path& test_dir, const CommandContext& ctx,
                 std::ostream& stdout_stream) {
    ctx.config.validate();
    // Both sets are loaded before anything is written.
    const LabeledDataset train = load_dataset(train_dir);
    const LabeledDataset test = load_dataset(test_dir);
    if (ctx.config.k > train.size()) throw ConfigError("k exceeds the number of training images");

    note(ctx, "computing " + std::to_string(test.size() * train.size()) + " pair costs");
    PairwiseOptions options;
    options.jobs = ctx.jobs;
    const CostMatrix costs = pairwise_costs(test, train, ctx.config, options);
    const std::vector<std::string> predictions = knn_predict(costs, train.labels(), ctx.config.k);
    const std::vector<std::string> truth = test.labels();

    nlohmann::ordered_json report;
    report["train_dir"] = train_dir.string();
    report["test_dir"] = test_dir.string();
    report["test_items"] = test.size();
    report["train_items"] = train.size();
    report["accuracy"] = accuracy(predictions, truth);
    nlohmann::ordered_json per_class = nlohmann::ordered_json::array();
    for (const ClassSensitivity& s : sensitivity_report(predictions, truth))
        per_class.push_back({{"label", s.label},
                             {"true_positives", s.true_positives},
                             {"false_negatives", s.false_negatives},
                             {"sensitivity", s.sensitivity}});
    report["sensitivity"] = per_class;
    report["invalid_entries"] = std::count(costs.valid.begin(), costs.valid.end(), false);
    report["config"] = to_json(ctx.config);
    stdout_stream << report.dump(2) << '\n';

    if (ctx.out) {
        fs::create_directories(*ctx.out);
        const nlohmann::ordered_json inputs = {{"train_dir", train_dir.string()}, {"test_dir", test_dir.string()}};
        write_cost_matrix(costs, *ctx.out / "costs.csv");
        {
            std::ofstream out = open_output(*ctx.out / "predictions.csv");
            out << "test_id,truth,prediction,nearest_train_id,nearest_cost\n";
            for (std::size_t r = 0; r < costs.rows(); ++r) {
                std::size_t best = 0;
                for (std::size_t c = 1; c < costs.cols(); ++c)
                    if (costs.ranking_cost(r, c) < costs.ranking_cost(r, best)) best = c;
                const double nearest = costs.ranking_cost(r, best);
                out << costs.row_ids[r] << ',' << truth[r] << ',' << predictions[r] << ',' << costs.col_ids[best] << ','
                    << (std::isfinite(nearest) ? format_number(nearest) : std::string("inf")) << '\n';
            }
        }
        write_sidecar(*ctx.out / "predictions.csv", "classify", ctx.config, inputs);
        write_json(*ctx.out / "classify.json", report);
    }
    return kExitOk;
}

int cmd_crossval(const fs::path& data_dir, const fs::path& grid_file, std::size_t folds, std::uint64_t seed,
                 const CommandContext& ctx, std::ostream& stdout_stream) {
    ctx.config.validate();
    const std::vector<RunConfig> grid = load_grid(grid_file, ctx.config);
    const LabeledDataset dataset = load_dataset(data_dir);

    GridOptions options;
    options.jobs = ctx.jobs;
    if (ctx.out) options.cache_dir = *ctx.out / "cache";
    if (ctx.log) options.progress = [&ctx](const std::string& m) { note(ctx, m); };
    const std::vector<GridResult> results = grid_search(dataset, grid, folds, seed, options);

    nlohmann::ordered_json report;
    report["data_dir"] = data_dir.string();
    report["grid_file"] = grid_file.string();
    report["items"] = dataset.size();
    report["configs"] = grid.size();
    const FoldAssignment assignment = stratified_kfold(dataset.labels(), folds, seed);
    report["underpopulated_classes"] = assignment.underpopulated_classes;
    report.update(grid_report_json(results, folds, seed));
    report["base_config"] = to_json(ctx.config);

    if (ctx.out) {
        fs::create_directories(*ctx.out);
        write_json(*ctx.out / "crossval.json", report);
    }
    if (!results.empty()) {
        const GridResult& best = results.front();
        stdout_stream << "best: config " << best.config_index << ", k " << best.k << ", mean accuracy "
                      << format_number(best.mean_accuracy) << '\n';
    }
    if (!ctx.out) stdout_stream << report.dump(2) << '\n';
    return kExitOk;
}

std::vector<BenchPair> load_bench_pairs(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read " + path.string());
    const fs::path base = path.parent_path();
    std::vector<BenchPair> pairs;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        std::vector<std::string> fields;
        std::istringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != 3) throw DataError("pairs file rows must be name,image_a,image_b: " + line);
        if (pairs.empty() && fields[0] == "name") continue;
        auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
        pairs.push_back({fields[0], resolve(fields[1]), resolve(fields[2])});
    }
    if (pairs.empty()) throw DataError("no pairs in " + path.string());
    return pairs;
}

int cmd_bench(const std::vector<BenchPair>& pairs, const std::vector<RunConfig>& configs, const CommandContext& ctx,
              std::ostream& stdout_stream) {
    for (const RunConfig& c : configs) c.validate();
    struct Row {
        std::size_t config = 0;
        std::string pair;
        double dyn_seconds = NAN, sink_seconds = NAN, dyn_cost = NAN, sink_cost = NAN;
        std::size_t dyn_iterations = 0, sink_iterations = 0, edges = 0, bipartite = 0, active = 0;
        bool dyn_converged = false, sink_converged = false;
        std::string error;
    };
    std::vector<Row> rows;
    for (std::size_t ci = 0; ci < configs.size(); ++ci) {
        const bool gray = configs[ci].method == Method::Unicommodity || configs[ci].method == Method::SinkhornGs;
        RunConfig dyn = configs[ci];
        dyn.method = gray ? Method::Unicommodity : Method::Multicommodity;
        RunConfig sink = configs[ci];
        sink.method = gray ? Method::SinkhornGs : Method::SinkhornRgb;
        for (const BenchPair& pair : pairs) {
            Row row;
            row.config = ci;
            row.pair = pair.name;
            try {
                const auto [g, h] = load_pair(pair.a, pair.b, dyn);
                auto start = Clock::now();
                const TransportGraph graph = build_graph(g, h, dyn.theta, dyn.tau);
                const OTSolution s = run_dynamics(graph, dyn.dynamics());
                row.dyn_seconds = std::chrono::duration<double>(Clock::now() - start).count();
                row.dyn_cost = s.cost;
                row.dyn_iterations = s.iterations;
                row.dyn_converged = s.converged;
                row.edges = graph.edge_count();
                row.bipartite = graph.pixel_info()->bipartite_edges;
                row.active = s.active_edges;

                const auto [gs, hs] = load_pair(pair.a, pair.b, sink);
                start = Clock::now();
                const PairCost pc = pair_cost(gs, hs, sink);
                row.sink_seconds = std::chrono::duration<double>(Clock::now() - start).count();
                row.sink_cost = pc.cost;
                row.sink_iterations = pc.iterations;
                row.sink_converged = pc.valid;
                if (!pc.error.empty()) row.error = pc.error;
            } catch (const std::exception& ex) {
                row.error = ex.what();
            }
            note(ctx, "config " + std::to_string(ci) + " pair " + pair.name + (row.error.empty() ? "" : ": " + row.error));
            rows.push_back(std::move(row));
        }
    }

    auto num = [](double v) { return std::isfinite(v) ? format_number(v) : std::string(); };
    std::ostringstream detail;
    detail << "config_index,pair,dynamics_seconds,sinkhorn_seconds,dynamics_cost,sinkhorn_cost,dynamics_iterations,"
              "sinkhorn_iterations,edges,bipartite_edges,active_edges,dynamics_converged,sinkhorn_converged,error\n";
    for (const Row& r : rows) {
        std::string error = r.error;
        std::replace(error.begin(), error.end(), ',', ';');
        detail << r.config << ',' << r.pair << ',' << num(r.dyn_seconds) << ',' << num(r.sink_seconds) << ','
               << num(r.dyn_cost) << ',' << num(r.sink_cost) << ',' << r.dyn_iterations << ',' << r.sink_iterations
               << ',' << r.edges << ',' << r.bipartite << ',' << r.active << ',' << r.dyn_converged << ','
               << r.sink_converged << ',' << error << '\n';
    }

    std::ostringstream summary;
    summary << "config_index,pairs,failures,dynamics_mean_seconds,dynamics_std_seconds,sinkhorn_mean_seconds,"
               "sinkhorn_std_seconds,mean_edges\n";
    for (std::size_t ci = 0; ci < configs.size(); ++ci) {
        std::vector<double> dyn, sink, edges;
        std::size_t failures = 0;
        for (const Row& r : rows) {
            if (r.config != ci) continue;
            if (!r.error.empty()) ++failures;
            if (std::isfinite(r.dyn_seconds)) dyn.push_back(r.dyn_seconds), edges.push_back(double(r.edges));
            if (std::isfinite(r.sink_seconds)) sink.push_back(r.sink_seconds);
        }
        auto mean = [](const std::vector<double>& v) {
            return v.empty() ? NAN : std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
        };
        auto stddev = [&](const std::vector<double>& v) {
            if (v.size() < 2) return v.empty() ? NAN : 0.0;
            const double mu = mean(v);
            double s = 0.0;
            for (double x : v) s += (x - mu) * (x - mu);
            return std::sqrt(s / double(v.size() - 1));
        };
        summary << ci << ',' << pairs.size() << ',' << failures << ',' << num(mean(dyn)) << ',' << num(stddev(dyn))
                << ',' << num(mean(sink)) << ',' << num(stddev(sink)) << ',' << num(mean(edges)) << '\n';
    }

    stdout_stream << summary.str();
    if (ctx.out) {
        fs::create_directories(*ctx.out);
        nlohmann::ordered_json inputs;
        nlohmann::ordered_json pair_list = nlohmann::ordered_json::array();
        for (const BenchPair& p : pairs) pair_list.push_back({{"name", p.name}, {"a", p.a.string()}, {"b", p.b.string()}});
        inputs["pairs"] = pair_list;
        nlohmann::ordered_json all = nlohmann::ordered_json::array();
        for (const RunConfig& c : configs) all.push_back(to_json(c));
        inputs["configs"] = all;
        open_output(*ctx.out / "bench.csv") << detail.str();
        open_output(*ctx.out / "bench_summary.csv") << summary.str();
        write_sidecar(*ctx.out / "bench.csv", "bench", configs.front(), inputs);
        write_sidecar(*ctx.out / "bench_summary.csv", "bench", configs.front(), inputs);
    }
    return kExitOk;
}

int cmd_dump_graph(const fs::path& a, const fs::path& b, const CommandContext& ctx, std::ostream& stdout_stream) {
    ctx.config.validate();
    if (!ctx.out) throw ConfigError("dump-graph requires --out");
    const auto [g, h] = load_pair(a, b, ctx.config);
    const TransportGraph graph = build_graph(g, h, ctx.config.theta, ctx.config.tau);
    fs::create_directories(*ctx.out);
    write_graph_csv(graph, *ctx.out / "graph");
    const nlohmann::ordered_json inputs = {{"image_a", a.string()}, {"image_b", b.string()}};
    write_sidecar(*ctx.out / "graph_edges.csv", "dump-graph", ctx.config, inputs);
    write_sidecar(*ctx.out / "graph_nodes.csv", "dump-graph", ctx.config, inputs);
    stdout_stream << "nodes " << graph.node_count() << ", edges " << graph.edge_count() << ", bipartite "
                  << graph.pixel_info()->bipartite_edges << '\n';
    return kExitOk;
}

int cmd_verify(std::ostream& stdout_stream, const std::vector<int>& only) {
    std::size_t passed = 0;
    const std::vector<CheckResult> results = run_acceptance(only, [&](const CheckResult& r) {
        stdout_stream << format_check(r) << std::endl;
    });
    for (const CheckResult& r : results) passed += r.passed ? 1 : 0;
    stdout_stream << passed << "/" << results.size() << " checks passed\n";
    return passed == results.size() ? kExitOk : kExitVerification;
}

} // namespace mcot
