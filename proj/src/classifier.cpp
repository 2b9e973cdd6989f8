#include "mcot/classifier.hpp"

#include "mcot/dynamics.hpp"
#include "mcot/error.hpp"
#include "mcot/sinkhorn.hpp"
#include "mcot/transport_graph.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <thread>

namespace mcot {

std::vector<std::string> LabeledDataset::classes() const {
    std::set<std::string> unique;
    for (const auto& item : items) unique.insert(item.label);
    return {unique.begin(), unique.end()};
}

std::vector<std::string> LabeledDataset::labels() const {
    std::vector<std::string> out;
    out.reserve(items.size());
    for (const auto& item : items) out.push_back(item.label);
    return out;
}

LabeledDataset LabeledDataset::subset(const std::vector<std::size_t>& indices) const {
    LabeledDataset out;
    for (std::size_t i : indices) out.items.push_back(items.at(i));
    return out;
}

namespace {

bool is_image_file(const std::filesystem::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".ppm" || ext == ".pgm" || ext == ".pnm";
}

} // namespace

LabeledDataset load_dataset(const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(root)) throw DataError("dataset directory not found: " + root.string());
    std::vector<fs::path> class_dirs;
    for (const auto& entry : fs::directory_iterator(root))
        if (entry.is_directory()) class_dirs.push_back(entry.path());
    std::sort(class_dirs.begin(), class_dirs.end());

    LabeledDataset dataset;
    for (const auto& dir : class_dirs) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(dir))
            if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        if (files.empty()) throw DataError("empty class folder: " + dir.string());
        const std::string label = dir.filename().string();
        for (const auto& file : files)
            dataset.items.push_back({label + "/" + file.filename().string(), label, load_image(file)});
    }
    if (dataset.items.empty()) throw DataError("no class folders in " + root.string());
    return dataset;
}

MassTensor preprocess(const RawImage& image, const RunConfig& config) {
    RawImage img = config.ms > 1 ? average_pool(image, config.ms) : image;
    if (config.sigma > 0.0) img = gaussian_smooth(img, config.sigma);
    const bool grayscale = config.method == Method::Unicommodity || config.method == Method::SinkhornGs;
    if (grayscale && img.channels == 3) img = to_grayscale(img);
    if (config.method == Method::SinkhornRgb && img.channels != 3)
        throw DataError("sinkhorn_rgb requires 3 channels");
    return flatten_to_tensor(img);
}

PairCost pair_cost(const MassTensor& g, const MassTensor& h, const RunConfig& config) {
    PairCost out;
    try {
        switch (config.method) {
        case Method::Multicommodity:
        case Method::Unicommodity: {
            const TransportGraph graph = build_graph(g, h, config.theta, config.tau);
            const OTSolution sol = run_dynamics(graph, config.dynamics());
            out.cost = sol.cost;
            out.valid = sol.converged;
            out.iterations = sol.iterations;
            if (!sol.converged) out.error = std::string("dynamics: ") + to_string(sol.status);
            break;
        }
        case Method::SinkhornRgb: {
            const SinkhornRgbResult r = sinkhorn_rgb(g, h, config.sinkhorn());
            out.cost = r.cost;
            out.valid = r.converged;
            out.iterations = r.channels.empty() ? 0 : r.channels.front().iterations;
            if (!r.converged) out.error = "sinkhorn: max_iter reached";
            break;
        }
        case Method::SinkhornGs: {
            const SinkhornResult r = sinkhorn_grayscale(g, h, config.sinkhorn());
            out.cost = r.cost;
            out.valid = r.converged;
            out.iterations = r.iterations;
            if (!r.converged) out.error = "sinkhorn: max_iter reached";
            break;
        }
        }
    } catch (const std::exception& ex) {
        out.valid = false;
        out.error = ex.what();
    }
    if (out.valid && !(std::isfinite(out.cost) && out.cost >= 0.0)) {
        out.valid = false;
        out.error = "non-finite or negative cost";
    }
    return out;
}

double CostMatrix::ranking_cost(std::size_t r, std::size_t c) const {
    return is_valid(r, c) ? at(r, c) : std::numeric_limits<double>::infinity();
}

CostMatrix pairwise_costs(const std::vector<MassTensor>& test, const std::vector<std::string>& test_ids,
                          const std::vector<MassTensor>& train, const std::vector<std::string>& train_ids,
                          const RunConfig& config, const PairwiseOptions& options) {
    config.validate();
    CostMatrix out;
    out.row_ids = test_ids;
    out.col_ids = train_ids;
    out.config = config;
    const std::size_t rows = test.size();
    const std::size_t cols = train.size();
    out.entries.assign(rows * cols, std::numeric_limits<double>::infinity());
    std::vector<char> valid(rows * cols, 0);

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t idx = next++; idx < rows * cols; idx = next++) {
            const std::size_t r = idx / cols;
            const std::size_t c = idx % cols;
            if (options.skip_identical_ids && test_ids[r] == train_ids[c]) continue;
            const PairCost pc = pair_cost(test[r], train[c], config);
            out.entries[idx] = pc.cost;
            valid[idx] = pc.valid ? 1 : 0;
        }
    };
    const std::size_t jobs = std::max<std::size_t>(1, std::min(options.jobs, rows * cols));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    }
    out.valid.assign(valid.begin(), valid.end());
    return out;
}

CostMatrix pairwise_costs(const LabeledDataset& test, const LabeledDataset& train, const RunConfig& config,
                          const PairwiseOptions& options) {
    config.validate();
    std::vector<MassTensor> test_t, train_t;
    std::vector<std::string> test_ids, train_ids;
    for (const auto& item : test.items) {
        test_t.push_back(preprocess(item.image, config));
        test_ids.push_back(item.id);
    }
    for (const auto& item : train.items) {
        train_t.push_back(preprocess(item.image, config));
        train_ids.push_back(item.id);
    }
    return pairwise_costs(test_t, test_ids, train_t, train_ids, config, options);
}

namespace {

std::string vote(const std::vector<std::pair<double, std::size_t>>& neighbors,
                 const std::vector<std::string>& labels) {
    std::map<std::string, std::pair<std::size_t, double>> tally; // count, cost sum
    for (const auto& [cost, col] : neighbors) {
        auto& t = tally[labels[col]];
        ++t.first;
        t.second += cost;
    }
    const std::string* best = nullptr;
    std::size_t best_count = 0;
    double best_mean = 0.0;
    for (const auto& [label, t] : tally) { // std::map iterates in label order
        const double mean = t.second / static_cast<double>(t.first);
        const bool better = best == nullptr || t.first > best_count || (t.first == best_count && mean < best_mean);
        if (better) {
            best = &label;
            best_count = t.first;
            best_mean = mean;
        }
    }
    return *best;
}

std::vector<std::string> predict_rows(const CostMatrix& costs, const std::vector<std::string>& labels,
                                      std::size_t k, bool exclude_diagonal) {
    if (labels.size() != costs.cols()) throw DataError("knn_predict: label count differs from train columns");
    const std::size_t candidates = costs.cols() - (exclude_diagonal ? 1 : 0);
    if (k < 1 || k > candidates) throw ConfigError("k out of range: " + std::to_string(k));
    std::vector<std::string> out;
    out.reserve(costs.rows());
    std::vector<std::pair<double, std::size_t>> row;
    for (std::size_t r = 0; r < costs.rows(); ++r) {
        row.clear();
        for (std::size_t c = 0; c < costs.cols(); ++c) {
            if (exclude_diagonal && c == r) continue;
            row.emplace_back(costs.ranking_cost(r, c), c);
        }
        std::partial_sort(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(k), row.end());
        row.resize(k);
        out.push_back(vote(row, labels));
    }
    return out;
}

} // namespace

std::vector<std::string> knn_predict(const CostMatrix& costs, const std::vector<std::string>& train_labels,
                                     std::size_t k) {
    return predict_rows(costs, train_labels, k, false);
}

std::vector<std::string> knn_leave_one_out(const CostMatrix& costs, const std::vector<std::string>& labels,
                                           std::size_t k) {
    if (costs.rows() != costs.cols()) throw DataError("knn_leave_one_out: matrix must be square");
    return predict_rows(costs, labels, k, true);
}

double accuracy(const std::vector<std::string>& predictions, const std::vector<std::string>& truth) {
    if (predictions.size() != truth.size()) throw DataError("accuracy: length mismatch");
    if (truth.empty()) throw DataError("accuracy: empty input");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) correct += predictions[i] == truth[i] ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(truth.size());
}

double sensitivity(const std::vector<std::string>& predictions, const std::vector<std::string>& truth,
                   const std::string& label) {
    if (predictions.size() != truth.size()) throw DataError("sensitivity: length mismatch");
    std::size_t tp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] != label) continue;
        (predictions[i] == label ? tp : fn) += 1;
    }
    if (tp + fn == 0) throw DataError("sensitivity: class '" + label + "' absent from ground truth");
    return static_cast<double>(tp) / static_cast<double>(tp + fn);
}

std::vector<ClassSensitivity> sensitivity_report(const std::vector<std::string>& predictions,
                                                 const std::vector<std::string>& truth) {
    if (predictions.size() != truth.size()) throw DataError("sensitivity: length mismatch");
    std::map<std::string, ClassSensitivity> by_class;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        auto& entry = by_class[truth[i]];
        entry.label = truth[i];
        (predictions[i] == truth[i] ? entry.true_positives : entry.false_negatives) += 1;
    }
    std::vector<ClassSensitivity> out;
    for (auto& [label, entry] : by_class) {
        entry.sensitivity = static_cast<double>(entry.true_positives) /
                            static_cast<double>(entry.true_positives + entry.false_negatives);
        out.push_back(entry);
    }
    return out;
}

FoldAssignment stratified_kfold(const std::vector<std::string>& labels, std::size_t folds, std::uint64_t seed) {
    if (folds < 2) throw ConfigError("folds must be >= 2");
    if (labels.size() < folds) throw DataError("fewer items than folds");

    std::map<std::string, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

    std::mt19937_64 rng(seed);
    FoldAssignment out;
    std::vector<std::vector<std::size_t>> members(folds);
    std::size_t offset = 0; // continue dealing where the previous class stopped
    for (auto& [label, indices] : by_class) {
        if (indices.size() < folds) out.underpopulated_classes.push_back(label);
        // Fisher-Yates with explicit modulo draws so the permutation does not
        // depend on the standard library's distribution implementation.
        for (std::size_t i = indices.size(); i > 1; --i) std::swap(indices[i - 1], indices[rng() % i]);
        for (std::size_t i = 0; i < indices.size(); ++i) members[(offset + i) % folds].push_back(indices[i]);
        offset = (offset + indices.size()) % folds;
    }
    for (std::size_t f = 0; f < folds; ++f) {
        Split split;
        split.validation = members[f];
        std::sort(split.validation.begin(), split.validation.end());
        for (std::size_t g = 0; g < folds; ++g)
            if (g != f) split.train.insert(split.train.end(), members[g].begin(), members[g].end());
        std::sort(split.train.begin(), split.train.end());
        out.splits.push_back(std::move(split));
    }
    return out;
}

void write_cost_matrix(const CostMatrix& costs, const std::filesystem::path& path) {
    {
        std::ofstream out(path);
        if (!out) throw DataError("cannot write " + path.string());
        out << "test_id,train_id,cost,valid\n";
        for (std::size_t r = 0; r < costs.rows(); ++r)
            for (std::size_t c = 0; c < costs.cols(); ++c) {
                const bool ok = costs.is_valid(r, c);
                out << costs.row_ids[r] << ',' << costs.col_ids[c] << ','
                    << (ok ? format_number(costs.at(r, c)) : std::string("inf")) << ',' << (ok ? 1 : 0) << '\n';
            }
    }
    nlohmann::ordered_json sidecar;
    sidecar["method"] = to_string(costs.config.method);
    sidecar["config"] = to_json(costs.config);
    sidecar["rows"] = costs.row_ids;
    sidecar["cols"] = costs.col_ids;
    std::ofstream side(path.string() + ".json");
    if (!side) throw DataError("cannot write " + path.string() + ".json");
    side << sidecar.dump(2) << '\n';
}

CostMatrix read_cost_matrix(const std::filesystem::path& path) {
    std::ifstream side(path.string() + ".json");
    if (!side) throw DataError("missing sidecar " + path.string() + ".json");
    const nlohmann::json meta = nlohmann::json::parse(side);
    CostMatrix costs;
    costs.config = config_from_json(meta.at("config"));
    costs.row_ids = meta.at("rows").get<std::vector<std::string>>();
    costs.col_ids = meta.at("cols").get<std::vector<std::string>>();
    std::map<std::string, std::size_t> row_index, col_index;
    for (std::size_t i = 0; i < costs.rows(); ++i) row_index[costs.row_ids[i]] = i;
    for (std::size_t i = 0; i < costs.cols(); ++i) col_index[costs.col_ids[i]] = i;
    costs.entries.assign(costs.rows() * costs.cols(), std::numeric_limits<double>::infinity());
    costs.valid.assign(costs.rows() * costs.cols(), false);

    std::ifstream in(path);
    if (!in) throw DataError("cannot read " + path.string());
    std::string line;
    std::getline(in, line);
    if (line != "test_id,train_id,cost,valid") throw DataError("unexpected cost matrix header in " + path.string());
    std::size_t seen = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::istringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != 4) throw DataError("malformed cost matrix row: " + line);
        const auto r = row_index.find(fields[0]);
        const auto c = col_index.find(fields[1]);
        if (r == row_index.end() || c == col_index.end()) throw DataError("unknown id in cost matrix: " + line);
        const std::size_t idx = r->second * costs.cols() + c->second;
        costs.valid[idx] = fields[3] == "1";
        costs.entries[idx] = costs.valid[idx] ? std::stod(fields[2]) : std::numeric_limits<double>::infinity();
        ++seen;
    }
    if (seen != costs.rows() * costs.cols()) throw DataError("incomplete cost matrix " + path.string());
    return costs;
}

namespace {

CostMatrix cached_full_matrix(const LabeledDataset& dataset, const RunConfig& config, std::size_t index,
                              const GridOptions& options) {
    std::vector<std::string> ids;
    for (const auto& item : dataset.items) ids.push_back(item.id);

    std::optional<std::filesystem::path> cache;
    if (options.cache_dir) {
        std::filesystem::create_directories(*options.cache_dir);
        cache = *options.cache_dir / ("config_" + std::to_string(index) + ".csv");
        if (std::filesystem::exists(*cache)) {
            try {
                CostMatrix m = read_cost_matrix(*cache);
                if (to_json(m.config) == to_json(config) && m.row_ids == ids && m.col_ids == ids) {
                    if (options.progress) options.progress("config " + std::to_string(index) + ": resumed from cache");
                    return m;
                }
            } catch (const std::exception&) {
                // Stale or partial cache entry; recompute below.
            }
        }
    }
    if (options.progress) options.progress("config " + std::to_string(index) + ": computing " +
                                           std::to_string(ids.size() * (ids.size() - 1)) + " pairs");
    PairwiseOptions po;
    po.jobs = options.jobs;
    po.skip_identical_ids = true;
    CostMatrix m = pairwise_costs(dataset, dataset, config, po);
    if (cache) write_cost_matrix(m, *cache);
    return m;
}

CostMatrix submatrix(const CostMatrix& full, const std::vector<std::size_t>& rows,
                     const std::vector<std::size_t>& cols) {
    CostMatrix out;
    out.config = full.config;
    for (std::size_t r : rows) out.row_ids.push_back(full.row_ids[r]);
    for (std::size_t c : cols) out.col_ids.push_back(full.col_ids[c]);
    for (std::size_t r : rows)
        for (std::size_t c : cols) {
            out.entries.push_back(full.at(r, c));
            out.valid.push_back(full.is_valid(r, c));
        }
    return out;
}

} // namespace

std::vector<GridResult> grid_search(const LabeledDataset& dataset, const std::vector<RunConfig>& grid,
                                    std::size_t folds, std::uint64_t seed, const GridOptions& options) {
    if (grid.empty()) throw ConfigError("grid_search: empty grid");
    const std::vector<std::string> labels = dataset.labels();
    const FoldAssignment assignment = stratified_kfold(labels, folds, seed);

    std::size_t min_train = dataset.size();
    for (const Split& s : assignment.splits) min_train = std::min(min_train, s.train.size());
    std::vector<std::size_t> k_values = options.k_values;
    if (k_values.empty())
        for (std::size_t k = 1; k <= std::min<std::size_t>(20, min_train); ++k) k_values.push_back(k);

    std::vector<GridResult> results;
    for (std::size_t ci = 0; ci < grid.size(); ++ci) {
        CostMatrix full;
        std::string error;
        try {
            grid[ci].validate();
            full = cached_full_matrix(dataset, grid[ci], ci, options);
        } catch (const std::exception& ex) {
            error = ex.what();
        }
        for (std::size_t k : k_values) {
            GridResult res;
            res.config_index = ci;
            res.config = grid[ci];
            res.config.k = k;
            res.k = k;
            res.error = error;
            if (error.empty()) {
                if (k > min_train) {
                    res.error = "k exceeds train fold size";
                } else {
                    for (const Split& split : assignment.splits) {
                        const CostMatrix sub = submatrix(full, split.validation, split.train);
                        std::vector<std::string> train_labels, truth;
                        for (std::size_t i : split.train) train_labels.push_back(labels[i]);
                        for (std::size_t i : split.validation) truth.push_back(labels[i]);
                        res.invalid_entries += static_cast<std::size_t>(
                            std::count(sub.valid.begin(), sub.valid.end(), false));
                        res.fold_accuracies.push_back(accuracy(knn_predict(sub, train_labels, k), truth));
                    }
                    res.mean_accuracy = std::accumulate(res.fold_accuracies.begin(), res.fold_accuracies.end(), 0.0) /
                                        static_cast<double>(res.fold_accuracies.size());
                }
            }
            results.push_back(std::move(res));
        }
    }
    std::stable_sort(results.begin(), results.end(), [](const GridResult& a, const GridResult& b) {
        if (a.mean_accuracy != b.mean_accuracy) return a.mean_accuracy > b.mean_accuracy;
        if (a.config_index != b.config_index) return a.config_index < b.config_index;
        return a.k < b.k;
    });
    return results;
}

nlohmann::ordered_json grid_report_json(const std::vector<GridResult>& results, std::size_t folds,
                                        std::uint64_t seed) {
    nlohmann::ordered_json report;
    report["folds"] = folds;
    report["seed"] = seed;
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (std::size_t rank = 0; rank < results.size(); ++rank) {
        const GridResult& r = results[rank];
        nlohmann::ordered_json row;
        row["rank"] = rank + 1;
        row["config_index"] = r.config_index;
        row["k"] = r.k;
        row["mean_accuracy"] = r.mean_accuracy;
        row["fold_accuracies"] = r.fold_accuracies;
        row["invalid_entries"] = r.invalid_entries;
        if (!r.error.empty()) row["error"] = r.error;
        row["config"] = to_json(r.config);
        rows.push_back(std::move(row));
    }
    report["results"] = std::move(rows);
    return report;
}

} // namespace mcot
