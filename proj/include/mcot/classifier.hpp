#pragma once

#include "mcot/config.hpp"
#include "mcot/image.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mcot {

struct LabeledItem {
    std::string id;
    std::string label;
    RawImage image;
};

struct LabeledDataset {
    std::vector<LabeledItem> items;

    /// Sorted, unique labels.
    [[nodiscard]] std::vector<std::string> classes() const;
    [[nodiscard]] std::vector<std::string> labels() const;
    [[nodiscard]] std::size_t size() const { return items.size(); }
    [[nodiscard]] LabeledDataset subset(const std::vector<std::size_t>& indices) const;
};

/// Loads `<root>/<class>/<image>` (PNG/JPEG/PPM/PGM). Items are ordered by
/// class then file name; ids are `<class>/<file>`. Throws DataError on a
/// missing root, an empty class folder or an empty dataset.
LabeledDataset load_dataset(const std::filesystem::path& root);

/// Pooling, smoothing and grayscale conversion for one method; returns the
/// tensor that enters the solver.
MassTensor preprocess(const RawImage& image, const RunConfig& config);

struct PairCost {
    double cost = std::numeric_limits<double>::infinity();
    bool valid = false;
    std::size_t iterations = 0;
    std::string error;
};

/// Cost between two already preprocessed tensors with the configured method.
PairCost pair_cost(const MassTensor& g, const MassTensor& h, const RunConfig& config);

struct CostMatrix {
    std::vector<std::string> row_ids;
    std::vector<std::string> col_ids;
    std::vector<double> entries; // row-major
    std::vector<bool> valid;
    RunConfig config;

    [[nodiscard]] std::size_t rows() const { return row_ids.size(); }
    [[nodiscard]] std::size_t cols() const { return col_ids.size(); }
    [[nodiscard]] double at(std::size_t r, std::size_t c) const { return entries[r * cols() + c]; }
    [[nodiscard]] bool is_valid(std::size_t r, std::size_t c) const { return valid[r * cols() + c]; }
    /// Entry used for ranking: +inf when invalid.
    [[nodiscard]] double ranking_cost(std::size_t r, std::size_t c) const;
};

struct PairwiseOptions {
    std::size_t jobs = 1;
    /// Skip entries where the row and column ids coincide (leave-one-out).
    bool skip_identical_ids = false;
};

/// Costs between every test item (rows) and train item (columns), computed
/// over a bounded worker pool. Failed pairs are marked invalid.
CostMatrix pairwise_costs(const LabeledDataset& test, const LabeledDataset& train, const RunConfig& config,
                          const PairwiseOptions& options = {});

/// Same, starting from preprocessed tensors.
CostMatrix pairwise_costs(const std::vector<MassTensor>& test, const std::vector<std::string>& test_ids,
                          const std::vector<MassTensor>& train, const std::vector<std::string>& train_ids,
                          const RunConfig& config, const PairwiseOptions& options = {});

/// Majority vote over the k smallest-cost columns (ties in cost by column
/// order). A tied vote goes to the class with the smaller mean neighbor
/// cost, then to the smaller label.
std::vector<std::string> knn_predict(const CostMatrix& costs, const std::vector<std::string>& train_labels,
                                     std::size_t k);

/// k-NN on a square matrix over one set with each row's own column excluded.
std::vector<std::string> knn_leave_one_out(const CostMatrix& costs, const std::vector<std::string>& labels,
                                           std::size_t k);

double accuracy(const std::vector<std::string>& predictions, const std::vector<std::string>& truth);

struct ClassSensitivity {
    std::string label;
    std::size_t true_positives = 0;
    std::size_t false_negatives = 0;
    double sensitivity = 0.0;
};

/// One-vs-all TP / (TP + FN); throws DataError when the class is absent from `truth`.
double sensitivity(const std::vector<std::string>& predictions, const std::vector<std::string>& truth,
                   const std::string& label);

std::vector<ClassSensitivity> sensitivity_report(const std::vector<std::string>& predictions,
                                                 const std::vector<std::string>& truth);

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
};

struct FoldAssignment {
    std::vector<Split> splits;
    std::vector<std::string> underpopulated_classes; // fewer items than folds
};

/// Per-class shuffle (64-bit Mersenne Twister from `seed`) followed by
/// round-robin dealing into folds, so each class is spread proportionally.
FoldAssignment stratified_kfold(const std::vector<std::string>& labels, std::size_t folds, std::uint64_t seed);

struct GridResult {
    std::size_t config_index = 0;
    RunConfig config;
    std::size_t k = 1;
    std::vector<double> fold_accuracies;
    double mean_accuracy = 0.0;
    std::size_t invalid_entries = 0;
    std::string error;
};

struct GridOptions {
    std::vector<std::size_t> k_values; // empty: 1..20 clipped to the train size
    std::size_t jobs = 1;
    std::optional<std::filesystem::path> cache_dir; // per-config cost matrices for resuming
    std::function<void(const std::string&)> progress;
};

/// Cross-validated accuracy of every (config, k) pair, best first. Ranking is
/// by mean accuracy, then config index, then k.
std::vector<GridResult> grid_search(const LabeledDataset& dataset, const std::vector<RunConfig>& grid,
                                    std::size_t folds, std::uint64_t seed, const GridOptions& options = {});

/// Long-format CSV `test_id,train_id,cost,valid` plus `<path>.json` sidecar.
void write_cost_matrix(const CostMatrix& costs, const std::filesystem::path& path);
CostMatrix read_cost_matrix(const std::filesystem::path& path);

nlohmann::ordered_json grid_report_json(const std::vector<GridResult>& results, std::size_t folds,
                                        std::uint64_t seed);

} // namespace mcot
