#pragma once

#include "mcot/config.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mcot {

enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,
    kExitData = 2,
    kExitNonConvergence = 3,
    kExitVerification = 4,
};

struct CommandContext {
    RunConfig config;
    std::size_t jobs = 1;
    std::optional<std::filesystem::path> out; // output directory; stdout only when absent
    std::ostream* log = nullptr;              // progress messages
};

/// Cost between two image files. Prints a JSON report; with `out`, also
/// writes distance.json and, for dynamics methods, trace.csv.
int cmd_distance(const std::filesystem::path& a, const std::filesystem::path& b, const CommandContext& ctx,
                 std::ostream& stdout_stream);

/// k-NN of every test image against the training set. With `out`, writes
/// costs.csv, predictions.csv and classify.json.
int cmd_classify(const std::filesystem::path& train_dir, const std::filesystem::path& test_dir,
                 const CommandContext& ctx, std::ostream& stdout_stream);

/// Stratified k-fold grid search. Writes crossval.json to `out` and keeps the
/// per-config cost matrices under `out/cache` so an interrupted sweep resumes.
int cmd_crossval(const std::filesystem::path& data_dir, const std::filesystem::path& grid_file, std::size_t folds,
                 std::uint64_t seed, const CommandContext& ctx, std::ostream& stdout_stream);

struct BenchPair {
    std::string name;
    std::filesystem::path a;
    std::filesystem::path b;
};

/// Reads `name,image_a,image_b` rows (header optional); relative paths are
/// taken from the file's directory.
std::vector<BenchPair> load_bench_pairs(const std::filesystem::path& path);

/// Times the dynamics and the Sinkhorn baseline on every (config, pair).
/// Writes bench.csv (one row per pair and config) and bench_summary.csv.
int cmd_bench(const std::vector<BenchPair>& pairs, const std::vector<RunConfig>& configs, const CommandContext& ctx,
              std::ostream& stdout_stream);

/// Writes the pixel network of a pair as `<out>/graph_edges.csv` and `<out>/graph_nodes.csv`.
int cmd_dump_graph(const std::filesystem::path& a, const std::filesystem::path& b, const CommandContext& ctx,
                   std::ostream& stdout_stream);

/// Runs the acceptance suite and prints one line per criterion.
int cmd_verify(std::ostream& stdout_stream, const std::vector<int>& only = {});

/// `<path>.json` with the command name, inputs and full config.
void write_sidecar(const std::filesystem::path& path, const std::string& command, const RunConfig& config,
                   const nlohmann::ordered_json& inputs = nlohmann::ordered_json::object());

} // namespace mcot
