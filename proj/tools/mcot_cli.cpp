// mcot: image similarity by multicommodity optimal transport.

#include "mcot/commands.hpp"
#include "mcot/error.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace {

struct ConfigFlags {
    std::vector<std::pair<std::string, std::optional<std::string>>> values;
    std::optional<std::string> config_file;
    std::size_t jobs = 1;
    std::optional<std::string> out;
    bool quiet = false;

    void attach(CLI::App& app) {
        static const char* keys[] = {"theta", "tau", "beta", "epsilon", "k", "dt", "tol-cost", "tol-linear",
                                     "tol-marginal", "max-iter", "sinkhorn-max-iter", "ms", "sigma", "method",
                                     "seed", "stopping", "x-init"};
        values.clear();
        values.reserve(std::size(keys));
        for (const char* key : keys) values.emplace_back(key, std::nullopt);
        for (auto& [key, value] : values) app.add_option("--" + key, value, "overrides the config file");
        app.add_option("--config", config_file, "flat key = value config file");
        app.add_option("--jobs", jobs, "worker threads for pair costs")->check(CLI::PositiveNumber);
        app.add_option("--out", out, "output directory");
        app.add_flag("--quiet", quiet, "suppress progress messages");
    }

    mcot::CommandContext context() const {
        mcot::CommandContext ctx;
        if (config_file) ctx.config = mcot::load_config(*config_file);
        for (const auto& [key, value] : values)
            if (value) ctx.config.set(key, *value);
        ctx.config.validate();
        ctx.jobs = jobs;
        if (out) ctx.out = *out;
        if (!quiet) ctx.log = &std::cerr;
        return ctx;
    }
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Image similarity by multicommodity optimal transport"};
    app.require_subcommand(1);

    std::string image_a, image_b;
    ConfigFlags distance_flags;
    auto* distance = app.add_subcommand("distance", "transport cost between two images");
    distance->add_option("image_a", image_a)->required();
    distance->add_option("image_b", image_b)->required();
    distance_flags.attach(*distance);

    std::string train_dir, test_dir;
    ConfigFlags classify_flags;
    auto* classify = app.add_subcommand("classify", "k-NN classification of a test set");
    classify->add_option("train_dir", train_dir)->required();
    classify->add_option("test_dir", test_dir)->required();
    classify_flags.attach(*classify);

    std::string data_dir, grid_file;
    std::size_t folds = 4;
    ConfigFlags crossval_flags;
    auto* crossval = app.add_subcommand("crossval", "stratified k-fold grid search");
    crossval->add_option("data_dir", data_dir)->required();
    crossval->add_option("grid_file", grid_file)->required();
    crossval->add_option("--folds", folds, "number of folds")->capture_default_str();
    crossval_flags.attach(*crossval);

    std::string pairs_file;
    std::optional<std::string> bench_grid;
    ConfigFlags bench_flags;
    auto* bench = app.add_subcommand("bench", "time dynamics and Sinkhorn on image pairs");
    bench->add_option("pairs_file", pairs_file, "CSV rows name,image_a,image_b")->required();
    bench->add_option("--grid", bench_grid, "grid file of configs; default is the single flag config");
    bench_flags.attach(*bench);

    std::string dump_a, dump_b;
    ConfigFlags dump_flags;
    auto* dump = app.add_subcommand("dump-graph", "write the pixel network of a pair as CSV");
    dump->add_option("image_a", dump_a)->required();
    dump->add_option("image_b", dump_b)->required();
    dump_flags.attach(*dump);

    std::vector<int> only;
    auto* verify = app.add_subcommand("verify", "run the acceptance checks");
    verify->add_option("--only", only, "check ids to run");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? mcot::kExitOk : mcot::kExitUsage;
    }

    try {
        if (*distance) return mcot::cmd_distance(image_a, image_b, distance_flags.context(), std::cout);
        if (*classify) return mcot::cmd_classify(train_dir, test_dir, classify_flags.context(), std::cout);
        if (*crossval) {
            const auto ctx = crossval_flags.context();
            return mcot::cmd_crossval(data_dir, grid_file, folds, ctx.config.seed, ctx, std::cout);
        }
        if (*bench) {
            const auto ctx = bench_flags.context();
            const auto configs = bench_grid ? mcot::load_grid(*bench_grid, ctx.config)
                                            : std::vector<mcot::RunConfig>{ctx.config};
            return mcot::cmd_bench(mcot::load_bench_pairs(pairs_file), configs, ctx, std::cout);
        }
        if (*dump) return mcot::cmd_dump_graph(dump_a, dump_b, dump_flags.context(), std::cout);
        if (*verify) return mcot::cmd_verify(std::cout, only);
    } catch (const mcot::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return mcot::kExitUsage;
    } catch (const mcot::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return mcot::kExitData;
    } catch (const mcot::SolverError& e) {
        std::cerr << "solver error: " << e.what() << '\n';
        return mcot::kExitNonConvergence;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return mcot::kExitData;
    }
    return mcot::kExitUsage;
}
