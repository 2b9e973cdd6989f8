#pragma once

#include "mcot/dynamics.hpp"
#include "mcot/sinkhorn.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace mcot {

enum class Method { Multicommodity, Unicommodity, SinkhornRgb, SinkhornGs };

const char* to_string(Method method);
Method parse_method(const std::string& text);

/// Every hyperparameter of one run. Gamma and gamma are always derived from beta.
struct RunConfig {
    double theta = 0.25;
    double tau = 0.125;
    double beta = 1.0;
    double epsilon = 0.01;
    std::size_t k = 1;
    double dt = 0.5;
    double tol_cost = 1e-3;
    double tol_linear = 1e-10;
    double tol_marginal = 1e-6;
    std::size_t max_iter = 10000;
    std::size_t sinkhorn_max_iter = 100000;
    std::size_t ms = 1;   // pooling mask; 1 leaves the image untouched
    double sigma = 0.5;   // Gaussian smoothing; 0 disables the filter
    Method method = Method::Multicommodity;
    StoppingRule stopping = StoppingRule::Relative;
    InitMode init = InitMode::Ones;
    std::uint64_t seed = 0;

    [[nodiscard]] double gamma() const { return gamma_from_beta(beta).gamma; }
    [[nodiscard]] double Gamma() const { return gamma_from_beta(beta).Gamma; }

    /// Throws ConfigError naming the first out-of-range field.
    void validate() const;

    [[nodiscard]] DynamicsConfig dynamics() const;
    [[nodiscard]] SinkhornConfig sinkhorn() const;

    /// Applies one `key = value` assignment; keys use the flag spelling
    /// with '-' or '_' (tol-cost, tol_cost).
    void set(const std::string& key, const std::string& value);
};

/// Parses flat `key = value` text; '#' starts a comment.
std::map<std::string, std::string> parse_key_values(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Canonical representation shared by sidecars and reports.
nlohmann::ordered_json to_json(const RunConfig& config);
RunConfig config_from_json(const nlohmann::json& j);

/// Grid file: each line `key = v1, v2, ...`; the grid is the Cartesian
/// product of all axes applied over `base`, in file order with the last axis
/// varying fastest.
std::vector<RunConfig> load_grid(const std::filesystem::path& path, const RunConfig& base);
std::vector<RunConfig> parse_grid(const std::string& text, const RunConfig& base);

/// Shortest round-trip decimal for a double.
std::string format_number(double v);

} // namespace mcot
