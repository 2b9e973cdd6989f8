#include "mcot/config.hpp"

#include "mcot/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace mcot {

const char* to_string(Method method) {
    switch (method) {
    case Method::Multicommodity: return "multicommodity";
    case Method::Unicommodity: return "unicommodity";
    case Method::SinkhornRgb: return "sinkhorn_rgb";
    case Method::SinkhornGs: return "sinkhorn_gs";
    }
    return "multicommodity";
}

Method parse_method(const std::string& text) {
    if (text == "multicommodity") return Method::Multicommodity;
    if (text == "unicommodity") return Method::Unicommodity;
    if (text == "sinkhorn_rgb") return Method::SinkhornRgb;
    if (text == "sinkhorn_gs") return Method::SinkhornGs;
    throw ConfigError("unknown method '" + text + "'");
}

void RunConfig::validate() const {
    if (!(theta >= 0.0 && theta <= 1.0)) throw ConfigError("theta must lie in [0,1]");
    if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
    gamma_from_beta(beta);
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
    if (k < 1) throw ConfigError("k must be >= 1");
    if (!(dt > 0.0)) throw ConfigError("dt must be > 0");
    if (!(tol_cost > 0.0)) throw ConfigError("tol_cost must be > 0");
    if (!(tol_linear > 0.0)) throw ConfigError("tol_linear must be > 0");
    if (!(tol_marginal > 0.0)) throw ConfigError("tol_marginal must be > 0");
    if (max_iter < 1) throw ConfigError("max_iter must be >= 1");
    if (sinkhorn_max_iter < 1) throw ConfigError("sinkhorn_max_iter must be >= 1");
    if (ms < 1) throw ConfigError("ms must be >= 1");
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("sigma must be >= 0 (0 disables smoothing)");
}

DynamicsConfig RunConfig::dynamics() const {
    DynamicsConfig d;
    d.beta = beta;
    d.dt = dt;
    d.min_dt = std::min(1e-3, dt);
    d.tol_cost = tol_cost;
    d.tol_linear = tol_linear;
    d.max_iter = max_iter;
    d.stopping = stopping;
    d.init = init;
    d.seed = seed;
    d.record_trace = false;
    return d;
}

SinkhornConfig RunConfig::sinkhorn() const {
    SinkhornConfig s;
    s.epsilon = epsilon;
    s.tol_marginal = tol_marginal;
    s.max_iter = sinkhorn_max_iter;
    s.tau = tau;
    s.theta = theta;
    return s;
}

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::string normalize_key(std::string key) {
    std::replace(key.begin(), key.end(), '_', '-');
    return key;
}

double to_double(const std::string& key, const std::string& value) {
    double out = 0.0;
    const auto* end = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc() || ptr != end) throw ConfigError("invalid number for " + key + ": '" + value + "'");
    return out;
}

std::uint64_t to_unsigned(const std::string& key, const std::string& value) {
    std::uint64_t out = 0;
    const auto* end = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc() || ptr != end) throw ConfigError("invalid integer for " + key + ": '" + value + "'");
    return out;
}

} // namespace

void RunConfig::set(const std::string& raw_key, const std::string& raw_value) {
    const std::string key = normalize_key(trim(raw_key));
    const std::string value = trim(raw_value);
    if (key == "theta") theta = to_double(key, value);
    else if (key == "tau") tau = to_double(key, value);
    else if (key == "beta") beta = to_double(key, value);
    else if (key == "epsilon") epsilon = to_double(key, value);
    else if (key == "k") k = to_unsigned(key, value);
    else if (key == "dt") dt = to_double(key, value);
    else if (key == "tol-cost") tol_cost = to_double(key, value);
    else if (key == "tol-linear") tol_linear = to_double(key, value);
    else if (key == "tol-marginal") tol_marginal = to_double(key, value);
    else if (key == "max-iter") max_iter = to_unsigned(key, value);
    else if (key == "sinkhorn-max-iter") sinkhorn_max_iter = to_unsigned(key, value);
    else if (key == "ms") ms = to_unsigned(key, value);
    else if (key == "sigma") sigma = to_double(key, value);
    else if (key == "method") method = parse_method(value);
    else if (key == "seed") seed = to_unsigned(key, value);
    else if (key == "stopping") {
        if (value == "relative") stopping = StoppingRule::Relative;
        else if (value == "absolute") stopping = StoppingRule::Absolute;
        else throw ConfigError("stopping must be 'relative' or 'absolute'");
    } else if (key == "x-init") {
        if (value == "ones") init = InitMode::Ones;
        else if (value == "uniform") init = InitMode::Uniform;
        else throw ConfigError("x-init must be 'ones' or 'uniform'");
    } else {
        throw ConfigError("unknown config key '" + raw_key + "'");
    }
}

std::map<std::string, std::string> parse_key_values(const std::string& text) {
    std::map<std::string, std::string> out;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
        out[normalize_key(trim(line.substr(0, eq)))] = trim(line.substr(eq + 1));
    }
    return out;
}

namespace {

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

RunConfig load_config(const std::filesystem::path& path) {
    RunConfig config;
    for (const auto& [key, value] : parse_key_values(read_text(path))) config.set(key, value);
    return config;
}

std::string format_number(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return ec == std::errc() ? std::string(buf, ptr) : std::to_string(v);
}

nlohmann::ordered_json to_json(const RunConfig& c) {
    nlohmann::ordered_json j;
    j["method"] = to_string(c.method);
    j["theta"] = c.theta;
    j["tau"] = c.tau;
    j["beta"] = c.beta;
    j["gamma"] = c.gamma();
    j["Gamma"] = c.Gamma();
    j["epsilon"] = c.epsilon;
    j["k"] = c.k;
    j["dt"] = c.dt;
    j["tol_cost"] = c.tol_cost;
    j["tol_linear"] = c.tol_linear;
    j["tol_marginal"] = c.tol_marginal;
    j["max_iter"] = c.max_iter;
    j["sinkhorn_max_iter"] = c.sinkhorn_max_iter;
    j["ms"] = c.ms;
    j["sigma"] = c.sigma;
    j["stopping"] = c.stopping == StoppingRule::Relative ? "relative" : "absolute";
    j["x_init"] = c.init == InitMode::Ones ? "ones" : "uniform";
    j["seed"] = c.seed;
    return j;
}

RunConfig config_from_json(const nlohmann::json& j) {
    RunConfig c;
    for (const auto& [key, value] : j.items()) {
        if (key == "gamma" || key == "Gamma") continue; // derived
        if (value.is_string()) c.set(key, value.get<std::string>());
        else if (value.is_number_unsigned() || value.is_number_integer()) c.set(key, std::to_string(value.get<std::uint64_t>()));
        else c.set(key, format_number(value.get<double>()));
    }
    c.validate();
    return c;
}

std::vector<RunConfig> parse_grid(const std::string& text, const RunConfig& base) {
    std::vector<std::pair<std::string, std::vector<std::string>>> axes;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("grid line " + std::to_string(line_no) + ": expected 'key = v1, v2, ...'");
        std::vector<std::string> values;
        std::istringstream list(line.substr(eq + 1));
        std::string item;
        while (std::getline(list, item, ',')) {
            item = trim(item);
            if (item.empty()) throw ConfigError("grid line " + std::to_string(line_no) + ": empty value");
            values.push_back(item);
        }
        if (values.empty()) throw ConfigError("grid line " + std::to_string(line_no) + ": no values");
        axes.emplace_back(trim(line.substr(0, eq)), std::move(values));
    }
    std::vector<RunConfig> grid{base};
    for (const auto& [key, values] : axes) {
        std::vector<RunConfig> next;
        for (const RunConfig& c : grid)
            for (const std::string& v : values) {
                RunConfig copy = c;
                copy.set(key, v);
                next.push_back(copy);
            }
        grid = std::move(next);
    }
    for (const RunConfig& c : grid) c.validate();
    return grid;
}

std::vector<RunConfig> load_grid(const std::filesystem::path& path, const RunConfig& base) {
    return parse_grid(read_text(path), base);
}

} // namespace mcot
