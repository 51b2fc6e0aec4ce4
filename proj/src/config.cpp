#include "effdim/config.hpp"

#include "effdim/csv.hpp"
#include "effdim/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <set>
#include <sstream>

namespace effdim {

namespace {

const std::set<std::string> experiment_ids = {
    "msp_dimension_count",  "msp_phi_to_kappa", "msp_behavior_prediction",
    "msp_parameter_estimation", "toy_cae_levelsets", "toy_jsf",
    "compartmental_full",   "effectiveness_factor_regimes", "spiral_jsf",
};

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

} // namespace

const std::map<std::string, std::string>& known_config_keys() {
    static const std::map<std::string, std::string> keys = {
        {"experiment", "experiment id"},
        {"out_dir", "output directory"},
        {"seed", "root seed; every stage derives a named substream"},
        {"count", "primary dataset size"},
        {"test_count", "held-out sample count"},
        {"fraction", "sampling fraction or decades"},
        {"dmaps.kernel", "plain_input | plain_output | output_informed"},
        {"dmaps.epsilon", "kernel scale (0 = heuristic default)"},
        {"dmaps.epsilon_divisor", "divide the heuristic scale by this"},
        {"dmaps.c_exponent", "output-informed exponent c"},
        {"dmaps.alpha", "density normalization exponent, 0 or 1"},
        {"dmaps.k", "number of nontrivial eigenvectors"},
        {"select.r_cutoff", "non-harmonic residual cutoff"},
        {"gh.delta", "geometric harmonics truncation"},
        {"gh.epsilon_scale", "multiple of the median heuristic for the GH kernel"},
        {"fit.n_starts", "optimization dataset start count"},
        {"fit.decades", "log-uniform start spread"},
        {"fit.fraction", "uniform start spread"},
        {"fit.max_iterations", "optimizer iteration cap"},
        {"fit.gradient_tol", "convergence criterion on ||grad||_inf"},
        {"cae.epochs", "training epoch cap"},
        {"cae.plateau", "early-stop window"},
        {"cae.alpha_ortho", "conformality penalty weight"},
        {"cae.lr", "learning rate for all subnets"},
        {"cae.count", "training subsample size (0 = all)"},
        {"cae.seed_offset", "retrain with a shifted weight-init seed"},
        {"mlp.epochs", "regression epoch cap"},
        {"mlp.plateau", "regression early-stop window"},
        {"jsf.d", "per-set kernel eigenvector count"},
        {"jsf.m", "requested jointly smooth functions"},
        {"jsf.r", "common-span harmonics for uncommon extraction"},
    };
    return keys;
}

double ExperimentConfig::get_double(const std::string& key, double fallback) const {
    auto it = overrides.find(key);
    if (it == overrides.end()) return fallback;
    try {
        return std::stod(it->second);
    } catch (...) {
        fail(ErrorCode::config_error, "config key " + key + " is not a number: " + it->second);
    }
}

int ExperimentConfig::get_int(const std::string& key, int fallback) const {
    auto it = overrides.find(key);
    if (it == overrides.end()) return fallback;
    try {
        return std::stoi(it->second);
    } catch (...) {
        fail(ErrorCode::config_error, "config key " + key + " is not an integer: " + it->second);
    }
}

std::string ExperimentConfig::get_string(const std::string& key,
                                         const std::string& fallback) const {
    auto it = overrides.find(key);
    return it == overrides.end() ? fallback : it->second;
}

ExperimentConfig make_experiment_config(const std::string& experiment,
                                        const std::map<std::string, std::string>& keys) {
    require(experiment_ids.count(experiment) == 1, ErrorCode::config_error,
            "unknown experiment id: " + experiment);
    ExperimentConfig cfg;
    cfg.experiment = experiment;
    const auto& known = known_config_keys();
    for (const auto& [k, v] : keys) {
        require(known.count(k) == 1, ErrorCode::config_error,
                "unknown config key (strict mode): " + k);
        if (k == "experiment")
            continue;
        else if (k == "out_dir")
            cfg.out_dir = v;
        else if (k == "seed")
            cfg.seed = std::stoull(v);
        else
            cfg.overrides[k] = v;
    }
    if (const char* env = std::getenv("EFFDIM_SEED")) cfg.seed = std::strtoull(env, nullptr, 10);
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::istringstream is(read_text_file(path));
    std::map<std::string, std::string> keys;
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        require(eq != std::string::npos, ErrorCode::config_error,
                path + ":" + std::to_string(line_no) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        require(!key.empty() && !value.empty(), ErrorCode::config_error,
                path + ":" + std::to_string(line_no) + ": empty key or value");
        require(keys.emplace(key, value).second, ErrorCode::config_error,
                path + ":" + std::to_string(line_no) + ": duplicate key " + key);
    }
    require(keys.count("experiment") == 1, ErrorCode::config_error,
            path + ": missing required key 'experiment'");
    return make_experiment_config(keys.at("experiment"), keys);
}

} // namespace effdim
