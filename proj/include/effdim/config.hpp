#ifndef EFFDIM_CONFIG_HPP
#define EFFDIM_CONFIG_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>

namespace effdim {

/// Plain-text experiment configuration: one `key = value` per line, `#`
/// comments, dotted keys for stage overrides. Parsing is strict — unknown
/// keys are rejected so a typo cannot silently fall back to a default.
struct ExperimentConfig {
    std::string experiment;
    std::string out_dir = "run";
    std::uint64_t seed = 42;
    std::map<std::string, std::string> overrides;

    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
};

/// Parses and validates a config file. The EFFDIM_SEED environment variable,
/// when set, overrides the file's seed (CI sweeps).
ExperimentConfig load_experiment_config(const std::string& path);

/// Validates an in-memory key set (used by the CLI for --set overrides).
ExperimentConfig make_experiment_config(const std::string& experiment,
                                        const std::map<std::string, std::string>& keys);

const std::map<std::string, std::string>& known_config_keys(); // key -> description

} // namespace effdim

#endif
