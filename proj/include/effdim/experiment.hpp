#ifndef EFFDIM_EXPERIMENT_HPP
#define EFFDIM_EXPERIMENT_HPP

#include "effdim/config.hpp"

#include <json.hpp>

#include <string>

namespace effdim {

/// Append-only record of an experiment run: per-stage artifacts (with content
/// hashes), wall times, and the built-in pass/fail checks with their measured
/// values and pinned thresholds.
struct RunManifest {
    nlohmann::json doc;

    bool all_checks_passed() const;
    void save(const std::string& dir) const; // manifest.json
    static RunManifest load(const std::string& dir);
};

/// Executes the experiment's stage pipeline (sample, simulate, embed, fit,
/// audit, report), writes every artifact under cfg.out_dir, and emits the
/// report files. Idempotent for a fixed resolved config and seed. Stage
/// failures surface as exceptions after the partial manifest is written.
RunManifest run_experiment(const ExperimentConfig& cfg);

/// Renders report.json, report.txt and the gnuplot scripts from a manifest
/// (also called at the end of run_experiment).
void emit_report(const RunManifest& manifest, const std::string& out_dir);

} // namespace effdim

#endif
