#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sketchloom/dataset.hpp"
#include "sketchloom/evaluation.hpp"
#include "sketchloom/training.hpp"

namespace sketchloom {

struct AblationVariant {
    std::string name;                // also the run directory name
    nlohmann::json overrides;       // dotted config key -> value
};

struct AblationSpec {
    std::vector<AblationVariant> variants;
    int runs_per_variant = 10;
    uint64_t base_seed = 1;
    // Qualitative expectation recorded in summary.json for a human reader;
    // never asserted by code.
    std::string expected_trend;
    // When both named variants aggregate, summary.json also records whether
    // trend_hi's mean FID sits at or above trend_lo's at every stage. Still
    // report-only: seed noise at desk scale can flip it.
    std::string trend_hi, trend_lo;

    void validate() const;  // throws ConfigError
};

// Parses {"variants":[{"name":..., "overrides":{...}}, ...],
//         "runs_per_variant": N, "base_seed": S}.
AblationSpec load_ablation_spec(const std::filesystem::path& path);

// Presets: batch-size, spectral-norm, d-steps, lr-policy.
AblationSpec builtin_preset(const std::string& name);

struct AblationRunFailure {
    std::string variant;
    int run_index = 0;
    std::string message;
};

struct AblationVariantResult {
    std::string name;
    std::vector<evaluation::RunSeries> runs;  // the runs that finished
    std::optional<evaluation::AggregatedSeries> aggregate;
    std::string aggregate_error;  // set when fewer than two runs survived
    std::string csv_path;         // empty when there was nothing to aggregate
};

struct AblationReport {
    std::vector<AblationVariantResult> variants;
    std::vector<AblationRunFailure> failures;
    std::string svg_path;
    std::string summary_path;
};

// Trains runs_per_variant runs per variant (run i uses seed base_seed + i, the
// same seeds across variants so the comparison is paired), aggregates each
// variant's FID series with a 99% confidence band, and writes
// out_dir/<variant>.csv, out_dir/combined.svg and out_dir/summary.json.
// A run that throws is recorded as a failure and the sweep continues; raw
// per-run series stay on disk either way under out_dir/<variant>/run_<i>.
// Per-run checkpoints are dead weight in a sweep so they are skipped unless
// keep_checkpoints is set.
AblationReport run_ablation(const AblationSpec& spec, const nlohmann::json& base_config,
                            const DatasetManifest& manifest,
                            const std::filesystem::path& out_dir,
                            bool keep_checkpoints = false);

}  // namespace sketchloom
