#include "sketchloom/ablation.hpp"

#include <cctype>
#include <fstream>
#include <set>

#include "sketchloom/config.hpp"
#include "sketchloom/errors.hpp"

namespace sketchloom {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

bool safe_name(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') return false;
    return true;
}

}  // namespace

void AblationSpec::validate() const {
    if (variants.empty()) throw ConfigError("ablation spec has no variants");
    if (runs_per_variant < 1) throw ConfigError("runs_per_variant must be >= 1");
    std::set<std::string> seen;
    for (const auto& v : variants) {
        if (!safe_name(v.name))
            throw ConfigError("variant name '" + v.name +
                              "' must be non-empty [A-Za-z0-9_-] (it names a directory)");
        if (!seen.insert(v.name).second)
            throw ConfigError("duplicate variant name '" + v.name + "'");
        if (!v.overrides.is_object())
            throw ConfigError("variant '" + v.name + "' overrides must be an object");
    }
}

AblationSpec load_ablation_spec(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open ablation spec " + path.string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw FormatError("ablation spec " + path.string() + " is not valid JSON");
    if (!j.is_object() || !j.contains("variants") || !j["variants"].is_array())
        throw FormatError("ablation spec needs a top-level \"variants\" array");

    AblationSpec spec;
    for (const auto& jv : j["variants"]) {
        if (!jv.is_object() || !jv.contains("name") || !jv["name"].is_string())
            throw FormatError("each variant needs a string \"name\"");
        AblationVariant v;
        v.name = jv["name"].get<std::string>();
        v.overrides = jv.value("overrides", json::object());
        spec.variants.push_back(std::move(v));
    }
    if (j.contains("runs_per_variant")) {
        if (!j["runs_per_variant"].is_number_integer())
            throw FormatError("runs_per_variant must be an integer");
        spec.runs_per_variant = j["runs_per_variant"].get<int>();
    }
    if (j.contains("base_seed")) {
        if (!j["base_seed"].is_number_integer())
            throw FormatError("base_seed must be an integer");
        spec.base_seed = j["base_seed"].get<uint64_t>();
    }
    if (j.contains("expected_trend"))
        spec.expected_trend = j["expected_trend"].get<std::string>();
    if (j.contains("trend_hi")) spec.trend_hi = j["trend_hi"].get<std::string>();
    if (j.contains("trend_lo")) spec.trend_lo = j["trend_lo"].get<std::string>();
    spec.validate();
    return spec;
}

AblationSpec builtin_preset(const std::string& name) {
    AblationSpec spec;
    if (name == "batch-size") {
        spec.variants = {{"batch_1", {{"train.batch_size", 1}}},
                         {"batch_5", {{"train.batch_size", 5}}}};
        spec.expected_trend =
            "batch_1 is expected to end at or below batch_5 on final mean FID: instance "
            "norm already acts per sample, so a larger batch only averages gradients. "
            "Recorded for the reader, not asserted.";
        spec.trend_hi = "batch_5";
        spec.trend_lo = "batch_1";
    } else if (name == "spectral-norm") {
        spec.variants = {{"sn_generator", {{"train.spectral_norm_target", "generator"}}},
                         {"sn_none", {{"train.spectral_norm_target", "none"}}}};
        spec.expected_trend =
            "sn_generator is expected to show a tighter confidence band (steadier "
            "training) than sn_none. Recorded for the reader, not asserted.";
    } else if (name == "d-steps") {
        for (int k : {2, 4, 6}) {
            const std::string kk = std::to_string(k);
            spec.variants.push_back({"d" + kk + "_sn",
                                     {{"train.d_steps_per_g_step", k},
                                      {"train.spectral_norm_target", "generator"}}});
            spec.variants.push_back({"d" + kk + "_nosn",
                                     {{"train.d_steps_per_g_step", k},
                                      {"train.spectral_norm_target", "none"}}});
        }
        spec.expected_trend =
            "extra discriminator steps keep the discriminator ahead of the generator; "
            "gains are expected to flatten past 2 steps. Recorded for the reader, not "
            "asserted.";
    } else if (name == "lr-policy") {
        spec.variants = {{"lr_cyclical", {{"train.lr_policy", "cyclical_triangular"}}},
                         {"lr_constant", {{"train.lr_policy", "constant"}}}};
        spec.expected_trend =
            "the cyclical schedule is expected to avoid the late-run oscillation a "
            "constant max rate shows. Recorded for the reader, not asserted.";
    } else {
        throw ConfigError("unknown ablation preset '" + name +
                          "' (have batch-size, spectral-norm, d-steps, lr-policy)");
    }
    spec.validate();
    return spec;
}

AblationReport run_ablation(const AblationSpec& spec, const json& base_config,
                            const DatasetManifest& manifest, const fs::path& out_dir,
                            bool keep_checkpoints) {
    spec.validate();
    const json resolved = resolve_config(base_config);
    fs::create_directories(out_dir);

    AblationReport report;
    std::vector<evaluation::AggregatedSeries> all_aggs;

    for (const auto& variant : spec.variants) {
        AblationVariantResult result;
        result.name = variant.name;

        json cfg = resolved;
        for (auto it = variant.overrides.begin(); it != variant.overrides.end(); ++it)
            apply_dotted_override(cfg, it.key(), it.value().dump());

        for (int i = 0; i < spec.runs_per_variant; ++i) {
            cfg["train"]["seed"] = spec.base_seed + static_cast<uint64_t>(i);
            const fs::path run_dir = out_dir / variant.name / ("run_" + std::to_string(i));
            try {
                TrainSetup setup = setup_from_config(cfg);
                TrainHooks hooks;
                hooks.write_checkpoints = keep_checkpoints;
                RunArtifacts art = train(setup, manifest, run_dir, hooks);
                result.runs.push_back(std::move(art.fid_series));
            } catch (const std::exception& e) {
                report.failures.push_back({variant.name, i, e.what()});
            }
        }

        if (result.runs.size() >= 2) {
            evaluation::AggregatedSeries agg = evaluation::aggregate_runs(result.runs, 0.99);
            agg.variant = variant.name;
            const fs::path csv = out_dir / (variant.name + ".csv");
            evaluation::emit_series_csv({agg}, csv);
            result.csv_path = csv.string();
            all_aggs.push_back(agg);
            result.aggregate = std::move(agg);
        } else {
            result.aggregate_error = "only " + std::to_string(result.runs.size()) + " of " +
                                     std::to_string(spec.runs_per_variant) +
                                     " runs finished; need two to aggregate";
        }
        report.variants.push_back(std::move(result));
    }

    if (!all_aggs.empty()) {
        const fs::path svg = out_dir / "combined.svg";
        evaluation::emit_series_svg(all_aggs, svg);
        report.svg_path = svg.string();
    }

    json summary;
    summary["base_seed"] = spec.base_seed;
    summary["runs_per_variant"] = spec.runs_per_variant;
    summary["confidence"] = 0.99;
    summary["variants"] = json::array();
    for (size_t vi = 0; vi < report.variants.size(); ++vi) {
        const auto& r = report.variants[vi];
        json jv;
        jv["name"] = r.name;
        jv["overrides"] = spec.variants[vi].overrides;
        jv["n_runs"] = static_cast<int>(r.runs.size());
        if (r.aggregate) {
            jv["stages"] = r.aggregate->stages;
            jv["mean_fid"] = r.aggregate->mean_fid;
            jv["ci_half_width"] = r.aggregate->ci_half_width;
            jv["final"] = {{"stage", r.aggregate->stages.back()},
                           {"mean_fid", r.aggregate->mean_fid.back()},
                           {"ci_half_width", r.aggregate->ci_half_width.back()}};
        } else {
            jv["error"] = r.aggregate_error;
        }
        summary["variants"].push_back(std::move(jv));
    }
    if (!report.failures.empty()) {
        summary["failures"] = json::array();
        for (const auto& f : report.failures)
            summary["failures"].push_back(
                {{"variant", f.variant}, {"run_index", f.run_index}, {"message", f.message}});
    }
    if (!spec.expected_trend.empty()) summary["expected_trend"] = spec.expected_trend;

    if (!spec.trend_hi.empty() && !spec.trend_lo.empty()) {
        const evaluation::AggregatedSeries* hi = nullptr;
        const evaluation::AggregatedSeries* lo = nullptr;
        for (const auto& r : report.variants) {
            if (!r.aggregate) continue;
            if (r.name == spec.trend_hi) hi = &*r.aggregate;
            if (r.name == spec.trend_lo) lo = &*r.aggregate;
        }
        if (hi && lo && hi->stages == lo->stages) {
            bool holds = true;
            for (size_t i = 0; i < hi->stages.size(); ++i)
                if (hi->mean_fid[i] < lo->mean_fid[i]) holds = false;
            summary["trend_check"] = {
                {"expectation",
                 spec.trend_hi + " mean FID >= " + spec.trend_lo + " mean FID at every stage"},
                {"holds", holds},
                {"asserted", false}};
        }
    }

    const fs::path summary_path = out_dir / "summary.json";
    std::ofstream out(summary_path, std::ios::binary | std::ios::trunc);
    out << summary.dump(2) << "\n";
    if (!out) throw TrainingError("cannot write " + summary_path.string());
    report.summary_path = summary_path.string();
    return report;
}

}  // namespace sketchloom
