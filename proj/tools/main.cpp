// Command-line front end: prepare | train | eval | ablate | generate.
// Thin orchestration over the library; exit codes 0 ok, 1 runtime failure,
// 2 usage or config error.
#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sketchloom/ablation.hpp"
#include "sketchloom/config.hpp"
#include "sketchloom/dataset.hpp"
#include "sketchloom/errors.hpp"
#include "sketchloom/evaluation.hpp"
#include "sketchloom/image.hpp"
#include "sketchloom/nn/checkpoint.hpp"
#include "sketchloom/training.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sketchloom;

namespace {

void apply_threads_env() {
    const char* env = std::getenv("SKETCHLOOM_THREADS");
    if (!env || !*env) return;
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (*end != '\0' || n < 0)
        throw ConfigError("SKETCHLOOM_THREADS must be a non-negative integer (0 = auto), got '" +
                          std::string(env) + "'");
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(int(n));
#endif
    // 0 leaves the runtime default; a serial build just ignores the cap.
}

json load_config_file(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config file " + path + " is not valid JSON");
    return j;
}

// Leftover tokens must be dotted-path config overrides: --a.b VALUE or
// --a.b=VALUE. Anything else is a usage error.
std::vector<std::pair<std::string, std::string>> parse_dotted_extras(
    const std::vector<std::string>& extras) {
    std::vector<std::pair<std::string, std::string>> out;
    for (size_t i = 0; i < extras.size(); ++i) {
        const std::string& tok = extras[i];
        if (tok.rfind("--", 0) != 0 || tok.find('.') == std::string::npos)
            throw ConfigError("unknown argument '" + tok +
                              "' (config overrides look like --train.batch_size 5)");
        std::string key = tok.substr(2);
        const size_t eq = key.find('=');
        std::string value;
        if (eq != std::string::npos) {
            value = key.substr(eq + 1);
            key = key.substr(0, eq);
        } else {
            if (i + 1 >= extras.size())
                throw ConfigError("config override --" + key + " is missing a value");
            value = extras[++i];
        }
        out.emplace_back(std::move(key), std::move(value));
    }
    return out;
}

json resolved_cli_config(const std::string& config_path, const std::string& data_path,
                         const std::vector<std::string>& extras) {
    json cfg = resolve_config(load_config_file(config_path));
    for (const auto& [key, value] : parse_dotted_extras(extras))
        apply_dotted_override(cfg, key, value);
    if (!data_path.empty()) cfg["dataset"]["manifest"] = data_path;
    return cfg;
}

DatasetManifest manifest_from_config(const json& cfg) {
    std::string path = cfg.at("dataset").at("manifest").get<std::string>();
    if (path.empty())
        throw ConfigError("no dataset given: pass --data PATH or set dataset.manifest");
    if (fs::is_directory(path)) path = (fs::path(path) / "manifest.json").string();
    return DatasetManifest::load(path);
}

void echo_config(const json& cfg, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    std::ofstream out(out_dir / "config.json", std::ios::binary | std::ios::trunc);
    out << cfg.dump(2) << "\n";
    if (!out) throw ConfigError("cannot write " + (out_dir / "config.json").string());
}

std::pair<size_t, size_t> split_counts(const DatasetManifest& man) {
    size_t train = 0, test = 0;
    for (const auto& s : man.samples) (s.split == "train" ? train : test) += 1;
    return {train, test};
}

nn::UNetGenerator<float> generator_from_checkpoint(const nn::TensorFile& tf) {
    if (!tf.metadata.contains("kind") || tf.metadata["kind"] != "train_checkpoint")
        throw FormatError("not a training checkpoint (metadata kind mismatch)");
    const nn::NetworkSpec spec = nn::spec_from_json(tf.metadata.at("generator"));
    RngStream scratch(0);  // weights are overwritten by the restore
    nn::UNetGenerator<float> gen;
    gen.build(spec, scratch);
    nn::restore_tensors(tf, "g.", gen.parameters());
    nn::restore_tensors(tf, "g.", gen.state_buffers());
    return gen;
}

ImageTensor as_single_channel(const ImageTensor& img) {
    return img.channels == 1 ? img : to_grayscale(img);
}

ImageTensor sized_square(const ImageTensor& img, int side) {
    if (img.height == side && img.width == side) return img;
    return resize_bilinear(img, side, side);
}

// ---------------------------------------------------------------- prepare --

struct PrepareArgs {
    std::string photos, out, config;
    int synthetic = -1;
    int size = 64;
    uint64_t seed = 1;
    double split_ratio = -1.0;  // <0: take the config value
};

int cmd_prepare(const PrepareArgs& a) {
    if (a.photos.empty() == (a.synthetic < 0))
        throw ConfigError("pass exactly one of --photos DIR or --synthetic N");
    const json cfg = resolve_config(load_config_file(a.config));
    const json& dcfg = cfg.at("dataset");
    const double ratio = a.split_ratio >= 0 ? a.split_ratio : dcfg.at("split_ratio").get<double>();

    DatasetManifest man;
    if (a.synthetic >= 0) {
        man = generate_synthetic_corpus(a.synthetic, a.size, a.seed, a.out, ratio);
    } else {
        if (!fs::is_directory(a.photos))
            throw ConfigError("photo directory " + a.photos + " does not exist");
        SketchParams sk;
        sk.blur_sigma = dcfg.at("sketch").at("blur_sigma").get<double>();
        sk.blur_radius = dcfg.at("sketch").at("blur_radius").get<int>();
        sk.dodge_epsilon = dcfg.at("sketch").at("dodge_epsilon").get<double>();
        BuildOptions opts;
        opts.near_dup_threshold = dcfg.at("near_dup_threshold").get<int>();
        man = build_manifest(a.photos, a.out, ratio, a.seed, sk, opts);
    }
    const auto [train, test] = split_counts(man);
    std::printf("wrote %s: %zu train / %zu test (%zu samples)\n",
                (fs::path(a.out) / "manifest.json").string().c_str(), train, test,
                man.samples.size());
    for (const std::string& w : man.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    return 0;
}

// ------------------------------------------------------------------ train --

struct TrainArgs {
    std::string config, data, out, resume;
    std::vector<std::string> extras;
};

int cmd_train(const TrainArgs& a) {
    const json cfg = resolved_cli_config(a.config, a.data, a.extras);
    const TrainSetup setup = setup_from_config(cfg);
    const DatasetManifest man = manifest_from_config(cfg);
    echo_config(cfg, a.out);

    RunArtifacts art = a.resume.empty() ? train(setup, man, a.out)
                                        : train_resume(setup, man, a.out, a.resume);

    std::printf("run complete: %ld g-steps, %ld d-updates, seed %llu\n", art.total_g_updates,
                art.total_d_updates, (unsigned long long)art.seed);
    std::printf("metrics: %s\n", art.metrics_path.c_str());
    for (const auto& [stage, fid] : art.fid_series.points)
        std::printf("fid stage %6ld: %.17g\n", stage, fid);
    if (!art.checkpoints.empty())
        std::printf("final checkpoint: %s\n", art.checkpoints.back().second.c_str());
    return 0;
}

// ------------------------------------------------------------------- eval --

struct EvalArgs {
    std::string checkpoint, manifest, config, extractor, report;
    std::vector<std::string> extras;
};

int cmd_eval(const EvalArgs& a) {
    const json cfg = resolved_cli_config(a.config, a.manifest, a.extras);
    const TrainSetup setup = setup_from_config(cfg);
    const DatasetManifest man = manifest_from_config(cfg);

    const nn::TensorFile tf = nn::load_tensor_file(a.checkpoint);
    nn::UNetGenerator<float> gen = generator_from_checkpoint(tf);

    evaluation::FeatureExtractor fx =
        a.extractor.empty()
            ? evaluation::FeatureExtractor::seeded(setup.extractor_seed, setup.feature_dim)
            : evaluation::FeatureExtractor::from_file(a.extractor);
    if (fx.dim() != setup.feature_dim)
        throw ConfigError("extractor file has feature_dim " + std::to_string(fx.dim()) +
                          " but the config says " + std::to_string(setup.feature_dim));

    const auto test = man.split("test");
    size_t n = test.size();
    if (setup.fid_max_samples > 0) n = std::min(n, size_t(setup.fid_max_samples));
    if (n < 2) throw TrainingError("FID needs at least 2 test samples, found " + std::to_string(n));

    const int side = setup.augment.crop_to;
    std::vector<ImageTensor> real, gend;
    RngStream no_dropout(0);
    for (size_t i = 0; i < n; ++i) {
        real.push_back(sized_square(load_png(man.resolve(test[i]->photo_path)), side));
        const ImageTensor sk = sized_square(load_png(man.resolve(test[i]->sketch_path)), side);
        nn::Tensor4<float> x = nn::batch_from_images<float>({&sk});
        nn::Tensor4<float> y = gen.forward(x, false, no_dropout, false);
        gend.push_back(nn::image_from_batch(y, 0));
    }
    std::vector<const ImageTensor*> rp, gp;
    for (const auto& im : real) rp.push_back(&im);
    for (const auto& im : gend) gp.push_back(&im);
    const evaluation::FidValue v = evaluation::fid(evaluation::gaussian_stats(fx.extract(rp)),
                                                   evaluation::gaussian_stats(fx.extract(gp)));

    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v.value);
    std::printf("fid %s (%zu test samples)\n", buf, n);

    json report;
    report["fid"] = v.value;
    report["fid_raw"] = v.raw;
    report["n_samples"] = n;
    report["checkpoint"] = a.checkpoint;
    report["g_step"] = tf.metadata.value("g_step", -1L);
    report["feature_dim"] = setup.feature_dim;
    report["extractor"] = a.extractor.empty() ? "seeded:" + std::to_string(setup.extractor_seed)
                                              : a.extractor;
    const std::string report_path = a.report.empty() ? a.checkpoint + ".fid.json" : a.report;
    std::ofstream out(report_path, std::ios::binary | std::ios::trunc);
    out << report.dump(2) << "\n";
    if (!out) throw TrainingError("cannot write " + report_path);
    std::printf("report: %s\n", report_path.c_str());
    return 0;
}

// ----------------------------------------------------------------- ablate --

struct AblateArgs {
    std::string preset, spec, config, data, out;
    int runs = 0;           // 0: keep the spec's value
    long long base_seed = -1;  // <0: keep the spec's value
    bool keep_checkpoints = false;
    std::vector<std::string> extras;
};

int cmd_ablate(const AblateArgs& a) {
    if (a.preset.empty() == a.spec.empty())
        throw ConfigError("pass exactly one of --preset NAME or --spec PATH");
    AblationSpec spec = a.preset.empty() ? load_ablation_spec(a.spec) : builtin_preset(a.preset);
    if (a.runs > 0) spec.runs_per_variant = a.runs;
    if (a.base_seed >= 0) spec.base_seed = uint64_t(a.base_seed);

    const json cfg = resolved_cli_config(a.config, a.data, a.extras);
    const DatasetManifest man = manifest_from_config(cfg);
    echo_config(cfg, a.out);

    const AblationReport report = run_ablation(spec, cfg, man, a.out, a.keep_checkpoints);

    bool all_aggregated = true;
    for (const auto& v : report.variants) {
        if (v.aggregate) {
            std::printf("%-16s %zu runs, final fid %.6g ± %.6g (99%% CI)\n", v.name.c_str(),
                        v.runs.size(), v.aggregate->mean_fid.back(),
                        v.aggregate->ci_half_width.back());
        } else {
            std::printf("%-16s FAILED: %s\n", v.name.c_str(), v.aggregate_error.c_str());
            all_aggregated = false;
        }
    }
    for (const auto& f : report.failures)
        std::fprintf(stderr, "run failure: %s run %d: %s\n", f.variant.c_str(), f.run_index,
                     f.message.c_str());
    std::printf("summary: %s\n", report.summary_path.c_str());
    if (!report.svg_path.empty()) std::printf("curves: %s\n", report.svg_path.c_str());
    return all_aggregated ? 0 : 1;
}

// --------------------------------------------------------------- generate --

struct GenerateArgs {
    std::string checkpoint, out;
    std::vector<std::string> sketches;
};

// Rows of [input | output] pairs on a white ground, the qualitative layout
// used for paired-translation figures.
ImageTensor contact_sheet(const std::vector<ImageTensor>& ins,
                          const std::vector<ImageTensor>& outs) {
    const int gap = 4;
    int cell_h = 0, cell_w = 0;
    for (const auto& im : ins) {
        cell_h = std::max(cell_h, im.height);
        cell_w = std::max(cell_w, im.width);
    }
    const int rows = int(ins.size());
    ImageTensor sheet = ImageTensor::make(rows * cell_h + (rows + 1) * gap,
                                          2 * cell_w + 3 * gap, 3, 1.0f);
    for (int r = 0; r < rows; ++r) {
        const int top = gap + r * (cell_h + gap);
        const ImageTensor* cells[2] = {&ins[r], &outs[r]};
        for (int col = 0; col < 2; ++col) {
            const ImageTensor& im = *cells[col];
            const int left = gap + col * (cell_w + gap);
            for (int y = 0; y < im.height; ++y)
                for (int x = 0; x < im.width; ++x)
                    for (int c = 0; c < 3; ++c)
                        sheet.at(top + y, left + x, c) =
                            im.at(y, x, im.channels == 1 ? 0 : c);
        }
    }
    return sheet;
}

int cmd_generate(const GenerateArgs& a) {
    const nn::TensorFile tf = nn::load_tensor_file(a.checkpoint);
    nn::UNetGenerator<float> gen = generator_from_checkpoint(tf);
    const int div = 1 << gen.spec.depth;

    fs::create_directories(a.out);
    std::vector<ImageTensor> ins, outs;
    std::vector<std::string> names;
    RngStream no_dropout(0);
    for (const std::string& path : a.sketches) {
        ImageTensor sk = as_single_channel(load_png(path));
        if (sk.height % div != 0 || sk.width % div != 0 || sk.height < div || sk.width < div)
            throw ArgumentError("sketch " + path + " is " + std::to_string(sk.height) + "x" +
                                std::to_string(sk.width) +
                                "; this checkpoint's generator needs sides divisible by " +
                                std::to_string(div));
        nn::Tensor4<float> x = nn::batch_from_images<float>({&sk});
        nn::Tensor4<float> y = gen.forward(x, false, no_dropout, false);
        ImageTensor out = nn::image_from_batch(y, 0);

        std::string stem = fs::path(path).stem().string();
        std::string name = "gen_" + stem + ".png";
        for (int suffix = 2; std::find(names.begin(), names.end(), name) != names.end();
             ++suffix)
            name = "gen_" + stem + "_" + std::to_string(suffix) + ".png";
        names.push_back(name);
        save_png(out, (fs::path(a.out) / name).string());
        ins.push_back(std::move(sk));
        outs.push_back(std::move(out));
    }
    save_png(contact_sheet(ins, outs), (fs::path(a.out) / "contact_sheet.png").string());
    for (const std::string& n : names) std::printf("%s\n", (fs::path(a.out) / n).string().c_str());
    std::printf("contact sheet: %s\n", (fs::path(a.out) / "contact_sheet.png").string().c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sketch-to-image translation pipeline"};
    app.require_subcommand(1);

    PrepareArgs pa;
    CLI::App* prepare = app.add_subcommand("prepare", "build a paired dataset + manifest");
    prepare->add_option("--photos", pa.photos, "directory of photos to pair with sketches");
    prepare->add_option("--synthetic", pa.synthetic, "generate N procedural pairs instead");
    prepare->add_option("--size", pa.size, "synthetic image side in pixels")->default_val(64);
    prepare->add_option("--seed", pa.seed, "split / generation seed")->default_val(1);
    prepare->add_option("--out", pa.out, "output directory")->required();
    prepare->add_option("--split-ratio", pa.split_ratio, "train fraction (default from config)");
    prepare->add_option("--config", pa.config, "JSON config for sketch/dedup parameters");

    TrainArgs ta;
    CLI::App* train = app.add_subcommand("train", "train the translation model");
    train->add_option("--config", ta.config, "JSON config file");
    train->add_option("--data", ta.data, "dataset manifest (file or its directory)");
    train->add_option("--out", ta.out, "run output directory")->required();
    train->add_option("--resume", ta.resume, "checkpoint to continue from");
    train->allow_extras();  // dotted config overrides, e.g. --train.batch_size 5
    train->footer("Any --section.key VALUE pair overrides that config entry.");

    EvalArgs ea;
    CLI::App* eval = app.add_subcommand("eval", "FID of a checkpoint on the test split");
    eval->add_option("--checkpoint", ea.checkpoint, "training checkpoint")->required();
    eval->add_option("--manifest", ea.manifest, "dataset manifest (file or its directory)")
        ->required();
    eval->add_option("--config", ea.config, "JSON config file");
    eval->add_option("--extractor", ea.extractor, "saved feature extractor (default: seeded)");
    eval->add_option("--report", ea.report, "report path (default: <checkpoint>.fid.json)");
    eval->allow_extras();

    AblateArgs aa;
    CLI::App* ablate = app.add_subcommand("ablate", "train variants and aggregate FID curves");
    ablate->add_option("--preset", aa.preset,
                       "batch-size | spectral-norm | d-steps | lr-policy");
    ablate->add_option("--spec", aa.spec, "ablation spec JSON");
    ablate->add_option("--config", aa.config, "base JSON config file");
    ablate->add_option("--data", aa.data, "dataset manifest (file or its directory)");
    ablate->add_option("--out", aa.out, "output directory")->required();
    ablate->add_option("--runs", aa.runs, "override runs per variant");
    ablate->add_option("--base-seed", aa.base_seed, "override the spec's base seed");
    ablate->add_flag("--keep-checkpoints", aa.keep_checkpoints, "write per-run checkpoints");
    ablate->allow_extras();

    GenerateArgs ga;
    CLI::App* generate = app.add_subcommand("generate", "translate sketches with a checkpoint");
    generate->add_option("--checkpoint", ga.checkpoint, "training checkpoint")->required();
    generate->add_option("--sketch", ga.sketches, "sketch PNG paths (repeatable)")
        ->required()
        ->expected(-1);
    generate->add_option("--out", ga.out, "output directory")->required();

    try {
        apply_threads_env();
        app.parse(argc, argv);
        if (*prepare) return cmd_prepare(pa);
        if (*train) {
            ta.extras = train->remaining();
            return cmd_train(ta);
        }
        if (*eval) {
            ea.extras = eval->remaining();
            return cmd_eval(ea);
        }
        if (*ablate) {
            aa.extras = ablate->remaining();
            return cmd_ablate(aa);
        }
        if (*generate) return cmd_generate(ga);
        return 2;  // unreachable: require_subcommand
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);  // prints the usage message
        return 2;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
