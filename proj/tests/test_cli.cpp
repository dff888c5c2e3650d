// Spawns the real binary (path in $SKETCHLOOM_CLI) and checks exit codes,
// stdout, and the files each subcommand leaves behind.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

#include "sketchloom/dataset.hpp"
#include "sketchloom/image.hpp"

using namespace sketchloom;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) {
        path = fs::temp_directory_path() / ("sketchloom_cli_" + name);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
};

std::string cli_path() {
    const char* p = std::getenv("SKETCHLOOM_CLI");
    REQUIRE_MESSAGE(p != nullptr, "SKETCHLOOM_CLI must point at the built binary");
    return p;
}

struct RunResult {
    int code = -1;
    std::string out, err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RunResult run_cli(const std::string& args, const std::string& env = "") {
    static int counter = 0;
    const fs::path base = fs::temp_directory_path() / ("sketchloom_cli_io_" +
                                                       std::to_string(counter++));
    const std::string cmd = env + (env.empty() ? "" : " ") + cli_path() + " " + args + " > " +
                            base.string() + ".out 2> " + base.string() + ".err";
    const int raw = std::system(cmd.c_str());
    RunResult r;
    r.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.out = slurp(base.string() + ".out");
    r.err = slurp(base.string() + ".err");
    fs::remove(base.string() + ".out");
    fs::remove(base.string() + ".err");
    return r;
}

bool contains(const std::string& hay, const std::string& needle) {
    return hay.find(needle) != std::string::npos;
}

// Overrides shared by every training invocation here: a few steps on tiny
// images so each run takes well under a second.
std::string tiny_overrides() {
    return " --augment.resize_to 18 --augment.crop_to 16"
           " --model.generator.base_width 4 --model.generator.depth 2"
           " --model.discriminator.base_width 4 --model.discriminator.depth 1"
           " --train.total_g_steps 3 --train.lr_step_size 2 --eval.eval_every 2"
           " --eval.feature_dim 8";
}

}  // namespace

TEST_CASE("help is available everywhere and exits 0") {
    CHECK(run_cli("--help").code == 0);
    for (const char* sub : {"prepare", "train", "eval", "ablate", "generate"}) {
        RunResult r = run_cli(std::string(sub) + " --help");
        CHECK(r.code == 0);
        CHECK(contains(r.out, "--"));
    }
    CHECK(run_cli("").code == 2);           // a subcommand is required
    CHECK(run_cli("no-such-cmd").code == 2);
}

TEST_CASE("prepare: synthetic corpus splits by the ratio") {
    TempDir dir("prep");
    RunResult r = run_cli("prepare --synthetic 200 --size 64 --seed 7 --out " + dir.str());
    CHECK(r.code == 0);
    CHECK(contains(r.out, "160 train / 40 test"));
    DatasetManifest man = DatasetManifest::load((dir.path / "manifest.json").string());
    CHECK(man.samples.size() == 200);
    CHECK(man.split("train").size() == 160);
    CHECK(man.split("test").size() == 40);

    SUBCASE("no source flag is a usage error") {
        CHECK(run_cli("prepare --out " + dir.str() + "/x").code == 2);
    }
    SUBCASE("both source flags at once is a usage error") {
        CHECK(run_cli("prepare --photos p --synthetic 4 --out " + dir.str() + "/x").code == 2);
    }
    SUBCASE("missing photo directory") {
        RunResult bad = run_cli("prepare --photos /no/such/dir --out " + dir.str() + "/x");
        CHECK(bad.code == 2);
        CHECK(contains(bad.err, "/no/such/dir"));
    }
}

TEST_CASE("train: end-to-end run with dotted overrides") {
    TempDir dir("train");
    REQUIRE(run_cli("prepare --synthetic 8 --size 32 --seed 3 --out " + dir.str() + "/data")
                .code == 0);
    const std::string common = " --data " + dir.str() + "/data" + tiny_overrides();

    RunResult r = run_cli("train --out " + dir.str() + "/run --train.seed 5" + common);
    CHECK(r.code == 0);
    CHECK(contains(r.out, "3 g-steps"));
    CHECK(fs::exists(dir.path / "run" / "metrics.csv"));
    CHECK(fs::exists(dir.path / "run" / "fid_series.csv"));

    SUBCASE("resolved config is echoed with overrides applied") {
        std::ifstream in(dir.path / "run" / "config.json");
        json cfg = json::parse(in);
        CHECK(cfg["train"]["total_g_steps"] == 3);
        CHECK(cfg["train"]["seed"] == 5);
        CHECK(cfg["model"]["generator"]["depth"] == 2);
        CHECK(cfg["dataset"]["manifest"] == dir.str() + "/data");
    }
    SUBCASE("unknown override key is rejected by name") {
        RunResult bad = run_cli("train --out " + dir.str() + "/run2 --train.bogus 1" + common);
        CHECK(bad.code == 2);
        CHECK(contains(bad.err, "train.bogus"));
        CHECK(!fs::exists(dir.path / "run2" / "metrics.csv"));
    }
    SUBCASE("missing dataset is a config error") {
        RunResult bad = run_cli("train --out " + dir.str() + "/run3" + tiny_overrides());
        CHECK(bad.code == 2);
        CHECK(contains(bad.err, "dataset.manifest"));
    }
    SUBCASE("same seed reruns byte-identically, different seed does not") {
        RunResult r2 = run_cli("train --out " + dir.str() + "/run_b --train.seed 5" + common);
        CHECK(r2.code == 0);
        CHECK(slurp(dir.path / "run" / "metrics.csv") ==
              slurp(dir.path / "run_b" / "metrics.csv"));
        RunResult r3 = run_cli("train --out " + dir.str() + "/run_c --train.seed 6" + common);
        CHECK(r3.code == 0);
        CHECK(slurp(dir.path / "run" / "metrics.csv") !=
              slurp(dir.path / "run_c" / "metrics.csv"));
    }
}

TEST_CASE("generate and eval work off a trained checkpoint") {
    TempDir dir("gen");
    REQUIRE(run_cli("prepare --synthetic 8 --size 32 --seed 3 --out " + dir.str() + "/data")
                .code == 0);
    const std::string common = " --data " + dir.str() + "/data" + tiny_overrides();
    REQUIRE(run_cli("train --out " + dir.str() + "/run --train.seed 5" + common).code == 0);
    // Checkpoints are step_%06d.sklm at stages 0, 2, 3.
    const std::string ckpt = (dir.path / "run" / "checkpoints" / "step_000003.sklm").string();
    REQUIRE(fs::exists(ckpt));

    DatasetManifest man = DatasetManifest::load((dir.path / "data" / "manifest.json").string());
    const std::string sketch = man.resolve(man.samples[0].sketch_path);

    SUBCASE("generate: output png + contact sheet, deterministic") {
        RunResult g1 = run_cli("generate --checkpoint " + ckpt + " --sketch " + sketch +
                               " --out " + dir.str() + "/g1");
        CHECK(g1.code == 0);
        CHECK(fs::exists(dir.path / "g1" / "contact_sheet.png"));
        int pngs = 0;
        fs::path out_png;
        for (const auto& e : fs::directory_iterator(dir.path / "g1"))
            if (e.path().filename() != "contact_sheet.png") {
                ++pngs;
                out_png = e.path();
            }
        CHECK(pngs == 1);
        ImageTensor out = load_png(out_png.string());
        CHECK(out.height == 32);  // generation runs at the sketch's native size
        CHECK(out.width == 32);
        CHECK(out.channels == 3);

        RunResult g2 = run_cli("generate --checkpoint " + ckpt + " --sketch " + sketch +
                               " --out " + dir.str() + "/g2");
        CHECK(g2.code == 0);
        CHECK(slurp(out_png) == slurp(dir.path / "g2" / out_png.filename()));
    }
    SUBCASE("generate: wrong sketch side exits 1 naming the divisibility") {
        save_png(ImageTensor::make(30, 30, 1, 0.5f), (dir.path / "odd.png").string());
        RunResult bad = run_cli("generate --checkpoint " + ckpt + " --sketch " +
                                (dir.path / "odd.png").string() + " --out " + dir.str() + "/g3");
        CHECK(bad.code == 1);
        CHECK(contains(bad.err, "divisible by 4"));
    }
    SUBCASE("eval: prints FID, writes a report, reruns identically") {
        const std::string cmd = "eval --checkpoint " + ckpt + " --manifest " + dir.str() +
                                "/data --report " + dir.str() + "/fid.json" + tiny_overrides();
        RunResult e1 = run_cli(cmd);
        CHECK(e1.code == 0);
        CHECK(contains(e1.out, "fid "));
        const std::string report1 = slurp(dir.path / "fid.json");
        json rep = json::parse(report1);
        CHECK(rep["n_samples"] == 2);
        CHECK(rep["g_step"] == 3);
        CHECK(rep["fid"].get<double>() >= 0.0);
        RunResult e2 = run_cli(cmd);
        CHECK(e2.code == 0);
        CHECK(slurp(dir.path / "fid.json") == report1);
        CHECK(e1.out == e2.out);
    }
}

TEST_CASE("ablate: batch-size preset emits per-variant CSVs, SVG, summary") {
    TempDir dir("abl");
    REQUIRE(run_cli("prepare --synthetic 8 --size 32 --seed 3 --out " + dir.str() + "/data")
                .code == 0);
    RunResult r = run_cli("ablate --preset batch-size --runs 2 --out " + dir.str() +
                          "/abl --data " + dir.str() + "/data" + tiny_overrides());
    CHECK(r.code == 0);
    CHECK(fs::exists(dir.path / "abl" / "batch_1.csv"));
    CHECK(fs::exists(dir.path / "abl" / "batch_5.csv"));
    CHECK(fs::exists(dir.path / "abl" / "combined.svg"));
    const std::string csv = slurp(dir.path / "abl" / "batch_1.csv");
    CHECK(contains(csv, "stage,mean_fid,ci_lo,ci_hi,variant"));
    CHECK(contains(csv, ",batch_1"));

    std::ifstream in(dir.path / "abl" / "summary.json");
    json summary = json::parse(in);
    CHECK(summary["variants"].size() == 2);
    CHECK(summary["runs_per_variant"] == 2);
    CHECK(summary["variants"][0]["n_runs"] == 2);
    CHECK(summary["variants"][0]["final"]["mean_fid"].is_number());
    CHECK(contains(summary["expected_trend"].get<std::string>(), "not asserted"));

    SUBCASE("preset and spec together is a usage error") {
        CHECK(run_cli("ablate --preset batch-size --spec s.json --out x --data y").code == 2);
    }
    SUBCASE("unknown preset is a config error") {
        RunResult bad = run_cli("ablate --preset nope --out " + dir.str() + "/x --data " +
                                dir.str() + "/data");
        CHECK(bad.code == 2);
        CHECK(contains(bad.err, "nope"));
    }
    SUBCASE("malformed spec file is rejected") {
        std::ofstream(dir.path / "bad.json") << "{ not json";
        RunResult bad = run_cli("ablate --spec " + (dir.path / "bad.json").string() + " --out " +
                                dir.str() + "/x --data " + dir.str() + "/data");
        CHECK(bad.code == 1);  // malformed bytes, not usage
        CHECK(contains(bad.err, "JSON"));
    }
}

TEST_CASE("spec-file ablation and threads env") {
    TempDir dir("spec");
    REQUIRE(run_cli("prepare --synthetic 8 --size 32 --seed 3 --out " + dir.str() + "/data")
                .code == 0);
    std::ofstream(dir.path / "spec.json") << R"({
        "variants": [
            {"name": "lr_low",  "overrides": {"train.g_lr.max": 1e-4, "train.d_lr.max": 2e-4}},
            {"name": "lr_high", "overrides": {"train.g_lr.max": 4e-4, "train.d_lr.max": 8e-4}}
        ],
        "runs_per_variant": 2,
        "base_seed": 11
    })";
    RunResult r = run_cli("ablate --spec " + (dir.path / "spec.json").string() + " --out " +
                          dir.str() + "/out --data " + dir.str() + "/data" + tiny_overrides());
    CHECK(r.code == 0);
    CHECK(fs::exists(dir.path / "out" / "lr_low.csv"));
    CHECK(fs::exists(dir.path / "out" / "lr_high.csv"));
    std::ifstream in(dir.path / "out" / "summary.json");
    json summary = json::parse(in);
    CHECK(summary["base_seed"] == 11);

    SUBCASE("SKETCHLOOM_THREADS must be a number") {
        CHECK(run_cli("prepare --synthetic 4 --out " + dir.str() + "/t",
                      "SKETCHLOOM_THREADS=soon").code == 2);
        CHECK(run_cli("prepare --synthetic 4 --size 32 --out " + dir.str() + "/t",
                      "SKETCHLOOM_THREADS=1").code == 0);
    }
}
