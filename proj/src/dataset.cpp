#include "sketchloom/dataset.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "sketchloom/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace sketchloom {

ImageTensor sketchify(const ImageTensor& photo, const SketchParams& params) {
    require(params.blur_sigma > 0 && params.blur_radius >= 0 && params.dodge_epsilon > 0,
            "sketchify: bad parameters");
    ImageTensor g = to_grayscale(photo);
    ImageTensor inv = g;
    for (float& v : inv.data) v = 1.0f - v;
    ImageTensor blurred = gaussian_blur(inv, params.blur_sigma, params.blur_radius);
    ImageTensor out = ImageTensor::make(g.height, g.width, 1);
    for (size_t i = 0; i < out.data.size(); ++i) {
        const double denom = 1.0 - blurred.data[i] + params.dodge_epsilon;
        out.data[i] = float(std::min(1.0, g.data[i] / denom));
    }
    return out;
}

uint64_t fnv1a64(const uint8_t* bytes, size_t n) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (size_t i = 0; i < n; ++i) {
        h ^= bytes[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string content_hash_hex(const std::vector<uint8_t>& bytes) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  (unsigned long long)fnv1a64(bytes.data(), bytes.size()));
    return buf;
}

uint64_t average_hash(const ImageTensor& img) {
    ImageTensor small = resize_bilinear(to_grayscale(img), 8, 8);
    double mean = 0.0;
    for (float v : small.data) mean += v;
    mean /= 64.0;
    uint64_t h = 0;
    for (int i = 0; i < 64; ++i)
        if (small.data[i] > mean) h |= (1ULL << i);
    return h;
}

int hamming_distance(uint64_t a, uint64_t b) { return __builtin_popcountll(a ^ b); }

namespace {

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int i) { return parent[i] == i ? i : parent[i] = find(parent[i]); }
    void unite(int a, int b) { parent[find(a)] = find(b); }
};

}  // namespace

std::vector<DedupEntry> dedup(const std::vector<DedupEntry>& entries, int near_dup_threshold) {
    const int n = int(entries.size());
    UnionFind uf(n);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if (entries[i].content_hash == entries[j].content_hash) {
                uf.unite(i, j);
            } else if (near_dup_threshold >= 0 &&
                       hamming_distance(entries[i].perceptual_hash,
                                        entries[j].perceptual_hash) <= near_dup_threshold) {
                uf.unite(i, j);
            }
        }
    }
    std::vector<int> winner(n, -1);
    for (int i = 0; i < n; ++i) {
        int& w = winner[uf.find(i)];
        if (w < 0 || entries[i].path < entries[w].path) w = i;
    }
    std::vector<DedupEntry> out;
    for (int i = 0; i < n; ++i)
        if (winner[uf.find(i)] == i) out.push_back(entries[i]);
    return out;
}

std::vector<const PairedSample*> DatasetManifest::split(const std::string& name) const {
    std::vector<const PairedSample*> out;
    for (const auto& s : samples)
        if (s.split == name) out.push_back(&s);
    return out;
}

std::string DatasetManifest::resolve(const std::string& rel_path) const {
    if (base_dir.empty()) return rel_path;
    return (fs::path(base_dir) / rel_path).string();
}

void DatasetManifest::save(const std::string& path) const {
    json j;
    j["version"] = version;
    j["seed"] = seed;
    j["split_ratio"] = split_ratio;
    j["samples"] = json::array();
    for (const auto& s : samples) {
        j["samples"].push_back({{"id", s.id},
                                {"sketch_path", s.sketch_path},
                                {"photo_path", s.photo_path},
                                {"split", s.split},
                                {"content_hash", s.content_hash}});
    }
    if (!warnings.empty()) j["metadata"] = {{"warnings", warnings}};
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError("cannot write manifest: " + path);
    out << j.dump(2) << "\n";
}

DatasetManifest DatasetManifest::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open manifest: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError("manifest " + path + " is not valid JSON: " + e.what());
    }
    try {
        DatasetManifest m;
        m.version = j.at("version").get<int>();
        if (m.version != 1)
            throw FormatError("manifest " + path + ": unsupported version " +
                              std::to_string(m.version));
        m.seed = j.at("seed").get<uint64_t>();
        m.split_ratio = j.at("split_ratio").get<double>();
        for (const auto& js : j.at("samples")) {
            PairedSample s;
            s.id = js.at("id").get<std::string>();
            s.sketch_path = js.at("sketch_path").get<std::string>();
            s.photo_path = js.at("photo_path").get<std::string>();
            s.split = js.at("split").get<std::string>();
            s.content_hash = js.at("content_hash").get<std::string>();
            if (s.split != "train" && s.split != "test")
                throw FormatError("manifest " + path + ": sample " + s.id +
                                  " has unknown split '" + s.split + "'");
            m.samples.push_back(std::move(s));
        }
        if (j.contains("metadata") && j["metadata"].contains("warnings"))
            m.warnings = j["metadata"]["warnings"].get<std::vector<std::string>>();
        m.base_dir = fs::path(path).parent_path().string();
        return m;
    } catch (const json::exception& e) {
        throw FormatError("manifest " + path + " is malformed: " + e.what());
    }
}

namespace {

size_t train_count(double ratio, size_t n) {
    return size_t(std::floor(ratio * double(n) + 0.5));
}

}  // namespace

DatasetManifest build_manifest(const std::string& photo_dir, const std::string& out_dir,
                               double split_ratio, uint64_t seed, const SketchParams& params,
                               const BuildOptions& opts) {
    require(split_ratio >= 0.0 && split_ratio <= 1.0, "build_manifest: split_ratio in [0,1]");
    if (!fs::is_directory(photo_dir))
        throw DatasetError("photo directory does not exist: " + photo_dir);

    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(photo_dir)) {
        if (e.is_regular_file() && e.path().extension() == ".png")
            files.push_back(e.path().string());
    }
    std::sort(files.begin(), files.end());

    DatasetManifest m;
    m.seed = seed;
    m.split_ratio = split_ratio;

    std::vector<DedupEntry> entries;
    for (const auto& f : files) {
        std::vector<uint8_t> bytes = read_file(f);
        try {
            ImageTensor img = decode_png(bytes);
            entries.push_back({f, content_hash_hex(bytes), average_hash(img)});
        } catch (const FormatError& e) {
            m.warnings.push_back("skipped undecodable file " + f + ": " + e.what());
        }
    }

    std::vector<DedupEntry> kept = dedup(entries, opts.near_dup_threshold);
    if (kept.size() < 2)
        throw DatasetError("dataset too small: need at least 2 usable photos, found " +
                           std::to_string(kept.size()));

    fs::create_directories(fs::path(out_dir) / "sketches");

    // Seeded shuffle decides which ids land in train; the manifest itself
    // stays in lexicographic id order.
    std::vector<size_t> order(kept.size());
    std::iota(order.begin(), order.end(), 0);
    RngStream rng = derive_stream(seed, stream_tag("split"));
    for (size_t i = order.size() - 1; i > 0; --i) {
        const size_t j = rng.next_below(i + 1);
        std::swap(order[i], order[j]);
    }
    const size_t n_train = train_count(split_ratio, kept.size());
    std::vector<std::string> split_of(kept.size());
    for (size_t r = 0; r < order.size(); ++r)
        split_of[order[r]] = (r < n_train) ? "train" : "test";

    for (size_t i = 0; i < kept.size(); ++i) {
        const fs::path photo_path(kept[i].path);
        const std::string id = photo_path.stem().string();
        ImageTensor photo = decode_png(read_file(kept[i].path));
        const std::string sketch_rel = "sketches/" + id + ".png";
        save_png(sketchify(photo, params), (fs::path(out_dir) / sketch_rel).string());

        PairedSample s;
        s.id = id;
        s.sketch_path = sketch_rel;
        s.photo_path = fs::relative(photo_path, out_dir).generic_string();
        s.split = split_of[i];
        s.content_hash = kept[i].content_hash;
        m.samples.push_back(std::move(s));
    }

    m.base_dir = out_dir;
    m.save((fs::path(out_dir) / "manifest.json").string());
    return m;
}

namespace {

struct Garment {
    std::vector<std::pair<double, double>> poly;  // closed hexagon
    float base[3], accent[3];
    int pattern;  // 0 dots, 1 stripes, 2 diamonds
    int spacing;
    double radius;
};

Garment draw_garment_params(int size, RngStream& rng) {
    Garment g;
    const double m = std::max(5.0, size / 8.0);
    const double max_half = size / 2.0 - m - 1.0;
    const double cx = size * (0.5 + rng.uniform(-0.03, 0.03));
    const double y_top = m + rng.uniform(0.0, 0.04 * size);
    const double y_waist = size * rng.uniform(0.42, 0.55);
    const double y_hem = size - 1.0 - m - rng.uniform(0.0, 0.04 * size);
    const double hs = std::min(max_half, size * rng.uniform(0.13, 0.20));
    const double hw = std::min(max_half, size * rng.uniform(0.09, 0.14));
    const double hh = std::min(max_half, size * rng.uniform(0.24, 0.30));
    g.poly = {{cx - hs, y_top},   {cx + hs, y_top}, {cx + hw, y_waist},
              {cx + hh, y_hem},   {cx - hh, y_hem}, {cx - hw, y_waist}};
    for (int c = 0; c < 3; ++c) g.base[c] = float(rng.uniform(0.15, 0.55));
    for (int c = 0; c < 3; ++c) g.accent[c] = float(rng.uniform(0.45, 0.95));
    g.pattern = int(rng.next_below(3));
    g.spacing = std::max(4, int(std::lround(size * rng.uniform(0.09, 0.16))));
    g.radius = g.spacing * rng.uniform(0.25, 0.40);
    return g;
}

bool accent_at(const Garment& g, int x, int y) {
    const int s = g.spacing;
    const double mx = (x % s) - s / 2.0;
    const double my = (y % s) - s / 2.0;
    switch (g.pattern) {
        case 0: return mx * mx + my * my <= g.radius * g.radius;
        case 1: return ((x + y) / std::max(2, s / 2)) % 2 == 0;
        default: return std::abs(mx) + std::abs(my) <= g.radius;
    }
}

ImageTensor render_garment(int size, const Garment& g) {
    ImageTensor img = ImageTensor::make(size, size, 3, 1.0f);
    const auto& p = g.poly;
    for (int y = 0; y < size; ++y) {
        const double yc = y + 0.5;
        std::vector<double> xs;
        for (size_t i = 0; i < p.size(); ++i) {
            const auto& [x1, y1] = p[i];
            const auto& [x2, y2] = p[(i + 1) % p.size()];
            if ((y1 <= yc && yc < y2) || (y2 <= yc && yc < y1))
                xs.push_back(x1 + (yc - y1) * (x2 - x1) / (y2 - y1));
        }
        std::sort(xs.begin(), xs.end());
        for (size_t k = 0; k + 1 < xs.size(); k += 2) {
            for (int x = 0; x < size; ++x) {
                const double xc = x + 0.5;
                if (xc >= xs[k] && xc < xs[k + 1]) {
                    const float* col = accent_at(g, x, y) ? g.accent : g.base;
                    for (int c = 0; c < 3; ++c) img.at(y, x, c) = col[c];
                }
            }
        }
    }
    return img;
}

}  // namespace

DatasetManifest generate_synthetic_corpus(int n, int size, uint64_t seed,
                                          const std::string& out_dir, double split_ratio) {
    require(n >= 2, "generate_synthetic_corpus: need n >= 2");
    require(size >= 32, "generate_synthetic_corpus: size must be at least 32");
    const fs::path photos = fs::path(out_dir) / "photos";
    fs::create_directories(photos);
    for (int i = 0; i < n; ++i) {
        RngStream rng = derive_stream(seed, stream_tag("garment"), uint64_t(i));
        Garment g = draw_garment_params(size, rng);
        char name[32];
        std::snprintf(name, sizeof name, "garment_%05d.png", i);
        save_png(render_garment(size, g), (photos / name).string());
    }
    BuildOptions opts;
    opts.near_dup_threshold = -1;  // procedural prints can collide on aHash
    return build_manifest(photos.string(), out_dir, split_ratio, seed, {}, opts);
}

BackgroundReport validate_background(const ImageTensor& img, int border_band,
                                     double min_white_fraction) {
    require(border_band >= 1, "validate_background: band must be positive");
    require(2 * border_band < std::min(img.height, img.width),
            "validate_background: band must be smaller than half the smaller side");
    ImageTensor lum = to_grayscale(img);
    size_t total = 0, white = 0;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const bool in_band = y < border_band || y >= img.height - border_band ||
                                 x < border_band || x >= img.width - border_band;
            if (!in_band) continue;
            ++total;
            if (lum.at(y, x, 0) >= 0.95f) ++white;
        }
    }
    BackgroundReport r;
    r.white_fraction = total ? double(white) / double(total) : 0.0;
    r.pass = r.white_fraction >= min_white_fraction;
    return r;
}

}  // namespace sketchloom
