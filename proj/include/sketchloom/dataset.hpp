#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sketchloom/image.hpp"

namespace sketchloom {

// Pencil-sketch synthesis parameters (color-dodge method): grayscale, blur the
// inverted image, then divide g / (1 - blur + eps) clamped to 1.
struct SketchParams {
    double blur_sigma = 10.0;
    int blur_radius = 21;
    double dodge_epsilon = 1e-6;
};

ImageTensor sketchify(const ImageTensor& photo, const SketchParams& params = {});

// FNV-1a over raw bytes; the manifest stores the 16-digit hex form.
uint64_t fnv1a64(const uint8_t* bytes, size_t n);
std::string content_hash_hex(const std::vector<uint8_t>& bytes);

// 64-bit average hash: grayscale, resize to 8x8, threshold against the mean.
// Invariant under uniform brightness shifts.
uint64_t average_hash(const ImageTensor& img);
int hamming_distance(uint64_t a, uint64_t b);

struct DedupEntry {
    std::string path;
    std::string content_hash;
    uint64_t perceptual_hash = 0;
};

// Removes exact duplicates (same content hash) always, and near-duplicates
// (Hamming distance <= near_dup_threshold on the perceptual hash, closed
// transitively) when the threshold is non-negative. Each duplicate group
// keeps its lexicographically-first path; survivors keep input order.
std::vector<DedupEntry> dedup(const std::vector<DedupEntry>& entries,
                              int near_dup_threshold = 5);

struct PairedSample {
    std::string id;
    std::string sketch_path;  // relative to the manifest directory
    std::string photo_path;   // relative to the manifest directory
    std::string split;        // "train" or "test"
    std::string content_hash;
};

struct DatasetManifest {
    int version = 1;
    uint64_t seed = 0;
    double split_ratio = 0.8;
    std::vector<PairedSample> samples;
    std::vector<std::string> warnings;

    // Set on load/build so relative sample paths can be resolved; not serialized.
    std::string base_dir;

    std::vector<const PairedSample*> split(const std::string& name) const;
    std::string resolve(const std::string& rel_path) const;

    void save(const std::string& path) const;
    static DatasetManifest load(const std::string& path);
};

struct BuildOptions {
    int near_dup_threshold = 5;
};

// Scans photo_dir for PNGs (lexicographic order), dedups, synthesizes the
// sketch for every retained photo into out_dir/sketches/, assigns seeded
// train/test splits (train count = round(ratio * N), half up), and writes
// out_dir/manifest.json. Undecodable files are skipped with a warning in the
// manifest; fewer than 2 usable photos is an error.
DatasetManifest build_manifest(const std::string& photo_dir, const std::string& out_dir,
                               double split_ratio, uint64_t seed,
                               const SketchParams& params = {},
                               const BuildOptions& opts = {});

// Procedural corpus: white background, centered dress silhouette, two-color
// print (dots, stripes, or diamonds). Deterministic in (n, size, seed).
// Writes out_dir/photos/ then runs build_manifest over it (exact dedup only).
DatasetManifest generate_synthetic_corpus(int n, int size, uint64_t seed,
                                          const std::string& out_dir,
                                          double split_ratio = 0.8);

struct BackgroundReport {
    double white_fraction = 0.0;
    bool pass = false;
};

// Fraction of border-band pixels whose luminance is >= 0.95, compared against
// min_white_fraction. The band must be narrower than half the smaller side.
BackgroundReport validate_background(const ImageTensor& img, int border_band,
                                     double min_white_fraction);

}  // namespace sketchloom
