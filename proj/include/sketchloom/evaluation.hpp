#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "sketchloom/image.hpp"
#include "sketchloom/nn/layers.hpp"

namespace sketchloom::evaluation {

// Gaussian fit of a feature cloud. cov already carries the 1e-6 ridge.
struct FeatureStats {
    int d = 0;
    long n = 0;
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

struct RunSeries {
    uint64_t run_seed = 0;
    std::vector<std::pair<long, double>> points;  // (stage in G-steps, fid)
};

struct AggregatedSeries {
    std::string variant = "run";
    std::vector<long> stages;
    std::vector<double> mean_fid;
    std::vector<double> ci_half_width;
    double confidence = 0.99;
    int n_runs = 0;
};

// Fixed untrained conv stack + global average pooling. Deterministic per
// (seed, d); weights can round-trip through the tensor-file container so an
// externally trained backbone can be dropped in instead.
class FeatureExtractor {
  public:
    static FeatureExtractor seeded(uint64_t seed, int d);
    static FeatureExtractor from_file(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    int dim() const { return d_; }
    // One row per image, in input order. All images must share dimensions
    // (side >= 8 so three stride-2 convs survive).
    Eigen::MatrixXd extract(const std::vector<const ImageTensor*>& images) const;

  private:
    int d_ = 0;
    mutable nn::Conv2d<float> c1_, c2_, c3_;
};

FeatureStats gaussian_stats(const Eigen::MatrixXd& features);

// Symmetric PSD square root via eigendecomposition; negative eigenvalues are
// clamped to zero. Inputs more than 1e-8 away from symmetric are rejected.
Eigen::MatrixXd sqrtm_psd(const Eigen::MatrixXd& m);

struct FidValue {
    double value = 0.0;  // clamped at zero
    double raw = 0.0;    // pre-clamp, for diagnostics
};

FidValue fid(const FeatureStats& a, const FeatureStats& b);

double student_t_quantile(double p, int dof);

AggregatedSeries aggregate_runs(const std::vector<RunSeries>& runs, double confidence);

// CSV schema: stage,mean_fid,ci_lo,ci_hi,variant. SVG: one polyline plus one
// shaded confidence band per variant.
void emit_series_csv(const std::vector<AggregatedSeries>& series,
                     const std::filesystem::path& csv_path);
void emit_series_svg(const std::vector<AggregatedSeries>& series,
                     const std::filesystem::path& svg_path);
void emit_series(const std::vector<AggregatedSeries>& series,
                 const std::filesystem::path& csv_path, const std::filesystem::path& svg_path);

}  // namespace sketchloom::evaluation
