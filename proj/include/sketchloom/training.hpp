#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "sketchloom/augment.hpp"
#include "sketchloom/dataset.hpp"
#include "sketchloom/evaluation.hpp"
#include "sketchloom/nn/network.hpp"

namespace sketchloom {

struct LrInterval {
    double base = 0.0;
    double max = 0.0;
};

struct TrainConfig {
    std::string loss_kind = "hinge";  // hinge | bce
    double lambda_l1 = 100.0;
    int batch_size = 1;
    int d_steps_per_g_step = 2;
    LrInterval g_lr_interval{1e-5, 2e-4};
    LrInterval d_lr_interval{2e-5, 4e-4};  // strictly above G's, by contract
    long lr_step_size = 500;
    std::string lr_policy = "cyclical_triangular";  // | constant
    std::string spectral_norm_target = "generator";  // generator|discriminator|both|none
    long total_g_steps = 2000;
    long eval_every = 500;
    uint64_t seed = 1;

    void validate() const;  // throws ConfigError
};

// Triangular schedule: cycle = floor(1 + step/(2*step_size)),
// x = |step/step_size - 2*cycle + 1|, lr = base + (max-base)*max(0, 1-x).
double cyclical_lr(long step, double base, double max, long step_size);
// Applies the configured policy; "constant" pins the rate at interval.max.
double scheduled_lr(const std::string& policy, long step, const LrInterval& interval,
                    long step_size);

// Score-map losses (means over every element). Gradient companions fill
// d(loss)/d(score) with the same mean normalization.
double hinge_d_loss(const nn::Tensor4<float>& real, const nn::Tensor4<float>& fake);
double hinge_g_loss(const nn::Tensor4<float>& fake);
std::pair<double, double> bce_gan_losses(const nn::Tensor4<float>& real,
                                         const nn::Tensor4<float>& fake);
double l1_loss(const nn::Tensor4<float>& a, const nn::Tensor4<float>& b);

void hinge_d_grad(const nn::Tensor4<float>& real, const nn::Tensor4<float>& fake,
                  nn::Tensor4<float>& dreal, nn::Tensor4<float>& dfake);
void hinge_g_grad(const nn::Tensor4<float>& fake, nn::Tensor4<float>& dfake);
void bce_d_grad(const nn::Tensor4<float>& real, const nn::Tensor4<float>& fake,
                nn::Tensor4<float>& dreal, nn::Tensor4<float>& dfake);
void bce_g_grad(const nn::Tensor4<float>& fake, nn::Tensor4<float>& dfake);
// Adds scale * sign(a - b) / a.size() into dst (dst must match a's shape).
void l1_grad(const nn::Tensor4<float>& a, const nn::Tensor4<float>& b, double scale,
             nn::Tensor4<float>& dst);

struct AdamSlot {
    std::vector<float> m, v;
};

// Bias-corrected Adam on one tensor; t is the 1-based update count.
void adam_step(float* param, const float* grad, size_t n, AdamSlot& slot, long t, double lr,
               double beta1 = 0.5, double beta2 = 0.999, double eps = 1e-8);

struct Optimizer {
    std::vector<AdamSlot> slots;
    long t = 0;
    double beta1 = 0.5, beta2 = 0.999, eps = 1e-8;

    void init(const std::vector<nn::ParamRef<float>>& params);
    void step(const std::vector<nn::ParamRef<float>>& params, double lr);
};

// Everything a run needs beyond the dataset. eval_every lives in TrainConfig;
// the extractor settings mirror the config file's eval section.
struct TrainSetup {
    TrainConfig train;
    AugmentParams augment;
    nn::NetworkSpec generator;
    nn::NetworkSpec discriminator;
    uint64_t extractor_seed = 17;
    int feature_dim = 64;
    int fid_max_samples = 0;  // 0 = the whole test split
};

struct MetricsRow {
    long step = 0;
    double d_loss = 0, g_adv_loss = 0, g_l1_loss = 0, g_lr = 0, d_lr = 0;
};

struct RunArtifacts {
    std::vector<std::pair<long, std::string>> checkpoints;  // (stage, path)
    std::string metrics_path;
    std::vector<MetricsRow> metrics;
    evaluation::RunSeries fid_series;
    uint64_t seed = 0;
    long total_g_updates = 0;
    long total_d_updates = 0;
};

// Test instrumentation; defaults reproduce the full pipeline.
struct TrainHooks {
    bool freeze_discriminator = false;  // skip D optimizer steps (loop shape unchanged)
    bool compute_fid = true;
    bool write_checkpoints = true;
};

RunArtifacts train(const TrainSetup& setup, const DatasetManifest& manifest,
                   const std::filesystem::path& out_dir, const TrainHooks& hooks = {});

// Continues a run from one of its checkpoints; the architecture and seed in
// the checkpoint must match the setup. Replayed steps use the same derived
// random streams, so the final parameters match the uninterrupted run bitwise.
RunArtifacts train_resume(const TrainSetup& setup, const DatasetManifest& manifest,
                          const std::filesystem::path& out_dir,
                          const std::filesystem::path& checkpoint_path,
                          const TrainHooks& hooks = {});

}  // namespace sketchloom
