#include "sketchloom/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>

#include "sketchloom/errors.hpp"
#include "sketchloom/nn/checkpoint.hpp"

namespace sketchloom {

void TrainConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError(msg); };
    if (loss_kind != "hinge" && loss_kind != "bce")
        fail("train.loss_kind must be hinge or bce, got " + loss_kind);
    if (lr_policy != "cyclical_triangular" && lr_policy != "constant")
        fail("train.lr_policy must be cyclical_triangular or constant, got " + lr_policy);
    if (spectral_norm_target != "generator" && spectral_norm_target != "discriminator" &&
        spectral_norm_target != "both" && spectral_norm_target != "none")
        fail("train.spectral_norm_target must be generator, discriminator, both or none");
    if (lambda_l1 < 0.0) fail("train.lambda_l1 must be >= 0");
    if (batch_size < 1) fail("train.batch_size must be >= 1");
    if (d_steps_per_g_step < 1) fail("train.d_steps_per_g_step must be >= 1");
    if (lr_step_size < 1) fail("train.lr_step_size must be >= 1");
    if (total_g_steps < 1) fail("train.total_g_steps must be >= 1");
    if (eval_every < 1) fail("eval.eval_every must be >= 1");
    if (!(d_lr_interval.max > g_lr_interval.max))
        fail("train.d_lr.max must exceed train.g_lr.max (discriminator runs hotter)");
    if (!(d_lr_interval.base >= g_lr_interval.base))
        fail("train.d_lr.base must be >= train.g_lr.base");
    if (lr_policy == "cyclical_triangular") {
        if (!(g_lr_interval.base < g_lr_interval.max))
            fail("train.g_lr.base must be < train.g_lr.max under the cyclical policy");
        if (!(d_lr_interval.base < d_lr_interval.max))
            fail("train.d_lr.base must be < train.d_lr.max under the cyclical policy");
    }
}

double cyclical_lr(long step, double base, double max, long step_size) {
    require(step >= 0, "cyclical_lr: step must be >= 0");
    require(step_size >= 1, "cyclical_lr: step_size must be >= 1");
    require(base <= max, "cyclical_lr: base must be <= max");
    const double cycle = std::floor(1.0 + double(step) / (2.0 * double(step_size)));
    const double x = std::abs(double(step) / double(step_size) - 2.0 * cycle + 1.0);
    return base + (max - base) * std::max(0.0, 1.0 - x);
}

double scheduled_lr(const std::string& policy, long step, const LrInterval& interval,
                    long step_size) {
    if (policy == "constant") return interval.max;
    return cyclical_lr(step, interval.base, interval.max, step_size);
}

namespace {

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

double hinge_d_loss(const nn::Tensor4<float>& real, const nn::Tensor4<float>& fake) {
    require(real.same_shape(fake), "hinge_d_loss: score maps differ in shape");
    double r = 0.0, f = 0.0;
    for (float v : real.v) r += std::max(0.0, 1.0 - double(v));
    for (float v : fake.v) f += std::max(0.0, 1.0 + double(v));
    return r / double(real.size()) + f / double(fake.size());
}

double hinge_g_loss(const nn::Tensor4<float>& fake) {
    double s = 0.0;
    for (float v : fake.v) s += v;
    return -s / double(fake.size());
}

std::pair<double, double> bce_gan_losses(const nn::Tensor4<float>& real,
                                         const nn::Tensor4<float>& fake) {
    double dr = 0.0, df = 0.0, g = 0.0;
    for (float v : real.v) dr += softplus(-double(v));
    for (float v : fake.v) {
        df += softplus(double(v));
        g += softplus(-double(v));
    }
    return {dr / double(real.size()) + df / double(fake.size()), g / double(fake.size())};
}

double l1_loss(const nn::Tensor4<float>& a, const nn::Tensor4<float>& b) {
    require(a.same_shape(b), "l1_loss: tensors differ in shape");
    double s = 0.0;
    for (size_t i = 0; i < a.v.size(); ++i) s += std::abs(double(a.v[i]) - double(b.v[i]));
    return s / double(a.size());
}

void hinge_d_grad(const nn::Tensor4<float>& real, const nn::Tensor4<float>& fake,
                  nn::Tensor4<float>& dreal, nn::Tensor4<float>& dfake) {
    dreal = nn::Tensor4<float>(real.n, real.c, real.h, real.w);
    dfake = nn::Tensor4<float>(fake.n, fake.c, fake.h, fake.w);
    const float nr = float(1.0 / double(real.size())), nf = float(1.0 / double(fake.size()));
    for (size_t i = 0; i < real.v.size(); ++i) dreal.v[i] = real.v[i] < 1.0f ? -nr : 0.0f;
    for (size_t i = 0; i < fake.v.size(); ++i) dfake.v[i] = fake.v[i] > -1.0f ? nf : 0.0f;
}

void hinge_g_grad(const nn::Tensor4<float>& fake, nn::Tensor4<float>& dfake) {
    dfake = nn::Tensor4<float>(fake.n, fake.c, fake.h, fake.w);
    const float nf = float(1.0 / double(fake.size()));
    for (float& v : dfake.v) v = -nf;
}

void bce_d_grad(const nn::Tensor4<float>& real, const nn::Tensor4<float>& fake,
                nn::Tensor4<float>& dreal, nn::Tensor4<float>& dfake) {
    dreal = nn::Tensor4<float>(real.n, real.c, real.h, real.w);
    dfake = nn::Tensor4<float>(fake.n, fake.c, fake.h, fake.w);
    const double nr = 1.0 / double(real.size()), nf = 1.0 / double(fake.size());
    for (size_t i = 0; i < real.v.size(); ++i)
        dreal.v[i] = float((sigmoid(real.v[i]) - 1.0) * nr);
    for (size_t i = 0; i < fake.v.size(); ++i) dfake.v[i] = float(sigmoid(fake.v[i]) * nf);
}

void bce_g_grad(const nn::Tensor4<float>& fake, nn::Tensor4<float>& dfake) {
    dfake = nn::Tensor4<float>(fake.n, fake.c, fake.h, fake.w);
    const double nf = 1.0 / double(fake.size());
    for (size_t i = 0; i < fake.v.size(); ++i)
        dfake.v[i] = float((sigmoid(fake.v[i]) - 1.0) * nf);
}

void l1_grad(const nn::Tensor4<float>& a, const nn::Tensor4<float>& b, double scale,
             nn::Tensor4<float>& dst) {
    require(a.same_shape(b) && a.same_shape(dst), "l1_grad: tensors differ in shape");
    const double s = scale / double(a.size());
    for (size_t i = 0; i < a.v.size(); ++i) {
        const double d = double(a.v[i]) - double(b.v[i]);
        if (d > 0.0)
            dst.v[i] += float(s);
        else if (d < 0.0)
            dst.v[i] -= float(s);
    }
}

void adam_step(float* param, const float* grad, size_t n, AdamSlot& slot, long t, double lr,
               double beta1, double beta2, double eps) {
    require(t >= 1, "adam_step: t must be >= 1");
    require(slot.m.size() == n && slot.v.size() == n, "adam_step: moment size mismatch");
    const double c1 = 1.0 - std::pow(beta1, double(t));
    const double c2 = 1.0 - std::pow(beta2, double(t));
    for (size_t i = 0; i < n; ++i) {
        const double g = grad[i];
        const double m = beta1 * double(slot.m[i]) + (1.0 - beta1) * g;
        const double v = beta2 * double(slot.v[i]) + (1.0 - beta2) * g * g;
        slot.m[i] = float(m);
        slot.v[i] = float(v);
        param[i] = float(double(param[i]) - lr * (m / c1) / (std::sqrt(v / c2) + eps));
    }
}

void Optimizer::init(const std::vector<nn::ParamRef<float>>& params) {
    slots.clear();
    slots.resize(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
        slots[i].m.assign(params[i].value->size(), 0.0f);
        slots[i].v.assign(params[i].value->size(), 0.0f);
    }
    t = 0;
}

void Optimizer::step(const std::vector<nn::ParamRef<float>>& params, double lr) {
    require(slots.size() == params.size(), "optimizer was initialized for a different network");
    ++t;
    for (size_t i = 0; i < params.size(); ++i)
        adam_step(params[i].value->data(), params[i].grad->data(), params[i].value->size(),
                  slots[i], t, lr, beta1, beta2, eps);
}

namespace {

namespace fs = std::filesystem;

nn::Tensor4<float> concat_batch(const nn::Tensor4<float>& a, const nn::Tensor4<float>& b) {
    require(a.c == b.c && a.h == b.h && a.w == b.w, "concat_batch: item shapes differ");
    nn::Tensor4<float> out(a.n + b.n, a.c, a.h, a.w);
    std::copy(a.v.begin(), a.v.end(), out.v.begin());
    std::copy(b.v.begin(), b.v.end(), out.v.begin() + a.v.size());
    return out;
}

struct LoadedPair {
    ImageTensor sketch, photo;
};

// Decoded train/test samples, loaded once and reused across steps.
class PairCache {
  public:
    PairCache(const DatasetManifest& man, std::vector<const PairedSample*> entries)
        : man_(man), entries_(std::move(entries)), cache_(entries_.size()) {}

    size_t size() const { return entries_.size(); }

    const LoadedPair& get(size_t i) {
        if (!cache_[i]) {
            LoadedPair p;
            p.sketch = load_png(man_.resolve(entries_[i]->sketch_path));
            p.photo = load_png(man_.resolve(entries_[i]->photo_path));
            cache_[i] = std::move(p);
        }
        return *cache_[i];
    }

  private:
    const DatasetManifest& man_;
    std::vector<const PairedSample*> entries_;
    std::vector<std::optional<LoadedPair>> cache_;
};

ImageTensor sized_to(const ImageTensor& img, int side) {
    if (img.height == side && img.width == side) return img;
    return resize_bilinear(img, side, side);
}

struct TrainState {
    nn::UNetGenerator<float> gen;
    nn::PatchGanDiscriminator<float> disc;
    Optimizer opt_g, opt_d;
    long g_step = 0;  // completed G updates
    long d_step = 0;  // completed D updates
};

constexpr const char* kCsvHeader = "step,d_loss,g_adv_loss,g_l1_loss,g_lr,d_lr";

std::string format_row(const MetricsRow& r) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%ld,%.17g,%.17g,%.17g,%.17g,%.17g", r.step, r.d_loss,
                  r.g_adv_loss, r.g_l1_loss, r.g_lr, r.d_lr);
    return buf;
}

void write_run_checkpoint(const fs::path& path, TrainState& st, const TrainSetup& setup) {
    nn::TensorFile tf;
    tf.metadata["kind"] = "train_checkpoint";
    tf.metadata["g_step"] = st.g_step;
    tf.metadata["d_step"] = st.d_step;
    tf.metadata["adam_g_t"] = st.opt_g.t;
    tf.metadata["adam_d_t"] = st.opt_d.t;
    tf.metadata["seed"] = setup.train.seed;
    tf.metadata["generator"] = nn::spec_to_json(setup.generator);
    tf.metadata["discriminator"] = nn::spec_to_json(setup.discriminator);

    nn::append_tensors(tf.tensors, "g.", st.gen.parameters());
    nn::append_tensors(tf.tensors, "g.", st.gen.state_buffers());
    nn::append_tensors(tf.tensors, "d.", st.disc.parameters());
    nn::append_tensors(tf.tensors, "d.", st.disc.state_buffers());

    auto put_moments = [&](const std::string& prefix, const Optimizer& opt,
                           const std::vector<nn::ParamRef<float>>& params) {
        for (size_t i = 0; i < params.size(); ++i) {
            tf.tensors.push_back({prefix + params[i].name + ".m",
                                  {int(opt.slots[i].m.size())}, opt.slots[i].m});
            tf.tensors.push_back({prefix + params[i].name + ".v",
                                  {int(opt.slots[i].v.size())}, opt.slots[i].v});
        }
    };
    put_moments("adam_g.", st.opt_g, st.gen.parameters());
    put_moments("adam_d.", st.opt_d, st.disc.parameters());
    nn::save_tensor_file(path, tf);
}

void load_run_checkpoint(const fs::path& path, TrainState& st, const TrainSetup& setup) {
    nn::TensorFile tf = nn::load_tensor_file(path);
    if (!tf.metadata.contains("kind") || tf.metadata["kind"] != "train_checkpoint")
        throw FormatError("not a training checkpoint: " + path.string());
    const nn::NetworkSpec g_spec = nn::spec_from_json(tf.metadata.at("generator"));
    const nn::NetworkSpec d_spec = nn::spec_from_json(tf.metadata.at("discriminator"));
    if (nn::spec_to_json(g_spec) != nn::spec_to_json(setup.generator) ||
        nn::spec_to_json(d_spec) != nn::spec_to_json(setup.discriminator))
        throw ConfigError("checkpoint architecture differs from the configured one: " +
                          path.string());
    if (tf.metadata.at("seed").get<uint64_t>() != setup.train.seed)
        throw ConfigError("checkpoint seed differs from the configured seed");

    nn::restore_tensors(tf, "g.", st.gen.parameters());
    nn::restore_tensors(tf, "g.", st.gen.state_buffers());
    nn::restore_tensors(tf, "d.", st.disc.parameters());
    nn::restore_tensors(tf, "d.", st.disc.state_buffers());

    auto grab_moments = [&](const std::string& prefix, Optimizer& opt,
                            const std::vector<nn::ParamRef<float>>& params) {
        for (size_t i = 0; i < params.size(); ++i) {
            const nn::NamedTensor& m = tf.need(prefix + params[i].name + ".m");
            const nn::NamedTensor& v = tf.need(prefix + params[i].name + ".v");
            if (m.data.size() != opt.slots[i].m.size() || v.data.size() != opt.slots[i].v.size())
                throw FormatError("optimizer moment size mismatch in " + path.string());
            opt.slots[i].m = m.data;
            opt.slots[i].v = v.data;
        }
    };
    grab_moments("adam_g.", st.opt_g, st.gen.parameters());
    grab_moments("adam_d.", st.opt_d, st.disc.parameters());
    st.g_step = tf.metadata.at("g_step").get<long>();
    st.d_step = tf.metadata.at("d_step").get<long>();
    st.opt_g.t = tf.metadata.at("adam_g_t").get<long>();
    st.opt_d.t = tf.metadata.at("adam_d_t").get<long>();
}

// FID of generator outputs on the test split against the test photos.
double eval_fid(TrainState& st, const TrainSetup& setup, PairCache& test) {
    const int side = setup.augment.crop_to;
    size_t n = test.size();
    if (setup.fid_max_samples > 0) n = std::min(n, size_t(setup.fid_max_samples));
    if (n < 2) throw TrainingError("FID needs at least 2 test samples, found " + std::to_string(n));

    std::vector<ImageTensor> real, gend;
    real.reserve(n);
    gend.reserve(n);
    RngStream no_dropout(0);  // eval mode never draws from it
    for (size_t i = 0; i < n; ++i) {
        const LoadedPair& pair = test.get(i);
        real.push_back(sized_to(pair.photo, side));
        const ImageTensor sk = sized_to(pair.sketch, side);
        nn::Tensor4<float> x = nn::batch_from_images<float>({&sk});
        nn::Tensor4<float> y = st.gen.forward(x, false, no_dropout, false);
        gend.push_back(nn::image_from_batch(y, 0));
    }
    std::vector<const ImageTensor*> rp, gp;
    for (const ImageTensor& im : real) rp.push_back(&im);
    for (const ImageTensor& im : gend) gp.push_back(&im);

    evaluation::FeatureExtractor fx =
        evaluation::FeatureExtractor::seeded(setup.extractor_seed, setup.feature_dim);
    const auto stats_r = evaluation::gaussian_stats(fx.extract(rp));
    const auto stats_g = evaluation::gaussian_stats(fx.extract(gp));
    return evaluation::fid(stats_r, stats_g).value;
}

RunArtifacts run_loop(const TrainSetup& setup, const DatasetManifest& manifest,
                      const fs::path& out_dir, const TrainHooks& hooks, TrainState& st) {
    const TrainConfig& cfg = setup.train;
    PairCache train_pairs(manifest, manifest.split("train"));
    PairCache test_pairs(manifest, manifest.split("test"));
    if (train_pairs.size() == 0) throw TrainingError("train split is empty");

    fs::create_directories(out_dir);
    const fs::path ckpt_dir = out_dir / "checkpoints";
    if (hooks.write_checkpoints) fs::create_directories(ckpt_dir);

    RunArtifacts art;
    art.seed = cfg.seed;
    art.metrics_path = (out_dir / "metrics.csv").string();
    std::ofstream metrics(art.metrics_path, std::ios::binary);
    if (!metrics) throw TrainingError("cannot open metrics log: " + art.metrics_path);
    metrics << kCsvHeader << '\n';

    const bool sn_g =
        cfg.spectral_norm_target == "generator" || cfg.spectral_norm_target == "both";
    const bool sn_d =
        cfg.spectral_norm_target == "discriminator" || cfg.spectral_norm_target == "both";

    auto eval_point = [&](long stage) {
        if (hooks.compute_fid) art.fid_series.points.push_back({stage, eval_fid(st, setup, test_pairs)});
        if (hooks.write_checkpoints) {
            char name[64];
            std::snprintf(name, sizeof name, "step_%06ld.sklm", stage);
            const fs::path p = ckpt_dir / name;
            write_run_checkpoint(p, st, setup);
            art.checkpoints.push_back({stage, p.string()});
        }
    };

    art.fid_series.run_seed = cfg.seed;
    if (st.g_step == 0) eval_point(0);

    const int B = cfg.batch_size;
    for (long t = st.g_step; t < cfg.total_g_steps; ++t) {
        // One augmented batch and one generator forward per G-step; the same
        // fake batch feeds every D update and the G update.
        RngStream batch_rng = derive_stream(cfg.seed, stream_tag("batch"), uint64_t(t));
        std::vector<ImageTensor> sketches, photos;
        sketches.reserve(B);
        photos.reserve(B);
        for (int s = 0; s < B; ++s) {
            const size_t idx = size_t(batch_rng.next_below(train_pairs.size()));
            const LoadedPair& pair = train_pairs.get(idx);
            RngStream aug_rng =
                derive_stream(cfg.seed, stream_tag("aug"), uint64_t(t), uint64_t(s));
            auto [sk, ph] = augment_pair(pair.sketch, pair.photo, setup.augment, aug_rng);
            sketches.push_back(std::move(sk));
            photos.push_back(std::move(ph));
        }
        std::vector<const ImageTensor*> sp, pp;
        for (const ImageTensor& im : sketches) sp.push_back(&im);
        for (const ImageTensor& im : photos) pp.push_back(&im);
        nn::Tensor4<float> x = nn::batch_from_images<float>(sp);
        nn::Tensor4<float> y = nn::batch_from_images<float>(pp);

        RngStream dropout_rng = derive_stream(cfg.seed, stream_tag("gdrop"), uint64_t(t));
        nn::Tensor4<float> fake = st.gen.forward(x, true, dropout_rng, sn_g);

        const nn::Tensor4<float> real_in = nn::concat_channels(x, y);
        const nn::Tensor4<float> fake_in = nn::concat_channels(x, fake);

        // D updates: one forward over the stacked real+fake batch per update.
        double d_loss = 0.0, d_lr = 0.0;
        for (int k = 0; k < cfg.d_steps_per_g_step; ++k) {
            d_lr = scheduled_lr(cfg.lr_policy, st.d_step, cfg.d_lr_interval, cfg.lr_step_size);
            nn::Tensor4<float> both = concat_batch(real_in, fake_in);
            nn::Tensor4<float> scores = st.disc.forward(both, sn_d);
            nn::Tensor4<float> real_s(B, scores.c, scores.h, scores.w);
            nn::Tensor4<float> fake_s(B, scores.c, scores.h, scores.w);
            const size_t half = real_s.v.size();
            std::copy(scores.v.begin(), scores.v.begin() + half, real_s.v.begin());
            std::copy(scores.v.begin() + half, scores.v.end(), fake_s.v.begin());

            nn::Tensor4<float> dreal, dfake;
            if (cfg.loss_kind == "hinge") {
                d_loss = hinge_d_loss(real_s, fake_s);
                hinge_d_grad(real_s, fake_s, dreal, dfake);
            } else {
                d_loss = bce_gan_losses(real_s, fake_s).first;
                bce_d_grad(real_s, fake_s, dreal, dfake);
            }
            nn::Tensor4<float> dscores(scores.n, scores.c, scores.h, scores.w);
            std::copy(dreal.v.begin(), dreal.v.end(), dscores.v.begin());
            std::copy(dfake.v.begin(), dfake.v.end(), dscores.v.begin() + half);

            st.disc.zero_grad();
            st.disc.backward(dscores, false);
            if (!hooks.freeze_discriminator) st.opt_d.step(st.disc.parameters(), d_lr);
            ++st.d_step;
            ++art.total_d_updates;
        }

        // G update: adversarial gradient through D plus the L1 term, then
        // backprop through the generator's cached forward.
        const double g_lr = scheduled_lr(cfg.lr_policy, t, cfg.g_lr_interval, cfg.lr_step_size);
        nn::Tensor4<float> scores = st.disc.forward(fake_in, false);
        double g_adv;
        nn::Tensor4<float> dscores;
        if (cfg.loss_kind == "hinge") {
            g_adv = hinge_g_loss(scores);
            hinge_g_grad(scores, dscores);
        } else {
            double s = 0.0;
            for (float v : scores.v) s += softplus(-double(v));
            g_adv = s / double(scores.size());
            bce_g_grad(scores, dscores);
        }
        st.disc.zero_grad();
        nn::Tensor4<float> din = st.disc.backward(dscores, true);
        nn::Tensor4<float> d_sketch, d_fake;
        nn::split_channels(din, x.c, d_sketch, d_fake);

        const double g_l1 = l1_loss(fake, y);
        l1_grad(fake, y, cfg.lambda_l1, d_fake);

        st.gen.zero_grad();
        st.gen.backward(d_fake);
        st.opt_g.step(st.gen.parameters(), g_lr);
        ++st.g_step;
        ++art.total_g_updates;

        if (!std::isfinite(d_loss) || !std::isfinite(g_adv) || !std::isfinite(g_l1)) {
            char msg[256];
            std::snprintf(msg, sizeof msg,
                          "non-finite loss at g-step %ld: d_loss=%g g_adv=%g g_l1=%g", t, d_loss,
                          g_adv, g_l1);
            throw TrainingError(msg);
        }

        MetricsRow row{t, d_loss, g_adv, g_l1, g_lr, d_lr};
        art.metrics.push_back(row);
        metrics << format_row(row) << '\n';

        const long stage = t + 1;
        if (stage % cfg.eval_every == 0 || stage == cfg.total_g_steps) eval_point(stage);
    }
    if (!metrics.flush()) throw TrainingError("metrics log write failed: " + art.metrics_path);

    if (hooks.compute_fid) {
        std::ofstream fs_out(out_dir / "fid_series.csv", std::ios::binary);
        fs_out << "stage,fid\n";
        for (const auto& [stage, value] : art.fid_series.points) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%ld,%.17g", stage, value);
            fs_out << buf << '\n';
        }
    }
    return art;
}

TrainState build_state(const TrainSetup& setup) {
    TrainState st;
    RngStream g_rng = derive_stream(setup.train.seed, stream_tag("ginit"));
    RngStream d_rng = derive_stream(setup.train.seed, stream_tag("dinit"));
    nn::NetworkSpec g_spec = setup.generator;
    nn::NetworkSpec d_spec = setup.discriminator;
    st.gen.build(g_spec, g_rng);
    st.disc.build(d_spec, d_rng);
    st.opt_g.init(st.gen.parameters());
    st.opt_d.init(st.disc.parameters());
    return st;
}

TrainSetup normalized(TrainSetup setup) {
    setup.train.validate();
    const bool sn_g = setup.train.spectral_norm_target == "generator" ||
                      setup.train.spectral_norm_target == "both";
    const bool sn_d = setup.train.spectral_norm_target == "discriminator" ||
                      setup.train.spectral_norm_target == "both";
    setup.generator.spectral_norm = sn_g;
    setup.discriminator.spectral_norm = sn_d;
    setup.generator.validate();
    setup.discriminator.validate();
    require(setup.discriminator.in_channels ==
                setup.generator.in_channels + setup.generator.out_channels,
            "discriminator input channels must equal sketch + photo channels");
    return setup;
}

}  // namespace

RunArtifacts train(const TrainSetup& raw_setup, const DatasetManifest& manifest,
                   const std::filesystem::path& out_dir, const TrainHooks& hooks) {
    const TrainSetup setup = normalized(raw_setup);
    TrainState st = build_state(setup);
    return run_loop(setup, manifest, out_dir, hooks, st);
}

RunArtifacts train_resume(const TrainSetup& raw_setup, const DatasetManifest& manifest,
                          const std::filesystem::path& out_dir,
                          const std::filesystem::path& checkpoint_path,
                          const TrainHooks& hooks) {
    const TrainSetup setup = normalized(raw_setup);
    TrainState st = build_state(setup);
    load_run_checkpoint(checkpoint_path, st, setup);
    return run_loop(setup, manifest, out_dir, hooks, st);
}

}  // namespace sketchloom
