#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "sketchloom/image.hpp"
#include "sketchloom/nn/layers.hpp"

namespace sketchloom::nn {

// Shared shape recipe for both architectures. For the generator, depth is the
// number of 2x downsampling levels (input side must divide by 2^depth). For
// the discriminator, depth is the number of stride-2 blocks; a stride-1 block
// and the 1-channel score head always follow.
struct NetworkSpec {
    std::string kind;  // "unet_generator" or "patchgan_discriminator"
    int in_channels = 1;
    int out_channels = 3;
    int base_width = 64;
    int depth = 8;
    double dropout_p = 0.5;
    bool spectral_norm = false;

    int width_at(int level) const {
        return base_width * std::min(1 << level, 8);
    }
    void validate() const;
};

template <typename T>
struct ParamRef {
    std::string name;
    std::vector<T>* value = nullptr;
    std::vector<T>* grad = nullptr;  // null for non-trainable state (u, v)
    std::vector<int> shape;
};

// Encoder-decoder with skip connections. Encoder level i: LeakyReLU(0.2)
// (levels > 0), stride-2 conv to width_at(i), instance norm except on the
// first and innermost levels. Decoder level j: ReLU, stride-2 transposed
// conv, instance norm except on the output layer, dropout on the first three
// inner levels; the decoder input concatenates the previous decoder output
// with the mirrored encoder activation. Output goes through tanh.
template <typename T>
struct UNetGenerator {
    NetworkSpec spec;
    std::vector<Conv2d<T>> enc;
    std::vector<LeakyReLU<T>> enc_act;       // for levels 1..depth-1
    std::vector<InstanceNorm<T>> enc_norm;   // for levels 1..depth-2
    std::vector<TransposedConv2d<T>> dec;
    std::vector<ReLU<T>> dec_act;
    std::vector<InstanceNorm<T>> dec_norm;   // for levels 0..depth-2
    std::vector<Dropout<T>> dec_drop;        // levels 0..min(3, depth-1)-1
    Tanh<T> out_act;

    std::vector<Tensor4<T>> e;  // saved encoder outputs (skip sources)

    void build(const NetworkSpec& s, RngStream& rng) {
        s.validate();
        require(s.kind == "unet_generator", "UNetGenerator: wrong spec kind");
        spec = s;
        const int D = s.depth;
        enc.resize(D);
        enc_act.resize(D - 1);
        enc_norm.resize(std::max(0, D - 2));
        dec.resize(D);
        dec_act.resize(D);
        dec_norm.resize(D - 1);
        dec_drop.resize(std::min(3, D - 1));

        for (int i = 0; i < D; ++i) {
            const int cin = (i == 0) ? s.in_channels : s.width_at(i - 1);
            enc[i].init(cin, s.width_at(i), 4, 2, 1, rng);
            if (i >= 1 && i <= D - 2) enc_norm[i - 1].init(s.width_at(i));
        }
        for (int j = 0; j < D; ++j) {
            const int cin = (j == 0) ? s.width_at(D - 1) : 2 * s.width_at(D - 1 - j);
            const int cout = (j == D - 1) ? s.out_channels : s.width_at(D - 2 - j);
            dec[j].init(cin, cout, 4, 2, 1, rng);
            if (j < D - 1) dec_norm[j].init(cout);
        }
        for (auto& d : dec_drop) d.p = T(s.dropout_p);
        if (s.spectral_norm) {
            for (auto& c : enc) c.enable_spectral_norm(rng);
            for (auto& d : dec) d.enable_spectral_norm(rng);
        }
    }

    Tensor4<T> forward(const Tensor4<T>& x, bool train, RngStream& dropout_rng,
                       bool update_sn) {
        require(x.h % (1 << spec.depth) == 0 && x.w % (1 << spec.depth) == 0,
                "UNetGenerator: input side must be divisible by 2^depth");
        const int D = spec.depth;
        e.assign(D, {});
        Tensor4<T> t = enc[0].forward(x, update_sn);
        e[0] = t;
        for (int i = 1; i < D; ++i) {
            t = enc_act[i - 1].forward(t);
            t = enc[i].forward(t, update_sn);
            if (i <= D - 2) t = enc_norm[i - 1].forward(t);
            e[i] = t;
        }
        for (int j = 0; j < D; ++j) {
            Tensor4<T> in = (j == 0) ? e[D - 1] : concat_channels(t, e[D - 1 - j]);
            in = dec_act[j].forward(in);
            t = dec[j].forward(in, update_sn);
            if (j < D - 1) t = dec_norm[j].forward(t);
            if (j < int(dec_drop.size())) t = dec_drop[j].forward(t, train, dropout_rng);
        }
        return out_act.forward(t);
    }

    Tensor4<T> backward(const Tensor4<T>& dy) {
        const int D = spec.depth;
        std::vector<Tensor4<T>> de(D);  // skip gradients joining the encoder
        Tensor4<T> g = out_act.backward(dy);
        for (int j = D - 1; j >= 0; --j) {
            if (j < int(dec_drop.size())) g = dec_drop[j].backward(g);
            if (j < D - 1) g = dec_norm[j].backward(g);
            g = dec[j].backward(g);
            g = dec_act[j].backward(g);
            if (j == 0) {
                de[D - 1] = add_into(std::move(de[D - 1]), g);
            } else {
                Tensor4<T> dprev, dskip;
                split_channels(g, spec.width_at(D - 1 - j), dprev, dskip);
                de[D - 1 - j] = add_into(std::move(de[D - 1 - j]), dskip);
                g = std::move(dprev);
            }
            if (j == 0) break;
        }
        g = std::move(de[D - 1]);
        for (int i = D - 1; i >= 1; --i) {
            if (i <= D - 2) g = enc_norm[i - 1].backward(g);
            g = enc[i].backward(g);
            g = enc_act[i - 1].backward(g);
            if (de[i - 1].size()) g = add_into(std::move(g), de[i - 1]);
        }
        return enc[0].backward(g, /*need_dx=*/false);
    }

    void zero_grad() {
        for (auto& l : enc) l.zero_grad();
        for (auto& l : dec) l.zero_grad();
        for (auto& l : enc_norm) l.zero_grad();
        for (auto& l : dec_norm) l.zero_grad();
    }

    std::vector<ParamRef<T>> parameters() {
        std::vector<ParamRef<T>> out;
        for (size_t i = 0; i < enc.size(); ++i) {
            auto& l = enc[i];
            out.push_back({"enc." + std::to_string(i) + ".w", &l.w, &l.gw,
                           {l.out_ch, l.in_ch, l.k, l.k}});
            out.push_back({"enc." + std::to_string(i) + ".b", &l.b, &l.gb, {l.out_ch}});
        }
        for (size_t i = 0; i < enc_norm.size(); ++i) {
            auto& l = enc_norm[i];
            out.push_back(
                {"enc_norm." + std::to_string(i) + ".gamma", &l.gamma, &l.ggamma, {l.ch}});
            out.push_back(
                {"enc_norm." + std::to_string(i) + ".beta", &l.beta, &l.gbeta, {l.ch}});
        }
        for (size_t i = 0; i < dec.size(); ++i) {
            auto& l = dec[i];
            out.push_back({"dec." + std::to_string(i) + ".w", &l.w, &l.gw,
                           {l.in_ch, l.out_ch, l.k, l.k}});
            out.push_back({"dec." + std::to_string(i) + ".b", &l.b, &l.gb, {l.out_ch}});
        }
        for (size_t i = 0; i < dec_norm.size(); ++i) {
            auto& l = dec_norm[i];
            out.push_back(
                {"dec_norm." + std::to_string(i) + ".gamma", &l.gamma, &l.ggamma, {l.ch}});
            out.push_back(
                {"dec_norm." + std::to_string(i) + ".beta", &l.beta, &l.gbeta, {l.ch}});
        }
        return out;
    }

    std::vector<ParamRef<T>> state_buffers() {
        std::vector<ParamRef<T>> out;
        if (!spec.spectral_norm) return out;
        for (size_t i = 0; i < enc.size(); ++i) {
            auto& l = enc[i];
            out.push_back({"enc." + std::to_string(i) + ".sn_u", &l.sn.u, nullptr,
                           {int(l.sn.u.size())}});
            out.push_back({"enc." + std::to_string(i) + ".sn_v", &l.sn.v, nullptr,
                           {int(l.sn.v.size())}});
        }
        for (size_t i = 0; i < dec.size(); ++i) {
            auto& l = dec[i];
            out.push_back({"dec." + std::to_string(i) + ".sn_u", &l.sn.u, nullptr,
                           {int(l.sn.u.size())}});
            out.push_back({"dec." + std::to_string(i) + ".sn_v", &l.sn.v, nullptr,
                           {int(l.sn.v.size())}});
        }
        return out;
    }

private:
    static Tensor4<T> add_into(Tensor4<T> acc, const Tensor4<T>& g) {
        if (!acc.size()) return g;
        for (size_t i = 0; i < acc.v.size(); ++i) acc.v[i] += g.v[i];
        return acc;
    }
};

// Patch discriminator over a (condition, image) channel concatenation. Emits
// raw patch scores with no output activation.
template <typename T>
struct PatchGanDiscriminator {
    NetworkSpec spec;
    std::vector<Conv2d<T>> blocks;          // depth stride-2 + one stride-1
    std::vector<InstanceNorm<T>> norms;     // for blocks 1..depth
    std::vector<LeakyReLU<T>> acts;
    Conv2d<T> head;

    void build(const NetworkSpec& s, RngStream& rng) {
        s.validate();
        require(s.kind == "patchgan_discriminator", "PatchGanDiscriminator: wrong spec kind");
        spec = s;
        const int D = s.depth;
        blocks.resize(D + 1);
        norms.resize(D);
        acts.resize(D + 1);
        for (int i = 0; i < D; ++i) {
            const int cin = (i == 0) ? s.in_channels : s.width_at(i - 1);
            blocks[i].init(cin, s.width_at(i), 4, 2, 1, rng);
            if (i >= 1) norms[i - 1].init(s.width_at(i));
        }
        blocks[D].init(s.width_at(D - 1), s.width_at(D), 4, 1, 1, rng);
        norms[D - 1].init(s.width_at(D));
        head.init(s.width_at(D), 1, 4, 1, 1, rng);
        if (s.spectral_norm) {
            for (auto& b : blocks) b.enable_spectral_norm(rng);
            head.enable_spectral_norm(rng);
        }
    }

    Tensor4<T> forward(const Tensor4<T>& x, bool update_sn) {
        Tensor4<T> t = x;
        for (size_t i = 0; i < blocks.size(); ++i) {
            t = blocks[i].forward(t, update_sn);
            if (i >= 1) t = norms[i - 1].forward(t);
            t = acts[i].forward(t);
        }
        return head.forward(t, update_sn);
    }

    Tensor4<T> backward(const Tensor4<T>& dy, bool need_dx = true) {
        Tensor4<T> g = head.backward(dy);
        for (int i = int(blocks.size()) - 1; i >= 0; --i) {
            g = acts[i].backward(g);
            if (i >= 1) g = norms[i - 1].backward(g);
            g = blocks[i].backward(g, need_dx || i > 0);
        }
        return g;
    }

    void zero_grad() {
        for (auto& b : blocks) b.zero_grad();
        for (auto& n : norms) n.zero_grad();
        head.zero_grad();
    }

    std::vector<ParamRef<T>> parameters() {
        std::vector<ParamRef<T>> out;
        for (size_t i = 0; i < blocks.size(); ++i) {
            auto& l = blocks[i];
            out.push_back({"block." + std::to_string(i) + ".w", &l.w, &l.gw,
                           {l.out_ch, l.in_ch, l.k, l.k}});
            out.push_back({"block." + std::to_string(i) + ".b", &l.b, &l.gb, {l.out_ch}});
        }
        for (size_t i = 0; i < norms.size(); ++i) {
            auto& l = norms[i];
            out.push_back({"norm." + std::to_string(i) + ".gamma", &l.gamma, &l.ggamma, {l.ch}});
            out.push_back({"norm." + std::to_string(i) + ".beta", &l.beta, &l.gbeta, {l.ch}});
        }
        out.push_back({"head.w", &head.w, &head.gw, {head.out_ch, head.in_ch, head.k, head.k}});
        out.push_back({"head.b", &head.b, &head.gb, {head.out_ch}});
        return out;
    }

    std::vector<ParamRef<T>> state_buffers() {
        std::vector<ParamRef<T>> out;
        if (!spec.spectral_norm) return out;
        for (size_t i = 0; i < blocks.size(); ++i) {
            auto& l = blocks[i];
            out.push_back({"block." + std::to_string(i) + ".sn_u", &l.sn.u, nullptr,
                           {int(l.sn.u.size())}});
            out.push_back({"block." + std::to_string(i) + ".sn_v", &l.sn.v, nullptr,
                           {int(l.sn.v.size())}});
        }
        out.push_back({"head.sn_u", &head.sn.u, nullptr, {int(head.sn.u.size())}});
        out.push_back({"head.sn_v", &head.sn.v, nullptr, {int(head.sn.v.size())}});
        return out;
    }
};

// Expected score-map side for a given input side (stride-2 blocks, then the
// stride-1 block and head, all k=4 p=1).
int patchgan_output_side(int input_side, int depth);

struct GradCheckReport {
    double max_rel_error = 0.0;
    int params_checked = 0;
    std::string worst_param;
};

// Central-difference check of network gradients on loss = sum(outputs).
// Samples at least min(sample_count, #params) distinct parameters. Dropout
// runs in train mode with a stream reset before every forward so the mask is
// identical for the analytic and both displaced evaluations.
template <typename Net>
GradCheckReport gradient_check(Net& net, const Tensor4<double>& x, int sample_count,
                               uint64_t seed) {
    const double h = 1e-5;
    auto run = [&]() {
        RngStream drop(derive_stream(seed, stream_tag("gc_dropout")).next_u64());
        if constexpr (requires { net.forward(x, true, drop, false); }) {
            return net.forward(x, true, drop, false);
        } else {
            return net.forward(x, false);
        }
    };

    net.zero_grad();
    Tensor4<double> y = run();
    Tensor4<double> ones(y.n, y.c, y.h, y.w);
    std::fill(ones.v.begin(), ones.v.end(), 1.0);
    if constexpr (requires { net.backward(ones, false); }) {
        net.backward(ones, false);
    } else {
        net.backward(ones);
    }

    auto params = net.parameters();
    std::vector<std::pair<int, size_t>> index;  // (param tensor, element)
    for (size_t pi = 0; pi < params.size(); ++pi)
        for (size_t j = 0; j < params[pi].value->size(); ++j) index.push_back({int(pi), j});
    require(!index.empty(), "gradient_check: network has no parameters");

    RngStream pick = derive_stream(seed, stream_tag("gc_pick"));
    const size_t want = std::min(size_t(sample_count), index.size());
    // Partial Fisher-Yates: the first `want` entries become the sample.
    for (size_t i = 0; i < want; ++i) {
        const size_t j = i + size_t(pick.next_below(index.size() - i));
        std::swap(index[i], index[j]);
    }

    GradCheckReport rep;
    for (size_t s = 0; s < want; ++s) {
        auto [pi, j] = index[s];
        double& theta = (*params[pi].value)[j];
        const double analytic = (*params[pi].grad)[j];
        const double saved = theta;
        theta = saved + h;
        Tensor4<double> yp = run();
        theta = saved - h;
        Tensor4<double> ym = run();
        theta = saved;
        double fp = 0.0, fm = 0.0;
        for (size_t i = 0; i < yp.v.size(); ++i) fp += yp.v[i];
        for (size_t i = 0; i < ym.v.size(); ++i) fm += ym.v[i];
        const double fd = (fp - fm) / (2.0 * h);
        const double mag = std::max(std::abs(fd), std::abs(analytic));
        const double rel = (mag < 1e-10) ? 0.0 : std::abs(fd - analytic) / mag;
        ++rep.params_checked;
        if (rel > rep.max_rel_error) {
            rep.max_rel_error = rel;
            rep.worst_param = params[pi].name + "[" + std::to_string(j) + "]";
        }
    }
    return rep;
}

// [0,1] images to [-1,1] network activations and back.
template <typename T>
Tensor4<T> batch_from_images(const std::vector<const ImageTensor*>& imgs) {
    require(!imgs.empty(), "batch_from_images: empty batch");
    const ImageTensor& first = *imgs[0];
    Tensor4<T> t(int(imgs.size()), first.channels, first.height, first.width);
    for (size_t i = 0; i < imgs.size(); ++i) {
        const ImageTensor& im = *imgs[i];
        require(im.same_shape(first), "batch_from_images: mixed shapes");
        for (int c = 0; c < im.channels; ++c)
            for (int y = 0; y < im.height; ++y)
                for (int x = 0; x < im.width; ++x)
                    t.at(int(i), c, y, x) = T(im.at(y, x, c)) * T(2) - T(1);
    }
    return t;
}

template <typename T>
ImageTensor image_from_batch(const Tensor4<T>& t, int item) {
    require(item >= 0 && item < t.n, "image_from_batch: bad index");
    ImageTensor im = ImageTensor::make(t.h, t.w, t.c);
    for (int c = 0; c < t.c; ++c)
        for (int y = 0; y < t.h; ++y)
            for (int x = 0; x < t.w; ++x) {
                const double v = (double(t.at(item, c, y, x)) + 1.0) * 0.5;
                im.at(y, x, c) = float(std::clamp(v, 0.0, 1.0));
            }
    return im;
}

}  // namespace sketchloom::nn
