#include "sketchloom/augment.hpp"

#include <algorithm>
#include <cmath>

namespace sketchloom {

ImageTensor rotate(const ImageTensor& img, double angle_deg, float fill) {
    const double rad = angle_deg * (3.14159265358979323846 / 180.0);
    const double cs = std::cos(rad), sn = std::sin(rad);
    const double cy = (img.height - 1) / 2.0, cx = (img.width - 1) / 2.0;
    ImageTensor out = ImageTensor::make(img.height, img.width, img.channels);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            // Inverse map: rotate the destination coordinate back by -angle.
            const double dx = x - cx, dy = y - cy;
            const double sx = cx + cs * dx + sn * dy;
            const double sy = cy - sn * dx + cs * dy;
            const int x0 = int(std::floor(sx)), y0 = int(std::floor(sy));
            const double fx = sx - x0, fy = sy - y0;
            for (int c = 0; c < img.channels; ++c) {
                auto sample = [&](int yy, int xx) -> double {
                    if (yy < 0 || yy >= img.height || xx < 0 || xx >= img.width) return fill;
                    return img.at(yy, xx, c);
                };
                const double top = sample(y0, x0) * (1.0 - fx) + sample(y0, x0 + 1) * fx;
                const double bot = sample(y0 + 1, x0) * (1.0 - fx) + sample(y0 + 1, x0 + 1) * fx;
                out.at(y, x, c) = float(top * (1.0 - fy) + bot * fy);
            }
        }
    }
    return out;
}

ImageTensor salt_pepper(const ImageTensor& img, double fraction, RngStream& rng) {
    require(fraction >= 0.0 && fraction <= 1.0, "salt_pepper: fraction in [0,1]");
    ImageTensor out = img;
    const size_t n = img.pixel_count();
    for (size_t i = 0; i < n; ++i) {
        if (rng.next_double() < fraction) {
            const float v = rng.bernoulli(0.5) ? 1.0f : 0.0f;
            for (int c = 0; c < img.channels; ++c) out.data[i * img.channels + c] = v;
        }
    }
    return out;
}

std::pair<ImageTensor, ImageTensor> augment_pair(const ImageTensor& sketch,
                                                 const ImageTensor& photo,
                                                 const AugmentParams& params, RngStream& rng) {
    require(sketch.height == photo.height && sketch.width == photo.width,
            "augment_pair: sketch and photo dimensions differ");
    require(params.crop_to > 0 && params.crop_to <= params.resize_to,
            "augment_pair: need 0 < crop_to <= resize_to");
    require(params.flip_probability >= 0.0 && params.flip_probability <= 1.0,
            "augment_pair: flip_probability in [0,1]");
    require(params.max_rotation_deg >= 0.0, "augment_pair: max_rotation_deg >= 0");

    // All shared draws happen up front in a fixed order, so the stream layout
    // never depends on the parameter values.
    const double angle = rng.uniform(-params.max_rotation_deg, params.max_rotation_deg);
    const int max_off = params.resize_to - params.crop_to;
    const int top = int(rng.next_below(uint64_t(max_off) + 1));
    const int left = int(rng.next_below(uint64_t(max_off) + 1));
    const bool flip = rng.next_double() < params.flip_probability;

    auto geometry = [&](const ImageTensor& in) {
        ImageTensor t = resize_bilinear(in, params.resize_to, params.resize_to);
        t = rotate(t, angle, params.fill_value);
        t = crop(t, top, left, params.crop_to, params.crop_to);
        if (flip) {
            for (int y = 0; y < t.height; ++y)
                for (int x = 0; x < t.width / 2; ++x)
                    for (int c = 0; c < t.channels; ++c)
                        std::swap(t.at(y, x, c), t.at(y, t.width - 1 - x, c));
        }
        return t;
    };

    ImageTensor out_sketch = geometry(sketch);
    ImageTensor out_photo = geometry(photo);
    out_sketch = salt_pepper(out_sketch, params.salt_pepper_fraction, rng);
    return {std::move(out_sketch), std::move(out_photo)};
}

}  // namespace sketchloom
