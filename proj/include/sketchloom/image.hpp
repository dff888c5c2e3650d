#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sketchloom/errors.hpp"

namespace sketchloom {

// Row-major H×W×C raster with interleaved channels, values in [0,1].
// 1 channel = grayscale, 3 = RGB. The [-1,1] convention used by the networks
// is a separate mapping applied at the nn boundary, never stored here.
struct ImageTensor {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<float> data;

    static ImageTensor make(int h, int w, int c, float fill = 0.0f) {
        require(h > 0 && w > 0, "ImageTensor: dimensions must be positive");
        require(c == 1 || c == 3, "ImageTensor: channels must be 1 or 3");
        ImageTensor t;
        t.height = h;
        t.width = w;
        t.channels = c;
        t.data.assign(size_t(h) * w * c, fill);
        return t;
    }

    float& at(int y, int x, int c) {
        return data[(size_t(y) * width + x) * channels + c];
    }
    float at(int y, int x, int c) const {
        return data[(size_t(y) * width + x) * channels + c];
    }
    size_t pixel_count() const { return size_t(height) * width; }
    bool same_shape(const ImageTensor& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }
};

// PNG codec. 8-bit depth only; color types gray / RGB / gray+alpha / RGBA,
// alpha composited over white on decode. Decode errors carry the byte offset
// of the offending chunk. Encode always writes filter-0 scanlines, so output
// bytes are deterministic.
ImageTensor decode_png(const std::vector<uint8_t>& bytes);
std::vector<uint8_t> encode_png(const ImageTensor& img);
ImageTensor load_png(const std::string& path);
void save_png(const ImageTensor& img, const std::string& path);

std::vector<uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<uint8_t>& bytes);

// Bilinear resampling with half-pixel centers: src = (dst + 0.5)*scale - 0.5,
// clamped to the frame. Resizing to the identical size copies exactly.
ImageTensor resize_bilinear(const ImageTensor& img, int out_h, int out_w);

ImageTensor crop(const ImageTensor& img, int top, int left, int h, int w);

// Rec.601 luma (0.299, 0.587, 0.114). Grayscale input passes through.
ImageTensor to_grayscale(const ImageTensor& img);

// Separable Gaussian, kernel normalized to sum 1, borders replicate.
// radius is the half-width in pixels; sigma must be positive.
ImageTensor gaussian_blur(const ImageTensor& img, double sigma, int radius);

}  // namespace sketchloom
