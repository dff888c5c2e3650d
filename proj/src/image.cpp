#include "sketchloom/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace sketchloom {

std::vector<uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open file: " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
    return bytes;
}

void write_file(const std::string& path, const std::vector<uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open file for writing: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!out) throw FormatError("short write: " + path);
}

ImageTensor load_png(const std::string& path) {
    try {
        return decode_png(read_file(path));
    } catch (const FormatError& e) {
        throw FormatError(path + ": " + e.what());
    }
}

void save_png(const ImageTensor& img, const std::string& path) {
    write_file(path, encode_png(img));
}

ImageTensor resize_bilinear(const ImageTensor& img, int out_h, int out_w) {
    require(out_h > 0 && out_w > 0, "resize_bilinear: output dims must be positive");
    ImageTensor out = ImageTensor::make(out_h, out_w, img.channels);
    const double scale_y = double(img.height) / out_h;
    const double scale_x = double(img.width) / out_w;
    const int ch = img.channels;
    for (int oy = 0; oy < out_h; ++oy) {
        double sy = (oy + 0.5) * scale_y - 0.5;
        sy = std::clamp(sy, 0.0, double(img.height - 1));
        const int y0 = int(sy);
        const int y1 = std::min(y0 + 1, img.height - 1);
        const double fy = sy - y0;
        for (int ox = 0; ox < out_w; ++ox) {
            double sx = (ox + 0.5) * scale_x - 0.5;
            sx = std::clamp(sx, 0.0, double(img.width - 1));
            const int x0 = int(sx);
            const int x1 = std::min(x0 + 1, img.width - 1);
            const double fx = sx - x0;
            for (int c = 0; c < ch; ++c) {
                const double top = img.at(y0, x0, c) * (1.0 - fx) + img.at(y0, x1, c) * fx;
                const double bot = img.at(y1, x0, c) * (1.0 - fx) + img.at(y1, x1, c) * fx;
                out.at(oy, ox, c) = float(top * (1.0 - fy) + bot * fy);
            }
        }
    }
    return out;
}

ImageTensor crop(const ImageTensor& img, int top, int left, int h, int w) {
    require(top >= 0 && left >= 0 && h > 0 && w > 0, "crop: bad rectangle");
    require(top + h <= img.height && left + w <= img.width,
            "crop: rectangle exceeds image bounds");
    ImageTensor out = ImageTensor::make(h, w, img.channels);
    const size_t row_bytes = size_t(w) * img.channels;
    for (int y = 0; y < h; ++y) {
        const float* src = &img.data[(size_t(top + y) * img.width + left) * img.channels];
        std::copy(src, src + row_bytes, &out.data[size_t(y) * row_bytes]);
    }
    return out;
}

ImageTensor to_grayscale(const ImageTensor& img) {
    if (img.channels == 1) return img;
    ImageTensor out = ImageTensor::make(img.height, img.width, 1);
    const size_t n = img.pixel_count();
    for (size_t i = 0; i < n; ++i) {
        const double y = 0.299 * img.data[3 * i] + 0.587 * img.data[3 * i + 1] +
                         0.114 * img.data[3 * i + 2];
        out.data[i] = float(std::clamp(y, 0.0, 1.0));
    }
    return out;
}

ImageTensor gaussian_blur(const ImageTensor& img, double sigma, int radius) {
    require(sigma > 0.0, "gaussian_blur: sigma must be positive");
    require(radius >= 0, "gaussian_blur: radius must be non-negative");
    std::vector<double> k(size_t(radius) + 1);
    double sum = 0.0;
    for (int i = 0; i <= radius; ++i) {
        k[i] = std::exp(-0.5 * double(i) * i / (sigma * sigma));
        sum += (i == 0) ? k[i] : 2.0 * k[i];
    }
    for (double& v : k) v /= sum;

    const int h = img.height, w = img.width, ch = img.channels;
    // Horizontal pass into a double buffer, then vertical back to float.
    std::vector<double> tmp(img.data.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < ch; ++c) {
                double acc = k[0] * img.at(y, x, c);
                for (int i = 1; i <= radius; ++i) {
                    const int xl = std::max(x - i, 0);
                    const int xr = std::min(x + i, w - 1);
                    acc += k[i] * (img.at(y, xl, c) + img.at(y, xr, c));
                }
                tmp[(size_t(y) * w + x) * ch + c] = acc;
            }
        }
    }
    ImageTensor out = ImageTensor::make(h, w, ch);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < ch; ++c) {
                double acc = k[0] * tmp[(size_t(y) * w + x) * ch + c];
                for (int i = 1; i <= radius; ++i) {
                    const int yu = std::max(y - i, 0);
                    const int yd = std::min(y + i, h - 1);
                    acc += k[i] * (tmp[(size_t(yu) * w + x) * ch + c] +
                                   tmp[(size_t(yd) * w + x) * ch + c]);
                }
                out.at(y, x, c) = float(std::clamp(acc, 0.0, 1.0));
            }
        }
    }
    return out;
}

}  // namespace sketchloom
