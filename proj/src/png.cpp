#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "sketchloom/image.hpp"

// PNG container handling is done here directly (chunk walk, CRC checks,
// scanline filters); zlib supplies the DEFLATE streams. Supported input:
// 8-bit gray, gray+alpha, RGB, RGBA, no interlace. Alpha is composited
// over white. Output: 8-bit gray or RGB, filter 0 rows, fixed zlib level,
// so encoding is byte-deterministic.

namespace sketchloom {
namespace {

constexpr uint8_t kSignature[8] = {137, 80, 78, 71, 13, 10, 26, 10};

[[noreturn]] void fail(const std::string& what, size_t offset) {
    throw FormatError("png: " + what + " at byte " + std::to_string(offset));
}

uint32_t read_be32(const uint8_t* p) {
    return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) |
           uint32_t(p[3]);
}

void write_be32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(uint8_t(v >> 24));
    out.push_back(uint8_t(v >> 16));
    out.push_back(uint8_t(v >> 8));
    out.push_back(uint8_t(v));
}

std::vector<uint8_t> inflate_all(const std::vector<uint8_t>& in, size_t expected) {
    std::vector<uint8_t> out(expected);
    z_stream zs;
    std::memset(&zs, 0, sizeof zs);
    if (inflateInit(&zs) != Z_OK) throw FormatError("png: inflateInit failed");
    zs.next_in = const_cast<Bytef*>(in.data());
    zs.avail_in = uInt(in.size());
    zs.next_out = out.data();
    zs.avail_out = uInt(out.size());
    const int rc = inflate(&zs, Z_FINISH);
    const size_t got = zs.total_out;
    inflateEnd(&zs);
    if (rc != Z_STREAM_END || got != expected)
        throw FormatError("png: bad or truncated image data stream (inflate rc=" +
                          std::to_string(rc) + ", got " + std::to_string(got) + " of " +
                          std::to_string(expected) + " bytes)");
    return out;
}

int paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

void unfilter(std::vector<uint8_t>& raw, int h, int row_bytes, int bpp) {
    for (int y = 0; y < h; ++y) {
        uint8_t* row = &raw[size_t(y) * (row_bytes + 1)];
        const uint8_t filter = row[0];
        uint8_t* cur = row + 1;
        const uint8_t* up = (y > 0) ? &raw[size_t(y - 1) * (row_bytes + 1)] + 1 : nullptr;
        switch (filter) {
            case 0:
                break;
            case 1:
                for (int i = bpp; i < row_bytes; ++i) cur[i] = uint8_t(cur[i] + cur[i - bpp]);
                break;
            case 2:
                if (up)
                    for (int i = 0; i < row_bytes; ++i) cur[i] = uint8_t(cur[i] + up[i]);
                break;
            case 3:
                for (int i = 0; i < row_bytes; ++i) {
                    const int a = (i >= bpp) ? cur[i - bpp] : 0;
                    const int b = up ? up[i] : 0;
                    cur[i] = uint8_t(cur[i] + (a + b) / 2);
                }
                break;
            case 4:
                for (int i = 0; i < row_bytes; ++i) {
                    const int a = (i >= bpp) ? cur[i - bpp] : 0;
                    const int b = up ? up[i] : 0;
                    const int c = (up && i >= bpp) ? up[i - bpp] : 0;
                    cur[i] = uint8_t(cur[i] + paeth(a, b, c));
                }
                break;
            default:
                throw FormatError("png: unknown scanline filter " + std::to_string(filter) +
                                  " in row " + std::to_string(y));
        }
    }
}

void append_chunk(std::vector<uint8_t>& out, const char* type,
                  const std::vector<uint8_t>& data) {
    write_be32(out, uint32_t(data.size()));
    const size_t type_at = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, out.data() + type_at, uInt(4 + data.size()));
    write_be32(out, uint32_t(crc));
}

}  // namespace

ImageTensor decode_png(const std::vector<uint8_t>& bytes) {
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kSignature, 8) != 0)
        fail("bad signature", 0);

    size_t pos = 8;
    bool have_ihdr = false, have_iend = false;
    uint32_t w = 0, h = 0;
    int color_type = -1;
    std::vector<uint8_t> idat;

    while (!have_iend) {
        if (pos + 8 > bytes.size()) fail("truncated chunk header", pos);
        const uint32_t len = read_be32(&bytes[pos]);
        const char* type = reinterpret_cast<const char*>(&bytes[pos + 4]);
        if (pos + 12 + size_t(len) > bytes.size()) fail("truncated chunk body", pos);
        const uint8_t* data = &bytes[pos + 8];
        const uint32_t stored_crc = read_be32(&bytes[pos + 8 + len]);
        uLong crc = crc32(0L, Z_NULL, 0);
        crc = crc32(crc, &bytes[pos + 4], uInt(4 + len));
        if (uint32_t(crc) != stored_crc)
            fail(std::string("crc mismatch in ") + std::string(type, 4) + " chunk", pos);

        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (len != 13) fail("IHDR has wrong length", pos);
            w = read_be32(data);
            h = read_be32(data + 4);
            const int depth = data[8];
            color_type = data[9];
            if (w == 0 || h == 0) fail("zero image dimension", pos);
            if (depth != 8)
                fail("unsupported bit depth " + std::to_string(depth), pos);
            if (color_type != 0 && color_type != 2 && color_type != 4 && color_type != 6)
                fail("unsupported color type " + std::to_string(color_type), pos);
            if (data[10] != 0) fail("unsupported compression method", pos);
            if (data[11] != 0) fail("unsupported filter method", pos);
            if (data[12] != 0) fail("interlaced images are not supported", pos);
            have_ihdr = true;
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            if (!have_ihdr) fail("IDAT before IHDR", pos);
            idat.insert(idat.end(), data, data + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            have_iend = true;
        }
        // Ancillary chunks (tEXt, pHYs, ...) pass the CRC check and are skipped.
        pos += 12 + size_t(len);
    }
    if (!have_ihdr) fail("missing IHDR", pos);
    if (idat.empty()) fail("missing image data", pos);

    const int in_ch = (color_type == 0) ? 1 : (color_type == 2) ? 3 : (color_type == 4) ? 2 : 4;
    const int row_bytes = int(w) * in_ch;
    std::vector<uint8_t> raw = inflate_all(idat, size_t(h) * (row_bytes + 1));
    unfilter(raw, int(h), row_bytes, in_ch);

    const bool has_alpha = (in_ch == 2 || in_ch == 4);
    const int out_ch = (in_ch <= 2) ? 1 : 3;
    ImageTensor img = ImageTensor::make(int(h), int(w), out_ch);
    for (uint32_t y = 0; y < h; ++y) {
        const uint8_t* row = &raw[size_t(y) * (row_bytes + 1)] + 1;
        for (uint32_t x = 0; x < w; ++x) {
            const uint8_t* px = row + size_t(x) * in_ch;
            const float a = has_alpha ? px[in_ch - 1] / 255.0f : 1.0f;
            for (int c = 0; c < out_ch; ++c) {
                const float v = px[c] / 255.0f;
                img.at(int(y), int(x), c) = v * a + (1.0f - a);
            }
        }
    }
    return img;
}

std::vector<uint8_t> encode_png(const ImageTensor& img) {
    require(img.channels == 1 || img.channels == 3, "encode_png: 1 or 3 channels");
    require(img.height > 0 && img.width > 0, "encode_png: empty image");
    const int ch = img.channels;
    const int row_bytes = img.width * ch;

    std::vector<uint8_t> raw(size_t(img.height) * (row_bytes + 1));
    for (int y = 0; y < img.height; ++y) {
        uint8_t* row = &raw[size_t(y) * (row_bytes + 1)];
        row[0] = 0;
        for (int i = 0; i < row_bytes; ++i) {
            const float v = std::clamp(img.data[size_t(y) * row_bytes + i], 0.0f, 1.0f);
            row[1 + i] = uint8_t(std::lround(v * 255.0));
        }
    }

    uLongf comp_len = compressBound(uLong(raw.size()));
    std::vector<uint8_t> comp(comp_len);
    if (compress2(comp.data(), &comp_len, raw.data(), uLong(raw.size()), 6) != Z_OK)
        throw FormatError("png: compression failed");
    comp.resize(comp_len);

    std::vector<uint8_t> out(kSignature, kSignature + 8);
    std::vector<uint8_t> ihdr;
    write_be32(ihdr, uint32_t(img.width));
    write_be32(ihdr, uint32_t(img.height));
    ihdr.push_back(8);                        // bit depth
    ihdr.push_back(ch == 1 ? 0 : 2);          // color type
    ihdr.push_back(0);                        // compression
    ihdr.push_back(0);                        // filter method
    ihdr.push_back(0);                        // no interlace
    append_chunk(out, "IHDR", ihdr);
    append_chunk(out, "IDAT", comp);
    append_chunk(out, "IEND", {});
    return out;
}

}  // namespace sketchloom
