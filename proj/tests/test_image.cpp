#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <zlib.h>

#include <cmath>
#include <cstring>

#include "sketchloom/image.hpp"
#include "sketchloom/rng.hpp"

using namespace sketchloom;

namespace {

ImageTensor random_image(int h, int w, int c, uint64_t seed) {
    ImageTensor img = ImageTensor::make(h, w, c);
    RngStream rng(seed);
    for (float& v : img.data) v = float(rng.next_double());
    return img;
}

void be32(std::vector<uint8_t>& v, uint32_t x) {
    v.push_back(uint8_t(x >> 24));
    v.push_back(uint8_t(x >> 16));
    v.push_back(uint8_t(x >> 8));
    v.push_back(uint8_t(x));
}

// Independent chunk assembly so decode tests do not depend on encode_png.
void chunk(std::vector<uint8_t>& v, const char* type, const std::vector<uint8_t>& data) {
    be32(v, uint32_t(data.size()));
    size_t at = v.size();
    v.insert(v.end(), type, type + 4);
    v.insert(v.end(), data.begin(), data.end());
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, v.data() + at, uInt(4 + data.size()));
    be32(v, uint32_t(crc));
}

std::vector<uint8_t> hand_png(uint32_t w, uint32_t h, int depth, int color,
                              const std::vector<uint8_t>& scanlines, int interlace = 0) {
    std::vector<uint8_t> out = {137, 80, 78, 71, 13, 10, 26, 10};
    std::vector<uint8_t> ihdr;
    be32(ihdr, w);
    be32(ihdr, h);
    ihdr.push_back(uint8_t(depth));
    ihdr.push_back(uint8_t(color));
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(uint8_t(interlace));
    chunk(out, "IHDR", ihdr);
    uLongf len = compressBound(uLong(scanlines.size()));
    std::vector<uint8_t> comp(len);
    REQUIRE(compress2(comp.data(), &len, scanlines.data(), uLong(scanlines.size()), 6) == Z_OK);
    comp.resize(len);
    chunk(out, "IDAT", comp);
    chunk(out, "IEND", {});
    return out;
}

}  // namespace

TEST_CASE("resize 1x2 ramp to 1x4 matches hand values") {
    ImageTensor img = ImageTensor::make(1, 2, 1);
    img.at(0, 0, 0) = 0.0f;
    img.at(0, 1, 0) = 1.0f;
    ImageTensor out = resize_bilinear(img, 1, 4);
    // src = (dst+0.5)*scale - 0.5 with scale 0.5: samples at -0.25, 0.25, 0.75, 1.25,
    // clamped to [0,1].
    CHECK(out.at(0, 0, 0) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(out.at(0, 1, 0) == doctest::Approx(0.25).epsilon(1e-9));
    CHECK(out.at(0, 2, 0) == doctest::Approx(0.75).epsilon(1e-9));
    CHECK(out.at(0, 3, 0) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("resize to same size copies bitwise") {
    ImageTensor img = random_image(13, 7, 3, 42);
    ImageTensor out = resize_bilinear(img, 13, 7);
    CHECK(out.data == img.data);
}

TEST_CASE("resize stays inside [0,1] and halves dimensions") {
    ImageTensor img = random_image(32, 48, 3, 7);
    ImageTensor out = resize_bilinear(img, 16, 24);
    CHECK(out.height == 16);
    CHECK(out.width == 24);
    for (float v : out.data) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
    }
}

TEST_CASE("crop copies the exact window and checks bounds") {
    ImageTensor img = ImageTensor::make(10, 12, 1);
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 12; ++x) img.at(y, x, 0) = float(y * 12 + x) / 120.0f;
    ImageTensor out = crop(img, 3, 5, 4, 6);
    CHECK(out.height == 4);
    CHECK(out.width == 6);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 6; ++x) CHECK(out.at(y, x, 0) == img.at(y + 3, x + 5, 0));
    CHECK_THROWS_AS(crop(img, 8, 0, 4, 4), ArgumentError);
    CHECK_THROWS_AS(crop(img, -1, 0, 4, 4), ArgumentError);
}

TEST_CASE("grayscale uses 0.299/0.587/0.114 weights") {
    ImageTensor img = ImageTensor::make(1, 4, 3);
    const float rgb[4][3] = {{1, 1, 1}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    for (int x = 0; x < 4; ++x)
        for (int c = 0; c < 3; ++c) img.at(0, x, c) = rgb[x][c];
    ImageTensor g = to_grayscale(img);
    CHECK(g.channels == 1);
    CHECK(g.at(0, 0, 0) == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(g.at(0, 1, 0) == doctest::Approx(0.299).epsilon(1e-7));
    CHECK(g.at(0, 2, 0) == doctest::Approx(0.587).epsilon(1e-7));
    CHECK(g.at(0, 3, 0) == doctest::Approx(0.114).epsilon(1e-7));

    ImageTensor already_gray = random_image(3, 3, 1, 1);
    CHECK(to_grayscale(already_gray).data == already_gray.data);
}

TEST_CASE("blur of a unit impulse puts the squared center weight at the center") {
    ImageTensor img = ImageTensor::make(7, 7, 1);
    img.at(3, 3, 0) = 1.0f;
    ImageTensor out = gaussian_blur(img, 1.0, 2);
    // 1D kernel before normalization: [e^-2, e^-0.5, 1, e^-0.5, e^-2].
    const double k0 = 1.0 / (1.0 + 2.0 * std::exp(-0.5) + 2.0 * std::exp(-2.0));
    CHECK(out.at(3, 3, 0) == doctest::Approx(k0 * k0).epsilon(1e-6));
    // Separability: the (3,2) neighbour carries k0*k1.
    const double k1 = k0 * std::exp(-0.5);
    CHECK(out.at(3, 2, 0) == doctest::Approx(k0 * k1).epsilon(1e-6));
}

TEST_CASE("blur keeps a flat image flat, borders included") {
    ImageTensor img = ImageTensor::make(9, 11, 3, 0.5f);
    ImageTensor out = gaussian_blur(img, 3.0, 7);
    for (float v : out.data) CHECK(v == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("two blur passes approximate one pass at sigma*sqrt(2)") {
    ImageTensor img = random_image(48, 48, 1, 99);
    // Smooth the noise first so truncation effects dominate less.
    img = gaussian_blur(img, 1.0, 4);
    const double sigma = 1.5;
    ImageTensor twice = gaussian_blur(gaussian_blur(img, sigma, 6), sigma, 6);
    ImageTensor once = gaussian_blur(img, sigma * std::sqrt(2.0), 9);
    double worst = 0.0;
    for (int y = 10; y < 38; ++y)
        for (int x = 10; x < 38; ++x)
            worst = std::max(worst, std::abs(double(twice.at(y, x, 0)) - once.at(y, x, 0)));
    CHECK(worst <= 0.02);
}

TEST_CASE("blur rejects bad parameters") {
    ImageTensor img = ImageTensor::make(4, 4, 1);
    CHECK_THROWS_AS(gaussian_blur(img, 0.0, 3), ArgumentError);
    CHECK_THROWS_AS(gaussian_blur(img, -1.0, 3), ArgumentError);
}

TEST_CASE("hand-assembled grayscale png decodes to 128/255") {
    // 1x1 gray, filter byte 0, single pixel 128.
    auto bytes = hand_png(1, 1, 8, 0, {0x00, 0x80});
    ImageTensor img = decode_png(bytes);
    CHECK(img.height == 1);
    CHECK(img.width == 1);
    CHECK(img.channels == 1);
    CHECK(img.at(0, 0, 0) == 128.0f / 255.0f);
}

TEST_CASE("rgba decodes composited over white") {
    // One pixel (255, 0, 0, 128): r stays 1, g/b become 127/255.
    auto bytes = hand_png(1, 1, 8, 6, {0x00, 0xFF, 0x00, 0x00, 0x80});
    ImageTensor img = decode_png(bytes);
    CHECK(img.channels == 3);
    CHECK(img.at(0, 0, 0) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(img.at(0, 0, 1) == doctest::Approx(127.0 / 255.0).epsilon(1e-6));
    CHECK(img.at(0, 0, 2) == doctest::Approx(127.0 / 255.0).epsilon(1e-6));
}

TEST_CASE("gray+alpha fully transparent decodes to white") {
    auto bytes = hand_png(1, 1, 8, 4, {0x00, 0x00, 0x00});
    ImageTensor img = decode_png(bytes);
    CHECK(img.channels == 1);
    CHECK(img.at(0, 0, 0) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("all five scanline filters round-trip through the decoder") {
    // 4x4 RGB with every filter type exercised; reference via filter-0 image.
    RngStream rng(5);
    std::vector<uint8_t> px(4 * 4 * 3);
    for (auto& b : px) b = uint8_t(rng.next_below(256));
    auto filt = [&](int y, int i) { return px[size_t(y) * 12 + i]; };

    std::vector<uint8_t> plain;
    for (int y = 0; y < 4; ++y) {
        plain.push_back(0);
        for (int i = 0; i < 12; ++i) plain.push_back(filt(y, i));
    }
    ImageTensor want = decode_png(hand_png(4, 4, 8, 2, plain));

    std::vector<uint8_t> mixed;
    const int filters[4] = {1, 2, 3, 4};
    for (int y = 0; y < 4; ++y) {
        const int f = filters[y];
        mixed.push_back(uint8_t(f));
        for (int i = 0; i < 12; ++i) {
            const int a = (i >= 3) ? filt(y, i - 3) : 0;
            const int b = (y > 0) ? filt(y - 1, i) : 0;
            const int c = (y > 0 && i >= 3) ? filt(y - 1, i - 3) : 0;
            int pred = 0;
            if (f == 1) pred = a;
            if (f == 2) pred = b;
            if (f == 3) pred = (a + b) / 2;
            if (f == 4) {
                const int p = a + b - c;
                const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
                pred = (pa <= pb && pa <= pc) ? a : (pb <= pc ? b : c);
            }
            mixed.push_back(uint8_t((filt(y, i) - pred) & 0xFF));
        }
    }
    ImageTensor got = decode_png(hand_png(4, 4, 8, 2, mixed));
    CHECK(got.data == want.data);
}

TEST_CASE("encode/decode round trip is within quantization error") {
    for (int ch : {1, 3}) {
        ImageTensor img = random_image(21, 17, ch, 1234 + ch);
        ImageTensor back = decode_png(encode_png(img));
        CHECK(back.same_shape(img));
        double worst = 0.0;
        for (size_t i = 0; i < img.data.size(); ++i)
            worst = std::max(worst, std::abs(double(img.data[i]) - back.data[i]));
        CHECK(worst <= 1.0 / 255.0);
    }
}

TEST_CASE("encoding is byte-deterministic") {
    ImageTensor img = random_image(16, 16, 3, 77);
    CHECK(encode_png(img) == encode_png(img));
}

TEST_CASE("decode errors carry byte offsets") {
    auto bytes = hand_png(1, 1, 8, 0, {0x00, 0x80});
    SUBCASE("bad signature") {
        bytes[1] ^= 0xFF;
        CHECK_THROWS_WITH_AS(decode_png(bytes), doctest::Contains("at byte 0"), FormatError);
    }
    SUBCASE("corrupted IHDR payload fails the crc check") {
        bytes[16] ^= 0xFF;  // inside IHDR data
        try {
            decode_png(bytes);
            FAIL("expected FormatError");
        } catch (const FormatError& e) {
            CHECK(std::string(e.what()).find("crc") != std::string::npos);
            CHECK(std::string(e.what()).find("at byte 8") != std::string::npos);
        }
    }
    SUBCASE("truncated file") {
        bytes.resize(bytes.size() - 6);
        CHECK_THROWS_AS(decode_png(bytes), FormatError);
    }
    SUBCASE("truncation inside the chunk table reports the chunk offset") {
        bytes.resize(30);  // mid-IHDR
        try {
            decode_png(bytes);
            FAIL("expected FormatError");
        } catch (const FormatError& e) {
            CHECK(std::string(e.what()).find("at byte") != std::string::npos);
        }
    }
}

TEST_CASE("unsupported png variants are rejected") {
    CHECK_THROWS_WITH_AS(decode_png(hand_png(1, 1, 16, 0, {0, 0, 0})),
                         doctest::Contains("bit depth"), FormatError);
    CHECK_THROWS_WITH_AS(decode_png(hand_png(1, 1, 8, 3, {0, 0})),
                         doctest::Contains("color type"), FormatError);
    CHECK_THROWS_WITH_AS(decode_png(hand_png(1, 1, 8, 0, {0, 0x80}, 1)),
                         doctest::Contains("interlaced"), FormatError);
}

TEST_CASE("file io round trip") {
    ImageTensor img = random_image(8, 9, 3, 3);
    const std::string path = "test_image_io_tmp.png";
    save_png(img, path);
    ImageTensor back = load_png(path);
    CHECK(back.same_shape(img));
    std::remove(path.c_str());
    CHECK_THROWS_AS(load_png("does_not_exist_anywhere.png"), FormatError);
}
