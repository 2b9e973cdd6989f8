#include "helpers.hpp"

#include "mcot/error.hpp"
#include "mcot/image.hpp"

#include <doctest.h>
#include <jpeglib.h>
#include <png.h>

#include <cmath>
#include <cstdio>
#include <fstream>

using namespace mcot;

namespace {

void write_png_rgb(const std::filesystem::path& path, unsigned w, unsigned h, const std::vector<unsigned char>& rgb) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = w;
    image.height = h;
    image.format = PNG_FORMAT_RGB;
    REQUIRE(png_image_write_to_file(&image, path.c_str(), 0, rgb.data(), 0, nullptr) != 0);
}

void write_jpeg_rgb(const std::filesystem::path& path, unsigned w, unsigned h, const std::vector<unsigned char>& rgb) {
    jpeg_compress_struct cinfo{};
    jpeg_error_mgr jerr{};
    cinfo.err = jpeg_std_error(&jerr);
    jpeg_create_compress(&cinfo);
    FILE* f = std::fopen(path.c_str(), "wb");
    REQUIRE(f != nullptr);
    jpeg_stdio_dest(&cinfo, f);
    cinfo.image_width = w;
    cinfo.image_height = h;
    cinfo.input_components = 3;
    cinfo.in_color_space = JCS_RGB;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, 100, TRUE);
    jpeg_start_compress(&cinfo, TRUE);
    while (cinfo.next_scanline < h) {
        JSAMPROW row = const_cast<unsigned char*>(rgb.data() + cinfo.next_scanline * w * 3);
        jpeg_write_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_compress(&cinfo);
    std::fclose(f);
    jpeg_destroy_compress(&cinfo);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

// Mirror index for the dense oracle: ... c b a | a b c ... on both sides.
std::ptrdiff_t mirror(std::ptrdiff_t i, std::ptrdiff_t n) {
    while (i < 0 || i >= n) i = i < 0 ? -1 - i : 2 * n - 1 - i;
    return i;
}

RawImage dense_convolution(const RawImage& img, double sigma) {
    const auto radius = static_cast<std::ptrdiff_t>(std::ceil(4.0 * sigma));
    double norm = 0.0;
    for (std::ptrdiff_t dy = -radius; dy <= radius; ++dy)
        for (std::ptrdiff_t dx = -radius; dx <= radius; ++dx)
            norm += std::exp(-0.5 * double(dx * dx + dy * dy) / (sigma * sigma));
    RawImage out(img.width, img.height, img.channels);
    const auto w = static_cast<std::ptrdiff_t>(img.width), h = static_cast<std::ptrdiff_t>(img.height);
    for (std::ptrdiff_t y = 0; y < h; ++y)
        for (std::ptrdiff_t x = 0; x < w; ++x)
            for (std::size_t c = 0; c < img.channels; ++c) {
                double acc = 0.0;
                for (std::ptrdiff_t dy = -radius; dy <= radius; ++dy)
                    for (std::ptrdiff_t dx = -radius; dx <= radius; ++dx) {
                        const double k = std::exp(-0.5 * double(dx * dx + dy * dy) / (sigma * sigma)) / norm;
                        acc += k * img.at(std::size_t(mirror(x + dx, w)), std::size_t(mirror(y + dy, h)), c);
                    }
                out.at(std::size_t(x), std::size_t(y), c) = acc;
            }
    return out;
}

} // namespace

TEST_SUITE("image_ingest") {

TEST_CASE("2x2 white PPM decodes to four white pixels") {
    test::TempDir dir;
    write_text(dir / "white.ppm", std::string("P6\n2 2\n255\n") + std::string(12, '\xff'));
    const RawImage img = load_image(dir / "white.ppm");
    CHECK(img.width == 2);
    CHECK(img.height == 2);
    CHECK(img.channels == 3);
    for (double v : img.intensities) CHECK(v == 255.0);
}

TEST_CASE("1x1 PNG pixel keeps its intensities") {
    test::TempDir dir;
    write_png_rgb(dir / "px.png", 1, 1, {10, 20, 30});
    const RawImage img = load_image(dir / "px.png");
    REQUIRE(img.channels == 3);
    CHECK(img.intensities == std::vector<double>{10, 20, 30});
}

TEST_CASE("ASCII PGM and PPM") {
    test::TempDir dir;
    write_text(dir / "g.pgm", "P2\n# comment\n3 1\n255\n0 128 255\n");
    const RawImage g = load_image(dir / "g.pgm");
    CHECK(g.channels == 1);
    CHECK(g.intensities == std::vector<double>{0, 128, 255});

    write_text(dir / "c.ppm", "P3 1 1 15 15 0 5\n");
    const RawImage c = load_image(dir / "c.ppm");
    CHECK(c.intensities == std::vector<double>{255, 0, 85});
}

TEST_CASE("flat JPEG decodes close to its color") {
    test::TempDir dir;
    std::vector<unsigned char> rgb;
    for (int i = 0; i < 64; ++i) rgb.insert(rgb.end(), {200, 100, 50});
    write_jpeg_rgb(dir / "flat.jpg", 8, 8, rgb);
    const RawImage img = load_image(dir / "flat.jpg");
    REQUIRE(img.channels == 3);
    CHECK(img.width == 8);
    CHECK(std::abs(img.at(3, 3, 0) - 200) <= 3);
    CHECK(std::abs(img.at(3, 3, 1) - 100) <= 3);
    CHECK(std::abs(img.at(3, 3, 2) - 50) <= 3);
}

TEST_CASE("load errors") {
    test::TempDir dir;
    write_text(dir / "bad.png", "\x89PNG\r\n\x1a\nthis is not a png");
    CHECK_THROWS_WITH_AS(load_image(dir / "bad.png"), doctest::Contains("unreadable file"), DataError);
    write_text(dir / "bad.ppm", "P6\nxx\n");
    CHECK_THROWS_WITH_AS(load_image(dir / "bad.ppm"), doctest::Contains("unreadable file"), DataError);
    write_text(dir / "trunc.ppm", "P6\n2 2\n255\nabc");
    CHECK_THROWS_WITH_AS(load_image(dir / "trunc.ppm"), doctest::Contains("unreadable file"), DataError);
    write_text(dir / "x.gif", "GIF89a....");
    CHECK_THROWS_WITH_AS(load_image(dir / "x.gif"), doctest::Contains("unsupported format"), DataError);
    write_text(dir / "empty.pgm", "P5\n0 3\n255\n");
    CHECK_THROWS_WITH_AS(load_image(dir / "empty.pgm"), doctest::Contains("zero-size image"), DataError);
    CHECK_THROWS_WITH_AS(load_image(dir / "missing.png"), doctest::Contains("unreadable file"), DataError);
}

TEST_CASE("write_pnm round trip") {
    test::TempDir dir;
    std::mt19937_64 rng(1);
    const RawImage img = test::random_image(rng, 5, 3, 3);
    write_pnm(img, dir / "r.ppm");
    CHECK(load_image(dir / "r.ppm").intensities == img.intensities);
    const RawImage gray = test::random_image(rng, 4, 2, 1);
    write_pnm(gray, dir / "r.pgm");
    CHECK(load_image(dir / "r.pgm").intensities == gray.intensities);
}

TEST_CASE("average_pool") {
    RawImage checker(2, 2, 1);
    checker.intensities = {0, 255, 255, 0};
    const RawImage one = average_pool(checker, 2);
    CHECK(one.width == 1);
    CHECK(one.intensities.front() == 127.5);

    const RawImage flat = average_pool(test::constant_image(6, 9, {100, 100, 100}), 3);
    CHECK(flat.width == 2);
    CHECK(flat.height == 3);
    for (double v : flat.intensities) CHECK(v == doctest::Approx(100.0).epsilon(1e-15));

    std::mt19937_64 rng(4);
    const RawImage big = test::random_image(rng, 40, 40, 3);
    const RawImage global = average_pool(big, 40);
    REQUIRE(global.pixel_count() == 1);
    for (std::size_t c = 0; c < 3; ++c) {
        double mean = 0.0;
        for (std::size_t p = 0; p < 1600; ++p) mean += big.intensities[p * 3 + c];
        CHECK(global.intensities[c] == doctest::Approx(mean / 1600.0).epsilon(1e-12));
    }
}

TEST_CASE("average_pool trims the border symmetrically") {
    RawImage tall(5, 5, 1);
    for (std::size_t y = 0; y < 5; ++y)
        for (std::size_t x = 0; x < 5; ++x) tall.at(x, y, 0) = double(10 * y + x);
    // 5 = 2 * 2 + 1: the leftover row and column fall at the far edge.
    const RawImage out = average_pool(tall, 2);
    CHECK(out.width == 2);
    CHECK(out.at(0, 0, 0) == doctest::Approx((0 + 1 + 10 + 11) / 4.0));
    CHECK(out.at(1, 1, 0) == doctest::Approx((22 + 23 + 32 + 33) / 4.0));
    CHECK_THROWS_AS(average_pool(tall, 6), ConfigError);
    CHECK_THROWS_AS(average_pool(tall, 0), ConfigError);
}

TEST_CASE("gaussian_smooth leaves a constant image unchanged") {
    const RawImage flat = test::constant_image(7, 5, {42, 7, 200});
    const RawImage out = gaussian_smooth(flat, 1.3);
    for (std::size_t k = 0; k < flat.intensities.size(); ++k)
        CHECK(std::abs(out.intensities[k] - flat.intensities[k]) <= 1e-12);
}

TEST_CASE("gaussian_smooth impulse reproduces the kernel") {
    RawImage impulse(5, 5, 1);
    impulse.at(2, 2, 0) = 1.0;
    const RawImage out = gaussian_smooth(impulse, 0.5);
    const std::vector<double> k = gaussian_kernel(0.5);
    REQUIRE(k.size() == 5);
    for (std::size_t y = 0; y < 5; ++y)
        for (std::size_t x = 0; x < 5; ++x) CHECK(out.at(x, y, 0) == doctest::Approx(k[x] * k[y]).epsilon(1e-12));
    const RawImage oracle = dense_convolution(impulse, 0.5);
    for (std::size_t i = 0; i < 25; ++i) CHECK(std::abs(out.intensities[i] - oracle.intensities[i]) <= 1e-12);
}

TEST_CASE("gaussian_smooth matches a dense convolution oracle") {
    std::mt19937_64 rng(9);
    for (double sigma : {0.5, 1.0, 2.5}) {
        const RawImage img = test::random_image(rng, 6, 4, 3);
        const RawImage out = gaussian_smooth(img, sigma);
        const RawImage oracle = dense_convolution(img, sigma);
        double worst = 0.0;
        for (std::size_t i = 0; i < img.intensities.size(); ++i)
            worst = std::max(worst, std::abs(out.intensities[i] - oracle.intensities[i]));
        CHECK(worst <= 1e-9);
    }
}

TEST_CASE("gaussian_smooth preserves total mass") {
    std::mt19937_64 rng(10);
    const RawImage img = test::random_image(rng, 9, 7, 1);
    const RawImage out = gaussian_smooth(img, 1.7);
    double a = 0.0, b = 0.0;
    for (double v : img.intensities) a += v;
    for (double v : out.intensities) b += v;
    CHECK(b == doctest::Approx(a).epsilon(1e-12));
    CHECK_THROWS_AS(gaussian_smooth(img, 0.0), ConfigError);
}

TEST_CASE("to_grayscale") {
    RawImage img(3, 1, 3);
    img.intensities = {255, 255, 255, 255, 0, 0, 0, 0, 0};
    const RawImage g = to_grayscale(img);
    REQUIRE(g.channels == 1);
    CHECK(g.intensities[0] == doctest::Approx(255.0).epsilon(1e-15));
    CHECK(g.intensities[1] == 54.1875);
    CHECK(g.intensities[2] == 0.0);
    CHECK_THROWS_AS(to_grayscale(g), DataError);
}

TEST_CASE("flatten_to_tensor") {
    RawImage img(2, 1, 1);
    img.intensities = {51, 255};
    const MassTensor t = flatten_to_tensor(img);
    REQUIRE(t.size() == 2);
    CHECK(t.coords[0] == std::array<double, 2>{0, 0});
    CHECK(t.coords[1] == std::array<double, 2>{1, 0});
    CHECK(t.mass[0] == doctest::Approx(0.2));
    CHECK(t.mass[1] == 1.0);

    const MassTensor black = flatten_to_tensor(RawImage(3, 3, 3));
    for (double m : black.mass) CHECK(m == 0.0);

    const MassTensor white = flatten_to_tensor(test::constant_image(1, 1, {255, 255, 255}));
    CHECK(white.commodities == 3);
    CHECK(white.mass == std::vector<double>{1, 1, 1});
    CHECK(white.total(1) == 1.0);
}

TEST_CASE("flatten is row-major") {
    RawImage img(2, 2, 1);
    img.intensities = {0, 1, 2, 3};
    const MassTensor t = flatten_to_tensor(img);
    CHECK(t.coords[2] == std::array<double, 2>{0, 1});
    CHECK(t.mass[2] == doctest::Approx(2.0 / 255.0));
}

} // TEST_SUITE
