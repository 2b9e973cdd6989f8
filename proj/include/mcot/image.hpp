#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace mcot {

/// Decoded image with intensities on the 0..255 scale, interleaved channels.
struct RawImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 0; // 1 (grayscale) or 3 (RGB)
    std::vector<double> intensities;

    RawImage() = default;
    RawImage(std::size_t w, std::size_t h, std::size_t c, double fill = 0.0)
        : width(w), height(h), channels(c), intensities(w * h * c, fill) {}

    [[nodiscard]] double& at(std::size_t x, std::size_t y, std::size_t c) {
        return intensities[(y * width + x) * channels + c];
    }
    [[nodiscard]] double at(std::size_t x, std::size_t y, std::size_t c) const {
        return intensities[(y * width + x) * channels + c];
    }
    [[nodiscard]] std::size_t pixel_count() const { return width * height; }
};

/// Per-pixel mass vectors of one image: m pixels, M commodities each.
struct MassTensor {
    std::size_t commodities = 0;
    std::vector<std::array<double, 2>> coords; // (x, y) in pixel units
    std::vector<double> mass;                  // pixel-major, m * commodities

    [[nodiscard]] std::size_t size() const { return coords.size(); }
    [[nodiscard]] std::span<const double> pixel(std::size_t i) const {
        return {mass.data() + i * commodities, commodities};
    }
    [[nodiscard]] double total(std::size_t a) const;
};

/// Reads PNG, JPEG or binary/ASCII PPM/PGM. RGB(A) inputs yield 3 channels and
/// grayscale inputs yield 1; alpha is dropped.
RawImage load_image(const std::filesystem::path& path);

/// Writes a binary PPM (3 channels) or PGM (1 channel); values are rounded and clamped.
void write_pnm(const RawImage& img, const std::filesystem::path& path);

/// Center-trims so both dimensions are divisible by `mask`, then averages
/// non-overlapping mask x mask blocks (stride = mask, no padding).
RawImage average_pool(const RawImage& img, std::size_t mask);

/// Separable Gaussian filter per channel with half-sample symmetric boundary
/// reflection. The kernel is truncated at `truncate * sigma` and normalized.
RawImage gaussian_smooth(const RawImage& img, double sigma, double truncate = 4.0);

/// Normalized 1-D Gaussian kernel of radius ceil(truncate * sigma).
std::vector<double> gaussian_kernel(double sigma, double truncate = 4.0);

/// I = 0.2125 R + 0.7154 G + 0.0721 B.
RawImage to_grayscale(const RawImage& img);

/// Row-major flattening with masses = intensity / 255.
MassTensor flatten_to_tensor(const RawImage& img);

} // namespace mcot
