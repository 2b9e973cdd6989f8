#pragma once

#include "mcot/image.hpp"

#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <unistd.h>

namespace test {

class TempDir {
public:
    TempDir() {
        std::string pattern = (std::filesystem::temp_directory_path() / "mcot-test-XXXXXX").string();
        if (mkdtemp(pattern.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
        path_ = pattern;
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const std::filesystem::path& path() const { return path_; }
    [[nodiscard]] std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline mcot::RawImage random_image(std::mt19937_64& rng, std::size_t w, std::size_t h, std::size_t channels) {
    mcot::RawImage img(w, h, channels);
    for (double& v : img.intensities) v = static_cast<double>(rng() % 256);
    return img;
}

inline mcot::RawImage constant_image(std::size_t w, std::size_t h, std::vector<double> color) {
    mcot::RawImage img(w, h, color.size());
    for (std::size_t p = 0; p < img.pixel_count(); ++p)
        for (std::size_t c = 0; c < color.size(); ++c) img.intensities[p * color.size() + c] = color[c];
    return img;
}

} // namespace test
