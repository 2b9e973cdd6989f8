#include "mcot/image.hpp"

#include "mcot/error.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>
#include <sstream>
#include <string>

// jpeglib.h needs FILE and size_t declared beforehand.
#include <jpeglib.h>

namespace mcot {

double MassTensor::total(std::size_t a) const {
    double sum = 0.0;
    for (std::size_t i = 0; i < size(); ++i) sum += mass[i * commodities + a];
    return sum;
}

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("unreadable file: " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

RawImage decode_png(const std::vector<unsigned char>& bytes, const std::string& name) {
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
        throw DataError("unreadable file: " + name + " (" + image.message + ")");

    const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
    image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    const std::size_t channels = color ? 3 : 1;
    std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
        png_image_free(&image);
        throw DataError("unreadable file: " + name + " (" + image.message + ")");
    }
    RawImage out(image.width, image.height, channels);
    std::transform(buffer.begin(), buffer.end(), out.intensities.begin(),
                   [](png_byte b) { return static_cast<double>(b); });
    return out;
}

struct JpegErrorManager {
    jpeg_error_mgr base;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->jump, 1);
}

RawImage decode_jpeg(const std::vector<unsigned char>& bytes, const std::string& name) {
    jpeg_decompress_struct cinfo{};
    JpegErrorManager err{};
    cinfo.err = jpeg_std_error(&err.base);
    err.base.error_exit = jpeg_error_exit;
    // Everything touched after setjmp lives outside this frame's automatic storage
    // or is re-created afterwards.
    std::vector<unsigned char> pixels;
    std::size_t width = 0, height = 0, channels = 0;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw DataError("unreadable file: " + name + " (" + err.message + ")");
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = cinfo.num_components == 1 ? JCS_GRAYSCALE : JCS_RGB;
    jpeg_start_decompress(&cinfo);
    width = cinfo.output_width;
    height = cinfo.output_height;
    channels = static_cast<std::size_t>(cinfo.output_components);
    pixels.resize(width * height * channels);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = pixels.data() + static_cast<std::size_t>(cinfo.output_scanline) * width * channels;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);

    RawImage out(width, height, channels);
    std::transform(pixels.begin(), pixels.end(), out.intensities.begin(),
                   [](unsigned char b) { return static_cast<double>(b); });
    return out;
}

// Netpbm P2/P3 (ASCII) and P5/P6 (binary) with arbitrary maxval.
RawImage decode_pnm(const std::vector<unsigned char>& bytes, const std::string& name) {
    const std::string text(bytes.begin(), bytes.end());
    const char kind = text[1];
    const bool binary = kind == '5' || kind == '6';
    const std::size_t channels = (kind == '3' || kind == '6') ? 3 : 1;

    std::size_t pos = 2;
    auto next_token = [&]() -> std::string {
        while (pos < text.size()) {
            if (std::isspace(static_cast<unsigned char>(text[pos]))) {
                ++pos;
            } else if (text[pos] == '#') {
                while (pos < text.size() && text[pos] != '\n') ++pos;
            } else {
                break;
            }
        }
        const std::size_t start = pos;
        while (pos < text.size() && !std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
        return text.substr(start, pos - start);
    };
    auto parse_uint = [&](const std::string& tok) -> std::size_t {
        if (tok.empty() || !std::all_of(tok.begin(), tok.end(), ::isdigit))
            throw DataError("unreadable file: " + name + " (malformed netpbm header)");
        return std::stoul(tok);
    };
    const std::size_t width = parse_uint(next_token());
    const std::size_t height = parse_uint(next_token());
    const std::size_t maxval = parse_uint(next_token());
    if (maxval == 0 || maxval > 65535) throw DataError("unreadable file: " + name + " (bad maxval)");
    if (width == 0 || height == 0) throw DataError("zero-size image: " + name);

    RawImage out(width, height, channels);
    const std::size_t count = width * height * channels;
    const double scale = 255.0 / static_cast<double>(maxval);
    if (binary) {
        ++pos; // single whitespace after maxval
        const std::size_t bpp = maxval > 255 ? 2 : 1;
        if (text.size() < pos + count * bpp)
            throw DataError("unreadable file: " + name + " (truncated pixel data)");
        for (std::size_t k = 0; k < count; ++k) {
            std::size_t v = bytes[pos + k * bpp];
            if (bpp == 2) v = (v << 8) | bytes[pos + k * bpp + 1];
            out.intensities[k] = static_cast<double>(v) * scale;
        }
    } else {
        for (std::size_t k = 0; k < count; ++k) {
            const std::string tok = next_token();
            if (tok.empty()) throw DataError("unreadable file: " + name + " (truncated pixel data)");
            out.intensities[k] = static_cast<double>(parse_uint(tok)) * scale;
        }
    }
    return out;
}

} // namespace

RawImage load_image(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    const std::string name = path.string();
    if (bytes.size() < 4) throw DataError("unreadable file: " + name);

    RawImage img;
    if (bytes[0] == 0x89 && bytes[1] == 'P' && bytes[2] == 'N' && bytes[3] == 'G') {
        img = decode_png(bytes, name);
    } else if (bytes[0] == 0xFF && bytes[1] == 0xD8) {
        img = decode_jpeg(bytes, name);
    } else if (bytes[0] == 'P' && bytes[1] >= '2' && bytes[1] <= '6' && bytes[1] != '4') {
        img = decode_pnm(bytes, name);
    } else {
        throw DataError("unsupported format: " + name);
    }
    if (img.width == 0 || img.height == 0) throw DataError("zero-size image: " + name);
    return img;
}

void write_pnm(const RawImage& img, const std::filesystem::path& path) {
    if (img.channels != 1 && img.channels != 3)
        throw DataError("write_pnm: channels must be 1 or 3");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << (img.channels == 3 ? "P6" : "P5") << '\n' << img.width << ' ' << img.height << "\n255\n";
    for (double v : img.intensities) {
        const auto b = static_cast<unsigned char>(std::clamp(std::lround(v), 0L, 255L));
        out.put(static_cast<char>(b));
    }
}

RawImage average_pool(const RawImage& img, std::size_t mask) {
    if (mask == 0) throw ConfigError("average_pool: mask must be >= 1");
    if (mask > img.width || mask > img.height)
        throw ConfigError("average_pool: mask " + std::to_string(mask) + " larger than image " +
                          std::to_string(img.width) + "x" + std::to_string(img.height));
    const std::size_t out_w = img.width / mask;
    const std::size_t out_h = img.height / mask;
    const std::size_t x0 = (img.width - out_w * mask) / 2;
    const std::size_t y0 = (img.height - out_h * mask) / 2;
    const double inv_area = 1.0 / static_cast<double>(mask * mask);

    RawImage out(out_w, out_h, img.channels);
    for (std::size_t oy = 0; oy < out_h; ++oy)
        for (std::size_t ox = 0; ox < out_w; ++ox)
            for (std::size_t c = 0; c < img.channels; ++c) {
                double sum = 0.0;
                for (std::size_t dy = 0; dy < mask; ++dy)
                    for (std::size_t dx = 0; dx < mask; ++dx)
                        sum += img.at(x0 + ox * mask + dx, y0 + oy * mask + dy, c);
                out.at(ox, oy, c) = sum * inv_area;
            }
    return out;
}

std::vector<double> gaussian_kernel(double sigma, double truncate) {
    if (!(sigma > 0.0)) throw ConfigError("gaussian_smooth: sigma must be > 0");
    const auto radius = static_cast<std::ptrdiff_t>(std::ceil(truncate * sigma));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
        const double w = std::exp(-0.5 * static_cast<double>(k * k) / (sigma * sigma));
        kernel[static_cast<std::size_t>(k + radius)] = w;
        sum += w;
    }
    for (double& w : kernel) w /= sum;
    return kernel;
}

namespace {

// Half-sample symmetric reflection (d c b a | a b c d | d c b a), periodic in 2n.
std::size_t reflect(std::ptrdiff_t i, std::size_t n) {
    const auto period = static_cast<std::ptrdiff_t>(2 * n);
    std::ptrdiff_t r = i % period;
    if (r < 0) r += period;
    if (r >= static_cast<std::ptrdiff_t>(n)) r = period - 1 - r;
    return static_cast<std::size_t>(r);
}

} // namespace

RawImage gaussian_smooth(const RawImage& img, double sigma, double truncate) {
    const auto kernel = gaussian_kernel(sigma, truncate);
    const auto radius = static_cast<std::ptrdiff_t>(kernel.size() / 2);

    RawImage horizontal(img.width, img.height, img.channels);
    for (std::size_t y = 0; y < img.height; ++y)
        for (std::size_t x = 0; x < img.width; ++x)
            for (std::size_t c = 0; c < img.channels; ++c) {
                double acc = 0.0;
                for (std::ptrdiff_t k = -radius; k <= radius; ++k)
                    acc += kernel[static_cast<std::size_t>(k + radius)] *
                           img.at(reflect(static_cast<std::ptrdiff_t>(x) + k, img.width), y, c);
                horizontal.at(x, y, c) = acc;
            }

    RawImage out(img.width, img.height, img.channels);
    for (std::size_t y = 0; y < img.height; ++y)
        for (std::size_t x = 0; x < img.width; ++x)
            for (std::size_t c = 0; c < img.channels; ++c) {
                double acc = 0.0;
                for (std::ptrdiff_t k = -radius; k <= radius; ++k)
                    acc += kernel[static_cast<std::size_t>(k + radius)] *
                           horizontal.at(x, reflect(static_cast<std::ptrdiff_t>(y) + k, img.height), c);
                out.at(x, y, c) = acc;
            }
    return out;
}

RawImage to_grayscale(const RawImage& img) {
    if (img.channels != 3) throw DataError("to_grayscale: input already grayscale");
    RawImage out(img.width, img.height, 1);
    for (std::size_t p = 0; p < img.pixel_count(); ++p) {
        const double* rgb = img.intensities.data() + 3 * p;
        out.intensities[p] = 0.2125 * rgb[0] + 0.7154 * rgb[1] + 0.0721 * rgb[2];
    }
    return out;
}

MassTensor flatten_to_tensor(const RawImage& img) {
    MassTensor t;
    t.commodities = img.channels;
    t.coords.reserve(img.pixel_count());
    for (std::size_t y = 0; y < img.height; ++y)
        for (std::size_t x = 0; x < img.width; ++x)
            t.coords.push_back({static_cast<double>(x), static_cast<double>(y)});
    t.mass.resize(img.intensities.size());
    std::transform(img.intensities.begin(), img.intensities.end(), t.mass.begin(),
                   [](double v) { return v / 255.0; });
    return t;
}

} // namespace mcot
