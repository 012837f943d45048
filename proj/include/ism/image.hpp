#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace ism {

// RGB image, row-major, values in [0,1].
struct Image {
    size_t height = 0;
    size_t width = 0;
    std::vector<double> px;  // height * width * 3

    Image() = default;
    Image(size_t h, size_t w, double fill = 0.0) : height(h), width(w), px(h * w * 3, fill) {}

    double& at(size_t r, size_t c, size_t ch) { return px[(r * width + c) * 3 + ch]; }
    double at(size_t r, size_t c, size_t ch) const { return px[(r * width + c) * 3 + ch]; }
    size_t pixel_count() const { return height * width; }
};

// 8-bit RGB PNG. Grayscale/alpha inputs are expanded to RGB on read.
Image read_png_rgb(const std::filesystem::path& path);
void write_png_rgb(const std::filesystem::path& path, const Image& image);

// Grayscale PNG scaled to [0,1]: 16-bit value/65535, 8-bit value/255.
struct GrayImage {
    size_t height = 0;
    size_t width = 0;
    std::vector<double> values;
};
GrayImage read_png_gray(const std::filesystem::path& path);
void write_png_gray16(const std::filesystem::path& path, const GrayImage& image);

}  // namespace ism
