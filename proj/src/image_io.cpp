#include "ism/image.hpp"

#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>

#include "ism/errors.hpp"

namespace ism {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

uint8_t quantize8(double v) {
    const double c = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
    return static_cast<uint8_t>(std::lround(c * 255.0));
}

uint16_t quantize16(double v) {
    const double c = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
    return static_cast<uint16_t>(std::lround(c * 65535.0));
}

}  // namespace

Image read_png_rgb(const std::filesystem::path& path) {
    FilePtr fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp) throw IngestionError("png: cannot open " + path.string());

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IngestionError("png: read struct allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IngestionError("png: info struct allocation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ParseError("png: malformed file " + path.string());
    }

    png_init_io(png, fp.get());
    png_read_info(png, info);

    // Normalize whatever arrives to 8-bit RGB.
    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);

    const size_t h = png_get_image_height(png, info);
    const size_t w = png_get_image_width(png, info);
    const size_t rowbytes = png_get_rowbytes(png, info);
    if (rowbytes != w * 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ParseError("png: unexpected row layout in " + path.string());
    }

    std::vector<uint8_t> raw(h * rowbytes);
    std::vector<png_bytep> rows(h);
    for (size_t r = 0; r < h; ++r) rows[r] = raw.data() + r * rowbytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Image img(h, w);
    for (size_t i = 0; i < img.px.size(); ++i) img.px[i] = raw[i] / 255.0;
    return img;
}

void write_png_rgb(const std::filesystem::path& path, const Image& image) {
    if (image.px.size() != image.height * image.width * 3)
        throw DimensionError("png: image buffer does not match dimensions");
    FilePtr fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp) throw IngestionError("png: cannot open for write " + path.string());

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IngestionError("png: write struct allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IngestionError("png: info struct allocation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IngestionError("png: write failed for " + path.string());
    }

    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
                 static_cast<png_uint_32>(image.height), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<uint8_t> row(image.width * 3);
    for (size_t r = 0; r < image.height; ++r) {
        for (size_t c = 0; c < image.width; ++c)
            for (size_t ch = 0; ch < 3; ++ch) row[c * 3 + ch] = quantize8(image.at(r, c, ch));
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

GrayImage read_png_gray(const std::filesystem::path& path) {
    FilePtr fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp) throw IngestionError("png: cannot open " + path.string());

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IngestionError("png: read struct allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IngestionError("png: info struct allocation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ParseError("png: malformed file " + path.string());
    }

    png_init_io(png, fp.get());
    png_read_info(png, info);

    png_set_expand(png);
    png_set_strip_alpha(png);
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
#if PNG_LIBPNG_VER >= 10504
    png_set_swap(png);  // 16-bit PNGs are big-endian on disk
#endif
    png_read_update_info(png, info);

    const size_t h = png_get_image_height(png, info);
    const size_t w = png_get_image_width(png, info);
    const int depth = png_get_bit_depth(png, info);
    const size_t rowbytes = png_get_rowbytes(png, info);

    std::vector<uint8_t> raw(h * rowbytes);
    std::vector<png_bytep> rows(h);
    for (size_t r = 0; r < h; ++r) rows[r] = raw.data() + r * rowbytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    GrayImage img;
    img.height = h;
    img.width = w;
    img.values.resize(h * w);
    if (depth == 16) {
        if (rowbytes != w * 2) throw ParseError("png: unexpected 16-bit row layout");
        for (size_t i = 0; i < h * w; ++i) {
            const uint16_t v = static_cast<uint16_t>(raw[2 * i] | (raw[2 * i + 1] << 8));
            img.values[i] = v / 65535.0;
        }
    } else {
        if (rowbytes != w) throw ParseError("png: unexpected 8-bit row layout");
        for (size_t i = 0; i < h * w; ++i) img.values[i] = raw[i] / 255.0;
    }
    return img;
}

void write_png_gray16(const std::filesystem::path& path, const GrayImage& image) {
    if (image.values.size() != image.height * image.width)
        throw DimensionError("png: gray buffer does not match dimensions");
    FilePtr fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp) throw IngestionError("png: cannot open for write " + path.string());

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IngestionError("png: write struct allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IngestionError("png: info struct allocation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IngestionError("png: write failed for " + path.string());
    }

    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
                 static_cast<png_uint_32>(image.height), 16, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<uint8_t> row(image.width * 2);
    for (size_t r = 0; r < image.height; ++r) {
        for (size_t c = 0; c < image.width; ++c) {
            const uint16_t v = quantize16(image.values[r * image.width + c]);
            row[c * 2] = static_cast<uint8_t>(v >> 8);  // big-endian per PNG spec
            row[c * 2 + 1] = static_cast<uint8_t>(v & 0xff);
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace ism
