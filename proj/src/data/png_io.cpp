#include "lsda/data/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <vector>

namespace lsda::data {

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

float byte_to_unit(unsigned char v) { return static_cast<float>(v) / 255.0f * 2.0f - 1.0f; }

unsigned char unit_to_byte(float v) {
    const float u = (std::clamp(v, -1.0f, 1.0f) + 1.0f) * 0.5f * 255.0f;
    return static_cast<unsigned char>(std::lround(u));
}

}  // namespace

TensorF read_png(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw std::runtime_error("cannot open image: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::runtime_error("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("undecodable image: " + path);
    }
    png_init_io(png, f.get());
    // Normalize everything to 8-bit gray or RGB without alpha.
    png_read_png(png, info,
                 PNG_TRANSFORM_STRIP_16 | PNG_TRANSFORM_PACKING | PNG_TRANSFORM_EXPAND |
                     PNG_TRANSFORM_STRIP_ALPHA,
                 nullptr);

    const int h = static_cast<int>(png_get_image_height(png, info));
    const int w = static_cast<int>(png_get_image_width(png, info));
    const png_byte color = png_get_color_type(png, info);
    const int c = color == PNG_COLOR_TYPE_GRAY ? 1 : 3;
    const size_t rowbytes = png_get_rowbytes(png, info);
    if (rowbytes < static_cast<size_t>(w) * c) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("unexpected row layout: " + path);
    }

    TensorF img({h, w, c});
    png_bytepp rows = png_get_rows(png, info);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int ch = 0; ch < c; ++ch) img.at(y, x, ch) = byte_to_unit(rows[y][x * c + ch]);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

void write_png(const std::string& path, const TensorF& img) {
    if (img.ndim() != 3 || (img.dim(2) != 1 && img.dim(2) != 3))
        throw std::invalid_argument("write_png: expected (H, W, 1|3), got " + img.shape_str());
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw std::runtime_error("cannot write image: " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw std::runtime_error("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("png write failed: " + path);
    }

    const int h = img.dim(0), w = img.dim(1), c = img.dim(2);
    png_init_io(png, f.get());
    png_set_IHDR(png, info, w, h, 8, c == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);

    std::vector<unsigned char> flat(static_cast<size_t>(h) * w * c);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int ch = 0; ch < c; ++ch)
                flat[(static_cast<size_t>(y) * w + x) * c + ch] = unit_to_byte(img.at(y, x, ch));
    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y) rows[y] = flat.data() + static_cast<size_t>(y) * w * c;

    png_set_rows(png, info, rows.data());
    png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
    png_destroy_write_struct(&png, &info);
}

TensorF resize_bilinear(const TensorF& img, int out_h, int out_w) {
    const int h = img.dim(0), w = img.dim(1), c = img.dim(2);
    if (h == out_h && w == out_w) return img;
    TensorF out({out_h, out_w, c});
    const float sy = static_cast<float>(h) / out_h;
    const float sx = static_cast<float>(w) / out_w;
    for (int y = 0; y < out_h; ++y) {
        // Align sample centers: pixel centers map to pixel centers.
        const float fy = std::max(0.0f, (y + 0.5f) * sy - 0.5f);
        const int y0 = std::min(static_cast<int>(fy), h - 1);
        const int y1 = std::min(y0 + 1, h - 1);
        const float wy = fy - y0;
        for (int x = 0; x < out_w; ++x) {
            const float fx = std::max(0.0f, (x + 0.5f) * sx - 0.5f);
            const int x0 = std::min(static_cast<int>(fx), w - 1);
            const int x1 = std::min(x0 + 1, w - 1);
            const float wx = fx - x0;
            for (int ch = 0; ch < c; ++ch) {
                const float top = img.at(y0, x0, ch) * (1 - wx) + img.at(y0, x1, ch) * wx;
                const float bot = img.at(y1, x0, ch) * (1 - wx) + img.at(y1, x1, ch) * wx;
                out.at(y, x, ch) = top * (1 - wy) + bot * wy;
            }
        }
    }
    return out;
}

TensorF convert_channels(const TensorF& img, int out_c) {
    const int c = img.dim(2);
    if (c == out_c) return img;
    TensorF out({img.dim(0), img.dim(1), out_c});
    const size_t pixels = img.size() / c;
    if (c == 1 && out_c == 3) {
        for (size_t p = 0; p < pixels; ++p)
            for (int ch = 0; ch < 3; ++ch) out[p * 3 + ch] = img[p];
    } else if (c == 3 && out_c == 1) {
        for (size_t p = 0; p < pixels; ++p)
            out[p] = 0.299f * img[p * 3] + 0.587f * img[p * 3 + 1] + 0.114f * img[p * 3 + 2];
    } else {
        throw std::invalid_argument("convert_channels: unsupported conversion");
    }
    return out;
}

}  // namespace lsda::data
