#pragma once

#include "rigsplat/common.hpp"

#include <string>
#include <vector>

namespace rigsplat {

/// RGB image, row-major from the top row, channels interleaved (R, G, B).
struct Image {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    Image() = default;
    Image(int w, int h, double fill = 0.0)
        : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, fill) {}
    Image(int w, int h, const Vec3 &fill);

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
    double &at(int x, int y, int c) { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
    double at(int x, int y, int c) const { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
    Vec3 pixel(int x, int y) const;
    void set_pixel(int x, int y, const Vec3 &rgb);

    bool same_shape(const Image &other) const { return width == other.width && height == other.height; }
};

/// Throws SizeError when shapes differ.
void require_same_shape(const Image &a, const Image &b, const char *what);

/// Rounds each channel to the nearest of 256 levels in [0, 1].
Image quantize8(const Image &img);

/// 8-bit RGB PNG.
void write_png(const std::string &path, const Image &img);
Image read_png(const std::string &path);

/// Single-channel 8-bit PNG read as a binary mask (value > 127 is foreground).
std::vector<unsigned char> read_mask_png(const std::string &path, int &width, int &height);
void write_mask_png(const std::string &path, const std::vector<unsigned char> &mask, int width, int height);

// Raw float dump, for bit-exact comparisons:
//   "PD\n<width> <height>\n" then width*height*3 little-endian IEEE-754
//   binary64 values, RGB interleaved, rows from the top.
void write_raw(const std::string &path, const Image &img);
Image read_raw(const std::string &path);

} // namespace rigsplat
