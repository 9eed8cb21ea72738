#include "rigsplat/image.hpp"

#include <png.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace rigsplat {

Image::Image(int w, int h, const Vec3 &fill) : Image(w, h) {
    for (std::size_t i = 0; i < pixel_count(); ++i) {
        data[3 * i] = fill[0];
        data[3 * i + 1] = fill[1];
        data[3 * i + 2] = fill[2];
    }
}

Vec3 Image::pixel(int x, int y) const { return Vec3(at(x, y, 0), at(x, y, 1), at(x, y, 2)); }

void Image::set_pixel(int x, int y, const Vec3 &rgb) {
    for (int c = 0; c < 3; ++c) {
        at(x, y, c) = rgb[c];
    }
}

void require_same_shape(const Image &a, const Image &b, const char *what) {
    if (!a.same_shape(b)) {
        throw SizeError(std::string(what) + ": image dimensions differ (" + std::to_string(a.width) + "x" +
                        std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                        std::to_string(b.height) + ")");
    }
}

namespace {

std::uint8_t to_byte(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

} // namespace

Image quantize8(const Image &img) {
    Image out(img.width, img.height);
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        out.data[i] = to_byte(img.data[i]) / 255.0;
    }
    return out;
}

void write_png(const std::string &path, const Image &img) {
    std::vector<std::uint8_t> bytes(img.data.size());
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        bytes[i] = to_byte(img.data[i]);
    }
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(img.width);
    png.height = static_cast<png_uint_32>(img.height);
    png.format = PNG_FORMAT_RGB;
    if (png_image_write_to_file(&png, path.c_str(), 0, bytes.data(), 0, nullptr) == 0) {
        throw LoadError("failed to write PNG " + path + ": " + png.message);
    }
}

namespace {

std::vector<std::uint8_t> read_png_bytes(const std::string &path, png_uint_32 format, int &width, int &height) {
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    if (png_image_begin_read_from_file(&png, path.c_str()) == 0) {
        throw LoadError("failed to read PNG " + path + ": " + png.message);
    }
    png.format = format;
    std::vector<std::uint8_t> bytes(PNG_IMAGE_SIZE(png));
    if (png_image_finish_read(&png, nullptr, bytes.data(), 0, nullptr) == 0) {
        png_image_free(&png);
        throw LoadError("failed to decode PNG " + path + ": " + png.message);
    }
    width = static_cast<int>(png.width);
    height = static_cast<int>(png.height);
    return bytes;
}

} // namespace

Image read_png(const std::string &path) {
    int w = 0, h = 0;
    const auto bytes = read_png_bytes(path, PNG_FORMAT_RGB, w, h);
    Image img(w, h);
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        img.data[i] = bytes[i] / 255.0;
    }
    return img;
}

std::vector<unsigned char> read_mask_png(const std::string &path, int &width, int &height) {
    const auto bytes = read_png_bytes(path, PNG_FORMAT_GRAY, width, height);
    std::vector<unsigned char> mask(bytes.size());
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        mask[i] = bytes[i] > 127 ? 1 : 0;
    }
    return mask;
}

void write_mask_png(const std::string &path, const std::vector<unsigned char> &mask, int width, int height) {
    require_size(mask.size(), static_cast<std::size_t>(width) * height, "mask");
    std::vector<std::uint8_t> bytes(mask.size());
    for (std::size_t i = 0; i < mask.size(); ++i) {
        bytes[i] = mask[i] != 0 ? 255 : 0;
    }
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(width);
    png.height = static_cast<png_uint_32>(height);
    png.format = PNG_FORMAT_GRAY;
    if (png_image_write_to_file(&png, path.c_str(), 0, bytes.data(), 0, nullptr) == 0) {
        throw LoadError("failed to write PNG " + path + ": " + png.message);
    }
}

static_assert(std::endian::native == std::endian::little, "raw dumps assume a little-endian host");

void write_raw(const std::string &path, const Image &img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw LoadError("cannot open " + path + " for writing");
    }
    out << "PD\n" << img.width << ' ' << img.height << '\n';
    out.write(reinterpret_cast<const char *>(img.data.data()),
              static_cast<std::streamsize>(img.data.size() * sizeof(double)));
}

Image read_raw(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw LoadError("cannot open " + path);
    }
    std::string magic;
    int w = 0, h = 0;
    if (!(in >> magic >> w >> h) || magic != "PD" || w <= 0 || h <= 0) {
        throw LoadError(path + ": not a raw float dump");
    }
    in.get();
    Image img(w, h);
    in.read(reinterpret_cast<char *>(img.data.data()), static_cast<std::streamsize>(img.data.size() * sizeof(double)));
    if (in.gcount() != static_cast<std::streamsize>(img.data.size() * sizeof(double))) {
        throw LoadError(path + ": truncated raw float dump");
    }
    return img;
}

} // namespace rigsplat
