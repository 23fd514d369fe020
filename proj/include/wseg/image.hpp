#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "wseg/error.hpp"

namespace wseg {

struct ImageRGB {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // row-major RGB triples

    ImageRGB() = default;
    ImageRGB(int w, int h)
        : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}

    std::uint8_t* at(int x, int y) {
        return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3;
    }
    const std::uint8_t* at(int x, int y) const {
        return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3;
    }
};

struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    GrayImage() = default;
    GrayImage(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, 0) {}

    std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

// Strictly 0/1 per pixel.
struct BinaryMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    BinaryMask() = default;
    BinaryMask(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, 0) {}

    std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }

    std::size_t foreground_count() const {
        std::size_t n = 0;
        for (auto v : pixels) n += v;
        return n;
    }
};

// Codec: PNG (8-bit gray/RGB, non-interlaced) and binary PPM (P6) / PGM (P5).
// Decoding sniffs the format from the file content; encoding picks it from the
// file extension (.png, .ppm, .pgm). Round trips are lossless.
ImageRGB decode_image(const std::filesystem::path& path);
void encode_image(const ImageRGB& image, const std::filesystem::path& path);

GrayImage decode_gray(const std::filesystem::path& path);
void encode_gray(const GrayImage& image, const std::filesystem::path& path);

// In-memory PNG/PPM encoders and decoders, exposed for fixtures.
std::vector<std::uint8_t> encode_png_rgb(const ImageRGB& image);
std::vector<std::uint8_t> encode_png_gray(const GrayImage& image);

GrayImage gray_from_mask(const BinaryMask& mask);  // {0,1} -> {0,255}
GrayImage gray_from_rgb(const ImageRGB& image);    // Rec.601 luma

}  // namespace wseg
