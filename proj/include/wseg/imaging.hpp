#pragma once

#include <cstdint>
#include <optional>
#include <utility>

#include "wseg/image.hpp"
#include "wseg/tensor.hpp"

namespace wseg {

// Axis-aligned inclusive rectangle in pixel coordinates.
struct BBox {
    int x_min = 0;
    int y_min = 0;
    int x_max = 0;
    int y_max = 0;

    int width() const { return x_max - x_min + 1; }
    int height() const { return y_max - y_min + 1; }
};

void validate_bbox(const BBox& box, int image_width, int image_height);

struct AugmentSpec {
    bool hflip = true;
    double hflip_p = 0.5;
    bool vflip = true;
    double vflip_p = 0.5;
    bool rotate = true;
    double rotate_p = 0.5;
    double rotate_degrees = 15.0;  // angle drawn uniformly from [-d, +d]
    bool brightness = true;
    double brightness_p = 0.5;
    double brightness_fraction = 0.10;  // factor drawn from [1-f, 1+f]
    std::uint64_t seed = 0;
};

// Sub-rectangle expanded by margin and clamped to the image bounds.
ImageRGB crop_bbox(const ImageRGB& image, const BBox& box, int margin = 0);
BinaryMask crop_bbox(const BinaryMask& mask, const BBox& box, int margin = 0);

// Centers a patch on a target x target black canvas. Patches larger than the
// target are first scaled down to fit (bilinear for images, nearest for
// masks). offset/resized describe the placement for invertibility.
struct PadPlacement {
    int offset_x = 0;
    int offset_y = 0;
    int resized_w = 0;  // patch size actually placed (after any downscale)
    int resized_h = 0;
};

ImageRGB pad_to_square(const ImageRGB& patch, int target, PadPlacement* placement = nullptr);
BinaryMask pad_to_square(const BinaryMask& patch, int target, PadPlacement* placement = nullptr);

ImageRGB resize_bilinear(const ImageRGB& image, int new_w, int new_h);
BinaryMask resize_nearest(const BinaryMask& mask, int new_w, int new_h);

// 1x3xHxW tensor with x/127.5 - 1 per channel value.
Tensor normalize(const ImageRGB& image);

// Foreground iff pixel value > threshold.
BinaryMask threshold_mask(const GrayImage& gray, int threshold = 127);

// Quantizes a probability in [0,1] to 0..255 (round half up).
std::uint8_t quantize_probability(float p);

// Identical geometric transform on image and mask; deterministic per seed.
std::pair<ImageRGB, BinaryMask> augment(const ImageRGB& image, const BinaryMask& mask,
                                        const AugmentSpec& spec);

// Tight foreground bounding rectangle expanded by margin; empty mask -> none.
std::optional<BBox> mask_to_bbox(const BinaryMask& mask, int margin = 0);

// Traces the mask boundary onto a copy of the image (for inspection output).
ImageRGB overlay_boundary(const ImageRGB& image, const BinaryMask& mask);

}  // namespace wseg
