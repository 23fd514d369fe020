#include <algorithm>
#include <cmath>

#include "wseg/imaging.hpp"
#include "wseg/rng.hpp"

namespace wseg {
namespace {

struct CropRect {
    int x0, y0, w, h;
};

CropRect clamped_rect(const BBox& box, int margin, int width, int height) {
    const int x0 = std::max(0, box.x_min - margin);
    const int y0 = std::max(0, box.y_min - margin);
    const int x1 = std::min(width - 1, box.x_max + margin);
    const int y1 = std::min(height - 1, box.y_max + margin);
    return {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

// Shared half-pixel bilinear sampling for one channel plane of u8 data.
double sample_bilinear(const std::uint8_t* data, int width, int height, int stride, int channels,
                       int ch, double x, double y) {
    x = std::min(std::max(x, 0.0), static_cast<double>(width - 1));
    y = std::min(std::max(y, 0.0), static_cast<double>(height - 1));
    const int x0 = static_cast<int>(x), y0 = static_cast<int>(y);
    const int x1 = std::min(x0 + 1, width - 1), y1 = std::min(y0 + 1, height - 1);
    const double fx = x - x0, fy = y - y0;
    auto px = [&](int xx, int yy) {
        return static_cast<double>(data[(static_cast<std::size_t>(yy) * stride + xx) * channels + ch]);
    };
    const double top = px(x0, y0) * (1.0 - fx) + px(x1, y0) * fx;
    const double bot = px(x0, y1) * (1.0 - fx) + px(x1, y1) * fx;
    return top * (1.0 - fy) + bot * fy;
}

std::uint8_t round_u8(double v) {
    return static_cast<std::uint8_t>(std::min(255.0, std::max(0.0, std::floor(v + 0.5))));
}

}  // namespace

void validate_bbox(const BBox& box, int image_width, int image_height) {
    if (box.x_min < 0 || box.y_min < 0 || box.x_min > box.x_max || box.y_min > box.y_max ||
        box.x_max >= image_width || box.y_max >= image_height) {
        throw ArgumentError("invalid bbox (" + std::to_string(box.x_min) + "," +
                            std::to_string(box.y_min) + "," + std::to_string(box.x_max) + "," +
                            std::to_string(box.y_max) + ") for " + std::to_string(image_width) +
                            "x" + std::to_string(image_height) + " image");
    }
}

ImageRGB crop_bbox(const ImageRGB& image, const BBox& box, int margin) {
    validate_bbox(box, image.width, image.height);
    const auto r = clamped_rect(box, margin, image.width, image.height);
    ImageRGB out(r.w, r.h);
    for (int y = 0; y < r.h; ++y) {
        std::copy_n(image.at(r.x0, r.y0 + y), static_cast<std::size_t>(r.w) * 3, out.at(0, y));
    }
    return out;
}

BinaryMask crop_bbox(const BinaryMask& mask, const BBox& box, int margin) {
    validate_bbox(box, mask.width, mask.height);
    const auto r = clamped_rect(box, margin, mask.width, mask.height);
    BinaryMask out(r.w, r.h);
    for (int y = 0; y < r.h; ++y) {
        for (int x = 0; x < r.w; ++x) out.at(x, y) = mask.at(r.x0 + x, r.y0 + y);
    }
    return out;
}

ImageRGB resize_bilinear(const ImageRGB& image, int new_w, int new_h) {
    if (new_w < 1 || new_h < 1) throw ArgumentError("resize_bilinear: target dims must be >= 1");
    ImageRGB out(new_w, new_h);
    const double sx = static_cast<double>(image.width) / new_w;
    const double sy = static_cast<double>(image.height) / new_h;
    for (int y = 0; y < new_h; ++y) {
        for (int x = 0; x < new_w; ++x) {
            const double src_x = (x + 0.5) * sx - 0.5;
            const double src_y = (y + 0.5) * sy - 0.5;
            for (int c = 0; c < 3; ++c) {
                out.at(x, y)[c] = round_u8(sample_bilinear(image.pixels.data(), image.width,
                                                           image.height, image.width, 3, c, src_x,
                                                           src_y));
            }
        }
    }
    return out;
}

BinaryMask resize_nearest(const BinaryMask& mask, int new_w, int new_h) {
    if (new_w < 1 || new_h < 1) throw ArgumentError("resize_nearest: target dims must be >= 1");
    BinaryMask out(new_w, new_h);
    const double sx = static_cast<double>(mask.width) / new_w;
    const double sy = static_cast<double>(mask.height) / new_h;
    for (int y = 0; y < new_h; ++y) {
        const int src_y = std::min(mask.height - 1,
                                   std::max(0, static_cast<int>(std::floor((y + 0.5) * sy))));
        for (int x = 0; x < new_w; ++x) {
            const int src_x = std::min(mask.width - 1,
                                       std::max(0, static_cast<int>(std::floor((x + 0.5) * sx))));
            out.at(x, y) = mask.at(src_x, src_y);
        }
    }
    return out;
}

namespace {

// Downscale-to-fit factors shared by both pad overloads.
void fit_dims(int w, int h, int target, int& new_w, int& new_h) {
    if (w <= target && h <= target) {
        new_w = w;
        new_h = h;
        return;
    }
    const double scale = static_cast<double>(target) / std::max(w, h);
    new_w = std::max(1, static_cast<int>(std::lround(w * scale)));
    new_h = std::max(1, static_cast<int>(std::lround(h * scale)));
}

}  // namespace

ImageRGB pad_to_square(const ImageRGB& patch, int target, PadPlacement* placement) {
    if (target < 1) throw ArgumentError("pad_to_square: target must be >= 1");
    int nw, nh;
    fit_dims(patch.width, patch.height, target, nw, nh);
    const ImageRGB& fitted =
        (nw == patch.width && nh == patch.height) ? patch : resize_bilinear(patch, nw, nh);
    ImageRGB out(target, target);
    const int ox = (target - nw) / 2, oy = (target - nh) / 2;
    for (int y = 0; y < nh; ++y) {
        std::copy_n(fitted.at(0, y), static_cast<std::size_t>(nw) * 3, out.at(ox, oy + y));
    }
    if (placement) *placement = {ox, oy, nw, nh};
    return out;
}

BinaryMask pad_to_square(const BinaryMask& patch, int target, PadPlacement* placement) {
    if (target < 1) throw ArgumentError("pad_to_square: target must be >= 1");
    int nw, nh;
    fit_dims(patch.width, patch.height, target, nw, nh);
    const BinaryMask& fitted =
        (nw == patch.width && nh == patch.height) ? patch : resize_nearest(patch, nw, nh);
    BinaryMask out(target, target);
    const int ox = (target - nw) / 2, oy = (target - nh) / 2;
    for (int y = 0; y < nh; ++y) {
        for (int x = 0; x < nw; ++x) out.at(ox + x, oy + y) = fitted.at(x, y);
    }
    if (placement) *placement = {ox, oy, nw, nh};
    return out;
}

Tensor normalize(const ImageRGB& image) {
    Tensor t({1, 3, image.height, image.width});
    const std::size_t plane = static_cast<std::size_t>(image.width) * image.height;
    for (std::size_t i = 0; i < plane; ++i) {
        for (int c = 0; c < 3; ++c) {
            t.data[c * plane + i] = static_cast<float>(image.pixels[i * 3 + c]) / 127.5f - 1.0f;
        }
    }
    return t;
}

BinaryMask threshold_mask(const GrayImage& gray, int threshold) {
    BinaryMask mask(gray.width, gray.height);
    for (std::size_t i = 0; i < gray.pixels.size(); ++i) {
        mask.pixels[i] = gray.pixels[i] > threshold ? 1 : 0;
    }
    return mask;
}

std::uint8_t quantize_probability(float p) {
    const long v = std::lround(static_cast<double>(p) * 255.0);
    return static_cast<std::uint8_t>(std::min(255L, std::max(0L, v)));
}

std::pair<ImageRGB, BinaryMask> augment(const ImageRGB& image, const BinaryMask& mask,
                                        const AugmentSpec& spec) {
    if (image.width != mask.width || image.height != mask.height) {
        throw DimensionError("augment: image and mask dims differ");
    }
    for (double p : {spec.hflip_p, spec.vflip_p, spec.rotate_p, spec.brightness_p}) {
        if (p < 0.0 || p > 1.0) throw ArgumentError("augment: probabilities must be in [0, 1]");
    }
    if (spec.rotate_degrees < 0.0 || spec.rotate_degrees > 45.0) {
        throw ArgumentError("augment: rotation degrees must be in [0, 45]");
    }
    Rng rng(spec.seed);
    ImageRGB img = image;
    BinaryMask msk = mask;
    const int w = img.width, h = img.height;

    if (spec.hflip && rng.bernoulli(spec.hflip_p)) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w / 2; ++x) {
                for (int c = 0; c < 3; ++c) std::swap(img.at(x, y)[c], img.at(w - 1 - x, y)[c]);
                std::swap(msk.at(x, y), msk.at(w - 1 - x, y));
            }
        }
    }
    if (spec.vflip && rng.bernoulli(spec.vflip_p)) {
        for (int y = 0; y < h / 2; ++y) {
            for (int x = 0; x < w; ++x) {
                for (int c = 0; c < 3; ++c) std::swap(img.at(x, y)[c], img.at(x, h - 1 - y)[c]);
                std::swap(msk.at(x, y), msk.at(x, h - 1 - y));
            }
        }
    }
    if (spec.rotate && rng.bernoulli(spec.rotate_p)) {
        const double deg = rng.uniform(-spec.rotate_degrees, spec.rotate_degrees);
        const double rad = deg * 3.14159265358979323846 / 180.0;
        const double cs = std::cos(rad), sn = std::sin(rad);
        const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
        ImageRGB rimg(w, h);
        BinaryMask rmsk(w, h);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                // inverse rotation: output pixel pulls from source location
                const double dx = x - cx, dy = y - cy;
                const double sx = cs * dx + sn * dy + cx;
                const double sy = -sn * dx + cs * dy + cy;
                if (sx < -0.5 || sy < -0.5 || sx > w - 0.5 || sy > h - 0.5) continue;
                for (int c = 0; c < 3; ++c) {
                    rimg.at(x, y)[c] = round_u8(
                        sample_bilinear(img.pixels.data(), w, h, w, 3, c, sx, sy));
                }
                const int nx = std::min(w - 1, std::max(0, static_cast<int>(std::lround(sx))));
                const int ny = std::min(h - 1, std::max(0, static_cast<int>(std::lround(sy))));
                rmsk.at(x, y) = msk.at(nx, ny);
            }
        }
        img = std::move(rimg);
        msk = std::move(rmsk);
    }
    if (spec.brightness && rng.bernoulli(spec.brightness_p)) {
        const double f = 1.0 + rng.uniform(-spec.brightness_fraction, spec.brightness_fraction);
        for (auto& v : img.pixels) v = round_u8(v * f);
    }
    return {std::move(img), std::move(msk)};
}

std::optional<BBox> mask_to_bbox(const BinaryMask& mask, int margin) {
    int x0 = mask.width, y0 = mask.height, x1 = -1, y1 = -1;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (!mask.at(x, y)) continue;
            x0 = std::min(x0, x);
            y0 = std::min(y0, y);
            x1 = std::max(x1, x);
            y1 = std::max(y1, y);
        }
    }
    if (x1 < 0) return std::nullopt;
    BBox box{std::max(0, x0 - margin), std::max(0, y0 - margin),
             std::min(mask.width - 1, x1 + margin), std::min(mask.height - 1, y1 + margin)};
    return box;
}

ImageRGB overlay_boundary(const ImageRGB& image, const BinaryMask& mask) {
    ImageRGB out = image;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (!mask.at(x, y)) continue;
            const bool edge = x == 0 || x == mask.width - 1 || y == 0 || y == mask.height - 1 ||
                              !mask.at(x - 1, y) || !mask.at(x + 1, y) || !mask.at(x, y - 1) ||
                              !mask.at(x, y + 1);
            if (edge) {
                auto* p = out.at(x, y);
                p[0] = 0;
                p[1] = 255;
                p[2] = 0;
            }
        }
    }
    return out;
}

}  // namespace wseg
