#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "wseg/rng.hpp"
#include "wseg/synthgen.hpp"

namespace wseg {
namespace {

struct Ellipse {
    double cx, cy, a, b, cos_t, sin_t;

    bool contains(double x, double y) const {
        const double dx = x - cx, dy = y - cy;
        const double u = cos_t * dx + sin_t * dy;
        const double v = -sin_t * dx + cos_t * dy;
        return (u * u) / (a * a) + (v * v) / (b * b) <= 1.0;
    }
};

std::uint8_t clamp_u8(double v) {
    const long r = std::lround(v);
    return static_cast<std::uint8_t>(std::min(255L, std::max(0L, r)));
}

void paint_disc(ImageRGB& img, double cx, double cy, double r, const std::array<int, 3>& color,
                Rng& rng, double noise) {
    const int x0 = std::max(0, static_cast<int>(cx - r - 1));
    const int x1 = std::min(img.width - 1, static_cast<int>(cx + r + 1));
    const int y0 = std::max(0, static_cast<int>(cy - r - 1));
    const int y1 = std::min(img.height - 1, static_cast<int>(cy + r + 1));
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            const double dx = x - cx, dy = y - cy;
            if (dx * dx + dy * dy > r * r) continue;
            auto* p = img.at(x, y);
            for (int c = 0; c < 3; ++c) {
                p[c] = clamp_u8(color[static_cast<std::size_t>(c)] + rng.normal() * noise);
            }
        }
    }
}

}  // namespace

void validate_spec(const SynthSpec& spec) {
    if (spec.image_size < 16) throw ArgumentError("synth: image_size must be >= 16");
    if (spec.min_blobs < 1 || spec.max_blobs < spec.min_blobs) {
        throw ArgumentError("synth: blob count range is degenerate");
    }
    if (spec.min_axis_frac <= 0.0 || spec.max_axis_frac <= spec.min_axis_frac ||
        spec.max_axis_frac > 0.45) {
        throw ArgumentError("synth: ellipse axis range is degenerate");
    }
    if (spec.hole_probability < 0.0 || spec.hole_probability > 1.0 ||
        spec.speck_probability < 0.0 || spec.speck_probability > 1.0) {
        throw ArgumentError("synth: probabilities must be in [0, 1]");
    }
}

std::pair<ImageRGB, BinaryMask> generate_sample(const SynthSpec& spec, std::uint64_t index) {
    validate_spec(spec);
    Rng rng(hash_combine(spec.seed, index + 1));
    const int size = spec.image_size;

    const int blob_count = rng.uniform_int(spec.min_blobs, spec.max_blobs);
    const double max_semi_axis = (size - 1) / 2.0 - 3.0;  // keeps blobs fully inside
    std::vector<Ellipse> blobs;
    for (int i = 0; i < blob_count; ++i) {
        double a = std::min(size * rng.uniform(spec.min_axis_frac, spec.max_axis_frac),
                            max_semi_axis);
        double b = std::min(size * rng.uniform(spec.min_axis_frac, spec.max_axis_frac),
                            max_semi_axis);
        const double margin = std::max(a, b) + 2.0;
        const double theta = rng.uniform(0.0, 3.14159265358979323846);
        const double cx = rng.uniform(margin, size - 1 - margin);
        const double cy = rng.uniform(margin, size - 1 - margin);
        blobs.push_back({cx, cy, a, b, std::cos(theta), std::sin(theta)});
    }

    BinaryMask mask(size, size);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            for (const auto& e : blobs) {
                if (e.contains(x, y)) {
                    mask.at(x, y) = 1;
                    break;
                }
            }
        }
    }
    const std::size_t foreground = mask.foreground_count();

    // Mild per-sample illumination gradient.
    const double gx = rng.uniform(-0.12, 0.12);
    const double gy = rng.uniform(-0.12, 0.12);

    ImageRGB img(size, size);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const auto& base = mask.at(x, y) ? spec.wound_color : spec.skin_color;
            const double light = 1.0 + gx * (static_cast<double>(x) / size - 0.5) +
                                 gy * (static_cast<double>(y) / size - 0.5);
            auto* p = img.at(x, y);
            for (int c = 0; c < 3; ++c) {
                p[c] = clamp_u8(base[static_cast<std::size_t>(c)] * light +
                                rng.normal() * spec.noise_amplitude);
            }
        }
    }

    // Skin-toned pocket inside the largest blob. The ground-truth mask keeps
    // it as wound; only the appearance changes.
    if (foreground > 0 && rng.bernoulli(spec.hole_probability)) {
        const auto& host = *std::max_element(
            blobs.begin(), blobs.end(),
            [](const Ellipse& l, const Ellipse& r) { return l.a * l.b < r.a * r.b; });
        const double cap = std::min(std::sqrt(0.06 * static_cast<double>(foreground) /
                                              3.14159265358979323846),
                                    0.45 * std::min(host.a, host.b));
        if (cap >= 1.0) {
            paint_disc(img, host.cx, host.cy, cap, spec.skin_color, rng, spec.noise_amplitude);
        }
    }

    // Wound-toned speck in the background, clear of every blob.
    if (foreground > 0 && rng.bernoulli(spec.speck_probability)) {
        const double area =
            0.7 * std::max(0.05 * static_cast<double>(foreground), 16.0);
        const double r = std::max(1.0, std::sqrt(area / 3.14159265358979323846));
        for (int attempt = 0; r + 1.0 < size - 2.0 - r && attempt < 50; ++attempt) {
            const double cx = rng.uniform(r + 1.0, size - 2.0 - r);
            const double cy = rng.uniform(r + 1.0, size - 2.0 - r);
            bool clear = true;
            for (const auto& e : blobs) {
                const double dx = cx - e.cx, dy = cy - e.cy;
                const double dist = std::sqrt(dx * dx + dy * dy);
                if (dist < std::max(e.a, e.b) + r + 3.0) {
                    clear = false;
                    break;
                }
            }
            if (clear) {
                paint_disc(img, cx, cy, r, spec.wound_color, rng, spec.noise_amplitude);
                break;
            }
        }
    }

    return {std::move(img), std::move(mask)};
}

std::string split_for_index(const SynthSpec& spec, std::uint64_t index) {
    const std::uint64_t h = splitmix64(hash_combine(spec.seed, index + 1) ^ 0x5eedULL);
    return (h % 100) < 20 ? "val" : "train";
}

std::vector<SynthManifestRow> generate_dataset(const SynthSpec& spec, int n,
                                               const std::filesystem::path& out_dir) {
    validate_spec(spec);
    if (n < 1) throw ArgumentError("synth: sample count must be >= 1");
    std::error_code ec;
    std::filesystem::create_directories(out_dir / "images", ec);
    std::filesystem::create_directories(out_dir / "masks", ec);
    if (!std::filesystem::is_directory(out_dir / "images") ||
        !std::filesystem::is_directory(out_dir / "masks")) {
        throw IoError("cannot create output directories under " + out_dir.string());
    }

    std::vector<SynthManifestRow> rows;
    rows.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        auto [img, mask] = generate_sample(spec, static_cast<std::uint64_t>(i));
        std::ostringstream name;
        name << std::setw(4) << std::setfill('0') << i << ".png";
        const std::string image_rel = "images/" + name.str();
        const std::string mask_rel = "masks/" + name.str();
        encode_image(img, out_dir / image_rel);
        encode_gray(gray_from_mask(mask), out_dir / mask_rel);
        rows.push_back({image_rel, mask_rel, split_for_index(spec, static_cast<std::uint64_t>(i))});
    }

    std::ofstream manifest(out_dir / "manifest.csv");
    if (!manifest) throw IoError("cannot write manifest under " + out_dir.string());
    manifest << "image,mask,split\n";
    for (const auto& row : rows) {
        manifest << row.image << "," << row.mask << "," << row.split << "\n";
    }
    return rows;
}

}  // namespace wseg
