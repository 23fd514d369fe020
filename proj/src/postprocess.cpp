#include <numeric>

#include "wseg/imaging.hpp"
#include "wseg/postprocess.hpp"

namespace wseg {
namespace {

struct UnionFind {
    std::vector<std::int32_t> parent;

    std::int32_t make_set() {
        parent.push_back(static_cast<std::int32_t>(parent.size()));
        return parent.back();
    }
    std::int32_t find(std::int32_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];  // path halving
            x = parent[x];
        }
        return x;
    }
    void unite(std::int32_t a, std::int32_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

// Labels the pixels equal to `value`; everything else is background.
LabelMap label_value(const std::uint8_t* pixels, int width, int height, std::uint8_t value,
                     int connectivity) {
    LabelMap map;
    map.width = width;
    map.height = height;
    map.labels.assign(static_cast<std::size_t>(width) * height, 0);

    UnionFind uf;
    uf.make_set();  // provisional label 0 = background, never united

    // First pass: provisional labels from the already-scanned neighborhood.
    for (int y = 0; y < height; ++y) {
        const std::size_t row = static_cast<std::size_t>(y) * width;
        for (int x = 0; x < width; ++x) {
            if (pixels[row + x] != value) continue;
            std::int32_t neighbors[4];
            int n = 0;
            if (x > 0 && map.labels[row + x - 1]) neighbors[n++] = map.labels[row + x - 1];
            if (y > 0) {
                const std::size_t up = row - width;
                if (map.labels[up + x]) neighbors[n++] = map.labels[up + x];
                if (connectivity == 8) {
                    if (x > 0 && map.labels[up + x - 1]) neighbors[n++] = map.labels[up + x - 1];
                    if (x + 1 < width && map.labels[up + x + 1]) {
                        neighbors[n++] = map.labels[up + x + 1];
                    }
                }
            }
            if (n == 0) {
                map.labels[row + x] = uf.make_set();
            } else {
                std::int32_t lbl = neighbors[0];
                for (int i = 1; i < n; ++i) lbl = std::min(lbl, neighbors[i]);
                map.labels[row + x] = lbl;
                for (int i = 0; i < n; ++i) uf.unite(lbl, neighbors[i]);
            }
        }
    }

    // Second pass: resolve to dense labels in first-encounter scan order.
    std::vector<std::int32_t> dense(uf.parent.size(), 0);
    std::int32_t next = 0;
    for (auto& lbl : map.labels) {
        if (!lbl) continue;
        const std::int32_t root = uf.find(lbl);
        if (!dense[root]) dense[root] = ++next;
        lbl = dense[root];
    }
    map.component_sizes.assign(static_cast<std::size_t>(next), 0);
    for (auto lbl : map.labels) {
        if (lbl) ++map.component_sizes[static_cast<std::size_t>(lbl - 1)];
    }
    return map;
}

void check_connectivity(int connectivity) {
    if (connectivity != 4 && connectivity != 8) {
        throw ArgumentError("connectivity must be 4 or 8, got " + std::to_string(connectivity));
    }
}

void check_config(const PostprocessConfig& config) {
    check_connectivity(config.connectivity);
    if (config.threshold < 0 || config.threshold > 255) {
        throw ArgumentError("postprocess: threshold must be in [0, 255]");
    }
    if (config.hole_fraction <= 0.0 || config.hole_fraction >= 1.0 ||
        config.noise_fraction <= 0.0 || config.noise_fraction >= 1.0) {
        throw ArgumentError("postprocess: fractions must be in (0, 1)");
    }
}

}  // namespace

LabelMap label_components(const BinaryMask& mask, int connectivity) {
    check_connectivity(connectivity);
    return label_value(mask.pixels.data(), mask.width, mask.height, 1, connectivity);
}

BinaryMask fill_holes(const BinaryMask& mask, const PostprocessConfig& config) {
    check_config(config);
    const std::size_t foreground = mask.foreground_count();
    if (foreground == 0) return mask;

    // Background components under the dual connectivity.
    const int bg_connectivity = config.connectivity == 8 ? 4 : 8;
    const LabelMap bg = label_value(mask.pixels.data(), mask.width, mask.height, 0,
                                    bg_connectivity);

    std::vector<bool> touches_border(bg.component_sizes.size() + 1, false);
    for (int x = 0; x < mask.width; ++x) {
        if (auto l = bg.at(x, 0)) touches_border[static_cast<std::size_t>(l)] = true;
        if (auto l = bg.at(x, mask.height - 1)) touches_border[static_cast<std::size_t>(l)] = true;
    }
    for (int y = 0; y < mask.height; ++y) {
        if (auto l = bg.at(0, y)) touches_border[static_cast<std::size_t>(l)] = true;
        if (auto l = bg.at(mask.width - 1, y)) touches_border[static_cast<std::size_t>(l)] = true;
    }

    const double limit = config.hole_fraction * static_cast<double>(foreground);
    BinaryMask out = mask;
    for (std::size_t i = 0; i < out.pixels.size(); ++i) {
        const std::int32_t l = bg.labels[i];
        if (!l || touches_border[static_cast<std::size_t>(l)]) continue;
        if (static_cast<double>(bg.component_sizes[static_cast<std::size_t>(l - 1)]) < limit) {
            out.pixels[i] = 1;
        }
    }
    return out;
}

BinaryMask remove_small_regions(const BinaryMask& mask, const PostprocessConfig& config) {
    check_config(config);
    const std::size_t foreground = mask.foreground_count();
    if (foreground == 0) return mask;

    const LabelMap fg = label_components(mask, config.connectivity);
    const double limit = std::max(config.noise_fraction * static_cast<double>(foreground),
                                  static_cast<double>(config.min_absolute));
    BinaryMask out = mask;
    for (std::size_t i = 0; i < out.pixels.size(); ++i) {
        const std::int32_t l = fg.labels[i];
        if (l && static_cast<double>(fg.component_sizes[static_cast<std::size_t>(l - 1)]) < limit) {
            out.pixels[i] = 0;
        }
    }
    return out;
}

BinaryMask threshold_probability_map(const Tensor& prob_map, int threshold) {
    int h, w;
    if (prob_map.rank() == 2) {
        h = prob_map.dim(0);
        w = prob_map.dim(1);
    } else if (prob_map.rank() == 4 && prob_map.dim(0) == 1 && prob_map.dim(1) == 1) {
        h = prob_map.dim(2);
        w = prob_map.dim(3);
    } else {
        throw DimensionError("probability map must be single-channel, got " +
                             shape_str(prob_map.shape));
    }
    BinaryMask mask(w, h);
    for (std::size_t i = 0; i < mask.pixels.size(); ++i) {
        mask.pixels[i] = quantize_probability(prob_map.data[i]) > threshold ? 1 : 0;
    }
    return mask;
}

BinaryMask postprocess(const Tensor& prob_map, const PostprocessConfig& config) {
    BinaryMask mask = threshold_probability_map(prob_map, config.threshold);
    mask = fill_holes(mask, config);
    return remove_small_regions(mask, config);
}

}  // namespace wseg
