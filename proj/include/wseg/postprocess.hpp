#pragma once

#include <cstdint>
#include <vector>

#include "wseg/image.hpp"
#include "wseg/tensor.hpp"

namespace wseg {

// Dense connected-component labeling result: labels 1..K in first-encounter
// scan order, 0 for background.
struct LabelMap {
    int width = 0;
    int height = 0;
    std::vector<std::int32_t> labels;
    std::vector<std::size_t> component_sizes;  // component_sizes[k-1] = size of label k

    int component_count() const { return static_cast<int>(component_sizes.size()); }
    std::int32_t at(int x, int y) const {
        return labels[static_cast<std::size_t>(y) * width + x];
    }
};

struct PostprocessConfig {
    int threshold = 127;          // foreground iff gray value > threshold
    int connectivity = 8;         // foreground connectivity; holes use the dual
    double hole_fraction = 0.10;  // hole filled when size < hole_fraction * foreground
    double noise_fraction = 0.05; // region removed when size < max(noise_fraction * fg, min_absolute)
    std::size_t min_absolute = 16;
};

// Two-pass union-find labeling under 4- or 8-connectivity.
LabelMap label_components(const BinaryMask& mask, int connectivity = 8);

// Fills enclosed background components smaller than hole_fraction of the
// foreground. Background components touching the image border are never holes.
BinaryMask fill_holes(const BinaryMask& mask, const PostprocessConfig& config = {});

// Removes foreground components smaller than the adaptive threshold
// max(noise_fraction * foreground pixels, min_absolute).
BinaryMask remove_small_regions(const BinaryMask& mask, const PostprocessConfig& config = {});

// Full chain on a single-channel probability map in [0,1]: quantize to 0..255,
// threshold, fill holes, then remove small regions.
BinaryMask postprocess(const Tensor& prob_map, const PostprocessConfig& config = {});

// The threshold stage alone (raw mask without the CCL stages).
BinaryMask threshold_probability_map(const Tensor& prob_map, int threshold = 127);

}  // namespace wseg
