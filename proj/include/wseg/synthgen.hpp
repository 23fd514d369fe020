#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "wseg/image.hpp"

namespace wseg {

// Synthetic wound-on-skin sample generator. Wounds are unions of filled
// ellipses; images carry noise, an illumination gradient, optional skin-toned
// pockets inside the wound and optional wound-toned specks in the background.
// Pockets and specks are sized below the post-processing defaults so the
// cleanup stages have exactly the intended effect on imperfect predictions.
struct SynthSpec {
    int image_size = 64;
    int min_blobs = 1;
    int max_blobs = 3;
    double min_axis_frac = 0.10;  // ellipse semi-axes as fractions of image size
    double max_axis_frac = 0.25;
    std::array<int, 3> wound_color = {200, 60, 70};
    std::array<int, 3> skin_color = {175, 145, 125};
    double noise_amplitude = 10.0;
    double hole_probability = 0.35;
    double speck_probability = 0.35;
    std::uint64_t seed = 42;
};

void validate_spec(const SynthSpec& spec);

std::pair<ImageRGB, BinaryMask> generate_sample(const SynthSpec& spec, std::uint64_t index);

// Stable 80/20 split on (seed, index); regenerating with a larger n keeps
// earlier assignments.
std::string split_for_index(const SynthSpec& spec, std::uint64_t index);

struct SynthManifestRow {
    std::string image;
    std::string mask;
    std::string split;
};

// Writes images/NNNN.png, masks/NNNN.png and manifest.csv under out_dir.
std::vector<SynthManifestRow> generate_dataset(const SynthSpec& spec, int n,
                                               const std::filesystem::path& out_dir);

}  // namespace wseg
